#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <vector>

#include "maxout/maxout.hpp"

namespace testing_support {

using namespace maxout;

// Uniform maxout-He parameters work for every rank.
inline Network random_network(const Architecture& arch, std::uint64_t seed, bool zero_bias = false) {
  InitSpec spec;
  spec.dist = DistShape::Uniform;
  spec.seed = seed;
  spec.zero_bias = zero_bias;
  return Network(arch, sample(arch, spec));
}

inline Eigen::VectorXd random_point(int dim, std::mt19937_64& eng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Eigen::VectorXd x(dim);
  for (int i = 0; i < dim; ++i) x(i) = nd(eng);
  return x;
}

inline Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<long>(v.size()));
  long i = 0;
  for (double d : v) x(i++) = d;
  return x;
}

// One unit with scalar input and the given (slope, intercept) features, identity output.
inline Network line_unit(const std::vector<std::pair<double, double>>& features) {
  Architecture arch{1, {1}, static_cast<int>(features.size()), 1};
  Parameters p = Parameters::zeros(arch);
  for (std::size_t k = 0; k < features.size(); ++k) {
    p.hidden[0].weights(static_cast<long>(k), 0) = features[k].first;
    p.hidden[0].biases(static_cast<long>(k)) = features[k].second;
  }
  p.out_weights(0, 0) = 1.0;
  return Network(arch, p);
}

// Smallest gap between the winning feature and the runner-up over all units.
inline double min_margin(const Network& net, const Eigen::VectorXd& x) {
  double margin = std::numeric_limits<double>::infinity();
  Eigen::VectorXd h = x;
  const int K = net.arch().rank;
  for (const auto& layer : net.params().hidden) {
    const Eigen::VectorXd pre = layer.weights * h + layer.biases;
    Eigen::VectorXd next(pre.size() / K);
    for (long u = 0; u < next.size(); ++u) {
      Eigen::VectorXd seg = pre.segment(u * K, K);
      std::sort(seg.data(), seg.data() + K);
      if (K > 1) margin = std::min(margin, seg(K - 1) - seg(K - 2));
      next(u) = seg(K - 1);
    }
    h = next;
  }
  return margin;
}

}  // namespace testing_support
