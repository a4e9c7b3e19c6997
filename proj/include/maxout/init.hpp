#pragma once

// Parameter samplers (ReLU-He, maxout-He, sphere, many-regions), the
// Steinwart-style shift, zero-bias mode, and deterministic constructions with
// prescribed region counts.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "maxout/bounds.hpp"
#include "maxout/error.hpp"
#include "maxout/net.hpp"
#include "maxout/rng.hpp"

namespace maxout {

enum class Scheme { ReluHe, MaxoutHe, Sphere, ManyRegions, Construction };
enum class ShiftMode { Off, Cube, Data };

struct InitSpec {
  Scheme scheme = Scheme::MaxoutHe;
  DistShape dist = DistShape::Normal;
  bool zero_bias = false;
  ShiftMode shift = ShiftMode::Off;
  std::vector<Eigen::VectorXd> shift_points;  // inputs for ShiftMode::Data
  double noise = 0.0;                         // ManyRegions perturbation std
  std::uint64_t seed = 0;
};

inline const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::ReluHe: return "relu-he";
    case Scheme::MaxoutHe: return "maxout-he";
    case Scheme::Sphere: return "sphere";
    case Scheme::ManyRegions: return "many-regions";
    case Scheme::Construction: return "construction";
  }
  return "?";
}

inline const char* to_string(DistShape d) { return d == DistShape::Normal ? "normal" : "uniform"; }

inline const char* to_string(ShiftMode m) {
  switch (m) {
    case ShiftMode::Off: return "off";
    case ShiftMode::Cube: return "cube";
    case ShiftMode::Data: return "data";
  }
  return "?";
}

inline Scheme scheme_from_string(const std::string& s) {
  for (Scheme v : {Scheme::ReluHe, Scheme::MaxoutHe, Scheme::Sphere, Scheme::ManyRegions, Scheme::Construction})
    if (s == to_string(v)) return v;
  throw Error(ErrorKind::Config, "unknown init scheme '" + s + "'");
}

inline DistShape dist_from_string(const std::string& s) {
  if (s == "normal") return DistShape::Normal;
  if (s == "uniform") return DistShape::Uniform;
  throw Error(ErrorKind::Config, "unknown dist_shape '" + s + "'");
}

inline ShiftMode shift_from_string(const std::string& s) {
  for (ShiftMode v : {ShiftMode::Off, ShiftMode::Cube, ShiftMode::Data})
    if (s == to_string(v)) return v;
  throw Error(ErrorKind::Config, "unknown steinwart_shift '" + s + "'");
}

inline nlohmann::json init_spec_to_json(const InitSpec& spec) {
  nlohmann::json j{{"scheme", to_string(spec.scheme)},
                   {"dist_shape", to_string(spec.dist)},
                   {"zero_bias", spec.zero_bias},
                   {"steinwart_shift", to_string(spec.shift)},
                   {"noise", spec.noise},
                   {"seed", spec.seed},
                   {"bias_law", "same as weights"}};
  if (spec.shift == ShiftMode::Data) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : spec.shift_points) pts.push_back(std::vector<double>(p.data(), p.data() + p.size()));
    j["shift_points"] = std::move(pts);
  }
  return j;
}

inline InitSpec init_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::Config, "init: expected an object");
  InitSpec spec;
  try {
    if (j.contains("scheme")) spec.scheme = scheme_from_string(j.at("scheme").get<std::string>());
    if (j.contains("dist_shape")) spec.dist = dist_from_string(j.at("dist_shape").get<std::string>());
    if (j.contains("zero_bias")) spec.zero_bias = j.at("zero_bias").get<bool>();
    if (j.contains("steinwart_shift")) spec.shift = shift_from_string(j.at("steinwart_shift").get<std::string>());
    if (j.contains("noise")) spec.noise = j.at("noise").get<double>();
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("shift_points"))
      for (const auto& p : j.at("shift_points")) {
        const auto v = p.get<std::vector<double>>();
        spec.shift_points.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<long>(v.size())));
      }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, std::string("init: ") + e.what());
  }
  if (spec.noise < 0) throw Error(ErrorKind::Config, "init: noise must be non-negative");
  return spec;
}

namespace detail {

// Stream tags keep the draws of different purposes independent.
enum : std::uint64_t { kTagHidden = 1, kTagOutput = 2, kTagShift = 3, kTagUnit = 4, kTagNoise = 5, kTagLayer = 6 };

inline std::uint64_t key(int v) { return static_cast<std::uint64_t>(v); }

// One draw from the zero-mean law with the given std and shape.
inline double draw(Engine& eng, double std, DistShape shape) {
  if (shape == DistShape::Normal) return std::normal_distribution<double>(0.0, std)(eng);
  const double a = std * std::sqrt(3.0);
  return std::uniform_real_distribution<double>(-a, a)(eng);
}

inline double hidden_std(Scheme scheme, int K, int fan_in, DistShape shape) {
  switch (scheme) {
    case Scheme::ReluHe: return relu_he_std(fan_in);
    case Scheme::MaxoutHe:
    case Scheme::ManyRegions: return maxout_he_std(K, fan_in, shape);
    default: return 1.0 / std::sqrt(static_cast<double>(fan_in));
  }
}

inline void sample_output(const Architecture& arch, const InitSpec& spec, Parameters& p) {
  const int fan_in = arch.last_width();
  double std = 1.0 / std::sqrt(static_cast<double>(fan_in));
  if (spec.scheme == Scheme::ReluHe) std = relu_he_std(fan_in);
  if (spec.scheme == Scheme::MaxoutHe) std = maxout_he_std(arch.rank, fan_in, spec.dist);
  for (int i = 0; i < arch.out_dim; ++i) {
    Engine eng = make_stream(spec.seed, {kTagOutput, key(i)});
    for (int j = 0; j < fan_in; ++j) p.out_weights(i, j) = draw(eng, std, spec.dist);
    p.out_biases(i) = draw(eng, std, spec.dist);
  }
}

// Per-feature iid draws for the He schemes and sphere.
inline void sample_feature(const InitSpec& spec, int K, int fan_in, double std, int layer, int unit, int k,
                           MaxoutLayer& out) {
  Engine eng = make_stream(spec.seed, {kTagHidden, key(layer), key(unit), key(k)});
  const long row = static_cast<long>(unit) * K + k;
  if (spec.scheme == Scheme::Sphere) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::VectorXd v(fan_in + 1);
    for (int j = 0; j <= fan_in; ++j) v(j) = nd(eng);
    v /= v.norm();
    out.weights.row(row) = v.head(fan_in).transpose();
    out.biases(row) = std::abs(v(fan_in)) - 1.0 / std::sqrt(static_cast<double>(K) * fan_in);
    return;
  }
  for (int j = 0; j < fan_in; ++j) out.weights(row, j) = draw(eng, std, spec.dist);
  out.biases(row) = draw(eng, std, spec.dist);
}

inline void many_regions_unit(const InitSpec& spec, int K, int fan_in, int layer, int unit, MaxoutLayer& out) {
  Engine eng = make_stream(spec.seed, {kTagUnit, key(layer), key(unit)});
  const double std = maxout_he_std(K, fan_in, K >= 2 && K <= 5 ? DistShape::Normal : DistShape::Uniform);
  std::normal_distribution<double> nd(0.0, std);
  Eigen::VectorXd v(fan_in);
  for (int j = 0; j < fan_in; ++j) v(j) = nd(eng);
  Engine noise = make_stream(spec.seed, {kTagNoise, key(layer), key(unit)});
  std::normal_distribution<double> nn(0.0, 1.0);
  for (int i = 1; i <= K; ++i) {
    const long row = static_cast<long>(unit) * K + (i - 1);
    const double angle = std::numbers::pi * i / K;
    out.weights.row(row) = (v * std::cos(angle)).transpose();
    out.biases(row) = std::sin(angle);
    if (spec.noise > 0) {
      for (int j = 0; j < fan_in; ++j) out.weights(row, j) += spec.noise * nn(noise);
      out.biases(row) += spec.noise * nn(noise);
    }
  }
}

// Shift centre for one unit: uniform in the cube, or a random convex
// combination of the layer inputs.
inline Eigen::VectorXd shift_centre(const InitSpec& spec, int fan_in, int layer, int unit,
                                    const std::vector<Eigen::VectorXd>& layer_inputs) {
  Engine eng = make_stream(spec.seed, {kTagShift, key(layer), key(unit)});
  if (spec.shift == ShiftMode::Cube) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXd c(fan_in);
    for (int j = 0; j < fan_in; ++j) c(j) = u(eng);
    return c;
  }
  // Normalized exponentials give a uniform point of the probability simplex.
  std::exponential_distribution<double> ex(1.0);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(fan_in);
  double total = 0.0;
  for (const auto& x : layer_inputs) {
    const double p = ex(eng);
    c += p * x;
    total += p;
  }
  return c / total;
}

}  // namespace detail

struct SampleDetail {
  Parameters params;
  std::vector<std::vector<Eigen::VectorXd>> shifts;  // [layer][unit], empty when shifting is off
};

/// One layer whose units each have k_i − 1 parallel breakpoint hyperplanes;
/// units with k_i < K are padded with dominated copies of their first feature.
inline MaxoutLayer construct_layer_parallel_weights(int n0, const std::vector<int>& ks, int K, std::uint64_t seed,
                                                    int layer = 0) {
  MaxoutLayer out{Eigen::MatrixXd::Zero(static_cast<long>(ks.size()) * K, n0),
                  Eigen::VectorXd::Zero(static_cast<long>(ks.size()) * K)};
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const int k = ks[i];
    if (k < 1 || k > K) throw Error(ErrorKind::Precondition, "construct_layer_parallel: need 1 <= k_i <= K");
    Engine eng = make_stream(seed, {detail::kTagLayer, detail::key(layer), i});
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::VectorXd v(n0);
    for (int j = 0; j < n0; ++j) v(j) = nd(eng);
    v /= v.norm();
    const double eps = std::uniform_real_distribution<double>(0.0, 1.0)(eng);
    for (int j = 1; j <= K; ++j) {
      const long row = static_cast<long>(i) * K + (j - 1);
      if (j <= k) {
        const double s = static_cast<double>(j) / k;
        out.weights.row(row) = (s * v).transpose();
        out.biases(row) = -(s + eps) * (s + eps);
      } else {
        out.weights.row(row) = out.weights.row(static_cast<long>(i) * K);
        out.biases(row) = out.biases(static_cast<long>(i) * K) - 1.0;
      }
    }
  }
  return out;
}

/// A single-layer network of len(ks) units of rank max(ks) with unit output weights.
inline Network construct_layer_parallel(int n0, const std::vector<int>& ks, std::uint64_t seed) {
  if (ks.empty()) throw Error(ErrorKind::Precondition, "construct_layer_parallel: ks must be non-empty");
  const int K = *std::max_element(ks.begin(), ks.end());
  Architecture arch{n0, {static_cast<int>(ks.size())}, K, 1};
  arch.validate();
  Parameters p = Parameters::zeros(arch);
  p.hidden[0] = construct_layer_parallel_weights(n0, ks, K, seed);
  p.out_weights.setOnes();
  return Network(arch, std::move(p));
}

enum class UnitVariant { Collapse, Generic };

/// A single rank-K unit realizing exactly k regions: k features placed so every
/// one is maximal somewhere, and K − k features that never win on the window.
inline Network construct_unit_rank_k(int n0, int K, int k, UnitVariant variant, std::uint64_t seed) {
  if (k < 1 || k > K) throw Error(ErrorKind::Precondition, "construct_unit_rank_k: need 1 <= k <= K");
  Architecture arch{n0, {1}, K, 1};
  arch.validate();
  Parameters p = Parameters::zeros(arch);
  auto& W = p.hidden[0].weights;
  auto& b = p.hidden[0].biases;
  Engine eng = make_stream(seed, {detail::kTagUnit, 0, 0});
  std::normal_distribution<double> nd(0.0, 1.0);
  // w·x − |w|²/2 is maximal on the Voronoi cell of w, so all k features are active.
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < n0; ++j) W(i, j) = nd(eng);
    b(i) = -0.5 * W.row(i).squaredNorm();
  }
  const Eigen::RowVectorXd centroid = W.topRows(k).colwise().mean();
  const double b_min = b.head(k).minCoeff();
  std::normal_distribution<double> small(0.0, 1e-4);
  for (int i = k; i < K; ++i) {
    if (variant == UnitVariant::Collapse) {
      W.row(i) = W.row(0);
      b(i) = b(0) - 1.0;
    } else {
      for (int j = 0; j < n0; ++j) W(i, j) = centroid(j) + small(eng);
      b(i) = b_min - 1.0 + small(eng);
    }
  }
  p.out_weights(0, 0) = 1.0;
  return Network(arch, std::move(p));
}

/// Samples parameters for `arch`, returning the shift centres alongside.
inline SampleDetail sample_detailed(const Architecture& arch, const InitSpec& spec) {
  arch.validate();
  const int K = arch.rank;
  if (spec.scheme == Scheme::MaxoutHe && spec.dist == DistShape::Normal && (K < 2 || K > 5))
    throw Error(ErrorKind::Config, "maxout-He normal supports K in {2,3,4,5}; use dist_shape uniform for K=" +
                                       std::to_string(K));
  if (spec.shift == ShiftMode::Data) {
    if (spec.shift_points.empty()) throw Error(ErrorKind::Config, "steinwart_shift data: no points supplied");
    for (const auto& x : spec.shift_points)
      if (x.size() != arch.n0) throw Error(ErrorKind::Config, "steinwart_shift data: point dimension mismatch");
  }

  SampleDetail out{Parameters::zeros(arch), {}};
  Parameters& p = out.params;
  std::vector<Eigen::VectorXd> layer_inputs = spec.shift_points;
  for (int l = 0; l < arch.depth(); ++l) {
    const int fan_in = arch.fan_in(l);
    const int width = arch.widths[l];
    MaxoutLayer& layer = p.hidden[l];
    switch (spec.scheme) {
      case Scheme::Construction:
        layer = construct_layer_parallel_weights(fan_in, std::vector<int>(width, K), K, spec.seed, l);
        break;
      case Scheme::ManyRegions:
        for (int u = 0; u < width; ++u) detail::many_regions_unit(spec, K, fan_in, l, u, layer);
        break;
      default: {
        const double std = detail::hidden_std(spec.scheme, K, fan_in, spec.dist);
        for (int u = 0; u < width; ++u)
          for (int k = 0; k < K; ++k) detail::sample_feature(spec, K, fan_in, std, l, u, k, layer);
      }
    }
    if (spec.shift != ShiftMode::Off) {
      out.shifts.emplace_back();
      for (int u = 0; u < width; ++u) {
        Eigen::VectorXd c = detail::shift_centre(spec, fan_in, l, u, layer_inputs);
        auto rows = layer.weights.middleRows(static_cast<long>(u) * K, K);
        layer.biases.segment(static_cast<long>(u) * K, K) += rows * c;
        out.shifts.back().push_back(std::move(c));
      }
      if (spec.shift == ShiftMode::Data) {
        for (auto& x : layer_inputs) {
          Eigen::VectorXd pre = layer.weights * x + layer.biases;
          x = detail::maxout(pre, K, nullptr);
        }
      }
    }
  }
  detail::sample_output(arch, spec, p);
  if (spec.zero_bias) {
    for (auto& layer : p.hidden) layer.biases.setZero();
    p.out_biases.setZero();
  }
  return out;
}

inline Parameters sample(const Architecture& arch, const InitSpec& spec) { return sample_detailed(arch, spec).params; }

inline Network sample_network(const Architecture& arch, const InitSpec& spec) {
  return Network(arch, sample(arch, spec));
}

}  // namespace maxout
