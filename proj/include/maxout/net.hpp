#pragma once

// Maxout network architectures, parameters, and the piecewise-linear
// quantities derived from them (outputs, activation patterns, per-region
// affine maps, input gradients, 2D slices).

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "maxout/error.hpp"

namespace maxout {

struct Architecture {
  int n0 = 1;               // input dimension
  std::vector<int> widths;  // hidden widths n1..nL; empty means a bare linear map
  int rank = 1;             // maxout rank K shared by all hidden units
  int out_dim = 1;          // number of linear outputs M

  int depth() const { return static_cast<int>(widths.size()); }

  int total_units() const { return std::accumulate(widths.begin(), widths.end(), 0); }

  /// Input dimension of hidden layer `layer` (0-based).
  int fan_in(int layer) const { return layer == 0 ? n0 : widths[layer - 1]; }

  /// Width feeding the output layer.
  int last_width() const { return widths.empty() ? n0 : widths.back(); }

  void validate() const {
    if (n0 < 1) throw Error(ErrorKind::Shape, "architecture: n0 must be positive");
    if (rank < 1) throw Error(ErrorKind::Shape, "architecture: rank must be >= 1");
    if (out_dim < 1) throw Error(ErrorKind::Shape, "architecture: out_dim must be positive");
    for (std::size_t l = 0; l < widths.size(); ++l)
      if (widths[l] < 1)
        throw Error(ErrorKind::Shape,
                    "architecture: width of layer " + std::to_string(l + 1) + " must be positive");
  }

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// One hidden layer. Row `unit * rank + feature` holds that feature's affine map.
struct MaxoutLayer {
  Eigen::MatrixXd weights;  // (units * rank) x fan_in
  Eigen::VectorXd biases;   // units * rank

  auto feature_weights(int unit, int rank) const { return weights.middleRows(unit * rank, rank); }
  auto feature_biases(int unit, int rank) const { return biases.segment(unit * rank, rank); }
};

struct Parameters {
  std::vector<MaxoutLayer> hidden;
  Eigen::MatrixXd out_weights;  // out_dim x last_width
  Eigen::VectorXd out_biases;   // out_dim

  /// All-zero parameters shaped for `arch`.
  static Parameters zeros(const Architecture& arch) {
    Parameters p;
    for (int l = 0; l < arch.depth(); ++l) {
      const int rows = arch.widths[l] * arch.rank;
      p.hidden.push_back({Eigen::MatrixXd::Zero(rows, arch.fan_in(l)), Eigen::VectorXd::Zero(rows)});
    }
    p.out_weights = Eigen::MatrixXd::Zero(arch.out_dim, arch.last_width());
    p.out_biases = Eigen::VectorXd::Zero(arch.out_dim);
    return p;
  }
};

/// Throws Error{Shape} naming the offending layer/unit if params do not match arch.
inline void validate_shapes(const Architecture& arch, const Parameters& params) {
  arch.validate();
  if (static_cast<int>(params.hidden.size()) != arch.depth())
    throw Error(ErrorKind::Shape, "parameters: expected " + std::to_string(arch.depth()) +
                                      " hidden layers, got " + std::to_string(params.hidden.size()));
  for (int l = 0; l < arch.depth(); ++l) {
    const auto& layer = params.hidden[l];
    const std::string where = "layer " + std::to_string(l + 1);
    const long rows = static_cast<long>(arch.widths[l]) * arch.rank;
    if (layer.weights.rows() != rows || layer.biases.size() != rows)
      throw Error(ErrorKind::Shape, where + ": expected " + std::to_string(arch.widths[l]) + " units x " +
                                        std::to_string(arch.rank) + " features");
    if (layer.weights.cols() != arch.fan_in(l))
      throw Error(ErrorKind::Shape, where + ": weight vectors must have length " +
                                        std::to_string(arch.fan_in(l)));
    for (long r = 0; r < rows; ++r) {
      if (!layer.weights.row(r).allFinite() || !std::isfinite(layer.biases(r)))
        throw Error(ErrorKind::Shape, where + " unit " + std::to_string(r / arch.rank + 1) + " feature " +
                                          std::to_string(r % arch.rank + 1) + ": non-finite entry");
    }
  }
  if (params.out_weights.rows() != arch.out_dim || params.out_weights.cols() != arch.last_width() ||
      params.out_biases.size() != arch.out_dim)
    throw Error(ErrorKind::Shape, "output layer: expected " + std::to_string(arch.out_dim) + " x " +
                                      std::to_string(arch.last_width()) + " weights");
  if (!params.out_weights.allFinite() || !params.out_biases.allFinite())
    throw Error(ErrorKind::Shape, "output layer: non-finite entry");
}

/// An architecture together with matching parameters. Immutable once built.
class Network {
 public:
  Network(Architecture arch, Parameters params) : arch_(std::move(arch)), params_(std::move(params)) {
    validate_shapes(arch_, params_);
  }

  const Architecture& arch() const noexcept { return arch_; }
  const Parameters& params() const noexcept { return params_; }

 private:
  Architecture arch_;
  Parameters params_;
};

/// Index of the maximizing feature for each hidden unit, in layer order.
struct ActivationPattern {
  std::vector<int> feature;

  friend bool operator==(const ActivationPattern&, const ActivationPattern&) = default;
};

/// x -> A x + c.
struct AffineMap {
  Eigen::MatrixXd A;
  Eigen::VectorXd c;

  static AffineMap identity(int dim) {
    return {Eigen::MatrixXd::Identity(dim, dim), Eigen::VectorXd::Zero(dim)};
  }

  int in_dim() const { return static_cast<int>(A.cols()); }
  int out_dim() const { return static_cast<int>(A.rows()); }

  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const { return A * x + c; }
};

/// outer ∘ inner
inline AffineMap compose(const AffineMap& outer, const AffineMap& inner) {
  if (outer.in_dim() != inner.out_dim())
    throw Error(ErrorKind::Shape, "compose: dimension mismatch");
  return {outer.A * inner.A, outer.A * inner.c + outer.c};
}

namespace detail {

inline void check_input(const Network& net, const Eigen::VectorXd& x) {
  if (x.size() != net.arch().n0)
    throw Error(ErrorKind::Shape, "input: expected dimension " + std::to_string(net.arch().n0) + ", got " +
                                      std::to_string(x.size()));
  if (!x.allFinite()) throw Error(ErrorKind::Precondition, "input: non-finite coordinate");
}

// Max over each unit's features; ties go to the smallest feature index.
inline Eigen::VectorXd maxout(const Eigen::VectorXd& pre, int rank, std::vector<int>* argmax) {
  const long units = pre.size() / rank;
  Eigen::VectorXd out(units);
  for (long u = 0; u < units; ++u) {
    int best = 0;
    double value = pre(u * rank);
    for (int k = 1; k < rank; ++k) {
      if (pre(u * rank + k) > value) {
        value = pre(u * rank + k);
        best = k;
      }
    }
    out(u) = value;
    if (argmax) argmax->push_back(best);
  }
  return out;
}

}  // namespace detail

/// Post-activation values of every hidden layer at x (index 0 is the first hidden layer).
inline std::vector<Eigen::VectorXd> hidden_activations(const Network& net, const Eigen::VectorXd& x) {
  detail::check_input(net, x);
  std::vector<Eigen::VectorXd> acts;
  Eigen::VectorXd h = x;
  for (const auto& layer : net.params().hidden) {
    h = detail::maxout(layer.weights * h + layer.biases, net.arch().rank, nullptr);
    acts.push_back(h);
  }
  return acts;
}

inline Eigen::VectorXd forward(const Network& net, const Eigen::VectorXd& x) {
  detail::check_input(net, x);
  Eigen::VectorXd h = x;
  for (const auto& layer : net.params().hidden)
    h = detail::maxout(layer.weights * h + layer.biases, net.arch().rank, nullptr);
  return net.params().out_weights * h + net.params().out_biases;
}

inline ActivationPattern activation_pattern(const Network& net, const Eigen::VectorXd& x) {
  detail::check_input(net, x);
  ActivationPattern pattern;
  pattern.feature.reserve(net.arch().total_units());
  Eigen::VectorXd h = x;
  for (const auto& layer : net.params().hidden)
    h = detail::maxout(layer.weights * h + layer.biases, net.arch().rank, &pattern.feature);
  return pattern;
}

/// Affine map from the input to the output of the first `layers` hidden layers,
/// assuming the units follow `pattern`.
inline AffineMap layer_affine_map(const Network& net, const ActivationPattern& pattern, int layers) {
  const auto& arch = net.arch();
  if (layers < 0 || layers > arch.depth())
    throw Error(ErrorKind::Precondition, "layer_affine_map: layer index out of range");
  int needed = 0;
  for (int l = 0; l < layers; ++l) needed += arch.widths[l];
  if (static_cast<int>(pattern.feature.size()) < needed)
    throw Error(ErrorKind::Shape, "pattern: expected at least " + std::to_string(needed) + " entries");

  AffineMap map = AffineMap::identity(arch.n0);
  int z = 0;
  for (int l = 0; l < layers; ++l) {
    const auto& layer = net.params().hidden[l];
    const int width = arch.widths[l];
    Eigen::MatrixXd W(width, arch.fan_in(l));
    Eigen::VectorXd b(width);
    for (int u = 0; u < width; ++u, ++z) {
      const int k = pattern.feature[z];
      if (k < 0 || k >= arch.rank)
        throw Error(ErrorKind::Shape, "pattern: feature index out of range at unit " + std::to_string(z + 1));
      W.row(u) = layer.weights.row(u * arch.rank + k);
      b(u) = layer.biases(u * arch.rank + k);
    }
    map = {W * map.A, W * map.c + b};
  }
  return map;
}

/// The affine function the network computes on the activation region of `pattern`.
inline AffineMap region_affine_map(const Network& net, const ActivationPattern& pattern) {
  if (static_cast<int>(pattern.feature.size()) != net.arch().total_units())
    throw Error(ErrorKind::Shape, "pattern: expected " + std::to_string(net.arch().total_units()) + " entries");
  const AffineMap hidden = layer_affine_map(net, pattern, net.arch().depth());
  return compose({net.params().out_weights, net.params().out_biases}, hidden);
}

/// Jacobian of the outputs with respect to the input (M x n0). At ties the
/// tie-break pattern's Jacobian is returned.
inline Eigen::MatrixXd gradient(const Network& net, const Eigen::VectorXd& x) {
  return region_affine_map(net, activation_pattern(net, x)).A;
}

/// Orthonormal parametrization y -> origin + y1 e1 + y2 e2 of the plane
/// through three points.
struct SliceBasis {
  Eigen::VectorXd origin;
  Eigen::VectorXd e1;
  Eigen::VectorXd e2;

  Eigen::VectorXd lift(double y1, double y2) const { return origin + y1 * e1 + y2 * e2; }
};

struct SlicedNetwork {
  Network net;  // n0 == 2
  SliceBasis basis;
};

inline SliceBasis slice_basis(const Eigen::VectorXd& p1, const Eigen::VectorXd& p2, const Eigen::VectorXd& p3) {
  if (p1.size() != p2.size() || p1.size() != p3.size())
    throw Error(ErrorKind::Shape, "slice: points must share a dimension");
  if (p1.size() < 2) throw Error(ErrorKind::Precondition, "slice: input dimension must be at least 2");
  const Eigen::VectorXd d1 = p2 - p1;
  const Eigen::VectorXd d2 = p3 - p1;
  const double scale = std::max({d1.norm(), d2.norm(), 1.0});
  if (d1.norm() <= 1e-12 * scale) throw Error(ErrorKind::Precondition, "slice: points are not affinely independent");
  const Eigen::VectorXd e1 = d1.normalized();
  const Eigen::VectorXd rest = d2 - d2.dot(e1) * e1;
  if (rest.norm() <= 1e-12 * scale)
    throw Error(ErrorKind::Precondition, "slice: points are collinear");
  return {(p1 + p2 + p3) / 3.0, e1, rest.normalized()};
}

/// The network restricted to the plane through p1, p2, p3, as a 2-input
/// network. The slice embedding is folded into the first affine layer.
inline SlicedNetwork slice_network(const Network& net, const Eigen::VectorXd& p1, const Eigen::VectorXd& p2,
                                   const Eigen::VectorXd& p3) {
  if (p1.size() != net.arch().n0) throw Error(ErrorKind::Shape, "slice: points must live in the input space");
  SliceBasis basis = slice_basis(p1, p2, p3);
  Eigen::MatrixXd embed(net.arch().n0, 2);
  embed.col(0) = basis.e1;
  embed.col(1) = basis.e2;

  Architecture arch = net.arch();
  arch.n0 = 2;
  Parameters params = net.params();
  if (arch.depth() > 0) {
    auto& first = params.hidden.front();
    first.biases += first.weights * basis.origin;
    first.weights = (first.weights * embed).eval();
  } else {
    params.out_biases += params.out_weights * basis.origin;
    params.out_weights = (params.out_weights * embed).eval();
  }
  return {Network(std::move(arch), std::move(params)), std::move(basis)};
}

}  // namespace maxout

template <>
struct std::hash<maxout::ActivationPattern> {
  std::size_t operator()(const maxout::ActivationPattern& p) const noexcept {
    std::size_t h = 0xcbf29ce484222325ULL;
    for (int k : p.feature) h = (h ^ static_cast<std::size_t>(k + 1)) * 0x100000001b3ULL;
    return h;
  }
};
