#pragma once

// Exact enumeration of activation regions and decision-boundary pieces by
// incremental feasibility checks, plus a grid-gradient approximate counter.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "maxout/detail/parallel.hpp"
#include "maxout/error.hpp"
#include "maxout/feas.hpp"
#include "maxout/net.hpp"

namespace maxout {

/// Axis-aligned box [lo_1,hi_1] x … x [lo_d,hi_d].
struct Window {
  std::vector<std::pair<double, double>> bounds;

  static Window cube(int dim, double lo, double hi) {
    Window w;
    w.bounds.assign(static_cast<std::size_t>(dim), {lo, hi});
    w.validate();
    return w;
  }

  int dim() const { return static_cast<int>(bounds.size()); }

  void validate() const {
    if (bounds.empty()) throw Error(ErrorKind::Config, "window: needs at least one interval");
    for (std::size_t i = 0; i < bounds.size(); ++i) {
      const auto [lo, hi] = bounds[i];
      if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
        throw Error(ErrorKind::Config, "window: interval " + std::to_string(i + 1) + " must satisfy lo < hi");
    }
  }

  /// The 2·d rows x_i <= hi_i and -x_i <= -lo_i.
  InequalitySystem system() const {
    validate();
    const int d = dim();
    RowBlock block(d);
    for (int i = 0; i < d; ++i) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
      e(i) = 1.0;
      block.add(e, bounds[i].second);
      block.add(-e, -bounds[i].first);
    }
    return InequalitySystem(d).with_rows(std::move(block));
  }

  Eigen::VectorXd center() const {
    Eigen::VectorXd c(dim());
    for (int i = 0; i < dim(); ++i) c(i) = 0.5 * (bounds[i].first + bounds[i].second);
    return c;
  }

  friend bool operator==(const Window&, const Window&) = default;
};

inline nlohmann::json window_to_json(const Window& w) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [lo, hi] : w.bounds) arr.push_back({lo, hi});
  return arr;
}

/// A surviving region during enumeration.
struct Region {
  ActivationPattern pattern;  // one entry per processed unit
  InequalitySystem sys;
  AffineMap layer_map;        // input -> output of the last completed layer
  AffineMap next_layer;       // rows filled for the units processed in the current layer
  Eigen::VectorXd witness;    // a point satisfying sys
};

struct CountReport {
  std::size_t regions = 0;
  std::optional<std::size_t> db_pieces;
  std::size_t lp_calls = 0;
  std::size_t lp_breakdowns = 0;  // breakdowns are counted as feasible (over-count)
  double wall_time_s = 0.0;
  std::uint64_t seed = 0;
  Window window;
  std::vector<std::size_t> per_unit_counts;  // region count after each processed unit

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["regions"] = regions;
    j["db_pieces"] = db_pieces ? nlohmann::json(*db_pieces) : nlohmann::json(nullptr);
    j["lp_calls"] = lp_calls;
    j["lp_breakdowns"] = lp_breakdowns;
    j["wall_time_s"] = wall_time_s;
    j["seed"] = seed;
    j["window"] = window_to_json(window);
    return j;
  }
};

struct EnumOptions {
  double epsilon = 1e-6;       // margin realizing strict inequalities
  int workers = 1;
  bool keep_regions = false;   // return the final Region list
  bool reuse_witness = true;   // skip the LP when the parent's witness already satisfies a child
  bool prune_box_redundant = false;  // drop rows implied by the window box
  std::uint64_t seed = 0;      // echoed into the report
  FeasOptions feas;
};

struct EnumerationResult {
  CountReport report;
  std::vector<Region> regions;
};

namespace detail {

struct ChildSlot {
  std::optional<Region> region;
  bool used_lp = false;
  bool breakdown = false;
};

// True when max_{x in box} a·x <= b, i.e. the row cannot cut the window.
inline bool box_redundant(const Window& window, const Eigen::VectorXd& a, double b) {
  double worst = 0.0;
  for (int i = 0; i < window.dim(); ++i)
    worst += a(i) > 0 ? a(i) * window.bounds[i].second : a(i) * window.bounds[i].first;
  return worst <= b;
}

// Decides feasibility of `sys` with `block` appended; the witness shortcut
// applies when `hint` already satisfies every appended row.
inline std::pair<std::optional<Eigen::VectorXd>, InequalitySystem> check_extension(
    const InequalitySystem& sys, RowBlock block, const std::vector<Eigen::VectorXd>& rows,
    const std::vector<double>& rhs, const Eigen::VectorXd* hint, const EnumOptions& opt, ChildSlot& slot) {
  bool hint_ok = hint != nullptr;
  if (hint_ok)
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (rows[i].dot(*hint) > rhs[i]) {
        hint_ok = false;
        break;
      }
  InequalitySystem extended = sys.with_rows(std::move(block));
  if (hint_ok) return {*hint, std::move(extended)};
  slot.used_lp = true;
  try {
    FeasibilityResult res = is_feasible(extended, opt.feas);
    if (!res.feasible()) return {std::nullopt, std::move(extended)};
    return {std::move(*res.witness), std::move(extended)};
  } catch (const FeasibilityError&) {
    slot.breakdown = true;
    return {hint ? std::optional<Eigen::VectorXd>(*hint) : std::optional<Eigen::VectorXd>(Eigen::VectorXd()),
            std::move(extended)};
  }
}

// Splits `parent` by the K features of unit `unit` in layer `layer`.
inline void split_region(const Network& net, const Window& window, int layer, int unit, const Region& parent,
                         const EnumOptions& opt, ChildSlot* out) {
  const auto& arch = net.arch();
  const int K = arch.rank;
  const int n0 = arch.n0;
  const auto& hl = net.params().hidden[layer];
  const Eigen::MatrixXd feat_A = hl.feature_weights(unit, K) * parent.layer_map.A;  // K x n0
  const Eigen::VectorXd feat_c = hl.feature_weights(unit, K) * parent.layer_map.c + hl.feature_biases(unit, K);

  for (int j0 = 0; j0 < K; ++j0) {
    ChildSlot& slot = out[j0];
    RowBlock block(n0);
    std::vector<Eigen::VectorXd> rows;
    std::vector<double> rhs;
    for (int i = 0; i < K; ++i) {
      if (i == j0) continue;
      Eigen::VectorXd a = (feat_A.row(i) - feat_A.row(j0)).transpose();
      const double b = feat_c(j0) - feat_c(i) - opt.epsilon;
      if (opt.prune_box_redundant && box_redundant(window, a, b)) continue;
      block.add(a, b);
      rows.push_back(std::move(a));
      rhs.push_back(b);
    }
    const Eigen::VectorXd* hint =
        opt.reuse_witness && parent.witness.size() == n0 ? &parent.witness : nullptr;
    auto [witness, sys] = check_extension(parent.sys, std::move(block), rows, rhs, hint, opt, slot);
    if (!witness) continue;
    Region child{parent.pattern, std::move(sys), parent.layer_map, parent.next_layer, std::move(*witness)};
    child.pattern.feature.push_back(j0);
    child.next_layer.A.row(unit) = feat_A.row(j0);
    child.next_layer.c(unit) = feat_c(j0);
    slot.region = std::move(child);
  }
}

inline std::vector<Region> enumerate_regions(const Network& net, const Window& window, const EnumOptions& opt,
                                             CountReport& report) {
  const auto& arch = net.arch();
  if (window.dim() != arch.n0)
    throw Error(ErrorKind::Shape, "window: expected " + std::to_string(arch.n0) + " intervals, got " +
                                      std::to_string(window.dim()));
  window.validate();
  const int K = arch.rank;

  std::vector<Region> regions;
  {
    Region start{ActivationPattern{}, window.system(), AffineMap::identity(arch.n0), AffineMap{}, window.center()};
    regions.push_back(std::move(start));
  }

  for (int l = 0; l < arch.depth(); ++l) {
    const int width = arch.widths[l];
    for (auto& r : regions) r.next_layer = {Eigen::MatrixXd::Zero(width, arch.n0), Eigen::VectorXd::Zero(width)};
    for (int u = 0; u < width; ++u) {
      std::vector<ChildSlot> slots(regions.size() * static_cast<std::size_t>(K));
      parallel_for(regions.size(), opt.workers, [&](std::size_t p) {
        split_region(net, window, l, u, regions[p], opt, &slots[p * K]);
      });
      std::vector<Region> next;
      next.reserve(slots.size());
      for (auto& s : slots) {
        report.lp_calls += s.used_lp ? 1 : 0;
        report.lp_breakdowns += s.breakdown ? 1 : 0;
        if (s.region) next.push_back(std::move(*s.region));
      }
      regions = std::move(next);
      report.per_unit_counts.push_back(regions.size());
    }
    for (auto& r : regions) r.layer_map = std::move(r.next_layer);
  }
  return regions;
}

}  // namespace detail

/// Number of activation regions meeting the window, by layer-by-layer,
/// unit-by-unit splitting. Deterministic and independent of opt.workers.
inline EnumerationResult count_regions_exact(const Network& net, const Window& window,
                                             const EnumOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  EnumerationResult result;
  result.report.window = window;
  result.report.seed = opt.seed;
  std::vector<Region> regions = detail::enumerate_regions(net, window, opt, result.report);
  result.report.regions = regions.size();
  if (opt.keep_regions) result.regions = std::move(regions);
  result.report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

/// The affine output map of the network on a fully enumerated region.
inline AffineMap region_output_map(const Network& net, const Region& region) {
  return compose({net.params().out_weights, net.params().out_biases}, region.layer_map);
}

/// Counts feasible (region, class pair) combinations where the two outputs tie
/// and dominate all other outputs.
inline EnumerationResult count_db_exact(const Network& net, const Window& window, const EnumOptions& opt = {}) {
  const auto& arch = net.arch();
  if (arch.out_dim < 2) throw Error(ErrorKind::Precondition, "count_db_exact: needs at least two outputs");
  const auto t0 = std::chrono::steady_clock::now();
  EnumerationResult result;
  result.report.window = window;
  result.report.seed = opt.seed;
  std::vector<Region> regions = detail::enumerate_regions(net, window, opt, result.report);
  result.report.regions = regions.size();

  const int M = arch.out_dim;
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < M; ++i)
    for (int j = i + 1; j < M; ++j) pairs.emplace_back(i, j);

  std::vector<detail::ChildSlot> slots(regions.size() * pairs.size());
  std::vector<char> feasible(slots.size(), 0);
  detail::parallel_for(regions.size(), opt.workers, [&](std::size_t r) {
    const AffineMap out = region_output_map(net, regions[r]);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const auto [i, j] = pairs[p];
      RowBlock block(arch.n0);
      std::vector<Eigen::VectorXd> rows;
      std::vector<double> rhs;
      block.add(Eigen::VectorXd((out.A.row(i) - out.A.row(j)).transpose()), out.c(j) - out.c(i), RowKind::EQ);
      for (int m = 0; m < M; ++m) {
        if (m == i || m == j) continue;
        Eigen::VectorXd a = (out.A.row(m) - out.A.row(i)).transpose();
        const double b = out.c(i) - out.c(m) - opt.epsilon;
        if (opt.prune_box_redundant && detail::box_redundant(window, a, b)) continue;
        block.add(a, b);
      }
      auto& slot = slots[r * pairs.size() + p];
      auto [witness, sys] = detail::check_extension(regions[r].sys, std::move(block), rows, rhs, nullptr, opt, slot);
      feasible[r * pairs.size() + p] = witness.has_value();
    }
  });
  std::size_t pieces = 0;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    result.report.lp_calls += slots[s].used_lp ? 1 : 0;
    result.report.lp_breakdowns += slots[s].breakdown ? 1 : 0;
    pieces += feasible[s] ? 1 : 0;
  }
  result.report.db_pieces = pieces;
  if (opt.keep_regions) result.regions = std::move(regions);
  result.report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

/// Labels of grid points by distinct rounded gradient of the output sum.
struct RegionMap {
  Window window;
  int grid_pts = 0;
  std::vector<int> labels;  // row-major: the last coordinate varies fastest
  int label_count = 0;

  /// Coordinates of grid point `index`.
  Eigen::VectorXd point(std::size_t index) const {
    const int d = window.dim();
    Eigen::VectorXd x(d);
    for (int i = d - 1; i >= 0; --i) {
      const std::size_t t = index % static_cast<std::size_t>(grid_pts);
      index /= static_cast<std::size_t>(grid_pts);
      const auto [lo, hi] = window.bounds[i];
      x(i) = lo + (hi - lo) * static_cast<double>(t) / (grid_pts - 1);
    }
    return x;
  }

  /// CSV with header "y1,…,yd,label".
  void write_csv(std::ostream& os) const {
    const int d = window.dim();
    for (int i = 0; i < d; ++i) os << 'y' << (i + 1) << ',';
    os << "label\n";
    std::ostringstream line;
    line.precision(17);
    for (std::size_t p = 0; p < labels.size(); ++p) {
      const Eigen::VectorXd x = point(p);
      line.str("");
      for (int i = 0; i < d; ++i) line << x(i) << ',';
      line << labels[p] << '\n';
      os << line.str();
    }
  }
};

namespace detail {

struct GradientKey {
  std::vector<long long> q;
  friend bool operator<(const GradientKey& a, const GradientKey& b) { return a.q < b.q; }
};

inline std::size_t grid_size(const Window& window, int grid_pts, std::size_t cap) {
  if (grid_pts < 2) throw Error(ErrorKind::Config, "grid: need at least 2 points per axis");
  double total = 1.0;
  for (int i = 0; i < window.dim(); ++i) total *= grid_pts;
  if (total > static_cast<double>(cap))
    throw Error(ErrorKind::Config, "grid: " + std::to_string(static_cast<long long>(total)) +
                                       " points exceed the cap of " + std::to_string(cap));
  return static_cast<std::size_t>(total);
}

}  // namespace detail

/// Evaluates the gradient of the summed outputs at every grid point, rounds it
/// to 1e-9 and labels points by first visit of each distinct rounded gradient.
inline RegionMap export_region_map(const Network& net, const Window& window, int grid_pts,
                                   std::size_t cap = 4'000'000) {
  const auto& arch = net.arch();
  if (window.dim() != arch.n0) throw Error(ErrorKind::Shape, "window: dimension must match the input");
  window.validate();
  const std::size_t total = detail::grid_size(window, grid_pts, cap);

  RegionMap map;
  map.window = window;
  map.grid_pts = grid_pts;
  map.labels.resize(total);

  // The gradient depends only on the activation pattern, so it is computed once per pattern.
  std::unordered_map<ActivationPattern, int> pattern_label;
  std::map<detail::GradientKey, int> gradient_label;
  const Eigen::RowVectorXd ones = Eigen::RowVectorXd::Ones(arch.out_dim);

  // Batches of points go through the layers as matrices.
  const std::size_t batch = 4096;
  Eigen::MatrixXd X;
  std::vector<ActivationPattern> patterns;
  for (std::size_t start = 0; start < total; start += batch) {
    const std::size_t count = std::min(batch, total - start);
    X.resize(arch.n0, static_cast<long>(count));
    for (std::size_t p = 0; p < count; ++p) X.col(static_cast<long>(p)) = map.point(start + p);
    patterns.assign(count, ActivationPattern{});
    for (auto& pat : patterns) pat.feature.reserve(arch.total_units());
    Eigen::MatrixXd H = X;
    for (const auto& layer : net.params().hidden) {
      Eigen::MatrixXd pre = layer.weights * H;
      pre.colwise() += layer.biases;
      const long units = pre.rows() / arch.rank;
      Eigen::MatrixXd next(units, pre.cols());
      for (long c = 0; c < pre.cols(); ++c) {
        for (long u = 0; u < units; ++u) {
          int best = 0;
          double v = pre(u * arch.rank, c);
          for (int k = 1; k < arch.rank; ++k)
            if (pre(u * arch.rank + k, c) > v) {
              v = pre(u * arch.rank + k, c);
              best = k;
            }
          next(u, c) = v;
          patterns[c].feature.push_back(best);
        }
      }
      H = std::move(next);
    }
    for (std::size_t p = 0; p < count; ++p) {
      auto it = pattern_label.find(patterns[p]);
      if (it == pattern_label.end()) {
        const Eigen::RowVectorXd g = ones * region_affine_map(net, patterns[p]).A;
        detail::GradientKey key;
        key.q.resize(static_cast<std::size_t>(g.size()));
        for (long i = 0; i < g.size(); ++i) key.q[i] = std::llround(g(i) * 1e9);
        auto [git, inserted] = gradient_label.emplace(std::move(key), static_cast<int>(gradient_label.size()));
        it = pattern_label.emplace(patterns[p], git->second).first;
      }
      map.labels[start + p] = it->second;
    }
  }
  map.label_count = static_cast<int>(gradient_label.size());
  return map;
}

/// Number of distinct rounded gradients over the grid; never exceeds the
/// number of linear regions meeting the window.
inline std::size_t count_regions_grid(const Network& net, const Window& window, int grid_pts,
                                      std::size_t cap = 4'000'000) {
  return static_cast<std::size_t>(export_region_map(net, window, grid_pts, cap).label_count);
}

}  // namespace maxout
