#pragma once

// Trial sweeps over architectures: reproducible per-trial seeds, parallel
// trials with in-order CSV appends, resume after interruption, and a summary
// of means and standard deviations per configuration point.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "maxout/bounds.hpp"
#include "maxout/detail/parallel.hpp"
#include "maxout/enumerate.hpp"
#include "maxout/error.hpp"
#include "maxout/init.hpp"
#include "maxout/net.hpp"
#include "maxout/rng.hpp"

namespace maxout {

enum class Counter { Exact, Grid, Db };

/// Splits `total` units over `depth` layers, lower layers taking the remainder.
inline std::vector<int> widths_from_depth_total(int depth, int total) {
  if (depth < 1 || total < depth)
    throw Error(ErrorKind::Config, "depth/total: need depth >= 1 and total >= depth");
  std::vector<int> w(static_cast<std::size_t>(depth), total / depth);
  for (int i = 0; i < total % depth; ++i) ++w[i];
  return w;
}

inline int default_workers() {
  if (const char* env = std::getenv("WORKERS")) {
    try {
      const int w = std::stoi(env);
      if (w >= 1) return w;
    } catch (const std::exception&) {
    }
    throw Error(ErrorKind::Config, std::string("WORKERS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

struct ExperimentConfig {
  std::vector<int> n0s{2};
  std::vector<std::vector<int>> widths{{3}};
  std::vector<int> ranks{2};
  std::vector<int> out_dims{1};
  InitSpec init;
  std::vector<std::pair<double, double>> window{{-50.0, 50.0}};  // one pair is applied to every axis
  int trials = 30;
  std::set<Counter> counters{Counter::Exact};
  int grid_pts = 512;
  double epsilon = 1e-6;
  std::string output = "results.csv";
  int workers = 1;
  std::uint64_t seed = 0;

  Window window_for(int n0) const {
    Window w;
    if (window.size() == 1)
      w.bounds.assign(static_cast<std::size_t>(n0), window.front());
    else if (static_cast<int>(window.size()) == n0)
      w.bounds = window;
    else
      throw Error(ErrorKind::Config, "window: give one interval or one per input coordinate (n0=" +
                                         std::to_string(n0) + ")");
    w.validate();
    return w;
  }

  std::string summary_path() const {
    std::filesystem::path p(output);
    return (p.parent_path() / (p.stem().string() + ".summary.csv")).string();
  }
};

namespace detail {

template <typename T>
std::vector<T> scalar_or_list(const nlohmann::json& v) {
  if (v.is_array()) return v.get<std::vector<T>>();
  return {v.get<T>()};
}

}  // namespace detail

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::Config, "experiment config: expected an object");
  ExperimentConfig cfg;
  cfg.workers = default_workers();
  try {
    if (j.contains("n0")) cfg.n0s = detail::scalar_or_list<int>(j.at("n0"));
    if (j.contains("widths") && j.contains("depth_total"))
      throw Error(ErrorKind::Config, "experiment config: give either 'widths' or 'depth_total'");
    if (j.contains("widths")) {
      const auto& w = j.at("widths");
      if (!w.is_array() || w.empty()) throw Error(ErrorKind::Config, "experiment config: 'widths' must be a list");
      cfg.widths.clear();
      if (w.front().is_array())
        cfg.widths = w.get<std::vector<std::vector<int>>>();
      else
        cfg.widths.push_back(w.get<std::vector<int>>());
    }
    if (j.contains("depth_total")) {
      cfg.widths.clear();
      for (const auto& dt : j.at("depth_total")) {
        const auto pair = dt.get<std::vector<int>>();
        if (pair.size() != 2) throw Error(ErrorKind::Config, "experiment config: depth_total entries are [depth, total]");
        cfg.widths.push_back(widths_from_depth_total(pair[0], pair[1]));
      }
    }
    if (j.contains("rank")) cfg.ranks = detail::scalar_or_list<int>(j.at("rank"));
    if (j.contains("out_dim")) cfg.out_dims = detail::scalar_or_list<int>(j.at("out_dim"));
    if (j.contains("init")) cfg.init = init_spec_from_json(j.at("init"));
    if (j.contains("window")) {
      const auto& w = j.at("window");
      cfg.window.clear();
      if (w.is_array() && w.size() == 2 && w[0].is_number())
        cfg.window.emplace_back(w[0].get<double>(), w[1].get<double>());
      else
        for (const auto& iv : w) {
          const auto v = iv.get<std::vector<double>>();
          if (v.size() != 2) throw Error(ErrorKind::Config, "window: intervals are [lo, hi]");
          cfg.window.emplace_back(v[0], v[1]);
        }
    }
    if (j.contains("trials")) cfg.trials = j.at("trials").get<int>();
    if (j.contains("counters")) {
      cfg.counters.clear();
      for (const auto& c : j.at("counters")) {
        const auto s = c.get<std::string>();
        if (s == "exact") cfg.counters.insert(Counter::Exact);
        else if (s == "grid") cfg.counters.insert(Counter::Grid);
        else if (s == "db") cfg.counters.insert(Counter::Db);
        else throw Error(ErrorKind::Config, "experiment config: unknown counter '" + s + "'");
      }
    }
    if (j.contains("grid_pts")) cfg.grid_pts = j.at("grid_pts").get<int>();
    if (j.contains("epsilon")) cfg.epsilon = j.at("epsilon").get<double>();
    if (j.contains("output")) cfg.output = j.at("output").get<std::string>();
    if (j.contains("workers")) cfg.workers = j.at("workers").get<int>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, std::string("experiment config: ") + e.what());
  }
  if (cfg.trials < 1) throw Error(ErrorKind::Config, "experiment config: trials must be positive");
  if (cfg.workers < 1) throw Error(ErrorKind::Config, "experiment config: workers must be positive");
  if (cfg.counters.empty()) throw Error(ErrorKind::Config, "experiment config: no counters selected");
  if (cfg.grid_pts < 2) throw Error(ErrorKind::Config, "experiment config: grid_pts must be at least 2");
  if (!(cfg.epsilon > 0)) throw Error(ErrorKind::Config, "experiment config: epsilon must be positive");
  if (cfg.window.empty()) throw Error(ErrorKind::Config, "experiment config: window is empty");
  return cfg;
}

struct ConfigPoint {
  Architecture arch;
  Window window;
};

inline std::vector<ConfigPoint> expand_points(const ExperimentConfig& cfg) {
  std::vector<ConfigPoint> pts;
  for (int n0 : cfg.n0s)
    for (const auto& w : cfg.widths)
      for (int K : cfg.ranks)
        for (int M : cfg.out_dims) {
          Architecture arch{n0, w, K, M};
          try {
            arch.validate();
          } catch (const Error& e) {
            throw Error(ErrorKind::Config, std::string("experiment config: ") + e.what());
          }
          pts.push_back({std::move(arch), cfg.window_for(n0)});
        }
  return pts;
}

inline std::uint64_t trial_seed(std::uint64_t master, std::size_t point, int trial) {
  return derive_seed(master, {static_cast<std::uint64_t>(point), static_cast<std::uint64_t>(trial)});
}

inline const std::vector<std::string>& trial_csv_header() {
  static const std::vector<std::string> h{
      "point", "trial", "seed", "n0", "widths", "depth", "N", "K", "M", "scheme", "dist_shape", "zero_bias",
      "regions", "grid_regions", "db_pieces", "lp_calls", "lp_breakdowns", "generic_lower", "trivial_upper",
      "max_shallow", "error", "wall_time_s"};
  return h;
}

struct TrialRow {
  std::size_t point = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  Architecture arch;
  InitSpec init;
  std::optional<std::size_t> regions, grid_regions, db_pieces;
  std::size_t lp_calls = 0, lp_breakdowns = 0;
  std::string error;
  double wall_time_s = 0.0;

  std::string to_csv() const {
    auto opt = [](const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : std::string(); };
    std::string widths;
    for (std::size_t i = 0; i < arch.widths.size(); ++i) widths += (i ? "-" : "") + std::to_string(arch.widths[i]);
    const auto lower = generic_lower_bound(arch.n0, arch.widths.empty() ? 0 : arch.widths.front()).regions;
    const auto upper = ipow(arch.rank, arch.total_units());
    std::string max_shallow;
    if (arch.depth() == 1) max_shallow = max_regions_shallow(arch.n0, arch.widths[0], arch.rank).str();
    std::string err = error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    std::ostringstream os;
    os << point << ',' << trial << ',' << seed << ',' << arch.n0 << ',' << widths << ',' << arch.depth() << ','
       << arch.total_units() << ',' << arch.rank << ',' << arch.out_dim << ',' << to_string(init.scheme) << ','
       << to_string(init.dist) << ',' << (init.zero_bias ? 1 : 0) << ',' << opt(regions) << ','
       << opt(grid_regions) << ',' << opt(db_pieces) << ',' << lp_calls << ',' << lp_breakdowns << ','
       << (arch.depth() ? lower.str() : std::string()) << ',' << upper.str() << ',' << max_shallow << ',' << err
       << ',';
    os.precision(6);
    os << wall_time_s;
    return os.str();
  }
};

/// Runs one trial; enumeration failures are recorded in the row.
inline TrialRow run_trial(const ExperimentConfig& cfg, const ConfigPoint& pt, std::size_t point, int trial,
                          int inner_workers = 1) {
  const auto t0 = std::chrono::steady_clock::now();
  TrialRow row;
  row.point = point;
  row.trial = trial;
  row.seed = trial_seed(cfg.seed, point, trial);
  row.arch = pt.arch;
  row.init = cfg.init;
  row.init.seed = row.seed;
  try {
    const Network net(pt.arch, sample(pt.arch, row.init));
    EnumOptions opt;
    opt.epsilon = cfg.epsilon;
    opt.workers = inner_workers;
    opt.seed = row.seed;
    if (cfg.counters.count(Counter::Db) && pt.arch.out_dim >= 2) {
      const auto res = count_db_exact(net, pt.window, opt);
      row.regions = res.report.regions;
      row.db_pieces = res.report.db_pieces;
      row.lp_calls = res.report.lp_calls;
      row.lp_breakdowns = res.report.lp_breakdowns;
    } else if (cfg.counters.count(Counter::Exact) || cfg.counters.count(Counter::Db)) {
      const auto res = count_regions_exact(net, pt.window, opt);
      row.regions = res.report.regions;
      row.lp_calls = res.report.lp_calls;
      row.lp_breakdowns = res.report.lp_breakdowns;
    }
    if (cfg.counters.count(Counter::Grid)) row.grid_regions = count_regions_grid(net, pt.window, cfg.grid_pts);
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

inline std::string join_csv(const std::vector<std::string>& fields) {
  std::string s;
  for (std::size_t i = 0; i < fields.size(); ++i) s += (i ? "," : "") + fields[i];
  return s;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

namespace detail {

// Reads completed (point, trial) keys and cuts off a trailing partial line.
inline std::set<std::pair<std::size_t, int>> prepare_resume(const std::string& path) {
  std::set<std::pair<std::size_t, int>> done;
  std::ifstream in(path, std::ios::binary);
  if (!in) return done;
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  if (content.empty()) return done;
  const std::size_t keep = content.rfind('\n') == std::string::npos ? 0 : content.rfind('\n') + 1;
  std::istringstream lines(content.substr(0, keep));
  std::string line;
  if (!std::getline(lines, line) || line != join_csv(trial_csv_header()))
    throw Error(ErrorKind::Io, path + ": existing file has a different header; refusing to append");
  while (std::getline(lines, line)) {
    const auto f = split_csv(line);
    if (f.size() != trial_csv_header().size()) throw Error(ErrorKind::Io, path + ": malformed row '" + line + "'");
    done.emplace(std::stoull(f[0]), std::stoi(f[1]));
  }
  if (keep != content.size()) std::filesystem::resize_file(path, keep);
  return done;
}

}  // namespace detail

struct SummaryRow {
  std::size_t point = 0;
  std::string n0, widths, K, M;
  std::size_t trials = 0, errors = 0;
  std::map<std::string, std::pair<double, double>> stats;  // column -> (mean, sample std)
};

/// Per-point mean and sample standard deviation of the count columns, read back
/// from a trial CSV.
inline std::vector<SummaryRow> summarize_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  std::string line;
  std::getline(in, line);
  const auto& header = trial_csv_header();
  const std::vector<std::string> cols{"regions", "grid_regions", "db_pieces", "lp_calls"};
  std::map<std::size_t, SummaryRow> rows;
  std::map<std::size_t, std::map<std::string, std::vector<double>>> values;
  auto index = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
  };
  while (std::getline(in, line)) {
    const auto f = split_csv(line);
    if (f.size() != header.size()) continue;
    const std::size_t p = std::stoull(f[0]);
    auto& r = rows[p];
    r.point = p;
    r.n0 = f[index("n0")];
    r.widths = f[index("widths")];
    r.K = f[index("K")];
    r.M = f[index("M")];
    ++r.trials;
    if (!f[index("error")].empty()) ++r.errors;
    for (const auto& c : cols)
      if (!f[index(c)].empty()) values[p][c].push_back(std::stod(f[index(c)]));
  }
  std::vector<SummaryRow> out;
  for (auto& [p, r] : rows) {
    for (const auto& [c, v] : values[p]) {
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      r.stats[c] = {mean, v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0};
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline void write_summary(const std::vector<SummaryRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  const std::vector<std::string> cols{"regions", "grid_regions", "db_pieces", "lp_calls"};
  out << "point,n0,widths,K,M,trials,errors";
  for (const auto& c : cols) out << ',' << c << "_mean," << c << "_std";
  out << '\n';
  out.precision(17);
  for (const auto& r : rows) {
    out << r.point << ',' << r.n0 << ',' << r.widths << ',' << r.K << ',' << r.M << ',' << r.trials << ','
        << r.errors;
    for (const auto& c : cols) {
      auto it = r.stats.find(c);
      if (it == r.stats.end())
        out << ",,";
      else
        out << ',' << it->second.first << ',' << it->second.second;
    }
    out << '\n';
  }
}

struct ExperimentResult {
  std::size_t trials_run = 0;
  std::size_t trials_skipped = 0;
  std::string csv_path;
  std::string summary_path;
};

/// Runs every (point, trial) not already present in the output CSV. Rows are
/// appended in (point, trial) order regardless of the worker count.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const auto points = expand_points(cfg);
  const auto done = detail::prepare_resume(cfg.output);

  std::vector<std::pair<std::size_t, int>> tasks;
  for (std::size_t p = 0; p < points.size(); ++p)
    for (int t = 0; t < cfg.trials; ++t)
      if (!done.count({p, t})) tasks.emplace_back(p, t);

  const bool fresh = !std::filesystem::exists(cfg.output) || std::filesystem::file_size(cfg.output) == 0;
  std::ofstream out(cfg.output, std::ios::app | std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + cfg.output + "'");
  if (fresh) out << join_csv(trial_csv_header()) << '\n' << std::flush;

  // Finished rows wait here until every earlier task has been written.
  std::mutex mu;
  std::vector<std::optional<std::string>> pending(tasks.size());
  std::size_t next = 0;
  detail::parallel_for(tasks.size(), cfg.workers, [&](std::size_t i) {
    const auto [p, t] = tasks[i];
    std::string line = run_trial(cfg, points[p], p, t).to_csv();
    std::lock_guard<std::mutex> lock(mu);
    pending[i] = std::move(line);
    while (next < pending.size() && pending[next]) {
      out << *pending[next] << '\n';
      pending[next].reset();
      ++next;
    }
    out.flush();
  });
  out.close();
  if (!out) throw Error(ErrorKind::Io, "write failed for '" + cfg.output + "'");

  write_summary(summarize_csv(cfg.output), cfg.summary_path());
  return {tasks.size(), done.size(), cfg.output, cfg.summary_path()};
}

}  // namespace maxout
