// maxout: command-line front end for region counting, bounds and experiments.

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "maxout/maxout.hpp"

namespace {

using namespace maxout;
using nlohmann::json;

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::vector<std::pair<double, double>> parse_window(const std::string& spec) {
  std::vector<std::pair<double, double>> out;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const auto colon = part.find(':');
    if (colon == std::string::npos) throw Error(ErrorKind::Config, "--window: expected lo:hi, got '" + part + "'");
    try {
      std::size_t used = 0;
      const double lo = std::stod(part.substr(0, colon), &used);
      const double hi = std::stod(part.substr(colon + 1));
      out.emplace_back(lo, hi);
    } catch (const std::exception&) {
      throw Error(ErrorKind::Config, "--window: cannot parse '" + part + "'");
    }
  }
  if (out.empty()) throw Error(ErrorKind::Config, "--window: empty");
  return out;
}

Window make_window(const std::vector<std::pair<double, double>>& iv, int n0) {
  Window w;
  if (iv.size() == 1)
    w.bounds.assign(static_cast<std::size_t>(n0), iv.front());
  else
    w.bounds = iv;
  if (w.dim() != n0)
    throw Error(ErrorKind::Config, "--window: network has " + std::to_string(n0) + " inputs, got " +
                                       std::to_string(w.dim()) + " intervals");
  w.validate();
  return w;
}

json big_to_json(const BigInt& v) {
  if (v <= BigInt(std::numeric_limits<std::int64_t>::max())) return v.convert_to<std::int64_t>();
  return v.str();
}

struct CountArgs {
  std::string net;
  std::string window = "-50:50";
  std::uint64_t seed = 0;
  int workers = 0;
  int grid = 0;
  double epsilon = 1e-6;
  bool prune = false;
};

void add_count_flags(CLI::App* cmd, CountArgs& a, bool with_grid) {
  cmd->add_option("net", a.net, "Network JSON file")->required();
  cmd->add_option("--window", a.window, "Window lo:hi[,lo:hi...]")->capture_default_str();
  cmd->add_option("--seed", a.seed, "Seed echoed into the report");
  cmd->add_option("--workers", a.workers, "Worker threads (default: $WORKERS or 1)");
  cmd->add_option("--epsilon", a.epsilon, "Strict-inequality margin")->capture_default_str();
  cmd->add_flag("--prune", a.prune, "Drop rows that cannot cut the window");
  if (with_grid) cmd->add_option("--grid", a.grid, "Also run the grid counter with this many points per axis");
}

EnumOptions enum_options(const CountArgs& a) {
  EnumOptions opt;
  opt.epsilon = a.epsilon;
  opt.workers = a.workers > 0 ? a.workers : default_workers();
  opt.seed = a.seed;
  opt.prune_box_redundant = a.prune;
  return opt;
}

void warn_breakdowns(const CountReport& r) {
  if (r.lp_breakdowns > 0)
    std::cerr << "warning: " << r.lp_breakdowns << " feasibility checks broke down and were counted as feasible\n";
}

int cmd_count(const CountArgs& a, bool db) {
  const Network net = load_network(a.net);
  const Window window = make_window(parse_window(a.window), net.arch().n0);
  const auto res = db ? count_db_exact(net, window, enum_options(a)) : count_regions_exact(net, window, enum_options(a));
  warn_breakdowns(res.report);
  json j = res.report.to_json();
  if (a.grid > 0) j["grid_regions"] = count_regions_grid(net, window, a.grid);
  std::cout << j.dump() << '\n';
  return 0;
}

int cmd_approx(const CountArgs& a) {
  const Network net = load_network(a.net);
  const Window window = make_window(parse_window(a.window), net.arch().n0);
  const int grid = a.grid > 0 ? a.grid : 512;
  json j{{"grid_regions", count_regions_grid(net, window, grid)},
         {"grid_pts", grid},
         {"seed", a.seed},
         {"window", window_to_json(window)}};
  std::cout << j.dump() << '\n';
  return 0;
}

int cmd_regionmap(const CountArgs& a, const std::string& out) {
  const Network net = load_network(a.net);
  const Window window = make_window(parse_window(a.window), net.arch().n0);
  const RegionMap map = export_region_map(net, window, a.grid > 0 ? a.grid : 512);
  if (out.empty() || out == "-") {
    map.write_csv(std::cout);
  } else {
    std::ofstream f(out);
    if (!f) throw Error(ErrorKind::Io, "cannot write '" + out + "'");
    map.write_csv(f);
  }
  std::cerr << "labels: " << map.label_count << '\n';
  return 0;
}

struct BoundsArgs {
  long long n0 = 2;
  std::vector<long long> widths;
  long long N = -1;
  long long K = 2;
  long long M = 2;
  long long r = 0;
  double c_grad = 1.0;
  double c_bias = 1.0;
  std::optional<double> c;
  std::optional<double> t_prime;
  bool delta_ok = false;
  bool json_out = false;
};

int cmd_bounds(BoundsArgs a) {
  if (a.N < 0) {
    if (a.widths.empty()) throw Error(ErrorKind::Config, "bounds: give --N or --widths");
    a.N = 0;
    for (auto w : a.widths) a.N += w;
  }
  if (a.r > a.n0) throw Error(ErrorKind::Config, "bounds: r must not exceed n0");
  BoundParams bp;
  bp.c_grad = a.c_grad;
  bp.c_bias = a.c_bias;
  bp.M = a.M;
  bp.n0 = a.n0;
  bp.N = a.N;
  bp.K = a.K;
  bp.r = a.r;
  bp.validate();

  json j = json::object();
  j["trivial_pattern_bound"] = big_to_json(trivial_pattern_bound(a.N, a.K, a.r));
  j["exact_pattern_count"] = big_to_json(exact_pattern_count(a.N, a.K, a.r));
  if (!a.widths.empty()) {
    const auto g = generic_lower_bound(a.n0, a.widths.front());
    j["generic_lower_bound"] = big_to_json(g.regions);
    j["generic_lower_bound_bounded"] = big_to_json(g.bounded_regions);
    j["max_regions_shallow"] = big_to_json(max_regions_shallow(a.n0, a.widths.front(), a.K));
  }
  if (a.delta_ok) j["expected_regions_upper"] = expected_regions_upper(bp, true);
  if (a.r >= 1) {
    j["volume_upper"] = volume_upper(bp, a.r);
    j["db_pattern_bound"] = big_to_json(db_pattern_bound(a.N, a.K, a.r, a.M));
    j["db_volume_upper"] = db_volume_upper(bp, a.r);
  }
  if (a.delta_ok) j["db_expected_upper"] = db_expected_upper(bp);
  if (a.c) j["db_distance_lower"] = db_distance_lower(bp, *a.c);
  if (a.t_prime) j["zero_bias_upper"] = zero_bias_upper(a.n0, a.N, a.K, *a.t_prime);
  j["T"] = bp.T();

  if (a.json_out) {
    std::cout << j.dump() << '\n';
    return 0;
  }
  std::size_t width = 0;
  for (auto it = j.begin(); it != j.end(); ++it) width = std::max(width, it.key().size());
  for (auto it = j.begin(); it != j.end(); ++it) {
    std::cout << std::left << std::setw(static_cast<int>(width) + 2) << it.key();
    if (it->is_string())
      std::cout << it->get<std::string>();
    else
      std::cout << it->dump();
    std::cout << '\n';
  }
  return 0;
}

struct ExperimentArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> window;
  std::optional<int> grid;
  std::optional<std::string> out;
};

int cmd_experiment(const ExperimentArgs& a) {
  ExperimentConfig cfg = experiment_config_from_json(read_json_file(a.config));
  if (a.seed) cfg.seed = *a.seed;
  if (a.workers) cfg.workers = *a.workers;
  if (a.window) cfg.window = parse_window(*a.window);
  if (a.grid) cfg.grid_pts = *a.grid;
  if (a.out) cfg.output = *a.out;
  if (cfg.workers < 1) throw Error(ErrorKind::Config, "--workers must be positive");
  const auto res = run_experiment(cfg);
  std::cerr << "trials run: " << res.trials_run << ", already present: " << res.trials_skipped << '\n';
  std::cout << json{{"csv", res.csv_path}, {"summary", res.summary_path}}.dump() << '\n';
  return 0;
}

struct InitArgs {
  std::string config;
  int n0 = 2;
  std::vector<int> widths{3};
  int rank = 2;
  int out_dim = 1;
  std::string scheme = "maxout-he";
  std::string dist = "normal";
  bool zero_bias = false;
  std::string shift = "off";
  double noise = 0.0;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_init_dump(const InitArgs& a) {
  Architecture arch{a.n0, a.widths, a.rank, a.out_dim};
  InitSpec spec;
  spec.scheme = scheme_from_string(a.scheme);
  spec.dist = dist_from_string(a.dist);
  spec.zero_bias = a.zero_bias;
  spec.shift = shift_from_string(a.shift);
  spec.noise = a.noise;
  if (!a.config.empty()) {
    const json doc = read_json_file(a.config);
    if (doc.contains("arch")) arch = architecture_from_json(doc.at("arch"));
    if (doc.contains("init")) spec = init_spec_from_json(doc.at("init"));
  }
  if (a.seed) spec.seed = *a.seed;
  try {
    arch.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, e.what());
  }
  const Network net(arch, sample(arch, spec));
  const json extra{{"init", init_spec_to_json(spec)}};
  if (a.out.empty() || a.out == "-") {
    json doc = network_to_json(net);
    doc["init"] = extra["init"];
    std::cout << doc.dump() << '\n';
  } else {
    save_network(net, a.out, extra);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Activation-region and decision-boundary analysis for maxout networks"};
  app.require_subcommand(1);

  CountArgs count_args, db_args, approx_args, map_args;
  std::string map_out;
  auto* count = app.add_subcommand("count", "Exact activation-region count of a network file");
  add_count_flags(count, count_args, true);
  auto* count_db = app.add_subcommand("count-db", "Exact count of decision-boundary pieces");
  add_count_flags(count_db, db_args, true);
  auto* approx = app.add_subcommand("approx", "Grid-gradient approximate region count");
  add_count_flags(approx, approx_args, true);
  auto* regionmap = app.add_subcommand("regionmap", "Export grid region labels as CSV");
  add_count_flags(regionmap, map_args, true);
  regionmap->add_option("--out", map_out, "Output CSV (default: stdout)");

  BoundsArgs bounds_args;
  auto* bounds = app.add_subcommand("bounds", "Evaluate the closed-form counts and bounds");
  bounds->add_option("--n0", bounds_args.n0, "Input dimension")->capture_default_str();
  bounds->add_option("--widths", bounds_args.widths, "Hidden widths (N defaults to their sum)");
  bounds->add_option("--N", bounds_args.N, "Total number of units");
  bounds->add_option("--K", bounds_args.K, "Maxout rank")->capture_default_str();
  bounds->add_option("--M", bounds_args.M, "Number of classes")->capture_default_str();
  bounds->add_option("--r", bounds_args.r, "Partial-region order")->capture_default_str();
  bounds->add_option("--c-grad", bounds_args.c_grad, "Gradient constant")->capture_default_str();
  bounds->add_option("--c-bias", bounds_args.c_bias, "Bias-density constant")->capture_default_str();
  bounds->add_option("--c", bounds_args.c, "Constant of the distance bound");
  bounds->add_option("--t-prime", bounds_args.t_prime, "Constant of the zero-bias bound");
  bounds->add_flag("--delta-ok", bounds_args.delta_ok, "Assert the cube side exceeds delta0");
  bounds->add_flag("--json", bounds_args.json_out, "Print JSON instead of a table");

  ExperimentArgs exp_args;
  auto* experiment = app.add_subcommand("experiment", "Run a trial sweep from a JSON config");
  experiment->add_option("--config", exp_args.config, "Experiment config JSON")->required();
  experiment->add_option("--seed", exp_args.seed, "Master seed");
  experiment->add_option("--workers", exp_args.workers, "Parallel trials");
  experiment->add_option("--window", exp_args.window, "Window lo:hi[,lo:hi...]");
  experiment->add_option("--grid", exp_args.grid, "Grid points per axis");
  experiment->add_option("--out", exp_args.out, "Trial CSV path");

  InitArgs init_args;
  auto* init_dump = app.add_subcommand("init-dump", "Sample a network and write it as JSON");
  init_dump->add_option("--config", init_args.config, "JSON with optional 'arch' and 'init' objects");
  init_dump->add_option("--n0", init_args.n0)->capture_default_str();
  init_dump->add_option("--widths", init_args.widths)->capture_default_str();
  init_dump->add_option("--rank", init_args.rank)->capture_default_str();
  init_dump->add_option("--out-dim", init_args.out_dim)->capture_default_str();
  init_dump->add_option("--scheme", init_args.scheme, "relu-he|maxout-he|sphere|many-regions|construction")
      ->capture_default_str();
  init_dump->add_option("--dist", init_args.dist, "normal|uniform")->capture_default_str();
  init_dump->add_flag("--zero-bias", init_args.zero_bias);
  init_dump->add_option("--shift", init_args.shift, "off|cube")->capture_default_str();
  init_dump->add_option("--noise", init_args.noise)->capture_default_str();
  init_dump->add_option("--seed", init_args.seed);
  init_dump->add_option("--out", init_args.out, "Output JSON (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*count) return cmd_count(count_args, false);
    if (*count_db) return cmd_count(db_args, true);
    if (*approx) return cmd_approx(approx_args);
    if (*regionmap) return cmd_regionmap(map_args, map_out);
    if (*bounds) return cmd_bounds(bounds_args);
    if (*experiment) return cmd_experiment(exp_args);
    if (*init_dump) return cmd_init_dump(init_args);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return e.kind() == ErrorKind::Numerical ? kExitNumerical : kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return 0;
}
