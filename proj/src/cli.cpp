#include "driftlab/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "driftlab/config.hpp"
#include "driftlab/csv.hpp"
#include "driftlab/filter.hpp"
#include "driftlab/manifest.hpp"

namespace driftlab {

namespace {

const char* kUsage =
    "usage: driftlab <command> <config-file>\n"
    "\n"
    "commands:\n"
    "  simulate       one market path: path.csv, opinions.csv\n"
    "  filter         all four filters along one path: filters.csv, filter_jumps.csv\n"
    "  converge-cov   covariance gap across levels: converge_cov.csv\n"
    "  converge-mean  conditional-mean gap across levels: converge_mean.csv\n"
    "  value          expected log utility for one regime: value.csv\n"
    "  table2a        deterministic-date value table (R, Z at n=10/100/1000/10000, J)\n"
    "  table2b        Poisson-date value table across lambda: table2b.csv\n"
    "  utility-gap    terminal wealth gap Z vs J across n: utility_gap.csv\n"
    "\n"
    "Every run also writes manifest.json. DRIFTLAB_OUTPUT_DIR overrides output_dir.\n";

// Collects output files, stamping each into the manifest as it is written.
struct OutputSink {
  std::string dir;
  RunManifest manifest;

  void emit(const std::string& name, const std::string& content) {
    write_text_file(dir + "/" + name, content);
    manifest.files.push_back({name, fnv1a64(content), content.size()});
  }
  void finish(double wall_seconds) {
    manifest.wall_seconds = wall_seconds;
    write_text_file(dir + "/manifest.json", manifest_json(manifest));
  }
};

std::string fd(double x) { return format_double(x); }

std::string col(const std::string& base, std::size_t i) { return base + "_" + std::to_string(i); }
std::string col2(const std::string& base, std::size_t i, std::size_t j) {
  return base + "_" + std::to_string(i) + "_" + std::to_string(j);
}

std::vector<double> scheme_dates(const RunConfig& cfg) {
  if (cfg.scheme.kind == DateScheme::Kind::deterministic)
    return deterministic_dates(cfg.scheme, cfg.model.horizon_t);
  RngStream rng(cfg.seed, 0, NoiseRole::dates);
  return sample_poisson_dates(cfg.scheme.lambda, cfg.model.horizon_t, rng);
}

MarketPath one_path(const RunConfig& cfg) {
  double h = cfg.h_max > 0 ? cfg.h_max : default_h_max(cfg.model, cfg.scheme);
  auto grid = std::make_shared<const TimeGrid>(
      make_grid(cfg.model, cfg.scheme, scheme_dates(cfg), h));
  return simulate_path(cfg.model, cfg.scheme, std::move(grid), cfg.seed, 0);
}

std::vector<DateScheme> det_schemes(const std::vector<int>& n_list) {
  std::vector<DateScheme> out;
  out.reserve(n_list.size());
  for (int n : n_list) out.push_back(DateScheme::deterministic(n));
  return out;
}

void print_convergence(const ConvergenceReport& rep, const RunConfig& cfg, const char* label) {
  const bool poisson = rep.scheme_kind == DateScheme::Kind::poisson;
  const auto& errors = rep.mean_errors.empty() ? rep.cov_errors : rep.mean_errors;
  for (std::size_t i = 0; i < rep.levels.size(); ++i) {
    std::printf("  %s = %-8s %s = %s", poisson ? "lambda" : "n", fd(rep.levels[i]).c_str(), label,
                fd(errors[i]).c_str());
    if (rep.ci_half[i] > 0) std::printf("  (95%% +/- %s)", fd(rep.ci_half[i]).c_str());
    std::printf("\n");
  }
  if (rep.slope) {
    std::printf("slope of log(%s) on log(%s): %s  (std err %s)\n", label,
                poisson ? "lambda" : "n", fd(rep.slope->slope).c_str(),
                fd(rep.slope->std_err).c_str());
    if (cfg.slope_window_lo && cfg.slope_window_hi) {
      bool inside =
          rep.slope->slope >= *cfg.slope_window_lo && rep.slope->slope <= *cfg.slope_window_hi;
      std::printf("slope window [%s, %s]: %s\n", fd(*cfg.slope_window_lo).c_str(),
                  fd(*cfg.slope_window_hi).c_str(), inside ? "inside" : "OUTSIDE");
    }
  } else {
    std::printf("slope: not fitted (%s)\n", rep.slope_note.c_str());
  }
  std::printf("wall time: %ss\n", fd(rep.wall_seconds).c_str());
}

std::string convergence_csv(const ConvergenceReport& rep) {
  const auto& errors = rep.mean_errors.empty() ? rep.cov_errors : rep.mean_errors;
  CsvBuilder csv({"level", "error", "ci_half", "fitted"});
  for (std::size_t i = 0; i < rep.levels.size(); ++i) {
    std::string fitted;
    if (rep.slope)
      fitted = fd(std::exp(rep.slope->intercept + rep.slope->slope * std::log(rep.levels[i])));
    csv.row({fd(rep.levels[i]), fd(errors[i]), fd(rep.ci_half[i]), fitted});
  }
  return csv.text();
}

// ---- commands ----------------------------------------------------------------------

void cmd_simulate(const RunConfig& cfg, OutputSink& sink) {
  MarketPath path = one_path(cfg);
  const TimeGrid& grid = *path.grid;
  const std::size_t d = path.d;

  std::vector<std::string> header{"t"};
  for (std::size_t i = 0; i < d; ++i) header.push_back(col("mu", i));
  for (std::size_t i = 0; i < d; ++i) header.push_back(col("dr", i));
  for (std::size_t i = 0; i < d; ++i) header.push_back(col("dj", i));
  CsvBuilder csv(header);
  for (std::size_t node = 0; node < grid.n_nodes(); ++node) {
    std::vector<std::string> cells{fd(grid.nodes[node])};
    for (std::size_t i = 0; i < d; ++i) cells.push_back(fd(path.mu_at(node)[i]));
    const bool last = node + 1 == grid.n_nodes();
    for (std::size_t i = 0; i < d; ++i) cells.push_back(last ? "" : fd(path.dr_at(node)[i]));
    for (std::size_t i = 0; i < d; ++i) cells.push_back(last ? "" : fd(path.dj_at(node)[i]));
    csv.row(cells);
  }
  sink.emit("path.csv", csv.text());

  std::vector<std::string> oh{"k", "t"};
  for (std::size_t i = 0; i < d; ++i) oh.push_back(col("z", i));
  CsvBuilder ocsv(oh);
  for (std::size_t k = 0; k < path.n_opinions(); ++k) {
    Opinion op = path.opinion(k);
    std::vector<std::string> cells{std::to_string(k), fd(op.time)};
    for (std::size_t i = 0; i < d; ++i) cells.push_back(fd(op.z[i]));
    ocsv.row(cells);
  }
  sink.emit("opinions.csv", ocsv.text());

  std::printf("simulated one path: %zu nodes, %zu opinions -> %s\n", grid.n_nodes(),
              path.n_opinions(), sink.dir.c_str());
}

void cmd_filter(const RunConfig& cfg, OutputSink& sink) {
  MarketPath path = one_path(cfg);
  const std::size_t d = path.d;
  FilterOptions opt;
  opt.riccati_step = cfg.riccati_step;

  const Regime regimes[] = {Regime::returns_only, Regime::discrete_expert,
                            Regime::continuous_expert, Regime::full_info};
  std::vector<FilterTrajectory> trajs;
  for (Regime r : regimes) trajs.push_back(run_filter(r, cfg.model, cfg.scheme, path, opt));

  std::vector<std::string> header{"t"};
  for (const auto& traj : trajs) {
    const char* lab = regime_label(traj.regime);
    for (std::size_t i = 0; i < d; ++i) header.push_back(col(std::string("m_") + lab, i));
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) header.push_back(col2(std::string("q_") + lab, i, j));
  }
  CsvBuilder csv(header);
  const TimeGrid& grid = *path.grid;
  for (std::size_t node = 0; node < grid.n_nodes(); ++node) {
    std::vector<std::string> cells{fd(grid.nodes[node])};
    for (const auto& traj : trajs) {
      for (std::size_t i = 0; i < d; ++i) cells.push_back(fd(traj.m_at(node)[i]));
      const double* q = traj.q_at(node);
      for (std::size_t i = 0; i < d * d; ++i) cells.push_back(fd(q[i]));
    }
    csv.row(cells);
  }
  sink.emit("filters.csv", csv.text());

  std::vector<std::string> jh{"k", "t"};
  for (std::size_t i = 0; i < d; ++i) jh.push_back(col("m_pre", i));
  for (std::size_t i = 0; i < d; ++i) jh.push_back(col("m_post", i));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) jh.push_back(col2("q_pre", i, j));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) jh.push_back(col2("q_post", i, j));
  CsvBuilder jcsv(jh);
  for (const FilterJump& jump : trajs[1].jumps) {
    std::vector<std::string> cells{std::to_string(jump.k), fd(jump.time)};
    for (std::size_t i = 0; i < d; ++i) cells.push_back(fd(jump.m_pre[i]));
    for (std::size_t i = 0; i < d; ++i) cells.push_back(fd(jump.m_post[i]));
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) cells.push_back(fd(jump.q_pre(i, j)));
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) cells.push_back(fd(jump.q_post(i, j)));
    jcsv.row(cells);
  }
  sink.emit("filter_jumps.csv", jcsv.text());

  std::printf("filtered one path under R, Z, J, F: %zu nodes, %zu opinion updates -> %s\n",
              grid.n_nodes(), trajs[1].jumps.size(), sink.dir.c_str());
}

void cmd_converge_cov(const RunConfig& cfg, OutputSink& sink) {
  ConvergenceReport rep;
  if (cfg.scheme.kind == DateScheme::Kind::deterministic)
    rep = cov_error_deterministic(cfg.model, cfg.n_list, cfg.policy());
  else
    rep = cov_error_poisson(cfg.model, cfg.lambda_list, cfg.p, cfg.n_mc, cfg.seed, cfg.policy());
  sink.emit("converge_cov.csv", convergence_csv(rep));
  std::printf("covariance gap study (%s dates):\n",
              rep.scheme_kind == DateScheme::Kind::poisson ? "Poisson" : "deterministic");
  print_convergence(rep, cfg, "cov_error");
}

void cmd_converge_mean(const RunConfig& cfg, OutputSink& sink) {
  std::vector<DateScheme> schemes;
  if (cfg.scheme.kind == DateScheme::Kind::deterministic) {
    schemes = det_schemes(cfg.n_list);
  } else {
    for (double lam : cfg.lambda_list) schemes.push_back(DateScheme::poisson(lam));
  }
  ConvergenceReport rep =
      mean_error(cfg.model, schemes, cfg.p, cfg.checkpoints, cfg.n_mc, cfg.seed, cfg.policy());
  sink.emit("converge_mean.csv", convergence_csv(rep));
  std::printf("conditional-mean gap study (%s dates, p = %d):\n",
              rep.scheme_kind == DateScheme::Kind::poisson ? "Poisson" : "deterministic", cfg.p);
  print_convergence(rep, cfg, "mean_error");
}

std::string value_row_level(const ValueReport& v) {
  return v.level ? fd(*v.level) : std::string();
}

void cmd_value(const RunConfig& cfg, OutputSink& sink) {
  const DateScheme* scheme = cfg.regime == Regime::discrete_expert ? &cfg.scheme : nullptr;
  ValueReport v =
      value_function(cfg.model, cfg.regime, scheme, cfg.x0, cfg.n_mc, cfg.seed, cfg.policy());
  CsvBuilder csv({"regime", "level", "value", "ci_low", "ci_high", "n_mc", "x0"});
  csv.row({regime_label(v.regime), value_row_level(v), fd(v.value),
           v.has_ci ? fd(v.ci_low) : "", v.has_ci ? fd(v.ci_high) : "",
           v.has_ci ? std::to_string(v.n_mc) : "", fd(v.x0)});
  sink.emit("value.csv", csv.text());
  std::printf("V^%s%s%s = %s", regime_label(v.regime), v.level ? " at level " : "",
              v.level ? fd(*v.level).c_str() : "", fd(v.value).c_str());
  if (v.has_ci) std::printf("  (95%% CI [%s, %s])", fd(v.ci_low).c_str(), fd(v.ci_high).c_str());
  std::printf("\n");
}

void cmd_table2a(const RunConfig& cfg, OutputSink& sink) {
  static const int kLevels[] = {10, 100, 1000, 10000};
  std::vector<ValueReport> rows;
  rows.push_back(value_function(cfg.model, Regime::returns_only, nullptr, cfg.x0, cfg.n_mc,
                                cfg.seed, cfg.policy()));
  for (int n : kLevels) {
    DateScheme s = DateScheme::deterministic(n);
    rows.push_back(value_function(cfg.model, Regime::discrete_expert, &s, cfg.x0, cfg.n_mc,
                                  cfg.seed, cfg.policy()));
  }
  rows.push_back(value_function(cfg.model, Regime::continuous_expert, nullptr, cfg.x0, cfg.n_mc,
                                cfg.seed, cfg.policy()));

  CsvBuilder csv({"investor", "level", "value"});
  for (const auto& v : rows)
    csv.row({regime_label(v.regime), value_row_level(v), fd(v.value)});
  sink.emit("table2a.csv", csv.text());

  std::printf("expected log utility, deterministic information dates:\n");
  for (const auto& v : rows) {
    if (v.level)
      std::printf("  %-2s n = %-6s %s\n", regime_label(v.regime), fd(*v.level).c_str(),
                  fd(v.value).c_str());
    else
      std::printf("  %-2s %-10s %s\n", regime_label(v.regime), "", fd(v.value).c_str());
  }
}

void cmd_table2b(const RunConfig& cfg, OutputSink& sink) {
  std::vector<double> lambdas =
      cfg.lambda_list_given ? cfg.lambda_list : std::vector<double>{10, 100, 1000, 10000};
  CsvBuilder csv({"lambda", "value", "ci_low", "ci_high", "n_mc"});
  std::printf("expected log utility, Poisson information dates (n_mc = %zu):\n", cfg.n_mc);
  for (double lam : lambdas) {
    DateScheme s = DateScheme::poisson(lam);
    ValueReport v = value_function(cfg.model, Regime::discrete_expert, &s, cfg.x0, cfg.n_mc,
                                   cfg.seed, cfg.policy());
    csv.row({fd(lam), fd(v.value), fd(v.ci_low), fd(v.ci_high), std::to_string(v.n_mc)});
    std::printf("  lambda = %-8s %s  (95%% CI [%s, %s])\n", fd(lam).c_str(), fd(v.value).c_str(),
                fd(v.ci_low).c_str(), fd(v.ci_high).c_str());
  }
  sink.emit("table2b.csv", csv.text());
}

void cmd_utility_gap(const RunConfig& cfg, OutputSink& sink) {
  UtilityGapReport rep =
      pathwise_utility_gap(cfg.model, det_schemes(cfg.n_list), cfg.n_mc, cfg.seed, cfg.policy());
  CsvBuilder csv({"n", "gap", "ci_half"});
  for (std::size_t i = 0; i < rep.levels.size(); ++i)
    csv.row({fd(rep.levels[i]), fd(rep.gap[i]), fd(rep.ci_half[i])});
  sink.emit("utility_gap.csv", csv.text());

  std::printf("terminal log-wealth gap, discrete vs continuous expert (n_mc = %zu):\n", rep.n_mc);
  for (std::size_t i = 0; i < rep.levels.size(); ++i)
    std::printf("  n = %-6s gap = %s  (95%% +/- %s)\n", fd(rep.levels[i]).c_str(),
                fd(rep.gap[i]).c_str(), fd(rep.ci_half[i]).c_str());
  if (rep.gap.size() > 1 && rep.gap.front() > 0)
    std::printf("last/first gap ratio: %s\n", fd(rep.gap.back() / rep.gap.front()).c_str());
  std::printf("wall time: %ss\n", fd(rep.wall_seconds).c_str());
}

}  // namespace

int run_cli(int argc, char** argv) {
  if (argc != 3) {
    std::fputs(kUsage, stderr);
    return 2;
  }
  const std::string command = argv[1];
  const std::string cfg_path = argv[2];

  using CommandFn = void (*)(const RunConfig&, OutputSink&);
  struct CommandEntry {
    const char* name;
    CommandFn fn;
  };
  static const CommandEntry kCommands[] = {
      {"simulate", cmd_simulate},         {"filter", cmd_filter},
      {"converge-cov", cmd_converge_cov}, {"converge-mean", cmd_converge_mean},
      {"value", cmd_value},               {"table2a", cmd_table2a},
      {"table2b", cmd_table2b},           {"utility-gap", cmd_utility_gap},
  };
  CommandFn fn = nullptr;
  for (const auto& entry : kCommands)
    if (command == entry.name) fn = entry.fn;
  if (!fn) {
    std::fprintf(stderr, "unknown command '%s'\n\n", command.c_str());
    std::fputs(kUsage, stderr);
    return 2;
  }

  std::string text;
  try {
    text = read_text_file(cfg_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }

  RunConfig cfg;
  try {
    cfg = parse_config(text);
  } catch (const ParseError& e) {
    std::fprintf(stderr, "config error in %s: %s\n", cfg_path.c_str(), e.what());
    return 2;
  } catch (const ValidationFailed& e) {
    std::fprintf(stderr, "config error in %s: %s\n", cfg_path.c_str(), e.what());
    return 2;
  }

  if (const char* env = std::getenv("DRIFTLAB_OUTPUT_DIR"); env && *env) cfg.output_dir = env;

  OutputSink sink;
  sink.dir = cfg.output_dir;
  sink.manifest.command = command;
  sink.manifest.version = kArtifactVersion;
  sink.manifest.seed = cfg.seed;
  sink.manifest.config_text = text;

  const auto t0 = std::chrono::steady_clock::now();
  try {
    fn(cfg, sink);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return 1;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  try {
    sink.finish(wall);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return 1;
  }
  return 0;
}

}  // namespace driftlab
