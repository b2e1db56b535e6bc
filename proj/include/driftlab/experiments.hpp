#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "driftlab/filter.hpp"

namespace driftlab {

struct Degenerate : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shared knobs for the study drivers. Zeros select defaults: the scheme-derived grid
// spacing, one Riccati substep per interval, and quadrature step 5e-4.
struct RunPolicy {
  bool parallel = true;
  double h_max = 0.0;
  double riccati_step = 0.0;
  double quad_step = 0.0;
};

struct SlopeFit {
  double slope = 0.0;
  double std_err = 0.0;
  double intercept = 0.0;  // of log(error) on log(level), for plotting the fitted line
};

// Ordinary least squares of log(error) on log(level). Throws Degenerate on fewer than
// three points or any nonpositive entry. Levels are counts or intensities, so an error
// decaying like level^-r fits slope -r.
SlopeFit fit_loglog_slope(const std::vector<double>& levels, const std::vector<double>& errors);

// One convergence study: per-level errors with an optional log-log fit. Exactly one of
// cov_errors / mean_errors is filled, matching the driver that produced the report.
struct ConvergenceReport {
  DateScheme::Kind scheme_kind = DateScheme::Kind::deterministic;
  std::vector<double> levels;       // n or lambda, strictly increasing
  std::vector<double> cov_errors;   // deterministic: sup_t |Q^Z - Q^J|; Poisson: E[sup_t |.|^p]
  std::vector<double> mean_errors;  // max over checkpoints of E |m^Z - m^J|^p
  std::vector<double> ci_half;      // 95% half-widths, zero where the error is deterministic
  int p = 1;                        // moment order (1 for the deterministic covariance study)
  std::optional<SlopeFit> slope;
  std::string slope_note;
  std::size_t n_mc = 0;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

// Deterministic-date covariance gap: for each n, Q^{Z,n} and Q^J are integrated on one
// common fine grid (every level's dates appear as nodes in every grid) and the sup over
// nodes of the spectral-norm difference is recorded, pre-update values included.
ConvergenceReport cov_error_deterministic(const ModelParams& params, const std::vector<int>& n_list,
                                          const RunPolicy& policy = {});

// Poisson-date covariance gap: per path a date sequence is drawn, both covariance sweeps
// run on that path's grid, and sup_t |Q^Z - Q^J|^p is averaged over n_mc paths.
ConvergenceReport cov_error_poisson(const ModelParams& params,
                                    const std::vector<double>& lambda_list, int p, std::size_t n_mc,
                                    std::uint64_t seed, const RunPolicy& policy = {});

// Conditional-mean gap E |m^Z - m^J|^p, both filters fed the identical path (common
// drift, return and expert noise, common dates). The sup over t is approximated by a max
// over n_checkpoints equally spaced times including the horizon; full_grid_sup replaces
// the checkpoint max with a max over every grid node (memory grows with n_mc * nodes).
ConvergenceReport mean_error(const ModelParams& params, const std::vector<DateScheme>& schemes,
                             int p, int n_checkpoints, std::size_t n_mc, std::uint64_t seed,
                             const RunPolicy& policy = {}, bool full_grid_sup = false);

struct ValueReport {
  Regime regime = Regime::returns_only;
  std::optional<double> level;  // n or lambda when a scheme is involved
  double value = 0.0;
  double ci_low = 0.0, ci_high = 0.0;
  bool has_ci = false;
  std::size_t n_mc = 0;
  double x0 = 1.0;
};

// Expected log utility of the optimal investor: log x0 + (1/2) integral of
// tr((sigma_r sigma_r^T)^{-1} (Sigma_t + m_t m_t^T - E[Q_t])) via composite Simpson
// quadrature between information dates. E[Q] is exact for R, J, F and deterministic-date
// Z; Poisson-date Z averages the integral over n_mc date-sequence draws with a 95% CI.
ValueReport value_function(const ModelParams& params, Regime regime, const DateScheme* scheme,
                           double x0, std::size_t n_mc, std::uint64_t seed,
                           const RunPolicy& policy = {});

// integral over [0, T] of tr((sigma_r sigma_r^T)^{-1} (Sigma_t + m_t m_t^T)) dt,
// the regime-independent part of the value integrand (all of it for full information)
double drift_second_moment_integral(const ModelParams& params, double quad_step);

// pi_t = (sigma_r sigma_r^T)^{-1} m_hat_t at every node, flattened n_nodes x d
std::vector<double> optimal_strategy(const ModelParams& params, const FilterTrajectory& traj);

// Terminal log wealth of a node-indexed strategy along a path, via the Euler accumulation
// log X_{t+h} = log X_t + pi' mu h - (1/2) pi' sigma_r sigma_r' pi h + pi' (dR - mu h).
double terminal_log_wealth(const ModelParams& params, const MarketPath& path,
                           const std::vector<double>& pi, double x0);

struct UtilityGapReport {
  std::vector<double> levels;  // opinion counts n
  std::vector<double> gap;     // E |log X^{Z,n}_T - log X^J_T| under the optimal strategies
  std::vector<double> ci_half;
  std::size_t n_mc = 0;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

// Wealth gap between the discrete-expert and continuous-expert optimal strategies on
// common paths (common random numbers across levels, one shared J leg per path).
UtilityGapReport pathwise_utility_gap(const ModelParams& params,
                                      const std::vector<DateScheme>& schemes, std::size_t n_mc,
                                      std::uint64_t seed, const RunPolicy& policy = {});

// Distributional filter check: over n_mc paths the terminal residual mu_T - m_hat_T
// should have mean zero and empirical covariance matching the filter covariance Q_T.
// Worst z-scores are reported against MC standard errors.
struct ConsistencyReport {
  Regime regime = Regime::returns_only;
  std::size_t n_mc = 0;
  Vec mean_residual;
  SymMatrix emp_cov;
  SymMatrix expected_q;    // Q_T (MC average of it for Poisson dates)
  double max_mean_z = 0.0;
  double max_cov_z = 0.0;
};

ConsistencyReport filter_consistency(const ModelParams& params, Regime regime,
                                     const DateScheme& scheme, std::size_t n_mc,
                                     std::uint64_t seed, const RunPolicy& policy = {});

}  // namespace driftlab
