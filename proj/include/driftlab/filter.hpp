#pragma once

#include <memory>
#include <string>
#include <utility>

#include "driftlab/simulate.hpp"

namespace driftlab {

struct NoConvergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Information regimes: returns only (R), returns plus discrete expert opinions (Z),
// returns plus the continuous expert diffusion (J), full drift observation (F).
enum class Regime { returns_only, discrete_expert, continuous_expert, full_info };

const char* regime_label(Regime r);              // "R", "Z", "J", "F"
Regime regime_from_label(const std::string& s);  // inverse, throws on unknown label

struct FilterState {
  double t = 0.0;
  Vec m_hat;
  SymMatrix q;
};

struct FilterJump {
  int k = -1;  // opinion index
  double time = 0.0;
  Vec m_pre, m_post;
  SymMatrix q_pre, q_post;
};

struct FilterTrajectory {
  Regime regime{};
  std::shared_ptr<const TimeGrid> grid;
  std::size_t d = 0;
  std::vector<double> m;  // n_nodes x d, conditional mean
  std::vector<double> q;  // n_nodes x d*d, conditional covariance (post-update at dates)
  std::vector<FilterJump> jumps;

  const double* m_at(std::size_t node) const { return m.data() + node * d; }
  const double* q_at(std::size_t node) const { return q.data() + node * d * d; }
  FilterState state(std::size_t node) const;
};

// Node-aligned conditional covariance, independent of any observation path, shareable
// read-only across MC paths. Jumps carry the pre/post covariances at information dates
// (their mean fields stay empty).
struct CovarianceTable {
  Regime regime{};
  std::shared_ptr<const TimeGrid> grid;
  std::size_t d = 0;
  std::vector<double> q;  // n_nodes x d*d, post-update at dates
  std::vector<FilterJump> jumps;

  const double* q_at(std::size_t node) const { return q.data() + node * d * d; }
};

struct FilterOptions {
  // Riccati RK4 substep cap; 0 means one substep per grid interval (spacing <= h_max
  // already resolves the dynamics).
  double riccati_step = 0.0;
};

// Right-hand side -alpha q - q alpha + beta beta^T - q M q with M = (sigma_r sigma_r^T)^{-1}
// for R (also Z between dates) and M = (sigma_r sigma_r^T)^{-1} + (sigma_j sigma_j^T)^{-1}
// for J. full_info has no Riccati flow.
SymMatrix riccati_rhs(Regime regime, const ModelParams& p, const SymMatrix& q);

// Classical RK4 with fixed substep <= step, symmetrized every substep.
SymMatrix integrate_riccati(Regime regime, const ModelParams& p, const SymMatrix& q0, double t0,
                            double t1, double step);

// Bayesian date update, symmetric form Q - Q (Q+Gamma)^{-1} Q.
SymMatrix update_covariance(const SymMatrix& q_pre, const SymMatrix& gamma);

// Posterior mean, algebraically Gamma(Q+Gamma)^{-1} m + Q(Q+Gamma)^{-1} z, evaluated as
// m + Q (Q+Gamma)^{-1} (z - m) off one SPD solve.
Vec update_mean(const Vec& m_pre, const SymMatrix& q_pre, const SymMatrix& gamma, const Vec& z);

// Euler step of the conditional-mean SDE driven by observed increments; q is the
// covariance at the interval start. dj must be present exactly for the J regime.
Vec propagate_mean(Regime regime, const ModelParams& p, const FilterState& state, const Vec& dr,
                   const Vec* dj, double h);

// Covariance sweep along a grid: deterministic for every regime (dates enter only through
// the grid's info flags, used by the Z regime's updates).
CovarianceTable covariance_table(Regime regime, const ModelParams& p, const DateScheme& scheme,
                                 std::shared_ptr<const TimeGrid> grid,
                                 const FilterOptions& options = {});

// Full filter along a path. A cached CovarianceTable for the same regime/grid skips the
// per-path Riccati work; results are bit-identical with and without the cache.
FilterTrajectory run_filter(Regime regime, const ModelParams& p, const DateScheme& scheme,
                            const MarketPath& path, const FilterOptions& options = {},
                            const CovarianceTable* cached = nullptr);

struct StationaryQ {
  SymMatrix q;      // Riccati fixed point
  double c_q = 0.0; // sup of the covariance spectral norm along the integration
};

// Integrates the R- or J-regime Riccati flow from sigma0 until the rhs norm falls
// below tol; throws NoConvergence past t = 100 / lambda_min(alpha).
StationaryQ stationary_q(Regime regime, const ModelParams& p, double tol);

}  // namespace driftlab
