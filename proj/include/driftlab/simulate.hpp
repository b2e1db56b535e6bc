#pragma once

#include <cstdint>
#include <memory>

#include "driftlab/grid.hpp"
#include "driftlab/model.hpp"

namespace driftlab {

struct GridMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Opinion {
  double time;
  Vec z;
};

// One coupled realization of the hidden drift, both observation diffusions, the raw
// expert Brownian increments, and the expert opinions. Flat row blocks of width d
// (l_noise for W^J rows); interval i spans [nodes[i], nodes[i+1]].
struct MarketPath {
  std::shared_ptr<const TimeGrid> grid;
  DateScheme scheme;
  std::size_t d = 0, l = 0;
  std::vector<double> mu;            // n_nodes x d, hidden drift at nodes
  std::vector<double> returns_incr;  // n_intervals x d, dR
  std::vector<double> expert_incr;   // n_intervals x d, dJ
  std::vector<double> wj_incr;       // n_intervals x l, raw W^J increments
  std::vector<double> window_incr;   // n_opinions x l, W^J over each opinion's window
  std::vector<double> opinion_z;     // n_opinions x d

  std::size_t n_opinions() const { return grid->dates.size(); }
  const double* mu_at(std::size_t node) const { return mu.data() + node * d; }
  const double* dr_at(std::size_t iv) const { return returns_incr.data() + iv * d; }
  const double* dj_at(std::size_t iv) const { return expert_incr.data() + iv * d; }
  const double* wj_at(std::size_t iv) const { return wj_incr.data() + iv * l; }
  const double* window_at(std::size_t k) const { return window_incr.data() + k * l; }
  Opinion opinion(std::size_t k) const;
};

// Expert-opinion precision matrix of a scheme: (n/T) sigma_j sigma_j^T or
// lambda sigma_j sigma_j^T.
SymMatrix scheme_gamma(const ModelParams& p, const DateScheme& scheme);

// Grid-bound simulator: caches the exact OU transition (e^{-alpha h} and the square root
// of the transition covariance) per distinct interval length, plus the expert-window
// bookkeeping. Immutable after construction; simulate() is pure, so one instance can
// serve concurrent workers.
class PathSimulator {
public:
  PathSimulator(const ModelParams& p, const DateScheme& scheme,
                std::shared_ptr<const TimeGrid> grid);
  PathSimulator(const DriftMoments& dm, const DateScheme& scheme,
                std::shared_ptr<const TimeGrid> grid);

  MarketPath simulate(std::uint64_t seed, std::uint64_t path_index) const;
  const TimeGrid& grid() const { return *grid_; }
  const DriftMoments& moments() const { return dm_; }

private:
  void build();

  DriftMoments dm_;
  DateScheme scheme_;
  std::shared_ptr<const TimeGrid> grid_;

  std::vector<std::size_t> h_slot_;        // per interval -> transition-cache slot
  std::vector<double> trans_e_, trans_c_;  // slot-major d*d blocks: e^{-alpha h}, sqrt(cov)
  std::vector<double> slot_h_;

  // deterministic scheme: window k < n-1 spans grid intervals [win_begin, win_end)
  std::vector<std::size_t> win_begin_, win_end_;
  double tail_len_ = 0.0;  // last window's stretch past the horizon

  // poisson scheme: elementary partition of grid-and-window boundaries
  struct ElemInterval {
    double len;
    std::ptrdiff_t grid_iv;  // -1 when past the horizon
    std::ptrdiff_t window;   // -1 when outside every window
  };
  std::vector<ElemInterval> elems_;
};

// Convenience wrapper building a one-shot PathSimulator.
MarketPath simulate_path(const ModelParams& p, const DateScheme& scheme,
                         std::shared_ptr<const TimeGrid> grid, std::uint64_t seed,
                         std::uint64_t path_index);

// Re-expresses a fine-grid path on a coarse grid whose nodes all appear in the fine grid:
// increments are summed left-to-right, mu is copied at matching nodes, opinions carry over.
MarketPath restrict_path(const MarketPath& fine, std::shared_ptr<const TimeGrid> coarse);

// MC check that opinions have the advertised conditional moments given the drift:
// pools (Z_k - mu_{date k}) over paths and opinions, compares mean to 0 and covariance to
// the scheme's Gamma, both as max |deviation| / MC standard error.
struct ExpertMomentReport {
  SymMatrix gamma;
  Vec mean_dev;       // pooled mean of Z_k - mu
  SymMatrix emp_cov;  // pooled covariance
  double max_mean_z = 0.0;
  double max_cov_z = 0.0;
  std::size_t samples = 0;
};
ExpertMomentReport given_mu_expert_cov_check(const ModelParams& p, const DateScheme& scheme,
                                             int n_mc, std::uint64_t seed);

}  // namespace driftlab
