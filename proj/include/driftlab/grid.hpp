#pragma once

#include <memory>
#include <vector>

#include "driftlab/model.hpp"
#include "driftlab/rng.hpp"

namespace driftlab {

struct BadDates : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Simulation support: every information date is a node, spacing never exceeds h_max.
struct TimeGrid {
  double horizon = 0.0;
  std::vector<double> nodes;           // strictly increasing, nodes[0] == 0, back() == horizon
  std::vector<int> info;               // per node: -1 plain, else opinion index k (0-based)
  std::vector<double> dates;           // dates[k] == time of opinion k
  std::vector<std::size_t> date_node;  // node index holding opinion k

  std::size_t n_nodes() const { return nodes.size(); }
  std::size_t n_intervals() const { return nodes.size() - 1; }
};

// k * T / n for k = 1..n
std::vector<double> deterministic_dates(const DateScheme& scheme, double horizon);

// Strictly increasing Poisson(lambda) jump times in (0, horizon]; consumes one
// exponential gap per arrival plus the final overshoot.
std::vector<double> sample_poisson_dates(double lambda, double horizon, RngStream& rng);

// min(date spacing scale, T/1000) / 4: resolves both expert windows and filter dynamics
double default_h_max(const ModelParams& p, const DateScheme& scheme);

TimeGrid make_grid(const ModelParams& p, const DateScheme& scheme,
                   const std::vector<double>& dates, double h_max,
                   const std::vector<double>& extra_nodes = {});

}  // namespace driftlab
