#include "driftlab/grid.hpp"

#include <algorithm>
#include <cmath>

namespace driftlab {

namespace {

double merge_eps(double horizon) { return 1e-12 * std::max(1.0, horizon); }

}  // namespace

std::vector<double> deterministic_dates(const DateScheme& scheme, double horizon) {
  if (scheme.kind != DateScheme::Kind::deterministic)
    throw std::invalid_argument("deterministic_dates: wrong scheme kind");
  std::vector<double> dates(scheme.n);
  for (int k = 1; k <= scheme.n; ++k)
    dates[k - 1] = horizon * static_cast<double>(k) / static_cast<double>(scheme.n);
  dates.back() = horizon;  // guard the k = n rounding so the last date is exactly T
  return dates;
}

std::vector<double> sample_poisson_dates(double lambda, double horizon, RngStream& rng) {
  if (!(lambda > 0.0)) throw std::invalid_argument("sample_poisson_dates: lambda must be positive");
  // arrivals closer than twice the grid merge width collapse into one opinion date
  // (a null event in continuous time, but reachable in floating point at high lambda)
  const double min_gap = 2e-12 * std::max(1.0, horizon);
  std::vector<double> dates;
  double t = rng.exponential(lambda);
  while (t <= horizon) {
    if (dates.empty() ? t > min_gap : t - dates.back() > min_gap) dates.push_back(t);
    t += rng.exponential(lambda);
  }
  return dates;
}

double default_h_max(const ModelParams& p, const DateScheme& scheme) {
  const double date_scale = scheme.kind == DateScheme::Kind::deterministic
                                ? scheme.delta_n(p.horizon_t)
                                : 1.0 / scheme.lambda;
  return std::min(date_scale, p.horizon_t / 1000.0) / 4.0;
}

TimeGrid make_grid(const ModelParams& p, const DateScheme& scheme,
                   const std::vector<double>& dates, double h_max,
                   const std::vector<double>& extra_nodes) {
  if (!(h_max > 0.0)) throw std::invalid_argument("make_grid: h_max must be positive");
  if (scheme.kind == DateScheme::Kind::deterministic &&
      dates.size() != static_cast<std::size_t>(scheme.n))
    throw BadDates("make_grid: deterministic scheme expects exactly n dates");

  const double T = p.horizon_t;
  const double eps = merge_eps(T);
  for (std::size_t k = 0; k < dates.size(); ++k) {
    if (!(dates[k] > eps) || dates[k] > T)
      throw BadDates("make_grid: date outside (0, T]");
    if (k > 0 && !(dates[k] > dates[k - 1]))
      throw BadDates("make_grid: dates not strictly increasing");
    if (k > 0 && dates[k] - dates[k - 1] <= eps)
      throw BadDates("make_grid: dates too close to separate");
  }

  // special points: 0, T, every date, every extra node; dates win merge conflicts so the
  // info flags land on exactly the requested times
  struct Special {
    double t;
    int date_index;  // -1 if not a date
  };
  std::vector<Special> special;
  special.push_back({0.0, -1});
  special.push_back({T, -1});
  for (double x : extra_nodes) {
    if (x < -eps || x > T + eps)
      throw std::invalid_argument("make_grid: extra node outside [0, T]");
    special.push_back({std::clamp(x, 0.0, T), -1});
  }
  for (std::size_t k = 0; k < dates.size(); ++k)
    special.push_back({dates[k], static_cast<int>(k)});

  std::stable_sort(special.begin(), special.end(),
                   [](const Special& a, const Special& b) { return a.t < b.t; });
  std::vector<Special> merged;
  for (const Special& s : special) {
    if (!merged.empty() && s.t - merged.back().t <= eps) {
      if (s.date_index >= 0) {
        merged.back().t = s.t;  // collapse onto the date's exact value
        merged.back().date_index = s.date_index;
      }
      continue;
    }
    merged.push_back(s);
  }

  TimeGrid g;
  g.horizon = T;
  g.dates = dates;
  g.date_node.resize(dates.size());
  for (std::size_t s = 0; s + 1 < merged.size(); ++s) {
    g.nodes.push_back(merged[s].t);
    g.info.push_back(merged[s].date_index);
    const double a = merged[s].t, b = merged[s + 1].t;
    const auto nsub =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((b - a) / h_max - 1e-12)));
    for (std::size_t j = 1; j < nsub; ++j) {
      g.nodes.push_back(a + (b - a) * static_cast<double>(j) / static_cast<double>(nsub));
      g.info.push_back(-1);
    }
  }
  g.nodes.push_back(merged.back().t);
  g.info.push_back(merged.back().date_index);

  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    if (g.info[i] >= 0) g.date_node[static_cast<std::size_t>(g.info[i])] = i;
  return g;
}

}  // namespace driftlab
