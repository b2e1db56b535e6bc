#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>

#include "driftlab/config.hpp"
#include "driftlab/simulate.hpp"

using namespace driftlab;

namespace {

std::shared_ptr<const TimeGrid> grid_for(const ModelParams& p, const DateScheme& s, double h,
                                         const std::vector<double>& extra = {}) {
  std::vector<double> dates = deterministic_dates(s, p.horizon_t);
  return std::make_shared<const TimeGrid>(make_grid(p, s, dates, h, extra));
}

}  // namespace

TEST_CASE("simulation is a pure function of (seed, path index)") {
  ModelParams p = default_model_params();
  DateScheme s = DateScheme::deterministic(5);
  auto g = grid_for(p, s, 0.01);
  PathSimulator sim(p, s, g);

  MarketPath a = sim.simulate(42, 3);
  MarketPath b = sim.simulate(42, 3);
  CHECK(a.mu == b.mu);
  CHECK(a.returns_incr == b.returns_incr);
  CHECK(a.expert_incr == b.expert_incr);
  CHECK(a.opinion_z == b.opinion_z);

  MarketPath c = sim.simulate(42, 4);
  CHECK(a.mu != c.mu);
  MarketPath d = sim.simulate(43, 3);
  CHECK(a.mu != d.mu);
}

TEST_CASE("hidden drift matches its exact marginal moments") {
  ModelParams p = default_model_params();
  DateScheme s = DateScheme::deterministic(2);
  auto g = grid_for(p, s, 0.05);
  PathSimulator sim(p, s, g);
  const DriftMoments& dm = sim.moments();

  const int n_mc = 20000;
  const std::size_t last = g->n_nodes() - 1;
  double sum = 0.0, sum2 = 0.0, sum0 = 0.0, sum02 = 0.0;
  for (int i = 0; i < n_mc; ++i) {
    MarketPath path = sim.simulate(7, static_cast<std::uint64_t>(i));
    const double mu_t = path.mu_at(last)[0];
    sum += mu_t;
    sum2 += mu_t * mu_t;
    const double mu_0 = path.mu_at(0)[0];
    sum0 += mu_0;
    sum02 += mu_0 * mu_0;
  }
  const double mean_t = sum / n_mc, var_t = sum2 / n_mc - mean_t * mean_t;
  const double mean_0 = sum0 / n_mc, var_0 = sum02 / n_mc - mean_0 * mean_0;

  const double m_exact = dm.mean(1.0)[0];
  const double v_exact = dm.cov(1.0)(0, 0);
  CHECK(std::abs(mean_t - m_exact) < 4.0 * std::sqrt(v_exact / n_mc));
  CHECK(std::abs(var_t - v_exact) < 4.0 * v_exact * std::sqrt(2.0 / n_mc));

  CHECK(std::abs(mean_0 - 0.05) < 4.0 * std::sqrt(0.2 / n_mc));
  CHECK(std::abs(var_0 - 0.2) < 4.0 * 0.2 * std::sqrt(2.0 / n_mc));
}

TEST_CASE("observation increments carry left-endpoint drift plus scaled Brownian noise") {
  ModelParams p = default_model_params();
  DateScheme s = DateScheme::deterministic(4);
  auto g = grid_for(p, s, 2.5e-4);
  PathSimulator sim(p, s, g);
  MarketPath path = sim.simulate(11, 0);

  const std::size_t n_iv = g->n_intervals();
  double chi_r = 0.0, chi_j = 0.0;
  for (std::size_t iv = 0; iv < n_iv; ++iv) {
    const double h = g->nodes[iv + 1] - g->nodes[iv];
    const double mu = path.mu_at(iv)[0];
    const double zr = (path.dr_at(iv)[0] - mu * h) / (0.25 * std::sqrt(h));
    const double zj = (path.dj_at(iv)[0] - mu * h) / (0.20 * std::sqrt(h));
    chi_r += zr * zr;
    chi_j += zj * zj;
  }
  // normalized chi-square: mean 1, sd sqrt(2/n)
  const double n = static_cast<double>(n_iv);
  CHECK(std::abs(chi_r / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(chi_j / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("deterministic opinions reconstruct from the stored forward windows") {
  ModelParams p = default_model_params();
  const int n_op = 5;
  DateScheme s = DateScheme::deterministic(n_op);
  auto g = grid_for(p, s, 0.01);
  PathSimulator sim(p, s, g);
  MarketPath path = sim.simulate(3, 2);
  const double delta = 1.0 / n_op;

  REQUIRE(path.n_opinions() == static_cast<std::size_t>(n_op));
  for (std::size_t k = 0; k < path.n_opinions(); ++k) {
    Opinion op = path.opinion(k);
    const double mu_k = path.mu_at(g->date_node[k])[0];
    const double rebuilt = mu_k + (1.0 / delta) * 0.2 * path.window_at(k)[0];
    CHECK(op.z[0] == doctest::Approx(rebuilt).epsilon(1e-13));
    CHECK(op.time == doctest::Approx((static_cast<double>(k) + 1) * delta).epsilon(1e-13));
  }

  // windows before the last reproduce as in-grid increment sums bit for bit
  for (std::size_t k = 0; k + 1 < path.n_opinions(); ++k) {
    double acc = 0.0;
    for (std::size_t iv = 0; iv < g->n_intervals(); ++iv) {
      const double t = g->nodes[iv];
      if (t >= g->dates[k] - 1e-12 && t < g->dates[k + 1] - 1e-12) acc += path.wj_at(iv)[0];
    }
    CHECK(path.window_at(k)[0] == doctest::Approx(acc).epsilon(1e-12));
  }
}

TEST_CASE("poisson opinions use fixed windows of width 1/lambda") {
  ModelParams p = default_model_params();
  const double lambda = 8.0;
  DateScheme s = DateScheme::poisson(lambda);
  RngStream rng(5, 0, NoiseRole::dates);
  std::vector<double> dates = sample_poisson_dates(lambda, 1.0, rng);
  auto g = std::make_shared<const TimeGrid>(make_grid(p, s, dates, 0.01));
  PathSimulator sim(p, s, g);
  MarketPath path = sim.simulate(5, 0);

  REQUIRE(path.n_opinions() == dates.size());
  for (std::size_t k = 0; k < path.n_opinions(); ++k) {
    const double mu_k = path.mu_at(g->date_node[k])[0];
    const double rebuilt = mu_k + lambda * 0.2 * path.window_at(k)[0];
    CHECK(path.opinion(k).z[0] == doctest::Approx(rebuilt).epsilon(1e-13));
  }
}

TEST_CASE("opinion noise has the advertised conditional moments") {
  ModelParams p = default_model_params();
  ExpertMomentReport det = given_mu_expert_cov_check(p, DateScheme::deterministic(10), 10000, 21);
  CHECK(det.gamma(0, 0) == doctest::Approx(10.0 * 0.04).epsilon(1e-12));
  CHECK(det.max_mean_z < 4.0);
  CHECK(det.max_cov_z < 4.0);

  ExpertMomentReport poi = given_mu_expert_cov_check(p, DateScheme::poisson(10.0), 10000, 22);
  CHECK(poi.gamma(0, 0) == doctest::Approx(10.0 * 0.04).epsilon(1e-12));
  CHECK(poi.max_mean_z < 4.0);
  CHECK(poi.max_cov_z < 4.0);
}

TEST_CASE("expert precision by scheme") {
  ModelParams p = default_model_params();
  CHECK(scheme_gamma(p, DateScheme::deterministic(10))(0, 0) == doctest::Approx(0.4).epsilon(1e-13));
  CHECK(scheme_gamma(p, DateScheme::poisson(100.0))(0, 0) == doctest::Approx(4.0).epsilon(1e-13));
}

TEST_CASE("restriction to a coarser grid re-expresses the same path") {
  ModelParams p = default_model_params();
  DateScheme s = DateScheme::deterministic(4);
  auto coarse = grid_for(p, s, 0.025);
  auto fine = grid_for(p, s, 0.00625, coarse->nodes);
  PathSimulator sim(p, s, fine);
  MarketPath fp = sim.simulate(9, 1);
  MarketPath cp = restrict_path(fp, coarse);

  REQUIRE(cp.grid->n_nodes() == coarse->n_nodes());
  // drift copied at matching nodes
  std::size_t fi = 0;
  for (std::size_t ci = 0; ci < coarse->n_nodes(); ++ci) {
    while (fine->nodes[fi] < coarse->nodes[ci] - 1e-12) ++fi;
    CHECK(cp.mu_at(ci)[0] == fp.mu_at(fi)[0]);
  }
  // increments sum left to right
  double total_fine = 0.0, total_coarse = 0.0;
  for (std::size_t iv = 0; iv < fine->n_intervals(); ++iv) total_fine += fp.dr_at(iv)[0];
  for (std::size_t iv = 0; iv < coarse->n_intervals(); ++iv) total_coarse += cp.dr_at(iv)[0];
  CHECK(total_coarse == doctest::Approx(total_fine).epsilon(1e-12));
  // opinions carry over unchanged
  CHECK(cp.opinion_z == fp.opinion_z);
}

TEST_CASE("a mismatched grid is rejected") {
  ModelParams p = default_model_params();
  DateScheme s = DateScheme::deterministic(4);
  auto fine = grid_for(p, s, 0.01);
  PathSimulator sim(p, s, fine);
  MarketPath fp = sim.simulate(9, 1);
  // coarse grid with a node the fine grid does not contain
  auto alien = grid_for(p, s, 0.025, {0.0301});
  CHECK_THROWS_AS(restrict_path(fp, alien), std::invalid_argument);
}
