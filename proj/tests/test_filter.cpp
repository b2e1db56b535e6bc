#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>

#include "driftlab/config.hpp"
#include "driftlab/filter.hpp"

using namespace driftlab;

namespace {

// Scalar Riccati q' = -2 alpha q + beta^2 - M q^2 = -M (q - a)(q - b) with roots a > 0 > b
// integrates in closed form: (q - a)/(q - b) = C e^{-M (a - b) t}.
double riccati_closed_form(double q0, double m, double a, double b, double t) {
  const double c = (q0 - a) / (q0 - b);
  const double s = c * std::exp(-m * (a - b) * t);
  return (a - b * s) / (1.0 - s);
}

std::shared_ptr<const TimeGrid> det_grid(const ModelParams& p, const DateScheme& s, double h,
                                         const std::vector<double>& extra = {}) {
  return std::make_shared<const TimeGrid>(
      make_grid(p, s, deterministic_dates(s, p.horizon_t), h, extra));
}

SymMatrix random_spd(std::size_t d, RngStream& rng, double floor) {
  Matrix g(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) g(i, j) = rng.gaussian();
  Matrix a = g * transpose(g);
  for (std::size_t i = 0; i < d; ++i) a(i, i) += floor;
  return SymMatrix::from(a);
}

}  // namespace

TEST_CASE("regime labels round-trip") {
  for (Regime r : {Regime::returns_only, Regime::discrete_expert, Regime::continuous_expert,
                   Regime::full_info}) {
    CHECK(regime_from_label(regime_label(r)) == r);
  }
  CHECK_THROWS_AS(regime_from_label("X"), std::invalid_argument);
}

TEST_CASE("returns-only covariance follows the scalar closed form") {
  // alpha = 3, beta = 1, M = 1/0.0625 = 16: roots 0.125 and -0.5
  ModelParams p = default_model_params();
  const double a = 0.125, b = -0.5, m = 16.0;
  for (double t : {0.05, 0.2, 0.5, 1.0}) {
    SymMatrix q = integrate_riccati(Regime::returns_only, p, p.sigma0, 0.0, t, 1e-3);
    CHECK(q(0, 0) == doctest::Approx(riccati_closed_form(0.2, m, a, b, t)).epsilon(1e-9));
  }
  // q(1) from the closed form, fixed reference value
  SymMatrix q1 = integrate_riccati(Regime::returns_only, p, p.sigma0, 0.0, 1.0, 1e-3);
  CHECK(q1(0, 0) == doctest::Approx(0.1250030410).epsilon(1e-7));
}

TEST_CASE("continuous-expert covariance follows the scalar closed form") {
  // M = 16 + 25 = 41: q' = -6q + 1 - 41 q^2, roots (-6 +/- sqrt(200)) / 82
  ModelParams p = default_model_params();
  const double root = std::sqrt(200.0);
  const double a = (-6.0 + root) / 82.0, b = (-6.0 - root) / 82.0;
  for (double t : {0.1, 0.4, 1.0}) {
    SymMatrix q = integrate_riccati(Regime::continuous_expert, p, p.sigma0, 0.0, t, 1e-3);
    CHECK(q(0, 0) == doctest::Approx(riccati_closed_form(0.2, 41.0, a, b, t)).epsilon(1e-9));
  }
}

TEST_CASE("stationary covariances match the quadratic-formula roots") {
  ModelParams p = default_model_params();
  StationaryQ r = stationary_q(Regime::returns_only, p, 1e-10);
  CHECK(r.q(0, 0) == doctest::Approx(0.125).epsilon(1e-6));
  CHECK(r.c_q == doctest::Approx(0.2).epsilon(1e-9));  // decreasing from sigma0

  StationaryQ j = stationary_q(Regime::continuous_expert, p, 1e-10);
  CHECK(j.q(0, 0) == doctest::Approx((-6.0 + std::sqrt(200.0)) / 82.0).epsilon(1e-6));

  CHECK_THROWS_AS(stationary_q(Regime::full_info, p, 1e-10), std::invalid_argument);
}

TEST_CASE("date update is the conjugate-Gaussian posterior") {
  // prior N(m, Q), observation z = mu + noise with covariance G:
  // posterior covariance (Q^{-1} + G^{-1})^{-1}, mean cov (Q^{-1} m + G^{-1} z)
  RngStream rng(101, 0, NoiseRole::drift_noise);
  int checked = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t d = 1 + rep % 3;
    SymMatrix q = random_spd(d, rng, 0.05);
    SymMatrix g = random_spd(d, rng, 0.05);
    Vec m(d), z(d);
    for (std::size_t i = 0; i < d; ++i) {
      m[i] = rng.gaussian();
      z[i] = rng.gaussian();
    }

    SymMatrix post = update_covariance(q, g);
    Vec mean = update_mean(m, q, g, z);

    SymMatrix ref_cov = inverse_spd(SymMatrix::from(inverse_spd(q).mat() + inverse_spd(g).mat()));
    Vec qi_m = inverse_spd(q).mat() * m;
    Vec gi_z = inverse_spd(g).mat() * z;
    Vec rhs(d);
    for (std::size_t i = 0; i < d; ++i) rhs[i] = qi_m[i] + gi_z[i];
    Vec ref_mean = ref_cov.mat() * rhs;

    for (std::size_t i = 0; i < d; ++i) {
      CHECK(std::abs(mean[i] - ref_mean[i]) < 1e-10);
      for (std::size_t jj = 0; jj < d; ++jj) CHECK(std::abs(post(i, jj) - ref_cov(i, jj)) < 1e-10);
    }
    ++checked;
  }
  CHECK(checked == 1000);
}

TEST_CASE("date updates never increase the covariance") {
  RngStream rng(202, 0, NoiseRole::drift_noise);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t d = 1 + rep % 4;
    SymMatrix q = random_spd(d, rng, 0.02);
    SymMatrix g = random_spd(d, rng, 0.02);
    SymMatrix post = update_covariance(q, g);
    CHECK(loewner_leq(post, q, 1e-10 * (1.0 + spectral_norm(q))));
    CHECK(min_eigenvalue(post) > -1e-12);
  }
}

TEST_CASE("update shrinkage obeys the resolvent bound") {
  // Q - Q(Q + kappa S)^{-1} kappa S = Q (Q + kappa S)^{-1} Q, so the update decrement is
  // bounded by sup|Q|^2 |S^{-1}| / kappa along any discrete-expert trajectory.
  ModelParams p = default_model_params();
  SymMatrix s_inv = inverse_spd(SymMatrix::from(p.sigma_j * transpose(p.sigma_j)));
  const double s_inv_norm = spectral_norm(s_inv);

  for (int n : {10, 40, 160}) {
    DateScheme s = DateScheme::deterministic(n);
    auto grid = det_grid(p, s, default_h_max(p, s));
    CovarianceTable tab = covariance_table(Regime::discrete_expert, p, s, grid);

    double c_q = 0.0;
    for (std::size_t node = 0; node < grid->n_nodes(); ++node) {
      SymMatrix q(1);
      q.set(0, 0, tab.q_at(node)[0]);
      c_q = std::max(c_q, spectral_norm(q));
    }
    for (const FilterJump& jump : tab.jumps) c_q = std::max(c_q, spectral_norm(jump.q_pre));

    const double kappa = static_cast<double>(n) / p.horizon_t;
    const double bound = c_q * c_q * s_inv_norm / kappa;
    for (const FilterJump& jump : tab.jumps) {
      const double dec = spectral_norm(SymMatrix::from(jump.q_pre.mat() - jump.q_post.mat()));
      CHECK(dec <= bound * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("more information means smaller covariance at every node") {
  ModelParams p = default_model_params();
  DateScheme s = DateScheme::deterministic(10);
  auto grid = det_grid(p, s, 1e-3);
  CovarianceTable qr = covariance_table(Regime::returns_only, p, s, grid);
  CovarianceTable qz = covariance_table(Regime::discrete_expert, p, s, grid);
  CovarianceTable qj = covariance_table(Regime::continuous_expert, p, s, grid);

  for (std::size_t node = 0; node < grid->n_nodes(); ++node) {
    const double r = qr.q_at(node)[0];
    CHECK(qz.q_at(node)[0] <= r + 1e-12);
    CHECK(qj.q_at(node)[0] <= r + 1e-12);
    CHECK(qj.q_at(node)[0] >= -1e-14);
  }
  // discrete updates recorded pre and post, matching the date count
  REQUIRE(qz.jumps.size() == 10);
  for (const FilterJump& jump : qz.jumps) {
    CHECK(jump.q_post(0, 0) < jump.q_pre(0, 0));
  }
  // full information has zero covariance everywhere
  CovarianceTable qf = covariance_table(Regime::full_info, p, s, grid);
  for (std::size_t node = 0; node < grid->n_nodes(); ++node) CHECK(qf.q_at(node)[0] == 0.0);
}

TEST_CASE("mean propagation matches the hand-written Euler step") {
  ModelParams p = default_model_params();
  FilterState st;
  st.t = 0.3;
  st.m_hat = {0.11};
  st.q = SymMatrix::diag({0.13});
  const double h = 0.004;
  Vec dr{0.0021};
  Vec dj{-0.0017};

  // m + alpha (delta - m) h + q M_R (dr - m h), M_R = 16
  const double expect_r = 0.11 + 3.0 * (0.05 - 0.11) * h + 0.13 * 16.0 * (0.0021 - 0.11 * h);
  Vec mr = propagate_mean(Regime::returns_only, p, st, dr, nullptr, h);
  CHECK(mr[0] == doctest::Approx(expect_r).epsilon(1e-14));

  // J adds q M_J (dj - m h), M_J = 25
  const double expect_j = expect_r + 0.13 * 25.0 * (-0.0017 - 0.11 * h);
  Vec mj = propagate_mean(Regime::continuous_expert, p, st, dr, &dj, h);
  CHECK(mj[0] == doctest::Approx(expect_j).epsilon(1e-14));

  // expert increment must be present exactly for the continuous-expert regime
  CHECK_THROWS_AS(propagate_mean(Regime::returns_only, p, st, dr, &dj, h), std::invalid_argument);
  CHECK_THROWS_AS(propagate_mean(Regime::continuous_expert, p, st, dr, nullptr, h),
                  std::invalid_argument);
}

TEST_CASE("full-information filter pins the drift with zero covariance") {
  ModelParams p = default_model_params();
  DateScheme s = DateScheme::deterministic(5);
  auto grid = det_grid(p, s, 0.01);
  MarketPath path = simulate_path(p, s, grid, 77, 0);
  FilterTrajectory f = run_filter(Regime::full_info, p, s, path);
  CHECK(f.m == path.mu);
  for (double v : f.q) CHECK(v == 0.0);
}

TEST_CASE("no opinions means the discrete-expert filter is the returns-only filter") {
  ModelParams p = default_model_params();
  DateScheme s = DateScheme::poisson(1e-12);  // a realization with an empty date list
  auto grid = std::make_shared<const TimeGrid>(make_grid(p, s, {}, 2.5e-4));
  MarketPath path = simulate_path(p, s, grid, 31, 0);

  FilterTrajectory fr = run_filter(Regime::returns_only, p, s, path);
  FilterTrajectory fz = run_filter(Regime::discrete_expert, p, s, path);
  CHECK(fr.m == fz.m);
  CHECK(fr.q == fz.q);
  CHECK(fz.jumps.empty());
}

TEST_CASE("cached covariance tables change nothing") {
  ModelParams p = default_model_params();
  DateScheme s = DateScheme::deterministic(10);
  auto grid = det_grid(p, s, 2.5e-4);
  PathSimulator sim(p, s, grid);

  for (Regime r : {Regime::returns_only, Regime::discrete_expert, Regime::continuous_expert}) {
    CovarianceTable tab = covariance_table(r, p, s, grid);
    for (int i = 0; i < 3; ++i) {
      MarketPath path = sim.simulate(55, static_cast<std::uint64_t>(i));
      FilterTrajectory plain = run_filter(r, p, s, path);
      FilterTrajectory cached = run_filter(r, p, s, path, {}, &tab);
      CHECK(plain.m == cached.m);
      CHECK(plain.q == cached.q);
      REQUIRE(plain.jumps.size() == cached.jumps.size());
      for (std::size_t k = 0; k < plain.jumps.size(); ++k) {
        CHECK(plain.jumps[k].m_post == cached.jumps[k].m_post);
        CHECK(plain.jumps[k].q_pre(0, 0) == cached.jumps[k].q_pre(0, 0));
      }
    }
  }
}

TEST_CASE("filter trajectory bookkeeping lines up with the grid") {
  ModelParams p = default_model_params();
  DateScheme s = DateScheme::deterministic(4);
  auto grid = det_grid(p, s, 0.005);
  MarketPath path = simulate_path(p, s, grid, 5, 0);
  FilterTrajectory f = run_filter(Regime::discrete_expert, p, s, path);

  CHECK(f.d == 1);
  CHECK(f.m.size() == grid->n_nodes());
  CHECK(f.q.size() == grid->n_nodes());
  REQUIRE(f.jumps.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    const FilterJump& jump = f.jumps[k];
    CHECK(jump.k == static_cast<int>(k));
    CHECK(jump.time == doctest::Approx(grid->dates[k]).epsilon(1e-14));
    // the stored node value is the post-update state
    CHECK(f.q_at(grid->date_node[k])[0] == jump.q_post(0, 0));
    CHECK(f.m_at(grid->date_node[k])[0] == jump.m_post[0]);
  }
  FilterState st = f.state(grid->date_node[2]);
  CHECK(st.t == doctest::Approx(grid->dates[2]).epsilon(1e-14));
  CHECK(st.m_hat[0] == f.m_at(grid->date_node[2])[0]);
}

TEST_CASE("covariance flow is insensitive to the extra substep knob at fine grids") {
  ModelParams p = default_model_params();
  DateScheme s = DateScheme::deterministic(10);
  auto grid = det_grid(p, s, 2.5e-4);
  FilterOptions coarse;  // one substep per interval
  FilterOptions fine;
  fine.riccati_step = 5e-5;
  CovarianceTable a = covariance_table(Regime::discrete_expert, p, s, grid, coarse);
  CovarianceTable b = covariance_table(Regime::discrete_expert, p, s, grid, fine);
  double worst = 0.0;
  for (std::size_t node = 0; node < grid->n_nodes(); ++node)
    worst = std::max(worst, std::abs(a.q_at(node)[0] - b.q_at(node)[0]));
  CHECK(worst < 1e-12);
}

TEST_CASE("two-asset filter keeps covariances symmetric and ordered") {
  ModelParams p;
  p.d = 2;
  p.m_noise = 2;
  p.l_noise = 2;
  p.alpha = SymMatrix::from([] {
    Matrix a(2, 2);
    a(0, 0) = 3.0;
    a(1, 1) = 2.0;
    a(0, 1) = a(1, 0) = 0.5;
    return a;
  }());
  p.beta = Matrix::identity(2);
  p.delta = {0.05, 0.0};
  p.sigma_r = Matrix(2, 2);
  p.sigma_r(0, 0) = 0.25;
  p.sigma_r(1, 1) = 0.3;
  p.sigma_r(0, 1) = 0.05;
  p.sigma_r(1, 0) = 0.0;
  p.sigma_j = Matrix(2, 2);
  p.sigma_j(0, 0) = 0.2;
  p.sigma_j(1, 1) = 0.25;
  p.sigma_j(0, 1) = 0.0;
  p.sigma_j(1, 0) = 0.05;
  p.m0 = {0.05, 0.05};
  p.sigma0 = SymMatrix::diag({0.2, 0.15});
  REQUIRE(validate(p).empty());

  DateScheme s = DateScheme::deterministic(6);
  auto grid = det_grid(p, s, 1e-3);
  CovarianceTable qr = covariance_table(Regime::returns_only, p, s, grid);
  CovarianceTable qz = covariance_table(Regime::discrete_expert, p, s, grid);
  CovarianceTable qj = covariance_table(Regime::continuous_expert, p, s, grid);

  auto at = [](const CovarianceTable& t, std::size_t node) {
    SymMatrix q(2);
    const double* v = t.q_at(node);
    q.set(0, 0, v[0]);
    q.set(0, 1, v[1]);
    q.set(1, 1, v[3]);
    return q;
  };
  for (std::size_t node = 0; node < grid->n_nodes(); ++node) {
    const double* v = qz.q_at(node);
    CHECK(v[1] == v[2]);  // stored block symmetric
    SymMatrix z = at(qz, node), r = at(qr, node), j = at(qj, node);
    const double tol = 1e-10 * (1.0 + spectral_norm(r));
    CHECK(loewner_leq(z, r, tol));
    CHECK(loewner_leq(j, r, tol));
    CHECK(min_eigenvalue(z) > -1e-10);
  }

  // the mean filter stays finite and the jumps shrink covariance in the Loewner order
  MarketPath path = simulate_path(p, s, grid, 13, 0);
  FilterTrajectory f = run_filter(Regime::discrete_expert, p, s, path);
  for (double v : f.m) CHECK(std::isfinite(v));
  for (const FilterJump& jump : f.jumps) {
    CHECK(loewner_leq(jump.q_post, jump.q_pre, 1e-10 * (1.0 + spectral_norm(jump.q_pre))));
  }
}
