#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "driftlab/config.hpp"
#include "driftlab/model.hpp"

using namespace driftlab;

TEST_CASE("shipped calibration validates cleanly") {
  ModelParams p = default_model_params();
  CHECK(validate(p).empty());
  CHECK_NOTHROW(validate_or_throw(p));
}

TEST_CASE("validation catalogs the violated fields") {
  ModelParams p = default_model_params();

  SUBCASE("dimension mismatch") {
    p.delta = {0.05, 0.1};
    auto problems = validate(p);
    REQUIRE_FALSE(problems.empty());
    bool mentions = false;
    for (const auto& s : problems) mentions = mentions || s.find("delta") != std::string::npos;
    CHECK(mentions);
    CHECK_THROWS_AS(validate_or_throw(p), ValidationFailed);
  }
  SUBCASE("alpha must be positive definite") {
    p.alpha = SymMatrix::diag({-3.0});
    CHECK_FALSE(validate(p).empty());
  }
  SUBCASE("sigma_r must have full row rank") {
    p.sigma_r = Matrix(1, 1);  // zero
    CHECK_FALSE(validate(p).empty());
  }
  SUBCASE("noise dimensions cannot undercut the asset count") {
    p.d = 2;  // leaves everything else 1x1
    CHECK_FALSE(validate(p).empty());
  }
  SUBCASE("horizon must be positive") {
    p.horizon_t = 0.0;
    CHECK_FALSE(validate(p).empty());
  }
  SUBCASE("initial covariance may be singular but not indefinite") {
    p.sigma0 = SymMatrix::diag({0.0});
    CHECK(validate(p).empty());
    p.sigma0 = SymMatrix::diag({-0.1});
    CHECK_FALSE(validate(p).empty());
  }
}

TEST_CASE("validation exception carries every problem") {
  ModelParams p = default_model_params();
  p.delta = {0.05, 0.1};
  p.horizon_t = -1.0;
  try {
    validate_or_throw(p);
    FAIL("expected ValidationFailed");
  } catch (const ValidationFailed& e) {
    CHECK(e.problems.size() >= 2);
    CHECK(std::string(e.what()).size() > 0);
  }
}

TEST_CASE("date scheme factories enforce their domains") {
  DateScheme det = DateScheme::deterministic(10);
  CHECK(det.kind == DateScheme::Kind::deterministic);
  CHECK(det.n == 10);
  CHECK(det.delta_n(1.0) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(det.level() == 10.0);

  DateScheme poi = DateScheme::poisson(250.0);
  CHECK(poi.kind == DateScheme::Kind::poisson);
  CHECK(poi.level() == 250.0);

  CHECK_THROWS_AS(DateScheme::deterministic(0), std::invalid_argument);
  CHECK_THROWS_AS(DateScheme::deterministic(-3), std::invalid_argument);
  CHECK_THROWS_AS(DateScheme::poisson(0.0), std::invalid_argument);
  CHECK_THROWS_AS(DateScheme::poisson(-1.0), std::invalid_argument);
}

TEST_CASE("drift moments match the scalar closed forms") {
  // alpha = 3, beta = 1, delta = 0.05, sigma0 = 0.2, m0 = 0.3:
  //   mean(t)  = 0.05 + 0.25 e^{-3t}
  //   cov(t)   = 1/6 + (0.2 - 1/6) e^{-6t}
  //   transition_cov(h) = (1 - e^{-6h}) / 6
  ModelParams p = default_model_params();
  p.m0 = {0.3};
  DriftMoments dm(p);

  for (double t : {0.0, 0.05, 0.1, 0.37, 1.0}) {
    CHECK(dm.exp_alpha(t)(0, 0) == doctest::Approx(std::exp(-3.0 * t)).epsilon(1e-12));
    CHECK(dm.mean(t)[0] == doctest::Approx(0.05 + 0.25 * std::exp(-3.0 * t)).epsilon(1e-12));
    const double cov = 1.0 / 6.0 + (0.2 - 1.0 / 6.0) * std::exp(-6.0 * t);
    CHECK(dm.cov(t)(0, 0) == doctest::Approx(cov).epsilon(1e-12));
  }
  for (double h : {1e-4, 0.01, 0.3}) {
    const double tc = (1.0 - std::exp(-6.0 * h)) / 6.0;
    CHECK(dm.transition_cov(h)(0, 0) == doctest::Approx(tc).epsilon(1e-12));
  }
}

TEST_CASE("drift moments decouple for a diagonal two-asset model") {
  ModelParams p;
  p.d = 2;
  p.m_noise = 2;
  p.l_noise = 2;
  p.alpha = SymMatrix::diag({3.0, 1.0});
  p.beta = Matrix::identity(2);
  p.delta = {0.05, -0.1};
  p.sigma_r = Matrix::identity(2);
  p.sigma_j = Matrix::identity(2);
  p.m0 = {0.2, 0.3};
  p.sigma0 = SymMatrix::diag({0.1, 0.4});
  REQUIRE(validate(p).empty());
  DriftMoments dm(p);

  const double t = 0.4;
  Matrix e = dm.exp_alpha(t);
  CHECK(e(0, 0) == doctest::Approx(std::exp(-3.0 * t)).epsilon(1e-12));
  CHECK(e(1, 1) == doctest::Approx(std::exp(-1.0 * t)).epsilon(1e-12));
  CHECK(std::abs(e(0, 1)) < 1e-15);

  Vec m = dm.mean(t);
  CHECK(m[0] == doctest::Approx(0.05 + 0.15 * std::exp(-3.0 * t)).epsilon(1e-12));
  CHECK(m[1] == doctest::Approx(-0.1 + 0.4 * std::exp(-1.0 * t)).epsilon(1e-12));

  // per-component stationary variance beta^2 / (2 alpha)
  SymMatrix c = dm.cov(t);
  const double c00 = 1.0 / 6.0 + (0.1 - 1.0 / 6.0) * std::exp(-6.0 * t);
  const double c11 = 0.5 + (0.4 - 0.5) * std::exp(-2.0 * t);
  CHECK(c(0, 0) == doctest::Approx(c00).epsilon(1e-12));
  CHECK(c(1, 1) == doctest::Approx(c11).epsilon(1e-12));
  CHECK(std::abs(c(0, 1)) < 1e-14);
}

TEST_CASE("coupled mean reversion mixes components the way the matrix exponential says") {
  // alpha = [[2,1],[1,2]] has eigenpairs (1, [1,-1]) and (3, [1,1]); check e^{-alpha t}
  // against the rank-one expansion.
  ModelParams p;
  p.d = 2;
  p.m_noise = 2;
  p.l_noise = 2;
  p.alpha = SymMatrix::from([] {
    Matrix a(2, 2);
    a(0, 0) = a(1, 1) = 2.0;
    a(0, 1) = a(1, 0) = 1.0;
    return a;
  }());
  p.beta = Matrix::identity(2);
  p.delta = {0.0, 0.0};
  p.sigma_r = Matrix::identity(2);
  p.sigma_j = Matrix::identity(2);
  p.m0 = {1.0, 0.0};
  p.sigma0 = SymMatrix::diag({0.1, 0.1});
  REQUIRE(validate(p).empty());
  DriftMoments dm(p);

  const double t = 0.7;
  const double lo = std::exp(-1.0 * t), hi = std::exp(-3.0 * t);
  Matrix e = dm.exp_alpha(t);
  CHECK(e(0, 0) == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-12));
  CHECK(e(0, 1) == doctest::Approx(0.5 * (hi - lo)).epsilon(1e-12));
  CHECK(e(1, 0) == doctest::Approx(0.5 * (hi - lo)).epsilon(1e-12));
  CHECK(e(1, 1) == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-12));
}
