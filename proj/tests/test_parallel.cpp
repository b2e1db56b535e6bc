#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "driftlab/parallel.hpp"

using namespace driftlab;

TEST_CASE("worker pool visits every index exactly once") {
  const std::size_t n = 10000;
  std::vector<std::atomic<int>> hits(n);
  for (auto& h : hits) h.store(0);

  for_each_index(n, true, [&](std::size_t i) { hits[i].fetch_add(1); });
  for (std::size_t i = 0; i < n; ++i) CHECK(hits[i].load() == 1);

  for (auto& h : hits) h.store(0);
  for_each_index(n, false, [&](std::size_t i) { hits[i].fetch_add(1); });
  for (std::size_t i = 0; i < n; ++i) CHECK(hits[i].load() == 1);
}

TEST_CASE("worker exceptions surface on the calling thread") {
  auto boom = [](std::size_t i) {
    if (i == 4321) throw std::runtime_error("worker failure");
  };
  CHECK_THROWS_WITH_AS(for_each_index(10000, true, boom), "worker failure", std::runtime_error);
  CHECK_THROWS_WITH_AS(for_each_index(10000, false, boom), "worker failure", std::runtime_error);
}

TEST_CASE("parallel and serial fills produce bitwise-identical slots") {
  const std::size_t n = 50000;
  std::vector<double> a(n), b(n);
  auto fill = [](std::vector<double>& out) {
    return [&out](std::size_t i) {
      const double x = static_cast<double>(i) * 1e-4;
      out[i] = std::sin(x) * std::exp(-x) + std::cos(3.0 * x);
    };
  };
  for_each_index(n, true, fill(a));
  for_each_index(n, false, fill(b));
  CHECK(a == b);
  CHECK(pairwise_sum(a) == pairwise_sum(b));
}

TEST_CASE("pairwise reduction sums exactly on integer-valued data") {
  std::vector<double> v(1000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i + 1);
  CHECK(pairwise_sum(v) == 500500.0);
  CHECK(pairwise_sum(v.data(), v.size()) == 500500.0);

  std::vector<double> empty;
  CHECK(pairwise_sum(empty) == 0.0);
  std::vector<double> one{3.5};
  CHECK(pairwise_sum(one) == 3.5);
}

TEST_CASE("pairwise reduction beats running accumulation on long uniform data") {
  // 10^6 copies of 0.1: a left-to-right sum drifts at the 1e-5 level while the
  // pairwise grouping stays within a few hundred ulps of the rounded exact sum
  std::vector<double> v(1000000, 0.1);
  const double exact = 0.1 * 1e6;
  const double pw = pairwise_sum(v);
  CHECK(pw == doctest::Approx(exact).epsilon(1e-13));
  double naive = 0.0;
  for (double x : v) naive += x;
  CHECK(std::abs(pw - exact) < std::abs(naive - exact));
}

TEST_CASE("mean and standard deviation against hand values") {
  MeanSd ms = mean_sd({1.0, 2.0, 3.0, 4.0});
  CHECK(ms.mean == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(ms.sd == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-14));

  MeanSd single = mean_sd({7.0});
  CHECK(single.mean == 7.0);
  CHECK(single.sd == 0.0);

  CHECK_THROWS_AS(mean_sd({}), std::invalid_argument);
}

TEST_CASE("thread count is at least one") { CHECK(max_threads() >= 1); }
