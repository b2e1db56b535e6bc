#pragma once

#include <cmath>
#include <cstddef>
#include <exception>
#include <stdexcept>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace driftlab {

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// Runs body(i) for i in [0, n). Workers write only into per-index slots, so any
// reduction over those slots is independent of the worker count. The first exception
// thrown by a worker is rethrown on the calling thread.
template <class Body>
void for_each_index(std::size_t n, bool parallel, Body&& body) {
#ifdef _OPENMP
  if (parallel && n > 1 && omp_get_max_threads() > 1) {
    std::exception_ptr err;
    const long long nn = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < nn; ++i) {
      try {
        body(static_cast<std::size_t>(i));
      } catch (...) {
#pragma omp critical(driftlab_for_each_index_err)
        {
          if (!err) err = std::current_exception();
        }
      }
    }
    if (err) std::rethrow_exception(err);
    return;
  }
#else
  (void)parallel;
#endif
  for (std::size_t i = 0; i < n; ++i) body(i);
}

// Pairwise tree reduction in fixed index order: the result is a pure function of the
// slot values, bitwise reproducible across thread counts, and accurate to O(log n) ulps.
inline double pairwise_sum(const double* x, std::size_t n) {
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = x[0];
    for (std::size_t i = 1; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& x) { return pairwise_sum(x.data(), x.size()); }

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation, n-1 denominator
};

inline MeanSd mean_sd(const double* x, std::size_t n) {
  if (n == 0) throw std::invalid_argument("mean_sd: empty sample");
  MeanSd out;
  out.mean = pairwise_sum(x, n) / static_cast<double>(n);
  if (n == 1) return out;
  std::vector<double> dev(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = x[i] - out.mean;
    dev[i] = c * c;
  }
  out.sd = std::sqrt(pairwise_sum(dev) / static_cast<double>(n - 1));
  return out;
}

inline MeanSd mean_sd(const std::vector<double>& x) { return mean_sd(x.data(), x.size()); }

}  // namespace driftlab
