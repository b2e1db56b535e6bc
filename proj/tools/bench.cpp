// Compares the serial reference execution against the OpenMP-parallel one on a
// representative Monte Carlo workload and checks the results are bit-identical.
// Usage: driftlab-bench [n_mc]   (default 2000)

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "driftlab/config.hpp"
#include "driftlab/csv.hpp"
#include "driftlab/parallel.hpp"

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  using namespace driftlab;

  std::size_t n_mc = 2000;
  if (argc > 1) n_mc = static_cast<std::size_t>(std::strtoull(argv[1], nullptr, 10));
  if (n_mc < 1000) n_mc = 1000;

  const ModelParams params = default_model_params();
  const std::vector<double> lambdas = {40.0};
  const std::uint64_t seed = 20240817;

  std::printf("workload: Poisson covariance gap, lambda = 40, p = 2, n_mc = %zu\n", n_mc);
  std::printf("hardware threads available to OpenMP: %d\n\n", max_threads());

  RunPolicy serial;
  serial.parallel = false;
  auto t0 = std::chrono::steady_clock::now();
  ConvergenceReport ref = cov_error_poisson(params, lambdas, 2, n_mc, seed, serial);
  double t_serial = seconds_since(t0);
  std::printf("serial reference: %.3fs  error = %s\n", t_serial,
              format_double(ref.cov_errors[0]).c_str());

  RunPolicy parallel;
  parallel.parallel = true;
  t0 = std::chrono::steady_clock::now();
  ConvergenceReport par = cov_error_poisson(params, lambdas, 2, n_mc, seed, parallel);
  double t_parallel = seconds_since(t0);
  std::printf("OpenMP parallel:  %.3fs  error = %s\n", t_parallel,
              format_double(par.cov_errors[0]).c_str());

  const bool identical = ref.cov_errors[0] == par.cov_errors[0] &&
                         ref.ci_half[0] == par.ci_half[0];
  std::printf("\nspeedup: %.2fx\n", t_serial / t_parallel);
  std::printf("bit-identical results: %s\n", identical ? "yes" : "NO");
  return identical ? 0 : 1;
}
