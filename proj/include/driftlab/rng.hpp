#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace driftlab {

// splitmix64 output mix; full-period, invertible, cheap to key.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// One logical noise source per role; streams for distinct (seed, path, role) never collide
// by construction, so workers can consume any subset in any order across paths.
enum class NoiseRole : std::uint64_t {
  drift_noise = 1,    // Brownian driving the hidden drift
  returns_noise = 2,  // Brownian driving returns
  expert_noise = 3,   // Brownian behind expert opinions (including past-horizon tail)
  dates = 4,          // Poisson date sampling
};

// Counter-based generator: state is a keyed counter, each draw mixes the next counter
// value. Determinism depends only on the in-stream consumption order.
class RngStream {
public:
  RngStream(std::uint64_t seed, std::uint64_t path, NoiseRole role) {
    std::uint64_t k = splitmix64(seed);
    k = splitmix64(k ^ (0xd1342543de82ef95ULL * (path + 1)));
    k = splitmix64(k ^ (0xaf251af3b0f025b5ULL * static_cast<std::uint64_t>(role)));
    s_ = k;
  }

  std::uint64_t next_u64() {
    s_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t x = s_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  // strictly inside (0,1): log() below stays finite
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53 + 0x1.0p-54; }

  // Box-Muller with the companion draw cached
  double gaussian() {
    if (has_cache_) {
      has_cache_ = false;
      return cache_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    cache_ = r * std::sin(a);
    has_cache_ = true;
    return r * std::cos(a);
  }

  double exponential(double rate) { return -std::log(uniform01()) / rate; }

private:
  std::uint64_t s_ = 0;
  double cache_ = 0.0;
  bool has_cache_ = false;
};

}  // namespace driftlab
