#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace driftlab::detail {

// Flat row-major d*d helpers shared by the Riccati/Lyapunov integrators and the
// per-path filter engine. Everything here is allocation-free after construction;
// instances are not thread-safe, each worker owns its own copy.

inline void sym_flat(double* a, std::size_t d) {
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) {
      const double v = 0.5 * (a[i * d + j] + a[j * d + i]);
      a[i * d + j] = v;
      a[j * d + i] = v;
    }
}

inline double frob_flat(const double* a, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * a[i];
  return std::sqrt(s);
}

// dQ/dt = -A Q - Q A + C - Q M Q, with the quadratic term dropped when M is absent.
class RiccatiCore {
public:
  RiccatiCore() = default;
  RiccatiCore(std::size_t d, const double* a, const double* c, const double* m)
      : d_(d),
        a_(a, a + d * d),
        c_(c, c + d * d),
        m_(m ? std::vector<double>(m, m + d * d) : std::vector<double>()),
        w1_(d * d),
        w2_(d * d),
        k_(4 * d * d),
        tmp_(d * d) {}

  std::size_t dim() const { return d_; }

  // out = C - (A q + (A q)^T) - q M q; symmetric for symmetric q.
  void rhs(const double* q, double* out) {
    const std::size_t d = d_;
    mul(a_.data(), q, w1_.data());
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        out[i * d + j] = c_[i * d + j] - w1_[i * d + j] - w1_[j * d + i];
    if (!m_.empty()) {
      mul(m_.data(), q, w2_.data());
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
          double s = 0.0;
          for (std::size_t l = 0; l < d; ++l) s += q[i * d + l] * w2_[l * d + j];
          out[i * d + j] -= s;
        }
    }
    sym_flat(out, d);
  }

  // one classical RK4 step, result symmetrized
  void step_rk4(double* q, double h) {
    const std::size_t n = d_ * d_;
    double* k1 = k_.data();
    double* k2 = k1 + n;
    double* k3 = k2 + n;
    double* k4 = k3 + n;
    rhs(q, k1);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = q[i] + 0.5 * h * k1[i];
    rhs(tmp_.data(), k2);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = q[i] + 0.5 * h * k2[i];
    rhs(tmp_.data(), k3);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = q[i] + h * k3[i];
    rhs(tmp_.data(), k4);
    const double w = h / 6.0;
    for (std::size_t i = 0; i < n; ++i) q[i] += w * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    sym_flat(q, d_);
  }

  // fixed substep <= step over [t0, t1]
  void advance(double* q, double t0, double t1, double step) {
    if (t1 < t0) throw std::invalid_argument("RiccatiCore::advance: t1 < t0");
    if (step <= 0) throw std::invalid_argument("RiccatiCore::advance: step must be positive");
    const double span = t1 - t0;
    if (span == 0.0) return;
    const auto nsub = static_cast<std::size_t>(std::ceil(span / step - 1e-12));
    const std::size_t n = nsub > 0 ? nsub : 1;
    const double h = span / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) step_rk4(q, h);
  }

private:
  void mul(const double* x, const double* y, double* out) const {
    const std::size_t d = d_;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        double s = 0.0;
        for (std::size_t l = 0; l < d; ++l) s += x[i * d + l] * y[l * d + j];
        out[i * d + j] = s;
      }
  }

  std::size_t d_ = 0;
  std::vector<double> a_, c_, m_;
  std::vector<double> w1_, w2_, k_, tmp_;
};

}  // namespace driftlab::detail
