#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "driftlab/matrix.hpp"
#include "driftlab/detail/riccati_core.hpp"

// Allocation-free kernels shared by the filter sweeps and the experiment engines.
// All matrices are flat row-major d x d buffers owned by the caller.

namespace driftlab::detail {

// in-place lower-triangular Cholesky; nonpositive pivot means Q+Gamma lost definiteness
inline void chol_flat(double* s, std::size_t d) {
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double sum = s[i * d + j];
      for (std::size_t k = 0; k < j; ++k) sum -= s[i * d + k] * s[j * d + k];
      if (i == j) {
        if (!(sum > 0.0)) throw Singular("update: Q+Gamma is not positive definite");
        s[i * d + i] = std::sqrt(sum);
      } else {
        s[i * d + j] = sum / s[j * d + j];
      }
    }
  }
}

inline void chol_solve_vec(const double* lfac, double* b, std::size_t d) {
  for (std::size_t i = 0; i < d; ++i) {
    double sum = b[i];
    for (std::size_t k = 0; k < i; ++k) sum -= lfac[i * d + k] * b[k];
    b[i] = sum / lfac[i * d + i];
  }
  for (std::size_t ii = d; ii-- > 0;) {
    double sum = b[ii];
    for (std::size_t k = ii + 1; k < d; ++k) sum -= lfac[k * d + ii] * b[k];
    b[ii] = sum / lfac[ii * d + ii];
  }
}

inline void eig_range_flat(const double* a, std::size_t d, double& lmin, double& lmax) {
  if (d == 1) {
    lmin = lmax = a[0];
    return;
  }
  if (d == 2) {
    const double mid = 0.5 * (a[0] + a[3]);
    const double disc = std::hypot(0.5 * (a[0] - a[3]), a[1]);
    lmin = mid - disc;
    lmax = mid + disc;
    return;
  }
  SymMatrix s(d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j <= i; ++j) s.set(i, j, 0.5 * (a[i * d + j] + a[j * d + i]));
  const SymEigen e = eigen_sym(s);
  lmin = e.values.front();
  lmax = e.values.back();
}

inline double spectral_norm_flat(const double* a, std::size_t d) {
  double lmin = 0.0, lmax = 0.0;
  eig_range_flat(a, d, lmin, lmax);
  return std::max(std::abs(lmin), std::abs(lmax));
}

inline void check_psd_flat(const double* q, std::size_t d, const char* where) {
  double lmin = 0.0, lmax = 0.0;
  eig_range_flat(q, d, lmin, lmax);
  const double tol = 1e-10 * (1.0 + std::max(std::abs(lmin), std::abs(lmax)));
  if (lmin < -tol) throw NotPSD(std::string(where) + ": covariance left the PSD cone");
}

inline SymMatrix sym_from_flat(const double* a, std::size_t d) {
  Matrix m(d, d);
  std::copy(a, a + d * d, m.data());
  return SymMatrix::from(m);
}

inline std::vector<double> flat_of(const Matrix& m) {
  return std::vector<double>(m.data(), m.data() + m.rows() * m.cols());
}

// scratch for the Bayesian date update
struct UpdateWork {
  explicit UpdateWork(std::size_t d) : s(d * d), xt(d * d), p(d * d), y(d) {}
  std::vector<double> s, xt, p, y;
};

// q <- q - q (q+gamma)^{-1} q (symmetrized); when m is present it becomes
// m + q (q+gamma)^{-1} (z - m) using the pre-update q. One Cholesky serves both.
inline void bayes_update_flat(std::size_t d, double* q, double* m, const double* gamma,
                              const double* z, UpdateWork& w) {
  for (std::size_t i = 0; i < d * d; ++i) w.s[i] = q[i] + gamma[i];
  chol_flat(w.s.data(), d);
  // rows of xt are columns of (q+gamma)^{-1} q; q's symmetry hands us its columns as rows
  for (std::size_t j = 0; j < d; ++j) {
    double* row = w.xt.data() + j * d;
    std::copy(q + j * d, q + (j + 1) * d, row);
    chol_solve_vec(w.s.data(), row, d);
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double sum = 0.0;
      for (std::size_t k = 0; k < d; ++k) sum += q[i * d + k] * w.xt[j * d + k];
      w.p[i * d + j] = sum;
    }
  if (m) {
    for (std::size_t i = 0; i < d; ++i) w.y[i] = z[i] - m[i];
    chol_solve_vec(w.s.data(), w.y.data(), d);
    for (std::size_t i = 0; i < d; ++i) {
      double sum = 0.0;
      for (std::size_t k = 0; k < d; ++k) sum += q[i * d + k] * w.y[k];
      m[i] += sum;
    }
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) q[i * d + j] -= 0.5 * (w.p[i * d + j] + w.p[j * d + i]);
  sym_flat(q, d);
}

// m <- m + alpha (delta - m) h + q m_r (dr - m h) [+ q m_j (dj - m h) when dj given]
struct MeanWork {
  explicit MeanWork(std::size_t d) : u(d), v(d), out(d) {}
  std::vector<double> u, v, out;
};

inline void mean_step_flat(std::size_t d, const double* alpha, const double* delta,
                           const double* m_r, const double* m_j, const double* q, double* m,
                           const double* dr, const double* dj, double h, MeanWork& w) {
  for (std::size_t i = 0; i < d; ++i) {
    double drift = 0.0;
    for (std::size_t j = 0; j < d; ++j) drift += alpha[i * d + j] * (delta[j] - m[j]);
    w.out[i] = m[i] + h * drift;
  }
  for (std::size_t i = 0; i < d; ++i) w.u[i] = dr[i] - m[i] * h;
  for (std::size_t i = 0; i < d; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += m_r[i * d + j] * w.u[j];
    w.v[i] = s;
  }
  for (std::size_t i = 0; i < d; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += q[i * d + j] * w.v[j];
    w.out[i] += s;
  }
  if (dj) {
    for (std::size_t i = 0; i < d; ++i) w.u[i] = dj[i] - m[i] * h;
    for (std::size_t i = 0; i < d; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += m_j[i * d + j] * w.u[j];
      w.v[i] = s;
    }
    for (std::size_t i = 0; i < d; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += q[i * d + j] * w.v[j];
      w.out[i] += s;
    }
  }
  std::copy(w.out.begin(), w.out.end(), m);
}

}  // namespace driftlab::detail
