#include "driftlab/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace driftlab {

namespace {

constexpr double kSqrtTol = 1e-12;   // reconstruction slack in sym_sqrt's postcondition
constexpr int kMaxJacobiSweeps = 60;

void require(bool ok, const char* what) {
  if (!ok) throw DimMismatch(what);
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), a_(rows * cols, fill) {
  require(rows > 0 && cols > 0, "Matrix: dimensions must be positive");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix operator+(const Matrix& x, const Matrix& y) {
  require(x.rows() == y.rows() && x.cols() == y.cols(), "Matrix +: shape mismatch");
  Matrix r(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows() * x.cols(); ++i) r.data()[i] = x.data()[i] + y.data()[i];
  return r;
}

Matrix operator-(const Matrix& x, const Matrix& y) {
  require(x.rows() == y.rows() && x.cols() == y.cols(), "Matrix -: shape mismatch");
  Matrix r(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows() * x.cols(); ++i) r.data()[i] = x.data()[i] - y.data()[i];
  return r;
}

Matrix operator*(const Matrix& x, const Matrix& y) {
  require(x.cols() == y.rows(), "Matrix *: shape mismatch");
  Matrix r(x.rows(), y.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t k = 0; k < x.cols(); ++k) {
      const double xik = x(i, k);
      for (std::size_t j = 0; j < y.cols(); ++j) r(i, j) += xik * y(k, j);
    }
  return r;
}

Matrix operator*(double c, const Matrix& x) {
  Matrix r(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows() * x.cols(); ++i) r.data()[i] = c * x.data()[i];
  return r;
}

Vec operator*(const Matrix& x, const Vec& v) {
  require(x.cols() == v.size(), "Matrix * Vec: shape mismatch");
  Vec r(x.rows(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) r[i] += x(i, j) * v[j];
  return r;
}

Matrix transpose(const Matrix& x) {
  Matrix r(x.cols(), x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) r(j, i) = x(i, j);
  return r;
}

double trace(const Matrix& x) {
  require(x.rows() == x.cols(), "trace: square input required");
  double s = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) s += x(i, i);
  return s;
}

double frobenius(const Matrix& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.rows() * x.cols(); ++i) s += x.data()[i] * x.data()[i];
  return std::sqrt(s);
}

SymMatrix::SymMatrix(std::size_t n) : m_(n, n) {}

SymMatrix SymMatrix::from(const Matrix& m) {
  require(m.rows() == m.cols(), "SymMatrix::from: square input required");
  SymMatrix s(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = 0.5 * (m(i, j) + m(j, i));
      s.m_(i, j) = v;
      s.m_(j, i) = v;
    }
  return s;
}

SymMatrix SymMatrix::diag(const Vec& d) {
  SymMatrix s(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) s.m_(i, i) = d[i];
  return s;
}

SymMatrix SymMatrix::identity(std::size_t n) {
  SymMatrix s(n);
  for (std::size_t i = 0; i < n; ++i) s.m_(i, i) = 1.0;
  return s;
}

void SymMatrix::set(std::size_t i, std::size_t j, double v) {
  m_(i, j) = v;
  m_(j, i) = v;
}

SymMatrix operator+(const SymMatrix& x, const SymMatrix& y) {
  return SymMatrix::from(x.mat() + y.mat());
}

SymMatrix operator-(const SymMatrix& x, const SymMatrix& y) {
  return SymMatrix::from(x.mat() - y.mat());
}

SymMatrix operator*(double c, const SymMatrix& x) { return SymMatrix::from(c * x.mat()); }

double frobenius(const SymMatrix& x) { return frobenius(x.mat()); }

SymEigen eigen_sym(const SymMatrix& input) {
  const std::size_t n = input.dim();
  require(n > 0, "eigen_sym: empty matrix");
  Matrix a = input.mat();
  Matrix v = Matrix::identity(n);

  const double scale = frobenius(a);
  for (int sweep = 0; sweep < kMaxJacobiSweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= 1e-15 * (1.0 + scale)) {
      SymEigen e;
      e.values.resize(n);
      for (std::size_t i = 0; i < n; ++i) e.values[i] = a(i, i);
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t i, std::size_t j) { return e.values[i] < e.values[j]; });
      Vec sorted(n);
      Matrix vs(n, n);
      for (std::size_t k = 0; k < n; ++k) {
        sorted[k] = e.values[order[k]];
        for (std::size_t r = 0; r < n; ++r) vs(r, k) = v(r, order[k]);
      }
      e.values = std::move(sorted);
      e.vectors = std::move(vs);
      return e;
    }
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);
        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          if (r != p && r != q) {
            const double arp = a(r, p), arq = a(r, q);
            a(r, p) = arp - s * (arq + tau * arp);
            a(p, r) = a(r, p);
            a(r, q) = arq + s * (arp - tau * arq);
            a(q, r) = a(r, q);
          }
          const double vrp = v(r, p), vrq = v(r, q);
          v(r, p) = vrp - s * (vrq + tau * vrp);
          v(r, q) = vrq + s * (vrp - tau * vrq);
        }
      }
    }
  }
  throw std::runtime_error("eigen_sym: Jacobi failed to converge");
}

double min_eigenvalue(const SymMatrix& a) { return eigen_sym(a).values.front(); }

double spectral_norm(const SymMatrix& a) {
  const SymEigen e = eigen_sym(a);
  return std::max(std::abs(e.values.front()), std::abs(e.values.back()));
}

double spectral_norm(const Matrix& a) {
  bool symmetric = a.rows() == a.cols();
  if (symmetric)
    for (std::size_t i = 0; i < a.rows() && symmetric; ++i)
      for (std::size_t j = i + 1; j < a.cols(); ++j)
        if (a(i, j) != a(j, i)) {
          symmetric = false;
          break;
        }
  if (symmetric) return spectral_norm(SymMatrix::from(a));
  const SymMatrix ata = SymMatrix::from(transpose(a) * a);
  const double lmax = eigen_sym(ata).values.back();
  return std::sqrt(std::max(lmax, 0.0));
}

double psd_tol(const SymMatrix& a) { return 1e-10 * (1.0 + spectral_norm(a)); }

double spd_floor(const SymMatrix& a) { return 1e-12 * (1.0 + spectral_norm(a)); }

SymMatrix sym_sqrt(const SymMatrix& a) {
  const SymEigen e = eigen_sym(a);
  const double norm = std::max(std::abs(e.values.front()), std::abs(e.values.back()));
  const double tol = 1e-10 * (1.0 + norm);
  const std::size_t n = a.dim();
  Matrix root(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    double lam = e.values[k];
    if (lam < -tol)
      throw NotPSD("sym_sqrt: eigenvalue " + std::to_string(lam) + " below -psd_tol");
    if (lam < 0.0) lam = 0.0;
    const double s = std::sqrt(lam);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) root(i, j) += s * e.vectors(i, k) * e.vectors(j, k);
  }
  SymMatrix r = SymMatrix::from(root);
  if (frobenius(r.mat() * r.mat() - a.mat()) > kSqrtTol * (1.0 + frobenius(a)))
    throw NotPSD("sym_sqrt: reconstruction check failed");
  return r;
}

bool loewner_leq(const SymMatrix& a, const SymMatrix& b, double tol) {
  if (a.dim() != b.dim()) throw DimMismatch("loewner_leq: dimension mismatch");
  return min_eigenvalue(b - a) >= -tol;
}

Matrix solve_spd(const SymMatrix& a, const Matrix& rhs) {
  require(a.dim() == rhs.rows(), "solve_spd: shape mismatch");
  const SymEigen e = eigen_sym(a);
  const double norm = std::max(std::abs(e.values.front()), std::abs(e.values.back()));
  if (e.values.front() <= 1e-12 * (1.0 + norm))
    throw Singular("solve_spd: min eigenvalue " + std::to_string(e.values.front()) +
                   " at or below spd_floor");
  // x = V diag(1/lambda) V^T rhs
  const Matrix vt_rhs = transpose(e.vectors) * rhs;
  Matrix scaled(vt_rhs.rows(), vt_rhs.cols());
  for (std::size_t i = 0; i < vt_rhs.rows(); ++i)
    for (std::size_t j = 0; j < vt_rhs.cols(); ++j) scaled(i, j) = vt_rhs(i, j) / e.values[i];
  return e.vectors * scaled;
}

Vec solve_spd(const SymMatrix& a, const Vec& rhs) {
  require(a.dim() == rhs.size(), "solve_spd: shape mismatch");
  Matrix m(rhs.size(), 1);
  for (std::size_t i = 0; i < rhs.size(); ++i) m(i, 0) = rhs[i];
  const Matrix x = solve_spd(a, m);
  Vec r(rhs.size());
  for (std::size_t i = 0; i < rhs.size(); ++i) r[i] = x(i, 0);
  return r;
}

SymMatrix inverse_spd(const SymMatrix& a) {
  return SymMatrix::from(solve_spd(a, Matrix::identity(a.dim())));
}

}  // namespace driftlab
