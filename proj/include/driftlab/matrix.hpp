#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace driftlab {

struct DimMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NotPSD : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct Singular : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Vec = std::vector<double>;

// Dense row-major matrix. Sized for d <= ~10; all ops allocate freely.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  static Matrix identity(std::size_t n);

  double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double* data() { return a_.data(); }
  const double* data() const { return a_.data(); }

private:
  std::size_t rows_ = 0, cols_ = 0;
  Vec a_;
};

Matrix operator+(const Matrix& x, const Matrix& y);
Matrix operator-(const Matrix& x, const Matrix& y);
Matrix operator*(const Matrix& x, const Matrix& y);
Matrix operator*(double c, const Matrix& x);
Vec operator*(const Matrix& x, const Vec& v);
Matrix transpose(const Matrix& x);
double trace(const Matrix& x);
double frobenius(const Matrix& x);

// Symmetric square matrix; entries (i,j) and (j,i) are kept bitwise equal.
class SymMatrix {
public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t n);
  static SymMatrix from(const Matrix& m);  // symmetrizes (m + m^T)/2
  static SymMatrix diag(const Vec& d);
  static SymMatrix identity(std::size_t n);

  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  void set(std::size_t i, std::size_t j, double v);
  std::size_t dim() const { return m_.rows(); }
  const Matrix& mat() const { return m_; }

private:
  Matrix m_;
};

SymMatrix operator+(const SymMatrix& x, const SymMatrix& y);
SymMatrix operator-(const SymMatrix& x, const SymMatrix& y);
SymMatrix operator*(double c, const SymMatrix& x);
double frobenius(const SymMatrix& x);

struct SymEigen {
  Vec values;      // ascending
  Matrix vectors;  // orthonormal columns, vectors.col(k) pairs with values[k]
};

SymEigen eigen_sym(const SymMatrix& a);
double min_eigenvalue(const SymMatrix& a);
double spectral_norm(const SymMatrix& a);
double spectral_norm(const Matrix& a);  // non-symmetric input goes through A^T A

// Scaled tolerances; the scaling keeps them meaningful for both tiny and large Q.
double psd_tol(const SymMatrix& a);    // 1e-10 * (1 + spectral norm)
double spd_floor(const SymMatrix& a);  // 1e-12 * (1 + spectral norm)

// Principal square root. Eigenvalues in [-psd_tol, 0) clamp to 0; below that throws NotPSD.
SymMatrix sym_sqrt(const SymMatrix& a);

// min eigenvalue of (b - a) >= -tol
bool loewner_leq(const SymMatrix& a, const SymMatrix& b, double tol);

// SPD solve via the eigen-decomposition; throws Singular at or below spd_floor.
Vec solve_spd(const SymMatrix& a, const Vec& rhs);
Matrix solve_spd(const SymMatrix& a, const Matrix& rhs);
SymMatrix inverse_spd(const SymMatrix& a);

}  // namespace driftlab
