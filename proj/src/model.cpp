#include "driftlab/model.hpp"

#include <cmath>
#include <sstream>

#include "driftlab/detail/riccati_core.hpp"

namespace driftlab {

namespace {

constexpr double kLyapunovStep = 1e-3;  // RK4 substep for the d > 1 covariance sweep

std::string join(const std::vector<std::string>& parts) {
  std::ostringstream os;
  for (std::size_t i = 0; i < parts.size(); ++i) os << (i ? "; " : "") << parts[i];
  return os.str();
}

bool shape_ok(const Matrix& m, std::size_t rows, std::size_t cols) {
  return m.rows() == rows && m.cols() == cols;
}

// full row rank d, tested through the min eigenvalue of sigma sigma^T
bool full_row_rank(const Matrix& sigma) {
  const SymMatrix ssT = SymMatrix::from(sigma * transpose(sigma));
  return min_eigenvalue(ssT) > spd_floor(ssT);
}

}  // namespace

ValidationFailed::ValidationFailed(std::vector<std::string> problems_in)
    : std::runtime_error("invalid model parameters: " + join(problems_in)),
      problems(std::move(problems_in)) {}

std::vector<std::string> validate(const ModelParams& p) {
  std::vector<std::string> bad;
  if (p.d < 1) bad.push_back("d: must be at least 1");
  if (p.m_noise < p.d) bad.push_back("m_noise: must be at least d");
  if (p.l_noise < p.d) bad.push_back("l_noise: must be at least d");

  if (p.alpha.dim() != p.d)
    bad.push_back("alpha: must be d x d");
  else if (min_eigenvalue(p.alpha) <= 0.0)
    bad.push_back("alpha: not positive definite");

  if (!shape_ok(p.beta, p.d, p.d)) bad.push_back("beta: must be d x d");
  if (p.delta.size() != p.d) bad.push_back("delta: must have length d");
  if (p.m0.size() != p.d) bad.push_back("m0: must have length d");

  if (!shape_ok(p.sigma_r, p.d, p.m_noise))
    bad.push_back("sigma_r: must be d x m_noise");
  else if (!full_row_rank(p.sigma_r))
    bad.push_back("sigma_r: rank deficient");

  if (!shape_ok(p.sigma_j, p.d, p.l_noise))
    bad.push_back("sigma_j: must be d x l_noise");
  else if (!full_row_rank(p.sigma_j))
    bad.push_back("sigma_j: rank deficient");

  if (p.sigma0.dim() != p.d)
    bad.push_back("sigma0: must be d x d");
  else if (min_eigenvalue(p.sigma0) < -psd_tol(p.sigma0))
    bad.push_back("sigma0: not positive semidefinite");

  if (!(p.horizon_t > 0.0)) bad.push_back("horizon_t: must be positive");
  if (!std::isfinite(p.rate_r)) bad.push_back("rate_r: must be finite");
  return bad;
}

void validate_or_throw(const ModelParams& p) {
  auto bad = validate(p);
  if (!bad.empty()) throw ValidationFailed(std::move(bad));
}

DateScheme DateScheme::deterministic(int n) {
  if (n < 1) throw std::invalid_argument("DateScheme: n must be at least 1");
  DateScheme s;
  s.kind = Kind::deterministic;
  s.n = n;
  return s;
}

DateScheme DateScheme::poisson(double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("DateScheme: lambda must be positive");
  DateScheme s;
  s.kind = Kind::poisson;
  s.lambda = lambda;
  return s;
}

double DateScheme::delta_n(double horizon) const {
  if (kind != Kind::deterministic)
    throw std::logic_error("DateScheme::delta_n: deterministic kind only");
  return horizon / static_cast<double>(n);
}

double DateScheme::level() const {
  return kind == Kind::deterministic ? static_cast<double>(n) : lambda;
}

DriftMoments::DriftMoments(const ModelParams& p) : p_(p) {
  validate_or_throw(p_);
  ae_ = eigen_sym(p_.alpha);
  const Matrix bbT = p_.beta * transpose(p_.beta);
  g_ = transpose(ae_.vectors) * bbT * ae_.vectors;
}

Matrix DriftMoments::exp_alpha(double t) const {
  const std::size_t d = p_.d;
  Matrix r(d, d);
  for (std::size_t k = 0; k < d; ++k) {
    const double e = std::exp(-ae_.values[k] * t);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) r(i, j) += e * ae_.vectors(i, k) * ae_.vectors(j, k);
  }
  return r;
}

SymMatrix DriftMoments::transition_cov(double h) const {
  // In alpha's eigenbasis the integrand diagonalizes entrywise:
  // C'_ij = G_ij * (1 - e^{-(w_i+w_j) h}) / (w_i + w_j), w > 0 since alpha is SPD.
  const std::size_t d = p_.d;
  Matrix c(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double s = ae_.values[i] + ae_.values[j];
      c(i, j) = g_(i, j) * (-std::expm1(-s * h) / s);
    }
  return SymMatrix::from(ae_.vectors * c * transpose(ae_.vectors));
}

Vec DriftMoments::mean(double t) const {
  const Matrix e = exp_alpha(t);
  Vec r = e * p_.m0;
  const Vec ed = e * p_.delta;
  for (std::size_t i = 0; i < p_.d; ++i) r[i] += p_.delta[i] - ed[i];
  return r;
}

SymMatrix DriftMoments::cov(double t) const {
  if (p_.d == 1) {
    const double a = p_.alpha(0, 0);
    const double b2 = p_.beta(0, 0) * p_.beta(0, 0);
    const double stat = b2 / (2.0 * a);
    SymMatrix r(1);
    r.set(0, 0, stat + (p_.sigma0(0, 0) - stat) * std::exp(-2.0 * a * t));
    return r;
  }
  // Lyapunov ODE: the Riccati integrator with the quadratic coefficient dropped.
  const Matrix bbT = p_.beta * transpose(p_.beta);
  detail::RiccatiCore core(p_.d, p_.alpha.mat().data(), bbT.data(), nullptr);
  std::vector<double> q(p_.sigma0.mat().data(), p_.sigma0.mat().data() + p_.d * p_.d);
  core.advance(q.data(), 0.0, t, kLyapunovStep);
  Matrix m(p_.d, p_.d);
  for (std::size_t i = 0; i < p_.d * p_.d; ++i) m.data()[i] = q[i];
  return SymMatrix::from(m);
}

Vec drift_mean(const ModelParams& p, double t) { return DriftMoments(p).mean(t); }

SymMatrix drift_cov(const ModelParams& p, double t) { return DriftMoments(p).cov(t); }

}  // namespace driftlab
