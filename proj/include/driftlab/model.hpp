#pragma once

#include <string>
#include <vector>

#include "driftlab/matrix.hpp"

namespace driftlab {

struct ValidationFailed : std::runtime_error {
  explicit ValidationFailed(std::vector<std::string> problems_in);
  std::vector<std::string> problems;
};

// Hidden-drift market. The drift mu follows d mu = alpha (delta - mu) dt + beta dB with a
// d-dimensional Brownian B; returns and the continuous expert observe mu through sigma_r
// and sigma_j. rate_r is carried for completeness; shipped value tables fix it at 0.
struct ModelParams {
  std::size_t d = 1;        // asset count
  std::size_t m_noise = 1;  // return-Brownian dimension, >= d
  std::size_t l_noise = 1;  // expert-Brownian dimension, >= d
  SymMatrix alpha;          // SPD d x d mean-reversion speed
  Matrix beta;              // d x d drift volatility
  Vec delta;                // mean-reversion level
  Matrix sigma_r;           // d x m_noise, full rank d
  Matrix sigma_j;           // d x l_noise, full rank d
  Vec m0;                   // initial drift mean
  SymMatrix sigma0;         // PSD initial drift covariance
  double horizon_t = 1.0;
  double rate_r = 0.0;
};

// Empty list means valid; otherwise one human-readable entry per violated field.
std::vector<std::string> validate(const ModelParams& p);
void validate_or_throw(const ModelParams& p);

struct DateScheme {
  enum class Kind { deterministic, poisson };
  Kind kind = Kind::deterministic;
  int n = 1;           // deterministic: number of dates, >= 1
  double lambda = 0;   // poisson: arrival intensity, > 0

  static DateScheme deterministic(int n);
  static DateScheme poisson(double lambda);
  double delta_n(double horizon) const;  // horizon / n, deterministic kind only
  double level() const;                  // n or lambda, whichever applies
};

// Unconditional moments of the drift.
Vec drift_mean(const ModelParams& p, double t);
SymMatrix drift_cov(const ModelParams& p, double t);

// Eigenbasis machinery for exp(-alpha t) and the exact OU transition covariance.
// alpha is symmetric PD, so both are exact up to the eigensolve.
class DriftMoments {
public:
  explicit DriftMoments(const ModelParams& p);  // throws ValidationFailed

  Matrix exp_alpha(double t) const;        // e^{-alpha t}
  SymMatrix transition_cov(double h) const;  // Cov(xi) for one exact OU step of length h
  Vec mean(double t) const;
  SymMatrix cov(double t) const;
  const ModelParams& params() const { return p_; }

private:
  ModelParams p_;
  SymEigen ae_;  // eigen-decomposition of alpha
  Matrix g_;     // beta beta^T rotated into alpha's eigenbasis
};

}  // namespace driftlab
