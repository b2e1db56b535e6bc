#include "driftlab/filter.hpp"

#include <algorithm>
#include <cmath>

#include "driftlab/detail/filter_kernels.hpp"
#include "driftlab/detail/riccati_core.hpp"

namespace driftlab {

using detail::bayes_update_flat;
using detail::check_psd_flat;
using detail::eig_range_flat;
using detail::flat_of;
using detail::mean_step_flat;
using detail::MeanWork;
using detail::sym_from_flat;
using detail::UpdateWork;

namespace {

// Per-run engine: flat copies of every matrix the sweeps touch plus scratch buffers.
// Owned by one worker at a time; construction validates the model.
struct Engine {
  std::size_t d;
  Regime regime;
  detail::RiccatiCore core;
  std::vector<double> alpha_f, delta_f, m_r_f, m_j_f, gamma_f;
  UpdateWork uw;
  MeanWork mw;

  Engine(Regime r, const ModelParams& p, const SymMatrix* gamma)
      : d(p.d), regime(r), uw(p.d), mw(p.d) {
    validate_or_throw(p);
    alpha_f = flat_of(p.alpha.mat());
    delta_f = p.delta;
    const SymMatrix s_r = SymMatrix::from(p.sigma_r * transpose(p.sigma_r));
    m_r_f = flat_of(inverse_spd(s_r).mat());
    if (r == Regime::continuous_expert) {
      const SymMatrix s_j = SymMatrix::from(p.sigma_j * transpose(p.sigma_j));
      m_j_f = flat_of(inverse_spd(s_j).mat());
    }
    if (gamma) gamma_f = flat_of(gamma->mat());
    if (r != Regime::full_info) {
      const Matrix bbT = p.beta * transpose(p.beta);
      std::vector<double> mq(m_r_f);
      if (r == Regime::continuous_expert)
        for (std::size_t i = 0; i < d * d; ++i) mq[i] += m_j_f[i];
      core = detail::RiccatiCore(d, alpha_f.data(), bbT.data(), mq.data());
    }
  }

  // RK4 substeps with a PSD check after each one
  void advance_cov(double* q, double t0, double t1, double step, const char* where) {
    const double span = t1 - t0;
    if (span <= 0.0) return;
    const double cap = step > 0.0 ? std::min(step, span) : span;
    const auto nsub =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(span / cap - 1e-12)));
    const double h = span / static_cast<double>(nsub);
    for (std::size_t i = 0; i < nsub; ++i) {
      core.step_rk4(q, h);
      check_psd_flat(q, d, where);
    }
  }
};

Regime rhs_regime(Regime r) {
  // Z between dates follows the R flow; F has no Riccati flow at all
  if (r == Regime::full_info)
    throw std::invalid_argument("riccati flow undefined for the full-information regime");
  return r == Regime::discrete_expert ? Regime::returns_only : r;
}

}  // namespace

const char* regime_label(Regime r) {
  switch (r) {
    case Regime::returns_only: return "R";
    case Regime::discrete_expert: return "Z";
    case Regime::continuous_expert: return "J";
    case Regime::full_info: return "F";
  }
  throw std::logic_error("regime_label: bad regime");
}

Regime regime_from_label(const std::string& s) {
  if (s == "R") return Regime::returns_only;
  if (s == "Z") return Regime::discrete_expert;
  if (s == "J") return Regime::continuous_expert;
  if (s == "F") return Regime::full_info;
  throw std::invalid_argument("unknown regime label: " + s);
}

FilterState FilterTrajectory::state(std::size_t node) const {
  FilterState s;
  s.t = grid->nodes[node];
  s.m_hat.assign(m_at(node), m_at(node) + d);
  s.q = sym_from_flat(q_at(node), d);
  return s;
}

SymMatrix riccati_rhs(Regime regime, const ModelParams& p, const SymMatrix& q) {
  if (q.dim() != p.d) throw DimMismatch("riccati_rhs: q dimension mismatch");
  Engine eng(rhs_regime(regime), p, nullptr);
  std::vector<double> out(p.d * p.d);
  eng.core.rhs(q.mat().data(), out.data());
  return sym_from_flat(out.data(), p.d);
}

SymMatrix integrate_riccati(Regime regime, const ModelParams& p, const SymMatrix& q0, double t0,
                            double t1, double step) {
  if (q0.dim() != p.d) throw DimMismatch("integrate_riccati: q0 dimension mismatch");
  if (t1 < t0) throw std::invalid_argument("integrate_riccati: t1 < t0");
  if (!(step > 0.0)) throw std::invalid_argument("integrate_riccati: step must be positive");
  Engine eng(rhs_regime(regime), p, nullptr);
  std::vector<double> q = flat_of(q0.mat());
  eng.advance_cov(q.data(), t0, t1, step, "integrate_riccati");
  return sym_from_flat(q.data(), p.d);
}

SymMatrix update_covariance(const SymMatrix& q_pre, const SymMatrix& gamma) {
  const std::size_t d = q_pre.dim();
  if (gamma.dim() != d) throw DimMismatch("update_covariance: dimension mismatch");
  std::vector<double> q = flat_of(q_pre.mat());
  UpdateWork w(d);
  bayes_update_flat(d, q.data(), nullptr, gamma.mat().data(), nullptr, w);
  return sym_from_flat(q.data(), d);
}

Vec update_mean(const Vec& m_pre, const SymMatrix& q_pre, const SymMatrix& gamma, const Vec& z) {
  const std::size_t d = q_pre.dim();
  if (gamma.dim() != d || m_pre.size() != d || z.size() != d)
    throw DimMismatch("update_mean: dimension mismatch");
  std::vector<double> q = flat_of(q_pre.mat());
  Vec m = m_pre;
  UpdateWork w(d);
  bayes_update_flat(d, q.data(), m.data(), gamma.mat().data(), z.data(), w);
  return m;
}

Vec propagate_mean(Regime regime, const ModelParams& p, const FilterState& state, const Vec& dr,
                   const Vec* dj, double h) {
  if ((regime == Regime::continuous_expert) != (dj != nullptr))
    throw std::invalid_argument("propagate_mean: dJ must be present exactly for the J regime");
  if (!(h > 0.0)) throw std::invalid_argument("propagate_mean: h must be positive");
  Engine eng(rhs_regime(regime), p, nullptr);
  Vec m = state.m_hat;
  MeanWork w(p.d);
  mean_step_flat(p.d, eng.alpha_f.data(), eng.delta_f.data(), eng.m_r_f.data(),
                 dj ? eng.m_j_f.data() : nullptr, state.q.mat().data(), m.data(), dr.data(),
                 dj ? dj->data() : nullptr, h, w);
  return m;
}

CovarianceTable covariance_table(Regime regime, const ModelParams& p, const DateScheme& scheme,
                                 std::shared_ptr<const TimeGrid> grid,
                                 const FilterOptions& options) {
  if (!grid) throw std::invalid_argument("covariance_table: null grid");
  const TimeGrid& g = *grid;
  const std::size_t d = p.d, dd = d * d;

  CovarianceTable table;
  table.regime = regime;
  table.grid = grid;
  table.d = d;
  table.q.assign(g.n_nodes() * dd, 0.0);
  if (regime == Regime::full_info) return table;

  const bool updates = regime == Regime::discrete_expert;
  const SymMatrix gamma = updates ? scheme_gamma(p, scheme) : SymMatrix();
  Engine eng(regime, p, updates ? &gamma : nullptr);

  std::vector<double> q = flat_of(p.sigma0.mat());
  std::copy(q.begin(), q.end(), table.q.begin());
  for (std::size_t iv = 0; iv < g.n_intervals(); ++iv) {
    eng.advance_cov(q.data(), g.nodes[iv], g.nodes[iv + 1], options.riccati_step,
                    "covariance_table");
    const int k = g.info[iv + 1];
    if (updates && k >= 0) {
      FilterJump jump;
      jump.k = k;
      jump.time = g.nodes[iv + 1];
      jump.q_pre = sym_from_flat(q.data(), d);
      bayes_update_flat(d, q.data(), nullptr, eng.gamma_f.data(), nullptr, eng.uw);
      jump.q_post = sym_from_flat(q.data(), d);
      table.jumps.push_back(std::move(jump));
    }
    std::copy(q.begin(), q.end(), table.q.begin() + (iv + 1) * dd);
  }
  return table;
}

FilterTrajectory run_filter(Regime regime, const ModelParams& p, const DateScheme& scheme,
                            const MarketPath& path, const FilterOptions& options,
                            const CovarianceTable* cached) {
  if (!path.grid) throw std::invalid_argument("run_filter: path has no grid");
  if (path.d != p.d) throw GridMismatch("run_filter: path dimension differs from params");
  const TimeGrid& g = *path.grid;
  const std::size_t d = p.d, dd = d * d;

  FilterTrajectory traj;
  traj.regime = regime;
  traj.grid = path.grid;
  traj.d = d;
  traj.m.resize(g.n_nodes() * d);
  traj.q.assign(g.n_nodes() * dd, 0.0);

  if (regime == Regime::full_info) {
    traj.m = path.mu;
    return traj;
  }

  if (cached) {
    const bool same_grid = cached->grid == path.grid ||
                           (cached->grid && cached->grid->nodes == g.nodes &&
                            cached->grid->dates == g.dates);
    if (cached->regime != regime || !same_grid || cached->d != d)
      throw std::invalid_argument("run_filter: cached covariance table does not match");
  }

  const bool updates = regime == Regime::discrete_expert;
  const SymMatrix gamma = updates ? scheme_gamma(p, scheme) : SymMatrix();
  Engine eng(regime, p, updates ? &gamma : nullptr);
  const bool use_dj = regime == Regime::continuous_expert;

  std::vector<double> q;
  if (cached) {
    traj.q = cached->q;
  } else {
    q = flat_of(p.sigma0.mat());
    std::copy(q.begin(), q.end(), traj.q.begin());
  }
  std::copy(p.m0.begin(), p.m0.end(), traj.m.begin());

  std::vector<double> qpre(dd);
  std::size_t next_jump = 0;
  for (std::size_t iv = 0; iv < g.n_intervals(); ++iv) {
    const double h = g.nodes[iv + 1] - g.nodes[iv];
    double* m_next = traj.m.data() + (iv + 1) * d;
    std::copy(traj.m.data() + iv * d, traj.m.data() + (iv + 1) * d, m_next);
    const double* q_start = cached ? cached->q_at(iv) : q.data();
    mean_step_flat(d, eng.alpha_f.data(), eng.delta_f.data(), eng.m_r_f.data(),
                   use_dj ? eng.m_j_f.data() : nullptr, q_start, m_next, path.dr_at(iv),
                   use_dj ? path.dj_at(iv) : nullptr, h, eng.mw);

    if (!cached) {
      eng.advance_cov(q.data(), g.nodes[iv], g.nodes[iv + 1], options.riccati_step, "run_filter");
    }

    const int k = g.info[iv + 1];
    if (updates && k >= 0) {
      FilterJump jump;
      jump.k = k;
      jump.time = g.nodes[iv + 1];
      jump.m_pre.assign(m_next, m_next + d);
      if (cached) {
        const FilterJump& cj = cached->jumps[next_jump++];
        std::copy(cj.q_pre.mat().data(), cj.q_pre.mat().data() + dd, qpre.data());
      } else {
        std::copy(q.begin(), q.end(), qpre.data());
      }
      jump.q_pre = sym_from_flat(qpre.data(), d);
      // mean update consumes the pre-update covariance; covariance update follows when
      // not served from the cache
      bayes_update_flat(d, qpre.data(), m_next, eng.gamma_f.data(),
                        path.opinion_z.data() + static_cast<std::size_t>(k) * d, eng.uw);
      if (!cached) std::copy(qpre.begin(), qpre.end(), q.begin());
      jump.m_post.assign(m_next, m_next + d);
      jump.q_post = cached ? cached->jumps[next_jump - 1].q_post : sym_from_flat(q.data(), d);
      traj.jumps.push_back(std::move(jump));
    }
    if (!cached) std::copy(q.begin(), q.end(), traj.q.begin() + (iv + 1) * dd);
  }
  return traj;
}

StationaryQ stationary_q(Regime regime, const ModelParams& p, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("stationary_q: tol must be positive");
  const Regime r = rhs_regime(regime);
  Engine eng(r, p, nullptr);
  const std::size_t d = p.d;
  const double lmin_alpha = min_eigenvalue(p.alpha);
  const double t_max = 100.0 / lmin_alpha;
  const double h = 1e-2 / lmin_alpha;

  std::vector<double> q = flat_of(p.sigma0.mat());
  std::vector<double> rhs(d * d);
  StationaryQ out;
  double t = 0.0;
  while (t <= t_max) {
    double lmin = 0.0, lmax = 0.0;
    eig_range_flat(q.data(), d, lmin, lmax);
    out.c_q = std::max(out.c_q, std::max(std::abs(lmin), std::abs(lmax)));
    eng.core.rhs(q.data(), rhs.data());
    if (detail::frob_flat(rhs.data(), d * d) <= tol) {
      out.q = sym_from_flat(q.data(), d);
      return out;
    }
    eng.core.step_rk4(q.data(), h);
    t += h;
  }
  throw NoConvergence("stationary_q: no fixed point by t = 100 / lambda_min(alpha)");
}

}  // namespace driftlab
