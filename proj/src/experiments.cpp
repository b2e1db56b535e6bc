#include "driftlab/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>

#include "driftlab/detail/filter_kernels.hpp"
#include "driftlab/detail/riccati_core.hpp"
#include "driftlab/parallel.hpp"

namespace driftlab {

using detail::flat_of;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

double pow_p(double x, int p) {
  if (p == 1) return x;
  if (p == 2) return x * x;
  return std::pow(x, p);
}

int check_moment_order(int p) {
  if (p < 1) throw std::invalid_argument("moment order p must be at least 1");
  return p;
}

void check_n_mc(std::size_t n_mc) {
  if (n_mc < 1000) throw std::invalid_argument("n_mc must be at least 1000");
}

template <class T>
void check_levels(const std::vector<T>& v, const char* what) {
  if (v.empty()) throw std::invalid_argument(std::string(what) + ": empty level list");
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] > 0)) throw std::invalid_argument(std::string(what) + ": levels must be positive");
    if (i + 1 < v.size() && !(v[i] < v[i + 1]))
      throw std::invalid_argument(std::string(what) + ": levels must be strictly increasing");
  }
}

double dot_flat(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double grid_eps(double horizon) { return 1e-12 * std::max(1.0, horizon); }

std::size_t node_of_time(const TimeGrid& g, double t) {
  const double eps = grid_eps(g.horizon);
  auto it = std::lower_bound(g.nodes.begin(), g.nodes.end(), t - eps);
  if (it != g.nodes.end() && std::abs(*it - t) <= eps)
    return static_cast<std::size_t>(it - g.nodes.begin());
  throw std::logic_error("node_of_time: time is not a grid node");
}

// j * T / n_cp for j = 1..n_cp, last one exactly the horizon
std::vector<double> checkpoint_times(double horizon, int n_cp) {
  if (n_cp < 1) throw std::invalid_argument("need at least one checkpoint");
  std::vector<double> cp(static_cast<std::size_t>(n_cp));
  for (int j = 1; j <= n_cp; ++j)
    cp[static_cast<std::size_t>(j - 1)] =
        j == n_cp ? horizon : horizon * static_cast<double>(j) / static_cast<double>(n_cp);
  return cp;
}

double vec_gap(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double c = a[i] - b[i];
    s += c * c;
  }
  return std::sqrt(s);
}

double spec_gap(const double* a, const double* b, std::size_t d, std::vector<double>& buf) {
  for (std::size_t i = 0; i < d * d; ++i) buf[i] = a[i] - b[i];
  return detail::spectral_norm_flat(buf.data(), d);
}

// sup over nodes of |Q^Z - Q^J| in spectral norm, pre-update values at dates included
double sup_cov_gap(const CovarianceTable& z, const CovarianceTable& j, std::vector<double>& buf) {
  if (z.grid != j.grid) throw std::logic_error("sup_cov_gap: tables on different grids");
  const std::size_t d = z.d;
  const TimeGrid& g = *z.grid;
  double s = 0.0;
  for (std::size_t node = 0; node < g.n_nodes(); ++node)
    s = std::max(s, spec_gap(z.q_at(node), j.q_at(node), d, buf));
  for (const FilterJump& jump : z.jumps) {
    const std::size_t node = g.date_node[static_cast<std::size_t>(jump.k)];
    s = std::max(s, spec_gap(jump.q_pre.mat().data(), j.q_at(node), d, buf));
  }
  return s;
}

void attach_fit(ConvergenceReport& r, const std::vector<double>& errors, const char* axis) {
  try {
    r.slope = fit_loglog_slope(r.levels, errors);
    r.slope_note = std::string("OLS slope of log(error) on log(") + axis + ")";
  } catch (const Degenerate& e) {
    r.slope.reset();
    r.slope_note = e.what();
  }
}

std::shared_ptr<const TimeGrid> shared_grid(TimeGrid&& g) {
  return std::make_shared<const TimeGrid>(std::move(g));
}

// Deterministic covariance walker for the value integrand: advances Q through the
// regime's Riccati flow with Bayesian updates at dates, accumulating the composite
// Simpson integral of tr(M_R Q). Reusable across date draws; serial per instance.
struct TraceIntegrator {
  std::size_t d, dd;
  double horizon, quad;
  bool updates;
  detail::RiccatiCore core;
  std::vector<double> m_r, gamma, q0, q;
  detail::UpdateWork uw;

  TraceIntegrator(const ModelParams& p, Regime regime, const SymMatrix* gm, double quad_step)
      : d(p.d), dd(p.d * p.d), horizon(p.horizon_t), quad(quad_step),
        updates(regime == Regime::discrete_expert), uw(p.d) {
    m_r = flat_of(inverse_spd(SymMatrix::from(p.sigma_r * transpose(p.sigma_r))).mat());
    std::vector<double> m = m_r;
    if (regime == Regime::continuous_expert) {
      const auto mj = flat_of(inverse_spd(SymMatrix::from(p.sigma_j * transpose(p.sigma_j))).mat());
      for (std::size_t i = 0; i < dd; ++i) m[i] += mj[i];
    }
    const Matrix bbT = p.beta * transpose(p.beta);
    core = detail::RiccatiCore(d, flat_of(p.alpha.mat()).data(), bbT.data(), m.data());
    if (updates) {
      if (!gm) throw std::logic_error("TraceIntegrator: missing gamma");
      gamma = flat_of(gm->mat());
    }
    q0 = flat_of(p.sigma0.mat());
    q.resize(dd);
  }

  double trq() const { return dot_flat(m_r.data(), q.data(), dd); }

  double integrate(const std::vector<double>& dates) {
    std::copy(q0.begin(), q0.end(), q.begin());
    double acc = 0.0;
    double prev = 0.0;
    auto segment = [&](double a, double b) {
      if (!(b > a)) return;
      const auto nsub =
          std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((b - a) / quad - 1e-12)));
      const double h = (b - a) / static_cast<double>(nsub);
      double f0 = trq();
      for (std::size_t s = 0; s < nsub; ++s) {
        core.step_rk4(q.data(), 0.5 * h);
        const double fm = trq();
        core.step_rk4(q.data(), 0.5 * h);
        const double f1 = trq();
        acc += h / 6.0 * (f0 + 4.0 * fm + f1);
        f0 = f1;
      }
    };
    for (double date : dates) {
      segment(prev, date);
      detail::bayes_update_flat(d, q.data(), nullptr, gamma.data(), nullptr, uw);
      prev = date;
    }
    segment(prev, horizon);
    return acc;
  }
};

void strategy_into(const double* m_r, const FilterTrajectory& traj, std::vector<double>& out) {
  const std::size_t d = traj.d;
  out.resize(traj.m.size());
  const std::size_t n_nodes = traj.m.size() / d;
  for (std::size_t node = 0; node < n_nodes; ++node) {
    const double* m = traj.m_at(node);
    double* o = out.data() + node * d;
    for (std::size_t i = 0; i < d; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += m_r[i * d + j] * m[j];
      o[i] = s;
    }
  }
}

double policy_h(const ModelParams& p, const DateScheme& scheme, const RunPolicy& policy) {
  return policy.h_max > 0.0 ? policy.h_max : default_h_max(p, scheme);
}

}  // namespace

SlopeFit fit_loglog_slope(const std::vector<double>& levels, const std::vector<double>& errors) {
  if (levels.size() != errors.size())
    throw std::invalid_argument("fit_loglog_slope: levels and errors differ in length");
  const std::size_t n = levels.size();
  if (n < 3) throw Degenerate("slope fit needs at least 3 points");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(levels[i] > 0.0)) throw std::invalid_argument("fit_loglog_slope: nonpositive level");
    if (!(errors[i] > 0.0)) throw Degenerate("error at or below resolution, slope fit skipped");
  }
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = std::log(levels[i]);
    y[i] = std::log(errors[i]);
  }
  const double xbar = pairwise_sum(x) / static_cast<double>(n);
  const double ybar = pairwise_sum(y) / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - xbar) * (x[i] - xbar);
    sxy += (x[i] - xbar) * (y[i] - ybar);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_loglog_slope: degenerate level spread");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = ybar - fit.slope * xbar;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    rss += r * r;
  }
  fit.std_err = n > 2 ? std::sqrt(rss / static_cast<double>(n - 2) / sxx) : 0.0;
  return fit;
}

ConvergenceReport cov_error_deterministic(const ModelParams& params, const std::vector<int>& n_list,
                                          const RunPolicy& policy) {
  Timer timer;
  validate_or_throw(params);
  check_levels(n_list, "cov_error_deterministic");

  // every level's dates become nodes of every grid, so all levels share one node set
  std::vector<double> union_dates;
  for (int n : n_list) {
    const auto dates = deterministic_dates(DateScheme::deterministic(n), params.horizon_t);
    union_dates.insert(union_dates.end(), dates.begin(), dates.end());
  }
  std::sort(union_dates.begin(), union_dates.end());
  const double h = policy_h(params, DateScheme::deterministic(n_list.back()), policy);

  FilterOptions opts;
  opts.riccati_step = policy.riccati_step;

  ConvergenceReport report;
  report.scheme_kind = DateScheme::Kind::deterministic;
  report.levels.assign(n_list.begin(), n_list.end());
  report.cov_errors.assign(n_list.size(), 0.0);
  report.ci_half.assign(n_list.size(), 0.0);
  report.p = 1;

  for_each_index(n_list.size(), policy.parallel, [&](std::size_t li) {
    const DateScheme scheme = DateScheme::deterministic(n_list[li]);
    const auto dates = deterministic_dates(scheme, params.horizon_t);
    const auto grid = shared_grid(make_grid(params, scheme, dates, h, union_dates));
    const CovarianceTable tz =
        covariance_table(Regime::discrete_expert, params, scheme, grid, opts);
    const CovarianceTable tj =
        covariance_table(Regime::continuous_expert, params, scheme, grid, opts);
    std::vector<double> buf(params.d * params.d);
    report.cov_errors[li] = sup_cov_gap(tz, tj, buf);
  });

  attach_fit(report, report.cov_errors, "n");
  report.wall_seconds = timer.seconds();
  return report;
}

ConvergenceReport cov_error_poisson(const ModelParams& params,
                                    const std::vector<double>& lambda_list, int p,
                                    std::size_t n_mc, std::uint64_t seed,
                                    const RunPolicy& policy) {
  Timer timer;
  validate_or_throw(params);
  check_levels(lambda_list, "cov_error_poisson");
  check_moment_order(p);
  check_n_mc(n_mc);

  FilterOptions opts;
  opts.riccati_step = policy.riccati_step;

  ConvergenceReport report;
  report.scheme_kind = DateScheme::Kind::poisson;
  report.levels = lambda_list;
  report.cov_errors.assign(lambda_list.size(), 0.0);
  report.ci_half.assign(lambda_list.size(), 0.0);
  report.p = p;
  report.n_mc = n_mc;
  report.seed = seed;

  std::vector<double> slots(n_mc);
  for (std::size_t li = 0; li < lambda_list.size(); ++li) {
    const DateScheme scheme = DateScheme::poisson(lambda_list[li]);
    const double h = policy_h(params, scheme, policy);
    for_each_index(n_mc, policy.parallel, [&](std::size_t i) {
      RngStream date_rng(seed, i, NoiseRole::dates);
      const auto dates = sample_poisson_dates(scheme.lambda, params.horizon_t, date_rng);
      const auto grid = shared_grid(make_grid(params, scheme, dates, h));
      const CovarianceTable tz =
          covariance_table(Regime::discrete_expert, params, scheme, grid, opts);
      const CovarianceTable tj =
          covariance_table(Regime::continuous_expert, params, scheme, grid, opts);
      std::vector<double> buf(params.d * params.d);
      slots[i] = pow_p(sup_cov_gap(tz, tj, buf), p);
    });
    const MeanSd ms = mean_sd(slots);
    report.cov_errors[li] = ms.mean;
    report.ci_half[li] = 1.96 * ms.sd / std::sqrt(static_cast<double>(n_mc));
  }

  attach_fit(report, report.cov_errors, "lambda");
  report.wall_seconds = timer.seconds();
  return report;
}

ConvergenceReport mean_error(const ModelParams& params, const std::vector<DateScheme>& schemes,
                             int p, int n_checkpoints, std::size_t n_mc, std::uint64_t seed,
                             const RunPolicy& policy, bool full_grid_sup) {
  Timer timer;
  validate_or_throw(params);
  check_moment_order(p);
  check_n_mc(n_mc);
  if (schemes.empty()) throw std::invalid_argument("mean_error: empty scheme list");
  const DateScheme::Kind kind = schemes.front().kind;
  std::vector<double> levels;
  for (const DateScheme& s : schemes) {
    if (s.kind != kind) throw std::invalid_argument("mean_error: mixed scheme kinds");
    levels.push_back(s.level());
  }
  check_levels(levels, "mean_error");
  if (full_grid_sup && kind != DateScheme::Kind::deterministic)
    throw std::invalid_argument("mean_error: full_grid_sup needs deterministic dates");

  const std::size_t d = params.d;
  const std::size_t n_levels = schemes.size();
  const auto cps = checkpoint_times(params.horizon_t, n_checkpoints);
  const std::size_t n_cp = cps.size();

  FilterOptions opts;
  opts.riccati_step = policy.riccati_step;

  ConvergenceReport report;
  report.scheme_kind = kind;
  report.levels = levels;
  report.mean_errors.assign(n_levels, 0.0);
  report.ci_half.assign(n_levels, 0.0);
  report.p = p;
  report.n_mc = n_mc;
  report.seed = seed;

  if (kind == DateScheme::Kind::deterministic) {
    // one shared node set across levels: union of all dates plus the checkpoints, so the
    // same noise streams give bitwise-identical market paths at every level
    std::vector<double> extra = cps;
    for (const DateScheme& s : schemes) {
      const auto dates = deterministic_dates(s, params.horizon_t);
      extra.insert(extra.end(), dates.begin(), dates.end());
    }
    std::sort(extra.begin(), extra.end());
    const double h = policy_h(params, schemes.back(), policy);

    std::vector<std::shared_ptr<const TimeGrid>> grids(n_levels);
    std::vector<std::unique_ptr<PathSimulator>> sims(n_levels);
    std::vector<CovarianceTable> tz(n_levels);
    DriftMoments dm(params);
    for (std::size_t l = 0; l < n_levels; ++l) {
      const auto dates = deterministic_dates(schemes[l], params.horizon_t);
      grids[l] = shared_grid(make_grid(params, schemes[l], dates, h, extra));
      if (l > 0 && grids[l]->nodes != grids[0]->nodes)
        throw std::logic_error("mean_error: level grids diverged");
      sims[l] = std::make_unique<PathSimulator>(dm, schemes[l], grids[l]);
      tz[l] = covariance_table(Regime::discrete_expert, params, schemes[l], grids[l], opts);
    }
    const CovarianceTable tj =
        covariance_table(Regime::continuous_expert, params, schemes[0], grids[0], opts);

    std::vector<std::size_t> cp_nodes(n_cp);
    for (std::size_t c = 0; c < n_cp; ++c) cp_nodes[c] = node_of_time(*grids[0], cps[c]);

    if (full_grid_sup) {
      // chunked accumulation: per-node sums are combined in fixed chunk order, so the
      // result is thread-count independent without holding n_mc full trajectories
      const std::size_t n_nodes = grids[0]->n_nodes();
      const std::size_t chunk = 512;
      std::vector<double> sum(n_levels * n_nodes, 0.0);
      std::vector<double> slab(n_levels * n_nodes * chunk);
      for (std::size_t base = 0; base < n_mc; base += chunk) {
        const std::size_t m = std::min(chunk, n_mc - base);
        for_each_index(m, policy.parallel, [&](std::size_t off) {
          const std::size_t i = base + off;
          const MarketPath path0 = sims[0]->simulate(seed, i);
          const FilterTrajectory trj =
              run_filter(Regime::continuous_expert, params, schemes[0], path0, opts, &tj);
          for (std::size_t l = 0; l < n_levels; ++l) {
            const MarketPath path = l == 0 ? MarketPath(path0) : sims[l]->simulate(seed, i);
            const FilterTrajectory trz =
                run_filter(Regime::discrete_expert, params, schemes[l], path, opts, &tz[l]);
            for (std::size_t node = 0; node < n_nodes; ++node)
              slab[(l * n_nodes + node) * chunk + off] =
                  pow_p(vec_gap(trz.m_at(node), trj.m_at(node), d), p);
          }
        });
        for (std::size_t ln = 0; ln < n_levels * n_nodes; ++ln)
          sum[ln] += pairwise_sum(slab.data() + ln * chunk, m);
      }
      for (std::size_t l = 0; l < n_levels; ++l) {
        double best = 0.0;
        for (std::size_t node = 0; node < n_nodes; ++node)
          best = std::max(best, sum[l * n_nodes + node] / static_cast<double>(n_mc));
        report.mean_errors[l] = best;  // no CI: per-sample spread is not retained here
      }
    } else {
      std::vector<double> slots(n_levels * n_cp * n_mc);
      for_each_index(n_mc, policy.parallel, [&](std::size_t i) {
        const MarketPath path0 = sims[0]->simulate(seed, i);
        const FilterTrajectory trj =
            run_filter(Regime::continuous_expert, params, schemes[0], path0, opts, &tj);
        for (std::size_t l = 0; l < n_levels; ++l) {
          const MarketPath path = l == 0 ? MarketPath(path0) : sims[l]->simulate(seed, i);
          const FilterTrajectory trz =
              run_filter(Regime::discrete_expert, params, schemes[l], path, opts, &tz[l]);
          for (std::size_t c = 0; c < n_cp; ++c)
            slots[(l * n_cp + c) * n_mc + i] =
                pow_p(vec_gap(trz.m_at(cp_nodes[c]), trj.m_at(cp_nodes[c]), d), p);
        }
      });
      for (std::size_t l = 0; l < n_levels; ++l) {
        double best = -1.0, best_ci = 0.0;
        for (std::size_t c = 0; c < n_cp; ++c) {
          const MeanSd ms = mean_sd(slots.data() + (l * n_cp + c) * n_mc, n_mc);
          if (ms.mean > best) {
            best = ms.mean;
            best_ci = 1.96 * ms.sd / std::sqrt(static_cast<double>(n_mc));
          }
        }
        report.mean_errors[l] = best;
        report.ci_half[l] = best_ci;
      }
    }
  } else {
    DriftMoments dm(params);
    std::vector<double> slots(n_cp * n_mc);
    for (std::size_t l = 0; l < n_levels; ++l) {
      const DateScheme& scheme = schemes[l];
      const double h = policy_h(params, scheme, policy);
      for_each_index(n_mc, policy.parallel, [&](std::size_t i) {
        RngStream date_rng(seed, i, NoiseRole::dates);
        const auto dates = sample_poisson_dates(scheme.lambda, params.horizon_t, date_rng);
        const auto grid = shared_grid(make_grid(params, scheme, dates, h, cps));
        const PathSimulator sim(dm, scheme, grid);
        const MarketPath path = sim.simulate(seed, i);
        const FilterTrajectory trz =
            run_filter(Regime::discrete_expert, params, scheme, path, opts);
        const FilterTrajectory trj =
            run_filter(Regime::continuous_expert, params, scheme, path, opts);
        for (std::size_t c = 0; c < n_cp; ++c) {
          const std::size_t node = node_of_time(*grid, cps[c]);
          slots[c * n_mc + i] = pow_p(vec_gap(trz.m_at(node), trj.m_at(node), d), p);
        }
      });
      double best = -1.0, best_ci = 0.0;
      for (std::size_t c = 0; c < n_cp; ++c) {
        const MeanSd ms = mean_sd(slots.data() + c * n_mc, n_mc);
        if (ms.mean > best) {
          best = ms.mean;
          best_ci = 1.96 * ms.sd / std::sqrt(static_cast<double>(n_mc));
        }
      }
      report.mean_errors[l] = best;
      report.ci_half[l] = best_ci;
    }
  }

  attach_fit(report, report.mean_errors,
             kind == DateScheme::Kind::deterministic ? "n" : "lambda");
  report.wall_seconds = timer.seconds();
  return report;
}

double drift_second_moment_integral(const ModelParams& params, double quad_step) {
  validate_or_throw(params);
  if (!(quad_step > 0.0))
    throw std::invalid_argument("drift_second_moment_integral: quad_step must be positive");
  const std::size_t d = params.d, dd = d * d;
  const DriftMoments dm(params);
  const auto m_r =
      flat_of(inverse_spd(SymMatrix::from(params.sigma_r * transpose(params.sigma_r))).mat());
  const Matrix bbT = params.beta * transpose(params.beta);
  detail::RiccatiCore lyap(d, flat_of(params.alpha.mat()).data(), bbT.data(), nullptr);

  std::vector<double> sig = flat_of(params.sigma0.mat());
  auto eval = [&](double t) {
    const Vec m = dm.mean(t);
    double mm = 0.0;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) mm += m[i] * m_r[i * d + j] * m[j];
    return dot_flat(m_r.data(), sig.data(), dd) + mm;
  };

  const double horizon = params.horizon_t;
  const auto nsub =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(horizon / quad_step - 1e-12)));
  const double h = horizon / static_cast<double>(nsub);
  double acc = 0.0;
  double t = 0.0;
  double f0 = eval(0.0);
  for (std::size_t s = 0; s < nsub; ++s) {
    lyap.step_rk4(sig.data(), 0.5 * h);
    const double fm = eval(t + 0.5 * h);
    lyap.step_rk4(sig.data(), 0.5 * h);
    const double f1 = eval(t + h);
    acc += h / 6.0 * (f0 + 4.0 * fm + f1);
    t += h;
    f0 = f1;
  }
  return acc;
}

ValueReport value_function(const ModelParams& params, Regime regime, const DateScheme* scheme,
                           double x0, std::size_t n_mc, std::uint64_t seed,
                           const RunPolicy& policy) {
  validate_or_throw(params);
  if (!(x0 > 0.0)) throw std::invalid_argument("value_function: x0 must be positive");
  const double quad = policy.quad_step > 0.0 ? policy.quad_step : 5e-4;
  const double a_part = drift_second_moment_integral(params, quad);

  ValueReport report;
  report.regime = regime;
  report.x0 = x0;

  if (regime == Regime::full_info) {
    report.value = std::log(x0) + 0.5 * a_part;
    return report;
  }

  if (regime == Regime::discrete_expert) {
    if (!scheme)
      throw std::invalid_argument("value_function: discrete-expert regime needs a date scheme");
    report.level = scheme->level();
    const SymMatrix gamma = scheme_gamma(params, *scheme);
    if (scheme->kind == DateScheme::Kind::deterministic) {
      TraceIntegrator ti(params, regime, &gamma, quad);
      const double b_part = ti.integrate(deterministic_dates(*scheme, params.horizon_t));
      report.value = std::log(x0) + 0.5 * (a_part - b_part);
      return report;
    }
    if (n_mc < 1) throw std::invalid_argument("value_function: Poisson dates need n_mc >= 1");
    std::vector<double> slots(n_mc);
    for_each_index(n_mc, policy.parallel, [&, gamma](std::size_t i) {
      TraceIntegrator ti(params, regime, &gamma, quad);
      RngStream date_rng(seed, i, NoiseRole::dates);
      const auto dates = sample_poisson_dates(scheme->lambda, params.horizon_t, date_rng);
      slots[i] = std::log(x0) + 0.5 * (a_part - ti.integrate(dates));
    });
    const MeanSd ms = mean_sd(slots);
    report.value = ms.mean;
    const double half = 1.96 * ms.sd / std::sqrt(static_cast<double>(n_mc));
    report.ci_low = ms.mean - half;
    report.ci_high = ms.mean + half;
    report.has_ci = true;
    report.n_mc = n_mc;
    return report;
  }

  TraceIntegrator ti(params, regime, nullptr, quad);
  const double b_part = ti.integrate({});
  report.value = std::log(x0) + 0.5 * (a_part - b_part);
  return report;
}

std::vector<double> optimal_strategy(const ModelParams& params, const FilterTrajectory& traj) {
  if (traj.d != params.d) throw DimMismatch("optimal_strategy: dimension mismatch");
  const auto m_r =
      flat_of(inverse_spd(SymMatrix::from(params.sigma_r * transpose(params.sigma_r))).mat());
  std::vector<double> out;
  strategy_into(m_r.data(), traj, out);
  return out;
}

double terminal_log_wealth(const ModelParams& params, const MarketPath& path,
                           const std::vector<double>& pi, double x0) {
  if (!(x0 > 0.0)) throw std::invalid_argument("terminal_log_wealth: x0 must be positive");
  if (!path.grid) throw std::invalid_argument("terminal_log_wealth: path has no grid");
  if (path.d != params.d) throw DimMismatch("terminal_log_wealth: dimension mismatch");
  const TimeGrid& g = *path.grid;
  const std::size_t d = params.d;
  if (pi.size() != g.n_nodes() * d)
    throw DimMismatch("terminal_log_wealth: strategy is not node-aligned");
  const auto s_r = flat_of(params.sigma_r * transpose(params.sigma_r));

  double lx = std::log(x0);
  for (std::size_t iv = 0; iv < g.n_intervals(); ++iv) {
    const double h = g.nodes[iv + 1] - g.nodes[iv];
    const double* pv = pi.data() + iv * d;
    const double* mu = path.mu_at(iv);
    const double* dr = path.dr_at(iv);
    double pm = 0.0, pr = 0.0, quad = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      pm += pv[i] * mu[i];
      pr += pv[i] * dr[i];
      for (std::size_t j = 0; j < d; ++j) quad += pv[i] * s_r[i * d + j] * pv[j];
    }
    // literal accumulation: drift gain, variance drag, then the observed noise term
    lx += pm * h - 0.5 * quad * h + (pr - pm * h);
  }
  return lx;
}

UtilityGapReport pathwise_utility_gap(const ModelParams& params,
                                      const std::vector<DateScheme>& schemes, std::size_t n_mc,
                                      std::uint64_t seed, const RunPolicy& policy) {
  Timer timer;
  validate_or_throw(params);
  check_n_mc(n_mc);
  if (schemes.empty()) throw std::invalid_argument("pathwise_utility_gap: empty scheme list");
  std::vector<double> levels;
  for (const DateScheme& s : schemes) {
    if (s.kind != DateScheme::Kind::deterministic)
      throw std::invalid_argument("pathwise_utility_gap: levels use deterministic schemes");
    levels.push_back(s.level());
  }
  check_levels(levels, "pathwise_utility_gap");

  const std::size_t n_levels = schemes.size();
  std::vector<double> extra;
  for (const DateScheme& s : schemes) {
    const auto dates = deterministic_dates(s, params.horizon_t);
    extra.insert(extra.end(), dates.begin(), dates.end());
  }
  std::sort(extra.begin(), extra.end());
  const double h = policy_h(params, schemes.back(), policy);

  FilterOptions opts;
  opts.riccati_step = policy.riccati_step;

  std::vector<std::shared_ptr<const TimeGrid>> grids(n_levels);
  std::vector<std::unique_ptr<PathSimulator>> sims(n_levels);
  std::vector<CovarianceTable> tz(n_levels);
  DriftMoments dm(params);
  for (std::size_t l = 0; l < n_levels; ++l) {
    const auto dates = deterministic_dates(schemes[l], params.horizon_t);
    grids[l] = shared_grid(make_grid(params, schemes[l], dates, h, extra));
    if (l > 0 && grids[l]->nodes != grids[0]->nodes)
      throw std::logic_error("pathwise_utility_gap: level grids diverged");
    sims[l] = std::make_unique<PathSimulator>(dm, schemes[l], grids[l]);
    tz[l] = covariance_table(Regime::discrete_expert, params, schemes[l], grids[l], opts);
  }
  const CovarianceTable tj =
      covariance_table(Regime::continuous_expert, params, schemes[0], grids[0], opts);
  const auto m_r =
      flat_of(inverse_spd(SymMatrix::from(params.sigma_r * transpose(params.sigma_r))).mat());

  std::vector<double> slots(n_levels * n_mc);
  for_each_index(n_mc, policy.parallel, [&](std::size_t i) {
    std::vector<double> pi;
    const MarketPath path0 = sims[0]->simulate(seed, i);
    const FilterTrajectory trj =
        run_filter(Regime::continuous_expert, params, schemes[0], path0, opts, &tj);
    strategy_into(m_r.data(), trj, pi);
    const double lx_j = terminal_log_wealth(params, path0, pi, 1.0);
    for (std::size_t l = 0; l < n_levels; ++l) {
      const MarketPath path = l == 0 ? MarketPath(path0) : sims[l]->simulate(seed, i);
      const FilterTrajectory trz =
          run_filter(Regime::discrete_expert, params, schemes[l], path, opts, &tz[l]);
      strategy_into(m_r.data(), trz, pi);
      const double lx_z = terminal_log_wealth(params, path, pi, 1.0);
      slots[l * n_mc + i] = std::abs(lx_z - lx_j);
    }
  });

  UtilityGapReport report;
  report.levels = levels;
  report.gap.resize(n_levels);
  report.ci_half.resize(n_levels);
  report.n_mc = n_mc;
  report.seed = seed;
  for (std::size_t l = 0; l < n_levels; ++l) {
    const MeanSd ms = mean_sd(slots.data() + l * n_mc, n_mc);
    report.gap[l] = ms.mean;
    report.ci_half[l] = 1.96 * ms.sd / std::sqrt(static_cast<double>(n_mc));
  }
  report.wall_seconds = timer.seconds();
  return report;
}

ConsistencyReport filter_consistency(const ModelParams& params, Regime regime,
                                     const DateScheme& scheme, std::size_t n_mc,
                                     std::uint64_t seed, const RunPolicy& policy) {
  validate_or_throw(params);
  if (n_mc < 2) throw std::invalid_argument("filter_consistency: n_mc must be at least 2");
  const std::size_t d = params.d;
  const std::size_t n_pairs = d * (d + 1) / 2;
  const double h = policy_h(params, scheme, policy);
  const bool poisson_dates =
      regime == Regime::discrete_expert && scheme.kind == DateScheme::Kind::poisson;

  FilterOptions opts;
  opts.riccati_step = policy.riccati_step;

  auto pair_index = [](std::size_t i, std::size_t j) {
    // j <= i; row-major lower triangle
    return i * (i + 1) / 2 + j;
  };

  std::vector<double> ebuf(d * n_mc);
  std::vector<double> prodbuf(n_pairs * n_mc);
  std::vector<double> qbuf(poisson_dates ? n_pairs * n_mc : 0);
  std::vector<double> q_term(d * d, 0.0);

  DriftMoments dm(params);
  auto record = [&](std::size_t i, const MarketPath& path, const FilterTrajectory& tr) {
    const std::size_t last = path.grid->n_nodes() - 1;
    const double* mu = path.mu_at(last);
    const double* mh = tr.m_at(last);
    for (std::size_t a = 0; a < d; ++a) ebuf[a * n_mc + i] = mu[a] - mh[a];
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b <= a; ++b)
        prodbuf[pair_index(a, b) * n_mc + i] =
            (mu[a] - mh[a]) * (mu[b] - mh[b]);
    if (poisson_dates) {
      const double* q = tr.q_at(last);
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b <= a; ++b) qbuf[pair_index(a, b) * n_mc + i] = q[a * d + b];
    }
  };

  if (poisson_dates) {
    for_each_index(n_mc, policy.parallel, [&](std::size_t i) {
      RngStream date_rng(seed, i, NoiseRole::dates);
      const auto dates = sample_poisson_dates(scheme.lambda, params.horizon_t, date_rng);
      const auto grid = shared_grid(make_grid(params, scheme, dates, h));
      const PathSimulator sim(dm, scheme, grid);
      const MarketPath path = sim.simulate(seed, i);
      const FilterTrajectory tr = run_filter(regime, params, scheme, path, opts);
      record(i, path, tr);
    });
  } else {
    const auto dates = scheme.kind == DateScheme::Kind::deterministic
                           ? deterministic_dates(scheme, params.horizon_t)
                           : std::vector<double>{};
    const auto grid = shared_grid(make_grid(params, scheme, dates, h));
    const PathSimulator sim(dm, scheme, grid);
    const bool cacheable = regime != Regime::full_info;
    const CovarianceTable table =
        cacheable ? covariance_table(regime, params, scheme, grid, opts) : CovarianceTable();
    for_each_index(n_mc, policy.parallel, [&](std::size_t i) {
      const MarketPath path = sim.simulate(seed, i);
      const FilterTrajectory tr =
          run_filter(regime, params, scheme, path, opts, cacheable ? &table : nullptr);
      record(i, path, tr);
    });
    if (cacheable) {
      const double* q = table.q_at(grid->n_nodes() - 1);
      std::copy(q, q + d * d, q_term.begin());
    }
  }

  ConsistencyReport report;
  report.regime = regime;
  report.n_mc = n_mc;
  report.mean_residual.resize(d);
  const double root_n = std::sqrt(static_cast<double>(n_mc));

  std::vector<double> emp(d * d, 0.0);
  for (std::size_t a = 0; a < d; ++a) {
    const MeanSd ms = mean_sd(ebuf.data() + a * n_mc, n_mc);
    report.mean_residual[a] = ms.mean;
    const double se = ms.sd / root_n;
    const double z = se > 0.0 ? std::abs(ms.mean) / se : (ms.mean == 0.0 ? 0.0 : HUGE_VAL);
    report.max_mean_z = std::max(report.max_mean_z, z);
  }
  const double nn = static_cast<double>(n_mc);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b <= a; ++b) {
      const double* prod = prodbuf.data() + pair_index(a, b) * n_mc;
      const MeanSd pm = mean_sd(prod, n_mc);
      const double cov =
          (pm.mean * nn - nn * report.mean_residual[a] * report.mean_residual[b]) / (nn - 1.0);
      emp[a * d + b] = emp[b * d + a] = cov;
      double expected;
      if (poisson_dates) {
        expected = mean_sd(qbuf.data() + pair_index(a, b) * n_mc, n_mc).mean;
        q_term[a * d + b] = q_term[b * d + a] = expected;
      } else {
        expected = q_term[a * d + b];
      }
      const double se = pm.sd / root_n;
      const double diff = std::abs(cov - expected);
      const double z = se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : HUGE_VAL);
      report.max_cov_z = std::max(report.max_cov_z, z);
    }

  report.emp_cov = detail::sym_from_flat(emp.data(), d);
  report.expected_q = detail::sym_from_flat(q_term.data(), d);
  return report;
}

}  // namespace driftlab
