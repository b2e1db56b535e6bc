#include "driftlab/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace driftlab {

namespace {

double merge_eps(double horizon) { return 1e-12 * std::max(1.0, horizon); }

void check_grid(const ModelParams& p, const DateScheme& scheme, const TimeGrid& g) {
  if (std::abs(g.horizon - p.horizon_t) > merge_eps(p.horizon_t))
    throw GridMismatch("simulate: grid horizon differs from params");
  if (scheme.kind == DateScheme::Kind::deterministic) {
    if (g.dates.size() != static_cast<std::size_t>(scheme.n))
      throw GridMismatch("simulate: deterministic scheme expects n info dates");
    const double dn = scheme.delta_n(p.horizon_t);
    for (std::size_t k = 0; k < g.dates.size(); ++k)
      if (std::abs(g.dates[k] - dn * static_cast<double>(k + 1)) > merge_eps(p.horizon_t))
        throw GridMismatch("simulate: info dates are not the equidistant construction");
  }
  for (std::size_t k = 0; k < g.dates.size(); ++k)
    if (g.info[g.date_node[k]] != static_cast<int>(k))
      throw GridMismatch("simulate: info flags disagree with date list");
}

}  // namespace

Opinion MarketPath::opinion(std::size_t k) const {
  Opinion o;
  o.time = grid->dates[k];
  o.z.assign(opinion_z.data() + k * d, opinion_z.data() + (k + 1) * d);
  return o;
}

SymMatrix scheme_gamma(const ModelParams& p, const DateScheme& scheme) {
  const double factor = scheme.kind == DateScheme::Kind::deterministic
                            ? 1.0 / scheme.delta_n(p.horizon_t)
                            : scheme.lambda;
  return SymMatrix::from(factor * (p.sigma_j * transpose(p.sigma_j)));
}

PathSimulator::PathSimulator(const ModelParams& p, const DateScheme& scheme,
                             std::shared_ptr<const TimeGrid> grid)
    : dm_(p), scheme_(scheme), grid_(std::move(grid)) {
  build();
}

PathSimulator::PathSimulator(const DriftMoments& dm, const DateScheme& scheme,
                             std::shared_ptr<const TimeGrid> grid)
    : dm_(dm), scheme_(scheme), grid_(std::move(grid)) {
  build();
}

void PathSimulator::build() {
  if (!grid_) throw GridMismatch("simulate: null grid");
  const ModelParams& p = dm_.params();
  const TimeGrid& g = *grid_;
  check_grid(p, scheme_, g);

  const std::size_t d = p.d;
  const std::size_t n_iv = g.n_intervals();

  // distinct interval lengths share one (e^{-alpha h}, sqrt transition cov) slot
  std::map<double, std::size_t> slot_of;
  h_slot_.resize(n_iv);
  for (std::size_t i = 0; i < n_iv; ++i) {
    const double h = g.nodes[i + 1] - g.nodes[i];
    auto [it, fresh] = slot_of.emplace(h, slot_of.size());
    h_slot_[i] = it->second;
    if (fresh) slot_h_.push_back(h);
  }
  trans_e_.resize(slot_of.size() * d * d);
  trans_c_.resize(slot_of.size() * d * d);
  for (std::size_t s = 0; s < slot_h_.size(); ++s) {
    const Matrix e = dm_.exp_alpha(slot_h_[s]);
    const SymMatrix c = sym_sqrt(dm_.transition_cov(slot_h_[s]));
    std::copy(e.data(), e.data() + d * d, trans_e_.data() + s * d * d);
    std::copy(c.mat().data(), c.mat().data() + d * d, trans_c_.data() + s * d * d);
  }

  const std::size_t n_op = g.dates.size();
  if (scheme_.kind == DateScheme::Kind::deterministic) {
    // forward windows [t_k, t_k + delta_n]; the last one sticks out past the horizon
    tail_len_ = scheme_.delta_n(p.horizon_t);
    win_begin_.resize(n_op);
    win_end_.resize(n_op);
    for (std::size_t k = 0; k + 1 < n_op; ++k) {
      win_begin_[k] = g.date_node[k];
      win_end_[k] = g.date_node[k + 1];
    }
    if (n_op > 0) {
      win_begin_[n_op - 1] = g.date_node[n_op - 1];
      win_end_[n_op - 1] = g.date_node[n_op - 1];  // empty in-grid span; tail covers it
    }
  } else {
    // elementary partition: grid nodes joined with window boundaries k/lambda, extended
    // past the horizon until the last window closes
    const double eps = merge_eps(p.horizon_t);
    const double lambda = scheme_.lambda;
    struct Pt {
      double t;
      std::ptrdiff_t win_boundary;  // index k for t == k/lambda, else -1
    };
    std::vector<Pt> pts;
    pts.reserve(g.nodes.size() + n_op + 2);
    for (double t : g.nodes) pts.push_back({t, -1});
    for (std::size_t k = 1; k <= n_op; ++k)
      pts.push_back({static_cast<double>(k) / lambda, static_cast<std::ptrdiff_t>(k)});
    std::stable_sort(pts.begin(), pts.end(), [](const Pt& a, const Pt& b) { return a.t < b.t; });
    std::vector<Pt> merged;
    for (const Pt& q : pts) {
      if (!merged.empty() && q.t - merged.back().t <= eps) {
        if (q.win_boundary >= 0) merged.back().win_boundary = q.win_boundary;
        continue;
      }
      merged.push_back(q);
    }
    elems_.clear();
    elems_.reserve(merged.size());
    std::size_t grid_iv = 0;
    std::ptrdiff_t window = n_op > 0 ? 0 : -1;  // crossing k/lambda enters window k
    for (std::size_t s = 0; s + 1 < merged.size(); ++s) {
      const double a = merged[s].t, b = merged[s + 1].t;
      while (grid_iv < g.n_intervals() && g.nodes[grid_iv + 1] <= a + eps) ++grid_iv;
      const bool in_grid = grid_iv < g.n_intervals() && a < g.nodes[grid_iv + 1] - eps;
      elems_.push_back({b - a, in_grid ? static_cast<std::ptrdiff_t>(grid_iv) : -1, window});
      if (merged[s + 1].win_boundary >= 0)
        window = merged[s + 1].win_boundary < static_cast<std::ptrdiff_t>(n_op)
                     ? merged[s + 1].win_boundary
                     : -1;
    }
  }
}

MarketPath PathSimulator::simulate(std::uint64_t seed, std::uint64_t path_index) const {
  const ModelParams& p = dm_.params();
  const TimeGrid& g = *grid_;
  const std::size_t d = p.d, m = p.m_noise, l = p.l_noise;
  const std::size_t n_nodes = g.n_nodes(), n_iv = g.n_intervals(), n_op = g.dates.size();

  MarketPath path;
  path.grid = grid_;
  path.scheme = scheme_;
  path.d = d;
  path.l = l;
  path.mu.resize(n_nodes * d);
  path.returns_incr.resize(n_iv * d);
  path.expert_incr.resize(n_iv * d);
  path.wj_incr.assign(n_iv * l, 0.0);
  path.window_incr.assign(n_op * l, 0.0);
  path.opinion_z.resize(n_op * d);

  // hidden drift: mu_0 ~ N(m0, sigma0), then the exact OU transition per interval
  {
    RngStream rng(seed, path_index, NoiseRole::drift_noise);
    const SymMatrix s0 = sym_sqrt(p.sigma0);
    std::vector<double> gbuf(d);
    for (std::size_t i = 0; i < d; ++i) gbuf[i] = rng.gaussian();
    for (std::size_t i = 0; i < d; ++i) {
      double v = p.m0[i];
      for (std::size_t j = 0; j < d; ++j) v += s0(i, j) * gbuf[j];
      path.mu[i] = v;
    }
    for (std::size_t iv = 0; iv < n_iv; ++iv) {
      const double* e = trans_e_.data() + h_slot_[iv] * d * d;
      const double* c = trans_c_.data() + h_slot_[iv] * d * d;
      const double* prev = path.mu.data() + iv * d;
      double* next = path.mu.data() + (iv + 1) * d;
      for (std::size_t i = 0; i < d; ++i) gbuf[i] = rng.gaussian();
      for (std::size_t i = 0; i < d; ++i) {
        double v = p.delta[i];
        for (std::size_t j = 0; j < d; ++j)
          v += e[i * d + j] * (prev[j] - p.delta[j]) + c[i * d + j] * gbuf[j];
        next[i] = v;
      }
    }
  }

  // returns: Euler-Maruyama with left-endpoint drift
  {
    RngStream rng(seed, path_index, NoiseRole::returns_noise);
    std::vector<double> gbuf(m);
    for (std::size_t iv = 0; iv < n_iv; ++iv) {
      const double h = g.nodes[iv + 1] - g.nodes[iv];
      const double sh = std::sqrt(h);
      for (std::size_t j = 0; j < m; ++j) gbuf[j] = sh * rng.gaussian();
      const double* mu_i = path.mu.data() + iv * d;
      double* dr = path.returns_incr.data() + iv * d;
      for (std::size_t i = 0; i < d; ++i) {
        double v = mu_i[i] * h;
        for (std::size_t j = 0; j < m; ++j) v += p.sigma_r(i, j) * gbuf[j];
        dr[i] = v;
      }
    }
  }

  // expert Brownian: per-interval increments plus the window aggregates
  {
    RngStream rng(seed, path_index, NoiseRole::expert_noise);
    if (scheme_.kind == DateScheme::Kind::deterministic) {
      for (std::size_t iv = 0; iv < n_iv; ++iv) {
        const double sh = std::sqrt(g.nodes[iv + 1] - g.nodes[iv]);
        double* wj = path.wj_incr.data() + iv * l;
        for (std::size_t j = 0; j < l; ++j) wj[j] = sh * rng.gaussian();
      }
      if (n_op > 0) {
        // windows k < n-1 reuse the in-grid increments bit-for-bit (left-to-right sums);
        // the last window lies wholly past the horizon and gets one dedicated draw
        for (std::size_t k = 0; k + 1 < n_op; ++k) {
          double* w = path.window_incr.data() + k * l;
          for (std::size_t iv = win_begin_[k]; iv < win_end_[k]; ++iv)
            for (std::size_t j = 0; j < l; ++j) w[j] += path.wj_incr[iv * l + j];
        }
        const double st = std::sqrt(tail_len_);
        double* w = path.window_incr.data() + (n_op - 1) * l;
        for (std::size_t j = 0; j < l; ++j) w[j] = st * rng.gaussian();
      }
    } else {
      for (const ElemInterval& e : elems_) {
        const double sh = std::sqrt(e.len);
        for (std::size_t j = 0; j < l; ++j) {
          const double dw = sh * rng.gaussian();
          if (e.grid_iv >= 0) path.wj_incr[static_cast<std::size_t>(e.grid_iv) * l + j] += dw;
          if (e.window >= 0) path.window_incr[static_cast<std::size_t>(e.window) * l + j] += dw;
        }
      }
    }
  }

  // dJ from the aggregated increments, left-endpoint drift
  for (std::size_t iv = 0; iv < n_iv; ++iv) {
    const double h = g.nodes[iv + 1] - g.nodes[iv];
    const double* mu_i = path.mu.data() + iv * d;
    const double* wj = path.wj_incr.data() + iv * l;
    double* dj = path.expert_incr.data() + iv * d;
    for (std::size_t i = 0; i < d; ++i) {
      double v = mu_i[i] * h;
      for (std::size_t j = 0; j < l; ++j) v += p.sigma_j(i, j) * wj[j];
      dj[i] = v;
    }
  }

  // opinions: Z_k = mu at the date + (1/window length) sigma_j (window W^J increment)
  const double factor = scheme_.kind == DateScheme::Kind::deterministic
                            ? 1.0 / scheme_.delta_n(p.horizon_t)
                            : scheme_.lambda;
  for (std::size_t k = 0; k < n_op; ++k) {
    const double* mu_k = path.mu.data() + g.date_node[k] * d;
    const double* w = path.window_incr.data() + k * l;
    double* z = path.opinion_z.data() + k * d;
    for (std::size_t i = 0; i < d; ++i) {
      double v = mu_k[i];
      for (std::size_t j = 0; j < l; ++j) v += factor * p.sigma_j(i, j) * w[j];
      z[i] = v;
    }
  }
  return path;
}

MarketPath simulate_path(const ModelParams& p, const DateScheme& scheme,
                         std::shared_ptr<const TimeGrid> grid, std::uint64_t seed,
                         std::uint64_t path_index) {
  return PathSimulator(p, scheme, std::move(grid)).simulate(seed, path_index);
}

MarketPath restrict_path(const MarketPath& fine, std::shared_ptr<const TimeGrid> coarse) {
  const TimeGrid& gf = *fine.grid;
  const TimeGrid& gc = *coarse;
  const double eps = merge_eps(gf.horizon);
  if (std::abs(gf.horizon - gc.horizon) > eps)
    throw std::invalid_argument("restrict_path: horizon mismatch");

  std::vector<std::size_t> at(gc.n_nodes());
  std::size_t j = 0;
  for (std::size_t i = 0; i < gc.n_nodes(); ++i) {
    while (j < gf.n_nodes() && gf.nodes[j] < gc.nodes[i] - eps) ++j;
    if (j >= gf.n_nodes() || std::abs(gf.nodes[j] - gc.nodes[i]) > eps)
      throw std::invalid_argument("restrict_path: coarse node missing from fine grid");
    at[i] = j;
  }

  MarketPath r;
  r.grid = std::move(coarse);
  r.scheme = fine.scheme;
  r.d = fine.d;
  r.l = fine.l;
  const std::size_t d = fine.d, l = fine.l;
  r.mu.resize(gc.n_nodes() * d);
  r.returns_incr.assign(gc.n_intervals() * d, 0.0);
  r.expert_incr.assign(gc.n_intervals() * d, 0.0);
  r.wj_incr.assign(gc.n_intervals() * l, 0.0);
  r.window_incr = fine.window_incr;
  r.opinion_z = fine.opinion_z;

  for (std::size_t i = 0; i < gc.n_nodes(); ++i)
    std::copy(fine.mu_at(at[i]), fine.mu_at(at[i]) + d, r.mu.data() + i * d);
  for (std::size_t i = 0; i < gc.n_intervals(); ++i)
    for (std::size_t f = at[i]; f < at[i + 1]; ++f) {
      for (std::size_t c = 0; c < d; ++c) {
        r.returns_incr[i * d + c] += fine.returns_incr[f * d + c];
        r.expert_incr[i * d + c] += fine.expert_incr[f * d + c];
      }
      for (std::size_t c = 0; c < l; ++c) r.wj_incr[i * l + c] += fine.wj_incr[f * l + c];
    }
  return r;
}

ExpertMomentReport given_mu_expert_cov_check(const ModelParams& p, const DateScheme& scheme,
                                             int n_mc, std::uint64_t seed) {
  if (n_mc < 10000)
    throw std::invalid_argument("given_mu_expert_cov_check: n_mc must be at least 10^4");
  validate_or_throw(p);
  const std::size_t d = p.d;
  // opinion moments are exact on any grid (exact transitions, window-partitioned W^J),
  // so a coarse grid keeps this oracle cheap
  const double h_max = p.horizon_t / 8.0;
  const DriftMoments dm(p);

  std::shared_ptr<const TimeGrid> det_grid;
  std::unique_ptr<PathSimulator> det_sim;
  if (scheme.kind == DateScheme::Kind::deterministic) {
    det_grid = std::make_shared<TimeGrid>(
        make_grid(p, scheme, deterministic_dates(scheme, p.horizon_t), h_max));
    det_sim = std::make_unique<PathSimulator>(dm, scheme, det_grid);
  }

  Vec sum(d, 0.0);
  Matrix sum_outer(d, d);
  std::size_t count = 0;
  Vec v(d);
  for (int path = 0; path < n_mc; ++path) {
    MarketPath mp;
    if (det_sim) {
      mp = det_sim->simulate(seed, static_cast<std::uint64_t>(path));
    } else {
      RngStream dates_rng(seed, static_cast<std::uint64_t>(path), NoiseRole::dates);
      auto dates = sample_poisson_dates(scheme.lambda, p.horizon_t, dates_rng);
      auto grid = std::make_shared<TimeGrid>(make_grid(p, scheme, dates, h_max));
      mp = PathSimulator(dm, scheme, grid).simulate(seed, static_cast<std::uint64_t>(path));
    }
    for (std::size_t k = 0; k < mp.n_opinions(); ++k) {
      const double* z = mp.opinion_z.data() + k * d;
      const double* mu_k = mp.mu_at(mp.grid->date_node[k]);
      for (std::size_t i = 0; i < d; ++i) v[i] = z[i] - mu_k[i];
      for (std::size_t i = 0; i < d; ++i) {
        sum[i] += v[i];
        for (std::size_t c = 0; c < d; ++c) sum_outer(i, c) += v[i] * v[c];
      }
      ++count;
    }
  }

  ExpertMomentReport rep;
  rep.gamma = scheme_gamma(p, scheme);
  rep.samples = count;
  rep.mean_dev.assign(d, 0.0);
  Matrix cov(d, d);
  const auto n = static_cast<double>(count);
  for (std::size_t i = 0; i < d; ++i) {
    rep.mean_dev[i] = sum[i] / n;
    for (std::size_t c = 0; c < d; ++c)
      cov(i, c) = sum_outer(i, c) / n - (sum[i] / n) * (sum[c] / n);
  }
  rep.emp_cov = SymMatrix::from(cov);
  for (std::size_t i = 0; i < d; ++i) {
    const double se_mean = std::sqrt(rep.gamma(i, i) / n);
    rep.max_mean_z = std::max(rep.max_mean_z, std::abs(rep.mean_dev[i]) / se_mean);
    for (std::size_t c = 0; c < d; ++c) {
      const double se_cov =
          std::sqrt((rep.gamma(i, i) * rep.gamma(c, c) + rep.gamma(i, c) * rep.gamma(i, c)) / n);
      rep.max_cov_z =
          std::max(rep.max_cov_z, std::abs(rep.emp_cov(i, c) - rep.gamma(i, c)) / se_cov);
    }
  }
  return rep;
}

}  // namespace driftlab
