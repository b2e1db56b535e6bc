#include "driftlab/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <set>

namespace driftlab {

namespace {

std::string where_prefix(int line, int col) {
  if (line <= 0) return {};
  return "line " + std::to_string(line) + ", col " + std::to_string(col) + ": ";
}

// One config value being scanned; `col0` is the 1-based column of text[0] in its line.
struct Cursor {
  const std::string& text;
  std::size_t i = 0;
  int line = 0;
  int col0 = 1;

  int col() const { return col0 + static_cast<int>(i); }
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, line, col()); }

  void skip_ws() {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
  }
  bool peek(char c) {
    skip_ws();
    return i < text.size() && text[i] == c;
  }
  void expect(char c) {
    skip_ws();
    if (i >= text.size() || text[i] != c) fail(std::string("expected '") + c + "'");
    ++i;
  }
  bool eat(char c) {
    if (!peek(c)) return false;
    ++i;
    return true;
  }
  void expect_end() {
    skip_ws();
    if (i < text.size()) fail("unexpected trailing characters");
  }

  double number() {
    skip_ws();
    double v = 0.0;
    const char* begin = text.data() + i;
    const char* end = text.data() + text.size();
    auto [p, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || !std::isfinite(v)) fail("expected a finite number");
    i += static_cast<std::size_t>(p - begin);
    return v;
  }

  std::uint64_t uint64() {
    skip_ws();
    std::uint64_t v = 0;
    const char* begin = text.data() + i;
    const char* end = text.data() + text.size();
    auto [p, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc()) fail("expected a non-negative integer");
    i += static_cast<std::size_t>(p - begin);
    return v;
  }

  long long integer() {
    double v = number();
    long long n = static_cast<long long>(std::llround(v));
    if (static_cast<double>(n) != v) fail("expected an integer");
    return n;
  }

  std::vector<double> vector() {
    expect('[');
    std::vector<double> out;
    if (!eat(']')) {
      out.push_back(number());
      while (eat(',')) out.push_back(number());
      expect(']');
    }
    if (out.empty()) fail("empty vector");
    return out;
  }

  // Row-major [[a,b],[c,d]]; [[x]] is the 1x1 case.
  Matrix matrix() {
    expect('[');
    std::vector<std::vector<double>> rows;
    rows.push_back(vector());
    while (eat(',')) rows.push_back(vector());
    expect(']');
    const std::size_t nc = rows.front().size();
    for (const auto& r : rows)
      if (r.size() != nc) fail("ragged matrix rows");
    Matrix m(rows.size(), nc);
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < nc; ++c) m(r, c) = rows[r][c];
    return m;
  }

  std::string word() {
    skip_ws();
    std::size_t start = i;
    while (i < text.size() && (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_'))
      ++i;
    if (i == start) fail("expected a word");
    return text.substr(start, i - start);
  }
};

double positive(Cursor& v, const char* what) {
  double x = v.number();
  if (x <= 0.0) v.fail(std::string(what) + " must be positive");
  return x;
}

long long positive_int(Cursor& v, const char* what) {
  long long n = v.integer();
  if (n < 1) v.fail(std::string(what) + " must be at least 1");
  return n;
}

}  // namespace

ParseError::ParseError(const std::string& msg, int line_in, int col_in)
    : std::runtime_error(where_prefix(line_in, col_in) + msg), line(line_in), col(col_in) {}

ModelParams default_model_params() {
  ModelParams p;
  p.d = 1;
  p.m_noise = 1;
  p.l_noise = 1;
  p.alpha = SymMatrix::diag({3.0});
  p.beta = Matrix(1, 1);
  p.beta(0, 0) = 1.0;
  p.delta = {0.05};
  p.sigma_r = Matrix(1, 1);
  p.sigma_r(0, 0) = 0.25;
  p.sigma_j = Matrix(1, 1);
  p.sigma_j(0, 0) = 0.2;
  p.m0 = {0.05};
  p.sigma0 = SymMatrix::diag({0.2});
  p.horizon_t = 1.0;
  p.rate_r = 0.0;
  return p;
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  bool seed_given = false;
  bool scheme_n_given = false, scheme_lambda_given = false;
  int scheme_kind_line = 0;

  using Handler = std::function<void(Cursor&)>;
  const std::map<std::string, Handler> handlers = {
      {"model.d", [&](Cursor& v) { cfg.model.d = static_cast<std::size_t>(positive_int(v, "model.d")); }},
      {"model.m_noise", [&](Cursor& v) { cfg.model.m_noise = static_cast<std::size_t>(positive_int(v, "model.m_noise")); }},
      {"model.l_noise", [&](Cursor& v) { cfg.model.l_noise = static_cast<std::size_t>(positive_int(v, "model.l_noise")); }},
      {"model.alpha", [&](Cursor& v) { cfg.model.alpha = SymMatrix::from(v.matrix()); }},
      {"model.beta", [&](Cursor& v) { cfg.model.beta = v.matrix(); }},
      {"model.delta", [&](Cursor& v) { cfg.model.delta = v.vector(); }},
      {"model.sigma_r", [&](Cursor& v) { cfg.model.sigma_r = v.matrix(); }},
      {"model.sigma_j", [&](Cursor& v) { cfg.model.sigma_j = v.matrix(); }},
      {"model.m0", [&](Cursor& v) { cfg.model.m0 = v.vector(); }},
      {"model.sigma0", [&](Cursor& v) { cfg.model.sigma0 = SymMatrix::from(v.matrix()); }},
      {"model.horizon_t", [&](Cursor& v) { cfg.model.horizon_t = positive(v, "model.horizon_t"); }},
      {"model.rate_r", [&](Cursor& v) { cfg.model.rate_r = v.number(); }},
      {"scheme.kind",
       [&](Cursor& v) {
         std::string w = v.word();
         scheme_kind_line = v.line;
         if (w == "deterministic") cfg.scheme.kind = DateScheme::Kind::deterministic;
         else if (w == "poisson") cfg.scheme.kind = DateScheme::Kind::poisson;
         else v.fail("scheme.kind must be 'deterministic' or 'poisson'");
       }},
      {"scheme.n",
       [&](Cursor& v) {
         cfg.scheme.n = static_cast<int>(positive_int(v, "scheme.n"));
         scheme_n_given = true;
       }},
      {"scheme.lambda",
       [&](Cursor& v) {
         cfg.scheme.lambda = positive(v, "scheme.lambda");
         scheme_lambda_given = true;
       }},
      {"numerics.h_max", [&](Cursor& v) { cfg.h_max = positive(v, "numerics.h_max"); }},
      {"numerics.quad_step", [&](Cursor& v) { cfg.quad_step = positive(v, "numerics.quad_step"); }},
      {"numerics.riccati_step", [&](Cursor& v) { cfg.riccati_step = positive(v, "numerics.riccati_step"); }},
      {"numerics.stationary_tol", [&](Cursor& v) { cfg.stationary_tol = positive(v, "numerics.stationary_tol"); }},
      {"mc.n_mc", [&](Cursor& v) { cfg.n_mc = static_cast<std::size_t>(positive_int(v, "mc.n_mc")); }},
      {"mc.seed",
       [&](Cursor& v) {
         cfg.seed = v.uint64();
         seed_given = true;
       }},
      {"experiment.regime",
       [&](Cursor& v) {
         std::string w = v.word();
         try {
           cfg.regime = regime_from_label(w);
         } catch (const std::invalid_argument& e) {
           v.fail(e.what());
         }
       }},
      {"experiment.p", [&](Cursor& v) { cfg.p = static_cast<int>(positive_int(v, "experiment.p")); }},
      {"experiment.x0", [&](Cursor& v) { cfg.x0 = positive(v, "experiment.x0"); }},
      {"experiment.n_list",
       [&](Cursor& v) {
         std::vector<double> xs = v.vector();
         cfg.n_list.clear();
         for (double x : xs) {
           long long n = static_cast<long long>(std::llround(x));
           if (static_cast<double>(n) != x || n < 1) v.fail("experiment.n_list entries must be integers >= 1");
           cfg.n_list.push_back(static_cast<int>(n));
         }
       }},
      {"experiment.lambda_list",
       [&](Cursor& v) {
         cfg.lambda_list = v.vector();
         for (double x : cfg.lambda_list)
           if (x <= 0.0) v.fail("experiment.lambda_list entries must be positive");
         cfg.lambda_list_given = true;
       }},
      {"experiment.checkpoints",
       [&](Cursor& v) { cfg.checkpoints = static_cast<int>(positive_int(v, "experiment.checkpoints")); }},
      {"experiment.slope_window_lo", [&](Cursor& v) { cfg.slope_window_lo = v.number(); }},
      {"experiment.slope_window_hi", [&](Cursor& v) { cfg.slope_window_hi = v.number(); }},
      {"output_dir",
       [&](Cursor& v) {
         v.skip_ws();
         std::string s = v.text.substr(v.i);
         while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.pop_back();
         if (s.empty()) v.fail("output_dir must not be empty");
         cfg.output_dir = s;
         v.i = v.text.size();
       }},
  };

  std::set<std::string> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++line_no;
    pos = eol + 1;

    std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;

    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("expected key=value", line_no, static_cast<int>(first) + 1);
    std::string key = line.substr(0, eq);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    std::size_t key_start = key.find_first_not_of(" \t");
    if (key_start == std::string::npos)
      throw ParseError("expected key=value", line_no, static_cast<int>(first) + 1);
    key = key.substr(key_start);

    auto it = handlers.find(key);
    if (it == handlers.end())
      throw ParseError("unknown key '" + key + "'", line_no, static_cast<int>(first) + 1);
    if (!seen.insert(key).second)
      throw ParseError("duplicate key '" + key + "'", line_no, static_cast<int>(first) + 1);

    std::string value = line.substr(eq + 1);
    Cursor cur{value, 0, line_no, static_cast<int>(eq) + 2};
    it->second(cur);
    cur.expect_end();
  }

  if (!seed_given) throw ParseError("seed required (set mc.seed)", 0, 0);
  if (cfg.scheme.kind == DateScheme::Kind::poisson && !scheme_lambda_given)
    throw ParseError("scheme.lambda required when scheme.kind = poisson", scheme_kind_line, 1);
  if (cfg.scheme.kind == DateScheme::Kind::deterministic && scheme_lambda_given && !scheme_n_given)
    throw ParseError("scheme.lambda set but scheme.kind is deterministic", 0, 0);
  // Rebuild through the factories so their invariants hold regardless of key order.
  cfg.scheme = cfg.scheme.kind == DateScheme::Kind::poisson
                   ? DateScheme::poisson(cfg.scheme.lambda)
                   : DateScheme::deterministic(cfg.scheme.n);

  validate_or_throw(cfg.model);
  return cfg;
}

}  // namespace driftlab
