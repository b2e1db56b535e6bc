#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "driftlab/experiments.hpp"

namespace driftlab {

inline constexpr const char* kArtifactVersion = "1.0.0";

// Strict flat config error, 1-based line/column (0 when the problem is not tied to a
// specific position, e.g. a missing required key).
struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, int line_in, int col_in);
  int line = 0;
  int col = 0;
};

// The shipped one-asset calibration every config starts from; files override fields.
ModelParams default_model_params();

struct RunConfig {
  ModelParams model = default_model_params();
  DateScheme scheme = DateScheme::deterministic(10);

  // numerics; zeros mean scheme-derived defaults
  double h_max = 0.0;
  double quad_step = 5e-4;
  double riccati_step = 0.0;
  double stationary_tol = 1e-10;

  std::size_t n_mc = 10000;
  std::uint64_t seed = 0;  // required in every config, no wall-clock fallback

  Regime regime = Regime::discrete_expert;
  int p = 2;
  double x0 = 1.0;
  std::vector<int> n_list = {10, 20, 40, 80, 160, 320};
  std::vector<double> lambda_list = {10, 20, 40, 80, 160, 320, 640, 1280};
  bool lambda_list_given = false;
  int checkpoints = 20;
  std::optional<double> slope_window_lo, slope_window_hi;  // reported against, never asserted
  std::string output_dir = "out";

  RunPolicy policy() const {
    RunPolicy pol;
    pol.h_max = h_max;
    pol.riccati_step = riccati_step;
    pol.quad_step = quad_step;
    return pol;
  }
};

// Strict parse of the flat key=value format ('#' comment lines allowed). Unknown or
// duplicate keys, malformed values, and missing seed raise ParseError; the assembled
// model is validated and ValidationFailed is forwarded.
RunConfig parse_config(const std::string& text);

}  // namespace driftlab
