#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "warpflow/flow.hpp"
#include "warpflow/grid.hpp"
#include "warpflow/warped.hpp"

namespace warpflow::cli {

/// Bad configuration or arguments; maps to exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr int exit_pass = 0;
inline constexpr int exit_tolerance = 1;
inline constexpr int exit_invalid = 2;

struct MetricRecipe {
  std::string name = "flat";  // flat | conformal-bump | random-spd
  double amplitude = 0.2;
  int mode = 1;
  double scale = 1.0;
};

struct DilatonRecipe {
  std::string name = "sine";  // sine | under-resolved
  double amplitude = 0.2;
  int mode = 1;
  double noise = 0.01;
};

struct Tolerances {
  double min_order = 1.8;
  double curvature_abs = 1e-3;
  double identity_factor = 5.0;
  double variation_rel = 1e-4;
  double constraint = 1e-6;
  /// Errors below this count as exact agreement (no order is measured).
  double roundoff_floor = 1e-10;
};

struct ExperimentConfig {
  std::optional<std::uint64_t> seed;
  StencilOrder order = StencilOrder::second;
  double period = 0.0;  // 0 selects 2 pi

  int m = 2;
  int n = 1;
  std::optional<Branch> branch;
  std::optional<double> lambda;
  std::optional<double> A;
  std::optional<double> B;
  std::vector<int> resolutions{16, 32, 64};
  std::vector<int> fiber_resolutions;  // empty: same as resolutions
  int sample = 16;
  int fiber_sample = 0;  // 0: same as sample
  bool normalize_fiber = true;

  MetricRecipe metric_m;
  MetricRecipe metric_n;
  DilatonRecipe dilaton;

  int directions = 20;
  double direction_amplitude = 0.1;
  double variation_step = 1e-3;

  FlowConfig flow;
  int flow_dim = 2;
  int flow_points = 32;

  Tolerances tol;

  double effective_period() const;
  /// True when any recipe or command in `command` draws random numbers.
  bool needs_seed(const std::string& command) const;
};

/// Parses an INI file. Unknown sections or keys, malformed values and a
/// missing seed for randomized runs raise ConfigError. `seed_override`
/// (from --seed) replaces the file's seed.
ExperimentConfig load_config(const std::string& path, const std::string& command,
                             std::optional<std::uint64_t> seed_override = std::nullopt);
ExperimentConfig parse_config(const std::string& text, const std::string& command,
                              std::optional<std::uint64_t> seed_override = std::nullopt);

struct CommandResult {
  int exit_code = exit_pass;
  std::string csv;
  /// Human-readable summary or diagnostic for stderr.
  std::string message;
};

CommandResult cmd_constants(int m, int n);
CommandResult cmd_verify_curvature(const ExperimentConfig& config);
CommandResult cmd_verify_identity(const ExperimentConfig& config);
CommandResult cmd_verify_variation(const ExperimentConfig& config);
CommandResult cmd_flow(const ExperimentConfig& config);

/// Dispatches by name and converts library exceptions into exit code 2.
CommandResult run_command(const std::string& command, const ExperimentConfig& config);

/// Round-trip text for a double (shortest form that parses back exactly).
std::string format_number(double value);

}  // namespace warpflow::cli
