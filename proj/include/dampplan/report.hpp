#pragma once

// Command workflow behind the CLI: run configuration, the six analysis
// commands and their CSV/JSON outputs.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dampplan/planner.hpp"

namespace dampplan {

inline constexpr const char* kVersion = "1.0.0";

enum class Command { Sweep, Criticals, Rank, Plan, AdCurve, Verify };

const char* to_string(Command c);
/// Throws Error(InvalidArgument) for an unknown name.
Command parse_command(const std::string& name);

struct RunConfig {
  std::filesystem::path network_path;  ///< required by every command except ad-curve
  double fmin_hz = 10.0;
  double fmax_hz = 2500.0;
  double df_hz = 1.0;
  double epsilon_s = 0.005;
  double delta_alpha_s = 1e-3;
  std::optional<int> node;         ///< plan/verify target, default: top-ranked node
  std::optional<int> design_node;  ///< verify: node the AD is sized for, default: top-ranked
  std::optional<AdMode> ad_mode;   ///< default: mode in the network's AD parameters
  std::optional<double> k_v;       ///< skip calibration and use this gain
  std::filesystem::path out_dir = ".";
  unsigned threads = 0;
  bool write_csv = true;
  bool write_json = true;

  /// Throws Error(InvalidArgument).
  void validate() const;
  nlohmann::ordered_json to_json() const;
};

struct RunResult {
  nlohmann::ordered_json report;
  std::optional<bool> stable;  ///< verdict of the command, if it has one
  std::vector<std::filesystem::path> files;

  /// 0 stable (or no verdict), 2 unstable.
  int exit_code() const { return stable.value_or(true) ? 0 : 2; }
};

RunResult run_command(const RunConfig& cfg, Command cmd);

/// "%.9g"
std::string format_number(double v);

/// 64-bit FNV-1a, lowercase hex.
std::string fnv1a_hex(const std::string& data);

}  // namespace dampplan
