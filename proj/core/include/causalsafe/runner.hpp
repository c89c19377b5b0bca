#pragma once

// Config-driven pipeline commands. Every command is deterministic given its
// config and echoes the effective config into its output directory.
//
// Exit codes: 0 success, 1 criteria violated (or fitted Q did not
// converge), 2 configuration, data-support or I/O error.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "causalsafe/certificate.hpp"

namespace causalsafe {

struct DatasetParams {
  std::size_t n_episodes = 100000;
  std::uint64_t seed = 1;
  /// Default dataset location for fit-q.
  std::string path;
};

struct FitParams {
  double tolerance = 1e-10;
  int max_iters = 1000;
  /// "sampled" (tables from the dataset) or "exact" (ground-truth tables).
  std::string mode = "sampled";
};

struct EvaluationParams {
  int batches = 100;
  int trajectories = 100;
  std::uint64_t seed = 2024;
  unsigned threads = 0;
};

struct ExperimentConfig {
  std::string env = "driving";
  int horizon = 10;
  double epsilon = 0.2;
  /// Decoded components of the initial state.
  std::vector<int> x0{0, 0};
  /// Any of "proposed", "dtcbf".
  std::vector<std::string> controllers{"proposed", "dtcbf"};
  SelectionMode selection_mode = SelectionMode::kMaxAction;
  /// Defaults to 1e-12 for oracle Q and 0 for a loaded Q table.
  std::optional<double> feasibility_slack;
  /// "oracle" or the path of a Q CSV written by fit-q.
  std::string q_source = "oracle";
  DatasetParams dataset;
  FitParams fit_q;
  EvaluationParams evaluation;
  std::string output_dir = "out";

  /// Throws ConfigError on any invalid field or unknown environment.
  void validate() const;
};

/// Parses a JSON config; missing keys keep their defaults, unknown keys are
/// rejected. Throws ConfigError.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Normalized JSON form with every field present.
std::string config_to_json(const ExperimentConfig& config);

/// Raw dataset JSONL at `out`.
int cmd_gen_data(const ExperimentConfig& config, const std::filesystem::path& out,
                 std::ostream& log);

/// Absorbing conversion of the raw dataset `in` into `out`.
int cmd_convert(const ExperimentConfig& config, const std::filesystem::path& in,
                const std::filesystem::path& out, std::ostream& log);

/// Fits Q_M under the uniform nominal policy and writes qm.csv, q.csv,
/// qm_cells.csv and fit.json into `out_dir`. `dataset` defaults to
/// config.dataset.path and is unused in exact mode.
int cmd_fit_q(const ExperimentConfig& config,
              const std::filesystem::path& dataset,
              const std::filesystem::path& out_dir, std::ostream& log);

/// Writes trajectories_<controller>.jsonl with `evaluation.trajectories`
/// episodes per controller.
int cmd_run_control(const ExperimentConfig& config,
                    const std::filesystem::path& out_dir, std::ostream& log);

/// Monte Carlo and exact evaluation of every configured controller;
/// writes curves.csv and summary.json. Returns 0 when the proposed
/// controller's exact long-term curve stays at or above 1 - epsilon, or when
/// the precondition V(x0, H) > 1 - epsilon does not hold (the check is then
/// not applicable and summary.json records precondition_met = false).
int cmd_reproduce(const ExperimentConfig& config,
                  const std::filesystem::path& out_dir, std::ostream& log);

/// Runs a command, mapping exceptions to exit codes and printing the
/// message to `err`.
int run_guarded(const std::function<int()>& command, std::ostream& err);

}  // namespace causalsafe
