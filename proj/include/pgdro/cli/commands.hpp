#pragma once

#include <cstdint>
#include <exception>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pgdro/cli/config.hpp"

namespace pgdro::cli {

// Command-line values that take precedence over the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> objective;
  std::optional<double> c;
  std::optional<int> epochs;
  std::optional<std::vector<double>> values;
  std::optional<std::size_t> resolution;
  std::optional<std::string> mode;
  std::optional<std::string> model;
  std::optional<std::string> data;
  std::optional<std::string> probabilities;
  std::optional<std::size_t> jobs;
};

// Defaults, then the config file, then the output-directory environment
// variable, then flags. `env_out_dir` is the variable's value, if set.
ExperimentConfig resolve_config(const std::optional<std::string>& config_path,
                                const Overrides& overrides, const char* env_out_dir);

struct CommandResult {
  std::vector<std::string> written;
  std::vector<std::string> warnings;
  // Human-readable summary for stdout.
  std::string summary;
};

CommandResult cmd_gen_data(const ExperimentConfig& cfg);
CommandResult cmd_pseudo_label(const ExperimentConfig& cfg);
CommandResult cmd_train(const ExperimentConfig& cfg);
CommandResult cmd_eval(const ExperimentConfig& cfg);
CommandResult cmd_sweep_c(const ExperimentConfig& cfg);
CommandResult cmd_boundary(const ExperimentConfig& cfg);
CommandResult cmd_pipeline(const ExperimentConfig& cfg);

inline constexpr std::string_view kCommands[] = {"gen-data", "pseudo-label", "train",   "eval",
                                                 "sweep-c",  "boundary",     "pipeline"};

// Dispatches by subcommand name.
CommandResult run_command(std::string_view name, const ExperimentConfig& cfg);

// Single-line JSON error record for stderr.
std::string error_line(std::string_view command, const std::exception& e);
std::string error_line(std::string_view command, std::string_view kind, std::string_view message);

}  // namespace pgdro::cli
