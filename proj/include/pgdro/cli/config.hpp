#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "pgdro/grouping.hpp"
#include "pgdro/objectives.hpp"
#include "pgdro/pipeline.hpp"
#include "pgdro/synthetic.hpp"
#include "pgdro/training.hpp"

namespace pgdro::cli {

// Environment variable that overrides the configured output directory.
inline constexpr const char* kOutDirEnv = "PGDRO_OUT_DIR";

enum class LabelingMode { kSupervised, kZeroShot, kGivenFile };

std::string_view to_string(LabelingMode mode);
LabelingMode parse_labeling_mode(std::string_view text);

struct LabelingConfig {
  LabelingMode mode = LabelingMode::kSupervised;
  std::size_t labeled_size = 100;
  double prob_floor = 0.0;
  EnvClassifierConfig env_classifier;
  // zero-shot inputs
  std::string embeddings;
  std::string prototypes;
  double temperature = 0.01;
  // given-file input: a group-probability CSV
  std::string probabilities_file;
};

struct SweepConfig {
  std::vector<double> values{0.0, 1.0, 2.0, 3.0, 4.0, 5.0};
  std::vector<Objective> objectives{Objective::kGdro, Objective::kPgdro};
};

struct BoundaryConfig {
  std::size_t resolution = 200;
  std::array<double, 2> x_range{-2.0, 3.0};
  std::array<double, 2> y_range{-1.0, 2.0};
};

// Input file overrides. Empty means the default name inside the output
// directory, where the upstream command wrote it.
struct InputPaths {
  std::string train;
  std::string val;
  std::string test;
  std::string probabilities;
  std::string model;
  std::string eval_data;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  SyntheticParams data;  // data.seed is derived from `seed`
  std::size_t val_per_group = 100;
  std::size_t test_per_group = 500;
  LabelingConfig labeling;
  TrainConfig train;  // train.seed is derived from `seed`
  std::vector<Objective> objectives{Objective::kErm, Objective::kGdro, Objective::kPgdro};
  SweepConfig sweep;
  BoundaryConfig boundary;
  InputPaths inputs;
  std::size_t jobs = 1;

  void validate() const;
};

// Missing keys keep their defaults; unknown keys are an error.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

PipelineConfig to_pipeline_config(const ExperimentConfig& cfg);

}  // namespace pgdro::cli
