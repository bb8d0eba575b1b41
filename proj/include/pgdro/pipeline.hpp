#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pgdro/dataset.hpp"
#include "pgdro/grouping.hpp"
#include "pgdro/synthetic.hpp"
#include "pgdro/training.hpp"

namespace pgdro {

// Stream ids for derive_seed(master, id). Fixed so a stage can be rerun
// alone with the seed it would get inside a full run.
namespace seed_stream {
inline constexpr std::uint64_t kTrainData = 1;
inline constexpr std::uint64_t kValData = 2;
inline constexpr std::uint64_t kTestData = 3;
inline constexpr std::uint64_t kLabeledSubset = 4;
inline constexpr std::uint64_t kEnvClassifier = 5;
inline constexpr std::uint64_t kTraining = 6;
}  // namespace seed_stream

struct PipelineConfig {
  SyntheticParams data;  // data.seed is replaced by the derived stage seed
  std::size_t val_per_group = 100;
  std::size_t test_per_group = 500;
  std::size_t labeled_size = 100;
  double prob_floor = 0.0;
  EnvClassifierConfig env_classifier;  // seed replaced
  TrainConfig train;                   // objective and seed replaced per run
  std::vector<Objective> objectives{Objective::kErm, Objective::kGdro, Objective::kPgdro};
  std::uint64_t master_seed = 0;
};

struct PipelineData {
  Dataset train;
  Dataset val;
  Dataset test;
};

// Synthetic training set plus group-balanced validation and test sets.
PipelineData make_pipeline_data(const PipelineConfig& cfg);

struct PseudoLabels {
  LabeledSubset labeled;
  Network env_net;
  EnvProbabilities env_probs;
  GroupProbabilities q;
  // Environment accuracy of the labeler per ground-truth training group.
  MetricsReport labeler;
};

// Subsample a labeled set, fit the environment classifier on it and turn its
// predictions on the whole training set into group probabilities.
PseudoLabels supervised_pseudo_labels(const Dataset& train_set, const PipelineConfig& cfg,
                                      const GroupSpace& space = GroupSpace(2, 2));

struct ObjectiveRun {
  Objective objective;
  TrainResult result;
  MetricsReport val;
  MetricsReport test;
};

struct PipelineReport {
  MetricsReport labeler;
  std::vector<ObjectiveRun> runs;
};

// Trains one objective from shared inputs; GDRO consumes harden(q).
ObjectiveRun run_objective(const PipelineData& data, const GroupProbabilities& q,
                           const GroupSpace& space, TrainConfig cfg, Objective objective);

// generate -> subsample -> env classifier -> Q -> train each objective ->
// evaluate on the balanced test set. `jobs` > 1 trains objectives in
// parallel; results do not depend on it.
PipelineReport run_pipeline(const PipelineConfig& cfg, std::size_t jobs = 1);

struct SweepRow {
  Objective objective;
  double c;
  MetricsReport val;
  MetricsReport test;
};

// One training run per (objective, C) with the same seed, rows ordered by
// objective then by C as given.
std::vector<SweepRow> sweep_c(const PipelineData& data, const GroupProbabilities& q,
                              const GroupSpace& space, const TrainConfig& cfg,
                              std::span<const Objective> objectives,
                              std::span<const double> c_values, std::size_t jobs = 1);

}  // namespace pgdro
