#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "pgdro/dataset.hpp"
#include "pgdro/grouping.hpp"
#include "pgdro/network.hpp"
#include "pgdro/objectives.hpp"

namespace pgdro {

struct TrainConfig {
  Objective objective = Objective::kPgdro;
  int epochs = 300;
  int batch_size = 128;
  double lr = 0.1;
  double l2 = 1e-4;
  double c = 2.0;
  double eta_q = 0.01;
  std::vector<std::size_t> hidden_sizes{16, 16, 16};
  std::uint64_t seed = 0;
  MaxMode max_mode = MaxMode::kExponentiatedGradient;

  void validate() const;
};

struct MetricsReport {
  double avg_acc = 0.0;
  double worst_group_acc = 0.0;
  std::vector<double> per_group_acc;
  std::vector<std::size_t> group_counts;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

struct EpochRecord {
  int epoch = 0;
  // Robust objective (ERM: mean loss) over the full training set after the
  // epoch.
  double objective_value = 0.0;
  std::vector<double> group_risk;
  MetricsReport val;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  // Index into `epochs` of the checkpoint with the best validation
  // worst-group accuracy (earliest on ties). Empty when no epoch ran.
  std::optional<std::size_t> selected;
};

struct TrainResult {
  Network net;
  TrainHistory history;
};

// Snapshot handed to an observer after every parameter update.
struct StepTrace {
  int epoch;
  std::size_t step;
  std::span<const std::size_t> rows;
  std::span<const double> losses;
  std::span<const double> group_risk;
  std::span<const double> group_weights;
  std::span<const double> sample_weights;
  const Gradients& grads;
  const Network& net;
};
using StepObserver = std::function<void(const StepTrace&)>;

// Trains cfg.objective. ERM ignores `q`; GDRO uses harden(q); PGDRO uses q.
// The returned network is the best-validation checkpoint.
TrainResult train(const Dataset& train_set, const GroupProbabilities& q, const Dataset& val,
                  const GroupSpace& space, const TrainConfig& cfg,
                  const StepObserver& observer = {});

// Hard-label entry point: GDRO accumulates group risks with indicators.
// PGDRO lifts the labels to one-hot probabilities.
TrainResult train_with_groups(const Dataset& train_set, std::span<const int> groups,
                              const Dataset& val, const GroupSpace& space,
                              const TrainConfig& cfg, const StepObserver& observer = {});

// ERM needs no group information on the training set.
TrainResult train_erm(const Dataset& train_set, const Dataset& val, const GroupSpace& space,
                      const TrainConfig& cfg, const StepObserver& observer = {});

// Argmax per row, ties to the lowest index.
std::vector<int> predict_classes(const Network& net, const Matrix& x);

// Accuracy of `predicted` against `truth`, tallied per group. Empty groups
// have count 0, accuracy 0 and are skipped by the worst-group minimum.
MetricsReport metrics_from_predictions(std::span<const int> predicted, std::span<const int> truth,
                                       std::span<const int> groups, int num_groups);

// Class accuracy per ground-truth group. Requires env annotations.
MetricsReport evaluate(const Network& net, const Dataset& data, const GroupSpace& space);

// Environment-prediction accuracy of a pseudo-labeler per ground-truth group.
MetricsReport evaluate_labeler(const EnvProbabilities& env_probs, const Dataset& data,
                               const GroupSpace& space);

struct GridPoint {
  double x1;
  double x2;
  int pred;
  double confidence;
};

// resolution x resolution evenly spaced points over the closed ranges, x1
// varying slowest. Requires a two-input network.
std::vector<GridPoint> decision_boundary_grid(const Network& net, std::array<double, 2> x_range,
                                              std::array<double, 2> y_range,
                                              std::size_t resolution);

}  // namespace pgdro
