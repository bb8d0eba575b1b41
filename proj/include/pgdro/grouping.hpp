#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pgdro/dataset.hpp"
#include "pgdro/matrix.hpp"
#include "pgdro/network.hpp"

namespace pgdro {

// Product space of classes and environments. Group g = y * num_envs + e.
class GroupSpace {
 public:
  GroupSpace(int num_classes, int num_envs);

  int num_classes() const { return num_classes_; }
  int num_envs() const { return num_envs_; }
  int num_groups() const { return num_classes_ * num_envs_; }

  int group_index(int y, int e) const;
  std::pair<int, int> components(int g) const;

  friend bool operator==(const GroupSpace&, const GroupSpace&) = default;

 private:
  int num_classes_;
  int num_envs_;
};

// Row-normalisation tolerance shared by every probability producer.
inline constexpr double kRowSumTolerance = 1e-9;

// Row i holds P(e | x_i) over the environments.
struct EnvProbabilities {
  Matrix p;

  // Throws ValueError naming the first row that is negative, non-finite or
  // does not sum to one.
  void validate() const;
};

// Row i holds Q(x_i) over the groups; entries whose class component differs
// from y_i are exactly zero.
struct GroupProbabilities {
  Matrix q;

  std::size_t size() const { return q.rows(); }

  void validate() const;
  // Also checks the class-support constraint against labels.
  void validate(std::span<const int> labels, const GroupSpace& space) const;
};

// Places P(e | x_i) at group (y_i, e); everything else is zero.
GroupProbabilities env_to_group_probs(const EnvProbabilities& env_probs,
                                      std::span<const int> labels, const GroupSpace& space);

GroupProbabilities one_hot_groups(std::span<const int> groups, const GroupSpace& space);

// Per-row argmax; ties go to the lowest group index.
std::vector<int> harden(const GroupProbabilities& q);

// Raises every probability to at least `floor` and renormalises. floor == 0
// returns the input unchanged.
EnvProbabilities apply_probability_floor(const EnvProbabilities& env_probs, double floor);

// Settings for the supervised environment classifier.
struct EnvClassifierConfig {
  std::vector<std::size_t> hidden_sizes{16, 16, 16};
  int epochs = 200;
  int batch_size = 32;
  double lr = 0.1;
  double l2 = 1e-4;
  // Draws per epoch; 0 means one pass worth (the subset size).
  std::size_t draws_per_epoch = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Fits features -> environment by cross-entropy over frequency-weighted draws
// from the labeled subset. Every environment must occur in the subset.
Network train_env_classifier(const LabeledSubset& subset, const Dataset& parent,
                             const GroupSpace& space, const EnvClassifierConfig& cfg);

EnvProbabilities predict_env_probs(const Network& net, const Matrix& x);

// Precomputed input and prototype embeddings for similarity labeling.
struct EmbeddingSet {
  Matrix inputs;      // N x d
  Matrix prototypes;  // num_envs x d
  double temperature = 0.01;
};

// Cosine similarity of every input to every prototype, softmax at
// temperature T per row.
EnvProbabilities zero_shot_env_probs(const EmbeddingSet& embeddings);

// Group-probability CSV: header index,q0,...,q{G-1}.
std::string format_group_probs_csv(const GroupProbabilities& q);
void save_group_probs(const GroupProbabilities& q, const std::string& path);
GroupProbabilities parse_group_probs_csv(std::string_view text,
                                         std::string_view source = "<memory>");
GroupProbabilities load_group_probs(const std::string& path);

// Embedding CSV with header <key>,e0,...,e{d-1}; rows ordered by the key
// column, which must run 0..N-1.
Matrix load_embeddings(const std::string& path, std::string_view key_column);
Matrix parse_embeddings_csv(std::string_view text, std::string_view key_column,
                            std::string_view source = "<memory>");

}  // namespace pgdro
