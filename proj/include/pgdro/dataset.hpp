#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pgdro/matrix.hpp"

namespace pgdro {

class GroupSpace;

enum class SplitTag { kTrain, kVal, kTest };

std::string_view to_string(SplitTag tag);
SplitTag parse_split_tag(std::string_view text);

// Features, class labels and optional environment / split annotations.
// Labels and environments are class indices starting at 0.
struct Dataset {
  Matrix x;
  std::vector<int> y;
  std::optional<std::vector<int>> env;
  std::optional<std::vector<SplitTag>> split;

  std::size_t size() const { return y.size(); }
  std::size_t dim() const { return x.cols(); }
  bool has_env() const { return env.has_value(); }

  // Row counts agree, features finite, labels/envs non-negative and, when
  // bounds are given, below them.
  void validate(std::optional<int> num_classes = std::nullopt,
                std::optional<int> num_envs = std::nullopt) const;

  // Hard group index y * num_envs + env of every row. Requires env.
  std::vector<int> groups(const GroupSpace& space) const;

  Dataset subset(std::span<const std::size_t> indices) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Rows of `a` followed by rows of `b`; optional columns must agree.
Dataset concat(const Dataset& a, const Dataset& b);

// Index set into a parent Dataset whose members all carry env annotations.
struct LabeledSubset {
  std::vector<std::size_t> indices;

  std::size_t size() const { return indices.size(); }
};

struct SplitFractions {
  double train = 1.0;
  double val = 0.0;
  double test = 0.0;
};

struct DatasetSplits {
  Dataset train;
  Dataset val;
  Dataset test;
};

// Per-index assignment behind split(); exposed for tests.
std::array<std::vector<std::size_t>, 3> split_indices(const Dataset& data,
                                                      SplitFractions fractions,
                                                      std::uint64_t seed);

// Stratified shuffle split. Strata are (label, env) pairs, or labels alone
// when env is absent. Totals per split follow largest-remainder rounding of
// N * fraction; every stratum lands in every split with a non-zero fraction.
DatasetSplits split(const Dataset& data, SplitFractions fractions, std::uint64_t seed);

// Partition by the `split` column (as read from a CSV).
DatasetSplits split_by_tag(const Dataset& data);

// m indices drawn uniformly without replacement, returned in ascending order.
LabeledSubset subsample_labeled(const Dataset& data, std::size_t m, std::uint64_t seed);

// `count` draws with replacement from the subset, P(i) proportional to
// 1 / |group(i)| so every occurring group is equally likely.
std::vector<std::size_t> frequency_weighted_indices(const LabeledSubset& subset,
                                                    const Dataset& parent,
                                                    const GroupSpace& space,
                                                    std::size_t count, std::uint64_t seed);

// CSV columns f0..f{d-1}, label[, env][, split].
struct CsvSchema {
  std::optional<int> num_classes;
  std::optional<int> num_envs;
};

Dataset load_csv(const std::string& path, const CsvSchema& schema = {});
Dataset parse_csv(std::string_view text, const CsvSchema& schema = {},
                  std::string_view source = "<memory>");
void save_csv(const Dataset& data, const std::string& path);
std::string format_csv(const Dataset& data);

}  // namespace pgdro
