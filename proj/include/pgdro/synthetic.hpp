#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "pgdro/dataset.hpp"

namespace pgdro {

// Two-feature spurious-correlation benchmark. Each row is
// [z_inv, z_env] with z_inv ~ N(y, sigma2_inv) and z_env ~ N(e, sigma2_e),
// y, e in {-1, +1}. Majority groups have y == e.
struct SyntheticParams {
  std::size_t n = 4000;
  double p = 0.95;
  double sigma2_inv = 0.5;
  double sigma2_e = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
};

// Sizes indexed by group g = label * 2 + env with label = (y + 1) / 2 and
// env = (e + 1) / 2. round(p * n) majority rows are split across g = 0 and
// g = 3, the rest across g = 1 and g = 2; an odd remainder goes to the lower
// index of each pair.
std::array<std::size_t, 4> synthetic_group_sizes(const SyntheticParams& params);

// Rows are shuffled after generation. Labels and env are {0, 1} indices.
Dataset generate_synthetic(const SyntheticParams& params);

// Equal-size groups; used for validation and test sets.
Dataset generate_balanced(std::size_t per_group, double sigma2_inv, double sigma2_e,
                          std::uint64_t seed);

}  // namespace pgdro
