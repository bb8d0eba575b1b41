#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "pgdro/grouping.hpp"
#include "pgdro/matrix.hpp"
#include "pgdro/network.hpp"
#include "pgdro/rng.hpp"

namespace pgdro::testing {

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = scale * (2.0 * rng.uniform() - 1.0);
  return m;
}

inline std::vector<int> random_labels(Rng& rng, std::size_t n, int classes) {
  std::vector<int> y(n);
  for (int& v : y) v = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(classes)));
  return y;
}

// Random valid P(e|x): positive entries normalised per row, occasionally
// one-hot or with exact zeros.
inline EnvProbabilities random_env_probs(Rng& rng, std::size_t n, int envs) {
  Matrix p(n, static_cast<std::size_t>(envs));
  for (std::size_t i = 0; i < n; ++i) {
    auto row = p.row(i);
    const double kind = rng.uniform();
    if (kind < 0.15) {
      row[rng.uniform_index(row.size())] = 1.0;
      continue;
    }
    double total = 0.0;
    for (double& v : row) {
      v = kind < 0.3 && rng.uniform() < 0.3 ? 0.0 : rng.uniform() + 1e-3;
      total += v;
    }
    if (total == 0.0) {
      row[0] = 1.0;
      continue;
    }
    for (double& v : row) v /= total;
  }
  return {p};
}

// Per-parameter relative error with a floor on the denominator.
inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& b,
                                 double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double denom = std::max({std::abs(a[k]), std::abs(b[k]), floor});
    worst = std::max(worst, std::abs(a[k] - b[k]) / denom);
  }
  return worst;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a[k] - b[k]));
  return worst;
}

}  // namespace pgdro::testing
