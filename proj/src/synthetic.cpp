#include "pgdro/synthetic.hpp"

#include <cmath>
#include <numeric>

#include "pgdro/error.hpp"
#include "pgdro/rng.hpp"

namespace pgdro {

namespace {

Dataset sample_groups(const std::array<std::size_t, 4>& sizes, double sigma2_inv,
                      double sigma2_e, std::uint64_t seed) {
  Rng rng(seed);
  const double sd_inv = std::sqrt(sigma2_inv);
  const double sd_env = std::sqrt(sigma2_e);
  const std::size_t n = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});

  Matrix x(n, 2);
  std::vector<int> y(n);
  std::vector<int> env(n);
  std::size_t row = 0;
  for (int g = 0; g < 4; ++g) {
    const int label = g / 2;
    const int e = g % 2;
    const double y_sign = label == 1 ? 1.0 : -1.0;
    const double e_sign = e == 1 ? 1.0 : -1.0;
    for (std::size_t k = 0; k < sizes[g]; ++k, ++row) {
      x(row, 0) = rng.normal(y_sign, sd_inv);
      x(row, 1) = rng.normal(e_sign, sd_env);
      y[row] = label;
      env[row] = e;
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));

  Dataset data;
  data.x = x.select_rows(order);
  data.y.resize(n);
  data.env.emplace(n);
  for (std::size_t i = 0; i < n; ++i) {
    data.y[i] = y[order[i]];
    (*data.env)[i] = env[order[i]];
  }
  return data;
}

}  // namespace

void SyntheticParams::validate() const {
  if (n < 4) fail<ValueError>("synthetic n must be at least 4, got ", n);
  if (!(p > 0.0 && p < 1.0)) fail<ValueError>("majority fraction p must lie in (0, 1), got ", p);
  if (!(sigma2_inv > 0.0) || !(sigma2_e > 0.0)) {
    fail<ValueError>("feature variances must be positive");
  }
}

std::array<std::size_t, 4> synthetic_group_sizes(const SyntheticParams& params) {
  params.validate();
  const auto n_maj = static_cast<std::size_t>(std::llround(params.p * static_cast<double>(params.n)));
  const std::size_t n_min = params.n - n_maj;
  std::array<std::size_t, 4> sizes{};
  sizes[0] = n_maj - n_maj / 2;
  sizes[3] = n_maj / 2;
  sizes[1] = n_min - n_min / 2;
  sizes[2] = n_min / 2;
  for (int g = 0; g < 4; ++g) {
    if (sizes[g] == 0) {
      fail<ValueError>("synthetic group ", g, " would be empty (n = ", params.n,
                       ", p = ", params.p, ")");
    }
  }
  return sizes;
}

Dataset generate_synthetic(const SyntheticParams& params) {
  return sample_groups(synthetic_group_sizes(params), params.sigma2_inv, params.sigma2_e,
                       params.seed);
}

Dataset generate_balanced(std::size_t per_group, double sigma2_inv, double sigma2_e,
                          std::uint64_t seed) {
  if (per_group == 0) fail<ValueError>("balanced set needs at least one row per group");
  if (!(sigma2_inv > 0.0) || !(sigma2_e > 0.0)) {
    fail<ValueError>("feature variances must be positive");
  }
  return sample_groups({per_group, per_group, per_group, per_group}, sigma2_inv, sigma2_e, seed);
}

}  // namespace pgdro
