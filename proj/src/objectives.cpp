#include "pgdro/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "pgdro/error.hpp"

namespace pgdro {

std::string_view to_string(Objective objective) {
  switch (objective) {
    case Objective::kErm:
      return "ERM";
    case Objective::kGdro:
      return "GDRO";
    case Objective::kPgdro:
      return "PGDRO";
  }
  return "ERM";
}

Objective parse_objective(std::string_view text) {
  if (text == "ERM" || text == "erm") return Objective::kErm;
  if (text == "GDRO" || text == "gdro") return Objective::kGdro;
  if (text == "PGDRO" || text == "pgdro") return Objective::kPgdro;
  fail<ValueError>("unknown objective '", text, "' (expected ERM, GDRO or PGDRO)");
}

std::string_view to_string(MaxMode mode) {
  return mode == MaxMode::kHardMax ? "hard-max" : "eg";
}

MaxMode parse_max_mode(std::string_view text) {
  if (text == "hard-max") return MaxMode::kHardMax;
  if (text == "eg") return MaxMode::kExponentiatedGradient;
  fail<ValueError>("unknown max mode '", text, "' (expected hard-max or eg)");
}

RobustState RobustState::init(std::vector<double> n_tilde, double c, double eta_q,
                              Objective objective, MaxMode mode) {
  if (c < 0.0) fail<ValueError>("adjustment constant C must be non-negative, got ", c);
  if (!(eta_q > 0.0)) fail<ValueError>("group step size eta_q must be positive, got ", eta_q);
  RobustState state;
  state.n_tilde = std::move(n_tilde);
  state.c = c;
  state.eta_q = eta_q;
  state.objective = objective;
  state.mode = mode;
  state.q.assign(state.n_tilde.size(), 0.0);
  std::size_t occupied = 0;
  for (std::size_t g = 0; g < state.n_tilde.size(); ++g) occupied += state.occupied(g) ? 1 : 0;
  if (occupied == 0 && objective != Objective::kErm) {
    fail<ValueError>("every group is empty; the robust objective is undefined");
  }
  for (std::size_t g = 0; g < state.n_tilde.size(); ++g) {
    if (state.occupied(g)) state.q[g] = 1.0 / static_cast<double>(occupied);
  }
  return state;
}

std::vector<double> effective_group_sizes(const GroupProbabilities& q) {
  std::vector<double> n(q.q.cols(), 0.0);
  for (std::size_t i = 0; i < q.q.rows(); ++i) {
    const auto row = q.q.row(i);
    for (std::size_t g = 0; g < row.size(); ++g) n[g] += row[g];
  }
  return n;
}

std::vector<double> per_group_weighted_loss(std::span<const double> losses,
                                            const GroupProbabilities& q,
                                            std::span<const double> n_tilde) {
  if (losses.size() != q.q.rows() || n_tilde.size() != q.q.cols()) {
    fail<DimensionError>("group loss: ", losses.size(), " losses, ", q.q.rows(), " x ",
                         q.q.cols(), " probabilities, ", n_tilde.size(), " group sizes");
  }
  std::vector<double> risk(q.q.cols(), 0.0);
  for (std::size_t g = 0; g < risk.size(); ++g) {
    if (n_tilde[g] < kMinEffectiveGroupSize) continue;
    double acc = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) acc += q.q(i, g) * losses[i];
    risk[g] = acc / n_tilde[g];
  }
  return risk;
}

std::vector<double> per_group_indicator_loss(std::span<const double> losses,
                                             std::span<const int> groups,
                                             std::span<const double> denominators) {
  if (losses.size() != groups.size()) {
    fail<DimensionError>("group loss: ", losses.size(), " losses for ", groups.size(), " groups");
  }
  const auto num_groups = static_cast<int>(denominators.size());
  std::vector<double> risk(denominators.size(), 0.0);
  for (int g = 0; g < num_groups; ++g) {
    if (denominators[g] < kMinEffectiveGroupSize) continue;
    double acc = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
      if (groups[i] == g) acc += losses[i];
    }
    risk[g] = acc / denominators[g];
  }
  return risk;
}

GroupRiskReport adjusted_worst_group(std::vector<double> per_group_risk,
                                     std::span<const double> n_tilde, double c) {
  if (c < 0.0) fail<ValueError>("adjustment constant C must be non-negative, got ", c);
  if (per_group_risk.size() != n_tilde.size()) {
    fail<DimensionError>(per_group_risk.size(), " group risks for ", n_tilde.size(),
                         " group sizes");
  }
  GroupRiskReport report;
  report.adjusted_risk.assign(per_group_risk.size(), 0.0);
  for (std::size_t g = 0; g < per_group_risk.size(); ++g) {
    if (n_tilde[g] < kMinEffectiveGroupSize) continue;
    report.adjusted_risk[g] = per_group_risk[g] + c / std::sqrt(n_tilde[g]);
    if (report.worst_group < 0 || report.adjusted_risk[g] > report.adjusted_risk[report.worst_group]) {
      report.worst_group = static_cast<int>(g);
    }
  }
  if (report.worst_group >= 0) report.objective_value = report.adjusted_risk[report.worst_group];
  report.per_group_risk = std::move(per_group_risk);
  return report;
}

GroupRiskReport pg_dro_risk(std::span<const double> losses, const GroupProbabilities& q,
                            std::span<const double> n_tilde, double c) {
  return adjusted_worst_group(per_group_weighted_loss(losses, q, n_tilde), n_tilde, c);
}

GroupRiskReport gdro_risk(std::span<const double> losses, std::span<const int> groups,
                          int num_groups, double c) {
  if (num_groups < 1) fail<ValueError>("need at least one group");
  std::vector<double> counts(static_cast<std::size_t>(num_groups), 0.0);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i] < 0 || groups[i] >= num_groups) {
      fail<ValueError>("group index ", groups[i], " at row ", i, " outside [0, ", num_groups, ")");
    }
    counts[groups[i]] += 1.0;
  }
  return adjusted_worst_group(per_group_indicator_loss(losses, groups, counts), counts, c);
}

double erm_risk(std::span<const double> losses) {
  if (losses.empty()) return 0.0;
  double acc = 0.0;
  for (double v : losses) acc += v;
  return acc / static_cast<double>(losses.size());
}

RobustState update_group_weights(RobustState state, std::span<const double> adjusted_risk) {
  if (adjusted_risk.size() != state.q.size()) {
    fail<DimensionError>(adjusted_risk.size(), " group risks for ", state.q.size(), " groups");
  }
  if (!(state.eta_q > 0.0)) fail<ValueError>("group step size eta_q must be positive");
  int worst = -1;
  for (std::size_t g = 0; g < adjusted_risk.size(); ++g) {
    if (!std::isfinite(adjusted_risk[g])) {
      fail<ValueError>("non-finite risk for group ", g);
    }
    if (!state.occupied(g)) continue;
    if (worst < 0 || adjusted_risk[g] > adjusted_risk[worst]) worst = static_cast<int>(g);
  }
  if (worst < 0) return state;

  if (state.mode == MaxMode::kHardMax) {
    std::ranges::fill(state.q, 0.0);
    state.q[worst] = 1.0;
    return state;
  }

  // Shift by the max risk so the largest factor is exactly 1.
  const double top = adjusted_risk[worst];
  double total = 0.0;
  for (std::size_t g = 0; g < state.q.size(); ++g) {
    if (!state.occupied(g)) {
      state.q[g] = 0.0;
      continue;
    }
    state.q[g] *= std::exp(state.eta_q * (adjusted_risk[g] - top));
    total += state.q[g];
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    std::ranges::fill(state.q, 0.0);
    state.q[worst] = 1.0;
    return state;
  }
  for (double& v : state.q) v /= total;
  return state;
}

std::vector<double> sample_weights(std::span<const double> group_weights,
                                   const GroupProbabilities& q,
                                   std::span<const double> denominators) {
  if (group_weights.size() != q.q.cols() || denominators.size() != q.q.cols()) {
    fail<DimensionError>("sample weights: ", group_weights.size(), " group weights, ",
                         denominators.size(), " denominators, ", q.q.cols(), " groups");
  }
  std::vector<double> w(q.q.rows(), 0.0);
  for (std::size_t i = 0; i < q.q.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t g = 0; g < group_weights.size(); ++g) {
      if (group_weights[g] == 0.0 || denominators[g] < kMinEffectiveGroupSize) continue;
      acc += group_weights[g] * q.q(i, g) / denominators[g];
    }
    w[i] = acc;
  }
  return w;
}

std::vector<double> sample_weights(std::span<const double> group_weights,
                                   std::span<const int> groups,
                                   std::span<const double> denominators) {
  if (group_weights.size() != denominators.size()) {
    fail<DimensionError>("sample weights: ", group_weights.size(), " group weights, ",
                         denominators.size(), " denominators");
  }
  std::vector<double> w(groups.size(), 0.0);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const int g = groups[i];
    if (g < 0 || static_cast<std::size_t>(g) >= group_weights.size()) {
      fail<ValueError>("group index ", g, " at row ", i, " out of range");
    }
    if (group_weights[g] == 0.0 || denominators[g] < kMinEffectiveGroupSize) continue;
    w[i] = group_weights[g] / denominators[g];
  }
  return w;
}

std::vector<double> sample_weights(const RobustState& state, const GroupProbabilities& q) {
  if (state.objective == Objective::kErm) {
    return std::vector<double>(q.q.rows(), 1.0 / static_cast<double>(q.q.rows()));
  }
  return sample_weights(state.q, q, state.n_tilde);
}

std::vector<double> sample_weights(const RobustState& state, std::span<const int> groups) {
  if (state.objective == Objective::kErm) {
    return std::vector<double>(groups.size(), 1.0 / static_cast<double>(groups.size()));
  }
  return sample_weights(state.q, groups, state.n_tilde);
}

}  // namespace pgdro
