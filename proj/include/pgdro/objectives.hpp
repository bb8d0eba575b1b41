#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "pgdro/grouping.hpp"

namespace pgdro {

enum class Objective { kErm, kGdro, kPgdro };

// How the max over groups is optimised.
//   kHardMax: every step descends the single worst adjusted group.
//   kExponentiatedGradient: q_g <- q_g * exp(eta_q * risk_g), renormalised.
enum class MaxMode { kHardMax, kExponentiatedGradient };

std::string_view to_string(Objective objective);
Objective parse_objective(std::string_view text);
std::string_view to_string(MaxMode mode);
MaxMode parse_max_mode(std::string_view text);

// Groups whose effective size is below this are left out of the max and
// carry zero weight.
inline constexpr double kMinEffectiveGroupSize = 1e-8;

// Group weights for the adversarial max-player plus the fixed per-dataset
// quantities it needs.
struct RobustState {
  std::vector<double> q;
  std::vector<double> n_tilde;
  double c = 0.0;
  double eta_q = 0.01;
  Objective objective = Objective::kPgdro;
  MaxMode mode = MaxMode::kExponentiatedGradient;

  // q uniform over occupied groups.
  static RobustState init(std::vector<double> n_tilde, double c, double eta_q,
                          Objective objective, MaxMode mode);

  bool occupied(std::size_t g) const { return n_tilde[g] >= kMinEffectiveGroupSize; }
};

struct GroupRiskReport {
  std::vector<double> per_group_risk;
  // L_g + C / sqrt(n_g); 0 for unoccupied groups.
  std::vector<double> adjusted_risk;
  int worst_group = -1;
  double objective_value = 0.0;
};

// n_g = sum_i Q[i, g].
std::vector<double> effective_group_sizes(const GroupProbabilities& q);

// L_g = (1 / n_g) * sum_i Q[i, g] * loss_i, and 0 when the group is empty.
std::vector<double> per_group_weighted_loss(std::span<const double> losses,
                                            const GroupProbabilities& q,
                                            std::span<const double> n_tilde);

// Indicator form: L_g = (1 / denominators_g) * sum_{i : g_i = g} loss_i.
std::vector<double> per_group_indicator_loss(std::span<const double> losses,
                                             std::span<const int> groups,
                                             std::span<const double> denominators);

// Adds C / sqrt(n_g) to each occupied group's loss and takes the max
// (ties to the lowest index).
GroupRiskReport adjusted_worst_group(std::vector<double> per_group_risk,
                                     std::span<const double> n_tilde, double c);

// max_g { L_g + C / sqrt(n_g) } over occupied groups.
GroupRiskReport pg_dro_risk(std::span<const double> losses, const GroupProbabilities& q,
                            std::span<const double> n_tilde, double c);

// The same risk from hard group indices, computed with indicator sums.
GroupRiskReport gdro_risk(std::span<const double> losses, std::span<const int> groups,
                          int num_groups, double c);

double erm_risk(std::span<const double> losses);

// Exponentiated-gradient step (or hard max, per state.mode) on the adjusted
// risks. Unoccupied groups stay at zero weight.
RobustState update_group_weights(RobustState state, std::span<const double> adjusted_risk);

// w_i = sum_g q_g * Q[i, g] / n_g, so sum_i w_i * loss_i = sum_g q_g * L_g.
// ERM ignores Q and returns 1 / N.
std::vector<double> sample_weights(const RobustState& state, const GroupProbabilities& q);

// Hard-label form: w_i = q_{g_i} / n_{g_i}.
std::vector<double> sample_weights(const RobustState& state, std::span<const int> groups);

// Same two forms with explicit per-group denominators, e.g. n_g scaled to a
// minibatch.
std::vector<double> sample_weights(std::span<const double> group_weights,
                                   const GroupProbabilities& q,
                                   std::span<const double> denominators);
std::vector<double> sample_weights(std::span<const double> group_weights,
                                   std::span<const int> groups,
                                   std::span<const double> denominators);

}  // namespace pgdro
