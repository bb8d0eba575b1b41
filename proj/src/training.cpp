#include "pgdro/training.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "pgdro/error.hpp"
#include "pgdro/rng.hpp"

namespace pgdro {

void TrainConfig::validate() const {
  if (epochs < 0) fail<ValueError>("epochs must be non-negative, got ", epochs);
  if (batch_size < 1) fail<ValueError>("batch size must be positive, got ", batch_size);
  if (!(lr > 0.0)) fail<ValueError>("learning rate must be positive, got ", lr);
  if (l2 < 0.0) fail<ValueError>("l2 must be non-negative, got ", l2);
  if (c < 0.0) fail<ValueError>("adjustment constant C must be non-negative, got ", c);
  if (!(eta_q > 0.0)) fail<ValueError>("eta_q must be positive, got ", eta_q);
  for (std::size_t h : hidden_sizes) {
    if (h == 0) fail<ValueError>("hidden layer sizes must be positive");
  }
}

namespace {

struct NoSupervision {
  std::vector<double> n_tilde() const { return {}; }
};

struct SoftSupervision {
  const GroupProbabilities& q;
  GroupProbabilities batch;

  std::vector<double> n_tilde() const { return effective_group_sizes(q); }
  void select(std::span<const std::size_t> rows) { batch.q = q.q.select_rows(rows); }
  std::vector<double> batch_loss(std::span<const double> losses,
                                 std::span<const double> denom) const {
    return per_group_weighted_loss(losses, batch, denom);
  }
  std::vector<double> batch_weights(std::span<const double> group_weights,
                                    std::span<const double> denom) const {
    return sample_weights(group_weights, batch, denom);
  }
  GroupRiskReport full_risk(std::span<const double> losses, std::span<const double> n_tilde,
                            double c) const {
    return pg_dro_risk(losses, q, n_tilde, c);
  }
};

struct HardSupervision {
  std::span<const int> groups;
  int num_groups;
  std::vector<int> batch;

  std::vector<double> n_tilde() const {
    std::vector<double> counts(static_cast<std::size_t>(num_groups), 0.0);
    for (int g : groups) counts[g] += 1.0;
    return counts;
  }
  void select(std::span<const std::size_t> rows) {
    batch.clear();
    for (std::size_t r : rows) batch.push_back(groups[r]);
  }
  std::vector<double> batch_loss(std::span<const double> losses,
                                 std::span<const double> denom) const {
    return per_group_indicator_loss(losses, batch, denom);
  }
  std::vector<double> batch_weights(std::span<const double> group_weights,
                                    std::span<const double> denom) const {
    return sample_weights(group_weights, batch, denom);
  }
  GroupRiskReport full_risk(std::span<const double> losses, std::span<const double> n_tilde,
                            double c) const {
    return adjusted_worst_group(per_group_indicator_loss(losses, groups, n_tilde), n_tilde, c);
  }
};

void check_validation_set(const Dataset& val, const GroupSpace& space) {
  if (!val.has_env()) fail<ValueError>("validation set needs environment annotations");
  val.validate(space.num_classes(), space.num_envs());
  std::vector<std::size_t> counts(space.num_groups(), 0);
  for (int g : val.groups(space)) ++counts[g];
  for (int g = 0; g < space.num_groups(); ++g) {
    if (counts[g] == 0) {
      const auto [y, e] = space.components(g);
      fail<ValueError>("validation group ", g, " (label ", y, ", env ", e,
                       ") is empty; worst-group selection is undefined");
    }
  }
}

template <typename Supervision>
TrainResult train_impl(const Dataset& train_set, Supervision sup, const Dataset& val,
                       const GroupSpace& space, const TrainConfig& cfg,
                       const StepObserver& observer) {
  constexpr bool kRobust = !std::is_same_v<Supervision, NoSupervision>;
  cfg.validate();
  train_set.validate(space.num_classes());
  if (train_set.size() == 0) fail<ValueError>("training set is empty");
  check_validation_set(val, space);
  if (kRobust && cfg.objective == Objective::kErm) {
    fail<ValueError>("ERM training takes no group supervision");
  }
  if (!kRobust && cfg.objective != Objective::kErm) {
    fail<ValueError>(to_string(cfg.objective), " training needs group supervision");
  }

  std::vector<std::size_t> sizes{train_set.dim()};
  sizes.insert(sizes.end(), cfg.hidden_sizes.begin(), cfg.hidden_sizes.end());
  sizes.push_back(static_cast<std::size_t>(space.num_classes()));

  TrainResult result{init_network(sizes, derive_seed(cfg.seed, 0)), {}};
  Network net = result.net;

  const std::size_t n = train_set.size();
  const std::vector<double> n_tilde = sup.n_tilde();
  RobustState state;
  if constexpr (kRobust) {
    state = RobustState::init(n_tilde, cfg.c, cfg.eta_q, cfg.objective, cfg.max_mode);
  }
  std::optional<std::vector<int>> train_groups;
  if (train_set.has_env()) train_groups = train_set.groups(space);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
  double best_worst = -std::numeric_limits<double>::infinity();
  std::size_t step = 0;
  std::vector<double> denom(n_tilde.size());

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::span<const std::size_t> rows(order.data() + start,
                                              std::min(n, start + batch_size) - start);
      const Matrix xb = train_set.x.select_rows(rows);
      std::vector<int> yb;
      yb.reserve(rows.size());
      for (std::size_t r : rows) yb.push_back(train_set.y[r]);

      const Activations trace = forward_trace(net, xb);
      const std::vector<double> losses = softmax_cross_entropy(trace.logits(), yb);
      std::vector<double> weights;
      GroupRiskReport report;
      if constexpr (kRobust) {
        // Minibatch estimate of L_g: global n_g scaled to the batch share.
        const double scale = static_cast<double>(rows.size()) / static_cast<double>(n);
        for (std::size_t g = 0; g < denom.size(); ++g) denom[g] = n_tilde[g] * scale;
        sup.select(rows);
        report = adjusted_worst_group(sup.batch_loss(losses, denom), n_tilde, cfg.c);
        state = update_group_weights(std::move(state), report.adjusted_risk);
        weights = sup.batch_weights(state.q, denom);
      } else {
        weights.assign(rows.size(), 1.0 / static_cast<double>(rows.size()));
      }
      const Gradients grads = backward(net, trace, yb, weights);
      net = sgd_step(std::move(net), grads, cfg.lr, cfg.l2);
      if (observer) {
        observer(StepTrace{epoch, step, rows, losses, report.adjusted_risk, state.q, weights,
                           grads, net});
      }
      ++step;
    }

    EpochRecord record;
    record.epoch = epoch;
    const std::vector<double> full_losses =
        softmax_cross_entropy(forward(net, train_set.x), train_set.y);
    if constexpr (kRobust) {
      GroupRiskReport full = sup.full_risk(full_losses, n_tilde, cfg.c);
      record.objective_value = full.objective_value;
      record.group_risk = std::move(full.per_group_risk);
    } else {
      record.objective_value = erm_risk(full_losses);
      if (train_groups) {
        record.group_risk = gdro_risk(full_losses, *train_groups, space.num_groups(), 0.0)
                                .per_group_risk;
      }
    }
    record.val = evaluate(net, val, space);
    if (record.val.worst_group_acc > best_worst) {
      best_worst = record.val.worst_group_acc;
      result.net = net;
      result.history.selected = result.history.epochs.size();
    }
    result.history.epochs.push_back(std::move(record));
  }
  return result;
}

}  // namespace

TrainResult train(const Dataset& train_set, const GroupProbabilities& q, const Dataset& val,
                  const GroupSpace& space, const TrainConfig& cfg, const StepObserver& observer) {
  switch (cfg.objective) {
    case Objective::kErm:
      return train_impl(train_set, NoSupervision{}, val, space, cfg, observer);
    case Objective::kGdro: {
      q.validate(train_set.y, space);
      const std::vector<int> groups = harden(q);
      return train_impl(train_set, HardSupervision{groups, space.num_groups(), {}}, val, space,
                        cfg, observer);
    }
    case Objective::kPgdro:
      if (q.size() != train_set.size()) {
        fail<DimensionError>("group probabilities have ", q.size(), " rows, training set has ",
                             train_set.size());
      }
      q.validate(train_set.y, space);
      return train_impl(train_set, SoftSupervision{q, {}}, val, space, cfg, observer);
  }
  fail<ValueError>("unknown objective");
}

TrainResult train_with_groups(const Dataset& train_set, std::span<const int> groups,
                              const Dataset& val, const GroupSpace& space,
                              const TrainConfig& cfg, const StepObserver& observer) {
  if (groups.size() != train_set.size()) {
    fail<DimensionError>(groups.size(), " group labels for ", train_set.size(), " training rows");
  }
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (space.components(groups[i]).first != train_set.y[i]) {
      fail<ValueError>("group ", groups[i], " at row ", i, " disagrees with label ",
                       train_set.y[i]);
    }
  }
  switch (cfg.objective) {
    case Objective::kErm:
      return train_impl(train_set, NoSupervision{}, val, space, cfg, observer);
    case Objective::kGdro:
      return train_impl(train_set, HardSupervision{groups, space.num_groups(), {}}, val, space,
                        cfg, observer);
    case Objective::kPgdro: {
      const GroupProbabilities q = one_hot_groups(groups, space);
      return train_impl(train_set, SoftSupervision{q, {}}, val, space, cfg, observer);
    }
  }
  fail<ValueError>("unknown objective");
}

TrainResult train_erm(const Dataset& train_set, const Dataset& val, const GroupSpace& space,
                      const TrainConfig& cfg, const StepObserver& observer) {
  if (cfg.objective != Objective::kErm) {
    fail<ValueError>("train_erm called with objective ", to_string(cfg.objective));
  }
  return train_impl(train_set, NoSupervision{}, val, space, cfg, observer);
}

std::vector<int> predict_classes(const Network& net, const Matrix& x) {
  const Matrix logits = forward(net, x);
  std::vector<int> pred(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto row = logits.row(i);
    pred[i] = static_cast<int>(std::ranges::max_element(row) - row.begin());
  }
  return pred;
}

MetricsReport metrics_from_predictions(std::span<const int> predicted, std::span<const int> truth,
                                       std::span<const int> groups, int num_groups) {
  if (predicted.size() != truth.size() || groups.size() != truth.size()) {
    fail<DimensionError>("metrics: ", predicted.size(), " predictions, ", truth.size(),
                         " targets, ", groups.size(), " group labels");
  }
  MetricsReport report;
  report.group_counts.assign(static_cast<std::size_t>(num_groups), 0);
  std::vector<std::size_t> correct(static_cast<std::size_t>(num_groups), 0);
  std::size_t total_correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int g = groups[i];
    if (g < 0 || g >= num_groups) fail<ValueError>("group ", g, " at row ", i, " out of range");
    ++report.group_counts[g];
    if (predicted[i] == truth[i]) {
      ++correct[g];
      ++total_correct;
    }
  }
  report.per_group_acc.assign(static_cast<std::size_t>(num_groups), 0.0);
  bool any = false;
  for (int g = 0; g < num_groups; ++g) {
    if (report.group_counts[g] == 0) continue;
    report.per_group_acc[g] =
        static_cast<double>(correct[g]) / static_cast<double>(report.group_counts[g]);
    report.worst_group_acc = any ? std::min(report.worst_group_acc, report.per_group_acc[g])
                                 : report.per_group_acc[g];
    any = true;
  }
  if (!truth.empty()) {
    report.avg_acc = static_cast<double>(total_correct) / static_cast<double>(truth.size());
  }
  return report;
}

MetricsReport evaluate(const Network& net, const Dataset& data, const GroupSpace& space) {
  if (!data.has_env()) fail<ValueError>("evaluation needs environment annotations");
  if (net.output_dim() != static_cast<std::size_t>(space.num_classes())) {
    fail<DimensionError>("network emits ", net.output_dim(), " classes, group space has ",
                         space.num_classes());
  }
  return metrics_from_predictions(predict_classes(net, data.x), data.y, data.groups(space),
                                  space.num_groups());
}

MetricsReport evaluate_labeler(const EnvProbabilities& env_probs, const Dataset& data,
                               const GroupSpace& space) {
  if (!data.has_env()) fail<ValueError>("labeler evaluation needs environment annotations");
  if (env_probs.p.rows() != data.size()) {
    fail<DimensionError>(env_probs.p.rows(), " probability rows for ", data.size(), " samples");
  }
  std::vector<int> predicted(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto row = env_probs.p.row(i);
    predicted[i] = static_cast<int>(std::ranges::max_element(row) - row.begin());
  }
  return metrics_from_predictions(predicted, *data.env, data.groups(space), space.num_groups());
}

std::vector<GridPoint> decision_boundary_grid(const Network& net, std::array<double, 2> x_range,
                                              std::array<double, 2> y_range,
                                              std::size_t resolution) {
  if (net.input_dim() != 2) {
    fail<DimensionError>("decision boundary needs a two-input model, got ", net.input_dim(),
                         " inputs");
  }
  if (resolution == 0) fail<ValueError>("grid resolution must be positive");
  auto axis = [resolution](std::array<double, 2> range, std::size_t k) {
    if (resolution == 1) return range[0];
    const double t = static_cast<double>(k) / static_cast<double>(resolution - 1);
    return range[0] + t * (range[1] - range[0]);
  };
  Matrix points(resolution * resolution, 2);
  for (std::size_t i = 0; i < resolution; ++i) {
    for (std::size_t j = 0; j < resolution; ++j) {
      points(i * resolution + j, 0) = axis(x_range, i);
      points(i * resolution + j, 1) = axis(y_range, j);
    }
  }
  const Matrix probs = softmax_rows(forward(net, points));
  std::vector<GridPoint> grid(points.rows());
  for (std::size_t k = 0; k < points.rows(); ++k) {
    const auto row = probs.row(k);
    const auto top = std::ranges::max_element(row);
    grid[k] = {points(k, 0), points(k, 1), static_cast<int>(top - row.begin()), *top};
  }
  return grid;
}

}  // namespace pgdro
