#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pgdro/error.hpp"
#include "pgdro/pipeline.hpp"
#include "pgdro/synthetic.hpp"
#include "pgdro/training.hpp"
#include "support.hpp"

using namespace pgdro;
using pgdro::testing::random_env_probs;
using pgdro::testing::random_labels;

namespace {

const GroupSpace kSpace(2, 2);

struct SmallProblem {
  Dataset train;
  Dataset val;
};

SmallProblem small_problem(std::uint64_t seed) {
  SyntheticParams params;
  params.n = 200;
  params.p = 0.85;
  params.seed = seed;
  return {generate_synthetic(params), generate_balanced(10, 0.5, 0.05, seed + 1000)};
}

TrainConfig quick_config(Objective objective) {
  TrainConfig cfg;
  cfg.objective = objective;
  cfg.epochs = 4;
  cfg.batch_size = 32;
  cfg.hidden_sizes = {8, 8};
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("metrics_from_predictions: brute-force tally") {
  Rng rng(50);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(80);
    const int num_groups = 1 + static_cast<int>(rng.uniform_index(5));
    const auto pred = random_labels(rng, n, 3);
    const auto truth = random_labels(rng, n, 3);
    const auto groups = random_labels(rng, n, num_groups);
    const auto m = metrics_from_predictions(pred, truth, groups, num_groups);

    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) correct += pred[i] == truth[i] ? 1 : 0;
    CHECK(m.avg_acc == doctest::Approx(static_cast<double>(correct) / n).epsilon(1e-15));
    double worst = 2.0;
    for (int g = 0; g < num_groups; ++g) {
      std::size_t count = 0;
      std::size_t hit = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (groups[i] != g) continue;
        ++count;
        hit += pred[i] == truth[i] ? 1 : 0;
      }
      CHECK(m.group_counts[g] == count);
      if (count == 0) {
        CHECK(m.per_group_acc[g] == 0.0);
        continue;
      }
      const double acc = static_cast<double>(hit) / count;
      CHECK(m.per_group_acc[g] == doctest::Approx(acc).epsilon(1e-15));
      worst = std::min(worst, acc);
    }
    CHECK(m.worst_group_acc == doctest::Approx(worst).epsilon(1e-15));
  }
}

TEST_CASE("evaluate: perfect and constant predictors") {
  Dataset d = generate_balanced(25, 0.5, 0.05, 7);
  SUBCASE("oracle network") {
    // logit_1 - logit_0 = 2 * x1 - 1; relabel rows by the side they fall on.
    Network net = Network::zeros({2, 2});
    net.weights[0](0, 1) = 2.0;
    net.biases[0] = {0.0, -1.0};
    for (std::size_t i = 0; i < d.size(); ++i) d.y[i] = d.x(i, 0) > 0.5 ? 1 : 0;
    const auto m = evaluate(net, d, kSpace);
    CHECK(m.avg_acc == 1.0);
  }
  SUBCASE("always class 0") {
    Network net = Network::zeros({2, 2});
    net.biases[0] = {1.0, 0.0};
    const auto m = evaluate(net, d, kSpace);
    CHECK(m.avg_acc == 0.5);
    CHECK(m.per_group_acc == std::vector<double>{1.0, 1.0, 0.0, 0.0});
    CHECK(m.worst_group_acc == 0.0);
  }
  SUBCASE("missing env") {
    d.env.reset();
    CHECK_THROWS_AS(evaluate(Network::zeros({2, 2}), d, kSpace), ValueError);
  }
}

TEST_CASE("evaluate_labeler scores environment predictions") {
  Dataset d = generate_balanced(5, 0.5, 0.05, 8);
  Matrix p(d.size(), 2);
  for (std::size_t i = 0; i < d.size(); ++i) p(i, (*d.env)[i]) = 1.0;
  CHECK(evaluate_labeler({p}, d, kSpace).worst_group_acc == 1.0);
  for (std::size_t i = 0; i < d.size(); ++i) std::swap(p(i, 0), p(i, 1));
  CHECK(evaluate_labeler({p}, d, kSpace).avg_acc == 0.0);
}

TEST_CASE("decision_boundary_grid") {
  SUBCASE("linear boundary x1 + 2 x2 = 0.5") {
    Network net = Network::zeros({2, 2});
    net.weights[0](0, 1) = 1.0;
    net.weights[0](1, 1) = 2.0;
    net.biases[0] = {0.0, -0.5};
    const std::size_t res = 41;
    const auto grid = decision_boundary_grid(net, {-2.0, 2.0}, {-2.0, 2.0}, res);
    REQUIRE(grid.size() == res * res);
    CHECK(grid.front().x1 == -2.0);
    CHECK(grid.front().x2 == -2.0);
    CHECK(grid.back().x1 == 2.0);
    CHECK(grid.back().x2 == 2.0);
    CHECK(grid[1].x1 == -2.0);  // x1 varies slowest
    const double cell = 4.0 / static_cast<double>(res - 1);
    for (std::size_t i = 0; i < res; ++i) {
      // Along each x1 column the prediction flips once, within a cell of the
      // analytic line.
      int flips = 0;
      for (std::size_t j = 1; j < res; ++j) {
        const auto& a = grid[i * res + j - 1];
        const auto& b = grid[i * res + j];
        if (a.pred == b.pred) continue;
        ++flips;
        const double boundary = (0.5 - a.x1) / 2.0;
        CHECK(a.x2 <= boundary + cell);
        CHECK(b.x2 >= boundary - cell);
      }
      const double boundary = (0.5 - grid[i * res].x1) / 2.0;
      CHECK(flips == (boundary > -2.0 && boundary < 2.0 ? 1 : 0));
    }
    for (const auto& pt : grid) {
      CHECK(pt.confidence >= 0.5);
      CHECK(pt.confidence <= 1.0);
    }
  }
  SUBCASE("zero network is maximally unsure") {
    for (const auto& pt : decision_boundary_grid(Network::zeros({2, 3, 2}), {0, 1}, {0, 1}, 3)) {
      CHECK(pt.confidence == 0.5);
      CHECK(pt.pred == 0);
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(decision_boundary_grid(Network::zeros({3, 2}), {0, 1}, {0, 1}, 3),
                    DimensionError);
    CHECK_THROWS_AS(decision_boundary_grid(Network::zeros({2, 2}), {0, 1}, {0, 1}, 0),
                    ValueError);
  }
}

TEST_CASE("train: zero epochs returns the initial network") {
  const auto prob = small_problem(1);
  TrainConfig cfg = quick_config(Objective::kErm);
  cfg.epochs = 0;
  const auto r = train_erm(prob.train, prob.val, kSpace, cfg);
  CHECK(r.history.epochs.empty());
  CHECK_FALSE(r.history.selected.has_value());
  CHECK(r.net == init_network({2, 8, 8, 2}, derive_seed(cfg.seed, 0)));
}

TEST_CASE("train: deterministic for a fixed seed") {
  const auto prob = small_problem(2);
  const auto q = one_hot_groups(prob.train.groups(kSpace), kSpace);
  for (auto obj : {Objective::kErm, Objective::kGdro, Objective::kPgdro}) {
    const TrainConfig cfg = quick_config(obj);
    const auto a = train(prob.train, q, prob.val, kSpace, cfg);
    const auto b = train(prob.train, q, prob.val, kSpace, cfg);
    CHECK(a.net == b.net);
    CHECK(a.history.selected == b.history.selected);
    TrainConfig other = cfg;
    other.seed = 4;
    CHECK(train(prob.train, q, prob.val, kSpace, other).net != a.net);
  }
}

TEST_CASE("train: one-hot PG-DRO follows G-DRO step for step") {
  const auto prob = small_problem(3);
  const auto groups = prob.train.groups(kSpace);

  struct Step {
    std::vector<double> risk;
    std::vector<double> q;
    std::vector<double> w;
    std::vector<double> params;
  };
  auto record = [](std::vector<Step>& out) {
    return [&out](const StepTrace& t) {
      out.push_back({{t.group_risk.begin(), t.group_risk.end()},
                     {t.group_weights.begin(), t.group_weights.end()},
                     {t.sample_weights.begin(), t.sample_weights.end()},
                     flatten(t.net)});
    };
  };
  for (auto mode : {MaxMode::kExponentiatedGradient, MaxMode::kHardMax}) {
    std::vector<Step> hard_steps;
    std::vector<Step> soft_steps;
    TrainConfig cfg = quick_config(Objective::kGdro);
    cfg.max_mode = mode;
    cfg.eta_q = 0.5;
    const auto hard = train_with_groups(prob.train, groups, prob.val, kSpace, cfg,
                                        record(hard_steps));
    cfg.objective = Objective::kPgdro;
    const auto soft = train(prob.train, one_hot_groups(groups, kSpace), prob.val, kSpace, cfg,
                            record(soft_steps));
    REQUIRE(hard_steps.size() == soft_steps.size());
    for (std::size_t s = 0; s < hard_steps.size(); ++s) {
      CHECK(hard_steps[s].risk == soft_steps[s].risk);
      CHECK(hard_steps[s].q == soft_steps[s].q);
      CHECK(hard_steps[s].w == soft_steps[s].w);
      CHECK(pgdro::testing::max_abs_diff(hard_steps[s].params, soft_steps[s].params) == 0.0);
    }
    CHECK(hard.net == soft.net);
  }
}

TEST_CASE("train: the returned network is the best validation checkpoint") {
  const auto prob = small_problem(4);
  Rng rng(5);
  const auto q = env_to_group_probs(random_env_probs(rng, prob.train.size(), 2), prob.train.y,
                                    kSpace);
  TrainConfig cfg = quick_config(Objective::kPgdro);
  cfg.epochs = 6;
  std::vector<Network> per_epoch;
  int last_epoch = 0;
  Network latest;
  const auto r = train(prob.train, q, prob.val, kSpace, cfg, [&](const StepTrace& t) {
    if (t.epoch != last_epoch && last_epoch != 0) per_epoch.push_back(latest);
    last_epoch = t.epoch;
    latest = t.net;
  });
  per_epoch.push_back(latest);
  REQUIRE(per_epoch.size() == 6);
  REQUIRE(r.history.epochs.size() == 6);
  REQUIRE(r.history.selected.has_value());
  const std::size_t sel = *r.history.selected;
  for (std::size_t e = 0; e < 6; ++e) {
    CHECK(r.history.epochs[e].epoch == static_cast<int>(e) + 1);
    CHECK(evaluate(per_epoch[e], prob.val, kSpace) == r.history.epochs[e].val);
    if (e < sel) {
      CHECK(r.history.epochs[e].val.worst_group_acc < r.history.epochs[sel].val.worst_group_acc);
    } else {
      CHECK(r.history.epochs[e].val.worst_group_acc <= r.history.epochs[sel].val.worst_group_acc);
    }
  }
  CHECK(r.net == per_epoch[sel]);
}

TEST_CASE("train: sample weights follow the q-weighted batch risk") {
  const auto prob = small_problem(6);
  Rng rng(7);
  const auto q = env_to_group_probs(random_env_probs(rng, prob.train.size(), 2), prob.train.y,
                                    kSpace);
  TrainConfig cfg = quick_config(Objective::kPgdro);
  cfg.epochs = 1;
  int checked = 0;
  train(prob.train, q, prob.val, kSpace, cfg, [&](const StepTrace& t) {
    double qsum = 0.0;
    for (double v : t.group_weights) qsum += v;
    CHECK(std::abs(qsum - 1.0) < 1e-12);
    for (double w : t.sample_weights) CHECK(w >= 0.0);
    ++checked;
  });
  CHECK(checked == 7);  // ceil(200 / 32)
}

TEST_CASE("train: input validation") {
  const auto prob = small_problem(8);
  const auto q = one_hot_groups(prob.train.groups(kSpace), kSpace);
  SUBCASE("validation set missing a group") {
    Dataset val = prob.val;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < val.size(); ++i) {
      if (val.groups(kSpace)[i] != 2) keep.push_back(i);
    }
    CHECK_THROWS_WITH_AS(train(prob.train, q, val.subset(keep), kSpace,
                               quick_config(Objective::kPgdro)),
                         doctest::Contains("validation group 2"), ValueError);
  }
  SUBCASE("objective mismatch") {
    CHECK_THROWS_AS(train_erm(prob.train, prob.val, kSpace, quick_config(Objective::kGdro)),
                    ValueError);
  }
  SUBCASE("wrong number of probability rows") {
    GroupProbabilities short_q{q.q.select_rows(std::vector<std::size_t>{0, 1})};
    CHECK_THROWS_AS(train(prob.train, short_q, prob.val, kSpace,
                          quick_config(Objective::kPgdro)),
                    DimensionError);
  }
  SUBCASE("group labels disagreeing with class labels") {
    auto groups = prob.train.groups(kSpace);
    groups[0] = groups[0] < 2 ? 2 : 0;
    CHECK_THROWS_AS(train_with_groups(prob.train, groups, prob.val, kSpace,
                                      quick_config(Objective::kGdro)),
                    ValueError);
  }
  SUBCASE("bad hyperparameters") {
    TrainConfig cfg = quick_config(Objective::kPgdro);
    cfg.lr = 0.0;
    CHECK_THROWS_AS(train(prob.train, q, prob.val, kSpace, cfg), ValueError);
    cfg = quick_config(Objective::kPgdro);
    cfg.batch_size = 0;
    CHECK_THROWS_AS(train(prob.train, q, prob.val, kSpace, cfg), ValueError);
  }
}

TEST_CASE("pipeline: objectives share data and seeds") {
  PipelineConfig cfg;
  cfg.data.n = 300;
  cfg.val_per_group = 10;
  cfg.test_per_group = 20;
  cfg.labeled_size = 40;
  cfg.env_classifier.epochs = 20;
  cfg.train.epochs = 3;
  cfg.master_seed = 11;
  const auto serial = run_pipeline(cfg, 1);
  const auto threaded = run_pipeline(cfg, 3);
  REQUIRE(serial.runs.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(serial.runs[k].objective == cfg.objectives[k]);
    CHECK(serial.runs[k].result.net == threaded.runs[k].result.net);
    CHECK(serial.runs[k].test == threaded.runs[k].test);
  }
  CHECK(serial.labeler == threaded.labeler);
}

TEST_CASE("sweep_c: rows ordered by objective then C") {
  PipelineConfig cfg;
  cfg.data.n = 200;
  cfg.val_per_group = 10;
  cfg.test_per_group = 10;
  cfg.train.epochs = 2;
  const auto data = make_pipeline_data(cfg);
  const auto q = one_hot_groups(data.train.groups(kSpace), kSpace);
  const std::vector<double> cs{0.0, 1.0};
  const std::vector<Objective> objectives{Objective::kGdro, Objective::kPgdro};
  const auto rows = sweep_c(data, q, kSpace, cfg.train, objectives, cs, 2);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].objective == Objective::kGdro);
  CHECK(rows[1].c == 1.0);
  CHECK(rows[2].objective == Objective::kPgdro);
  CHECK(rows[2].c == 0.0);
  // One-hot Q: both objectives coincide at every C.
  CHECK(rows[0].test == rows[2].test);
  CHECK(rows[1].test == rows[3].test);
}
