#include "pgdro/pipeline.hpp"

#include "pgdro/error.hpp"
#include "pgdro/parallel.hpp"
#include "pgdro/rng.hpp"

namespace pgdro {

namespace {

const GroupSpace kBinarySpace(2, 2);

}  // namespace

PipelineData make_pipeline_data(const PipelineConfig& cfg) {
  SyntheticParams params = cfg.data;
  params.seed = derive_seed(cfg.master_seed, seed_stream::kTrainData);
  PipelineData data;
  data.train = generate_synthetic(params);
  data.val = generate_balanced(cfg.val_per_group, params.sigma2_inv, params.sigma2_e,
                               derive_seed(cfg.master_seed, seed_stream::kValData));
  data.test = generate_balanced(cfg.test_per_group, params.sigma2_inv, params.sigma2_e,
                                derive_seed(cfg.master_seed, seed_stream::kTestData));
  return data;
}

PseudoLabels supervised_pseudo_labels(const Dataset& train_set, const PipelineConfig& cfg,
                                      const GroupSpace& space) {
  PseudoLabels out;
  out.labeled = subsample_labeled(train_set, cfg.labeled_size,
                                  derive_seed(cfg.master_seed, seed_stream::kLabeledSubset));
  EnvClassifierConfig env_cfg = cfg.env_classifier;
  env_cfg.seed = derive_seed(cfg.master_seed, seed_stream::kEnvClassifier);
  out.env_net = train_env_classifier(out.labeled, train_set, space, env_cfg);
  out.env_probs =
      apply_probability_floor(predict_env_probs(out.env_net, train_set.x), cfg.prob_floor);
  out.q = env_to_group_probs(out.env_probs, train_set.y, space);
  out.labeler = evaluate_labeler(out.env_probs, train_set, space);
  return out;
}

ObjectiveRun run_objective(const PipelineData& data, const GroupProbabilities& q,
                           const GroupSpace& space, TrainConfig cfg, Objective objective) {
  cfg.objective = objective;
  ObjectiveRun run{objective, train(data.train, q, data.val, space, cfg), {}, {}};
  run.val = evaluate(run.result.net, data.val, space);
  run.test = evaluate(run.result.net, data.test, space);
  return run;
}

PipelineReport run_pipeline(const PipelineConfig& cfg, std::size_t jobs) {
  if (cfg.objectives.empty()) fail<ValueError>("pipeline needs at least one objective");
  const PipelineData data = make_pipeline_data(cfg);
  const PseudoLabels labels = supervised_pseudo_labels(data.train, cfg);

  TrainConfig base = cfg.train;
  base.seed = derive_seed(cfg.master_seed, seed_stream::kTraining);
  PipelineReport report;
  report.labeler = labels.labeler;
  report.runs = parallel_map(cfg.objectives.size(), jobs, [&](std::size_t k) {
    return run_objective(data, labels.q, kBinarySpace, base, cfg.objectives[k]);
  });
  return report;
}

std::vector<SweepRow> sweep_c(const PipelineData& data, const GroupProbabilities& q,
                              const GroupSpace& space, const TrainConfig& cfg,
                              std::span<const Objective> objectives,
                              std::span<const double> c_values, std::size_t jobs) {
  for (double c : c_values) {
    if (!(c >= 0.0)) fail<ValueError>("C values must be non-negative, got ", c);
  }
  const std::size_t per_objective = c_values.size();
  return parallel_map(objectives.size() * per_objective, jobs, [&](std::size_t k) {
    TrainConfig run_cfg = cfg;
    run_cfg.c = c_values[k % per_objective];
    const ObjectiveRun run = run_objective(data, q, space, run_cfg, objectives[k / per_objective]);
    return SweepRow{run.objective, run_cfg.c, run.val, run.test};
  });
}

}  // namespace pgdro
