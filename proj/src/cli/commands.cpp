#include "pgdro/cli/commands.hpp"

#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <utility>

#include "pgdro/error.hpp"
#include "pgdro/io.hpp"
#include "pgdro/pipeline.hpp"
#include "pgdro/rng.hpp"
#include "pgdro/serialize.hpp"

namespace pgdro::cli {

namespace fs = std::filesystem;

namespace {

// Collects a command's outputs as temporary files next to their final names
// and renames them all on commit. Anything not committed is deleted, so a
// failing command leaves no partial outputs behind.
class OutputStage {
 public:
  explicit OutputStage(fs::path dir) : dir_(std::move(dir)) {}
  OutputStage(const OutputStage&) = delete;
  OutputStage& operator=(const OutputStage&) = delete;

  ~OutputStage() {
    std::error_code ec;
    for (const auto& entry : staged_) fs::remove(entry.first, ec);
  }

  void add(const std::string& name, std::string_view contents) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) fail<IoError>(dir_.string(), ": cannot create output directory: ", ec.message());
    const fs::path final_path = dir_ / name;
    const fs::path tmp = dir_ / ("." + name + ".tmp." + std::to_string(::getpid()));
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) fail<IoError>(tmp.string(), ": cannot open for writing");
      out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
      out.flush();
      if (!out) fail<IoError>(tmp.string(), ": write failed");
    }
    staged_.emplace_back(tmp, final_path);
  }

  std::vector<std::string> commit() {
    std::vector<std::string> written;
    for (const auto& [tmp, final_path] : staged_) {
      std::error_code ec;
      fs::rename(tmp, final_path, ec);
      if (ec) fail<IoError>(final_path.string(), ": cannot move into place: ", ec.message());
      written.push_back(final_path.string());
    }
    staged_.clear();
    return written;
  }

 private:
  fs::path dir_;
  std::vector<std::pair<fs::path, fs::path>> staged_;
};

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

std::string input_path(const ExperimentConfig& cfg, const std::string& override_path,
                       const char* default_name) {
  if (!override_path.empty()) return override_path;
  return (fs::path(cfg.out_dir) / default_name).string();
}

int max_value(const std::vector<int>& v) {
  return v.empty() ? 0 : *std::ranges::max_element(v);
}

// Classes come from the labels (at least two); environments from `envs` when
// the caller knows it, otherwise from the env column (at least two).
GroupSpace infer_space(const Dataset& d, std::optional<int> envs = std::nullopt) {
  const int classes = std::max(2, max_value(d.y) + 1);
  if (envs) return GroupSpace(classes, *envs);
  return GroupSpace(classes, std::max(2, d.env ? max_value(*d.env) + 1 : 2));
}

GroupSpace space_for_probs(const Dataset& d, const GroupProbabilities& q) {
  const int classes = std::max(2, max_value(d.y) + 1);
  if (q.q.cols() % static_cast<std::size_t>(classes) != 0) {
    fail<DimensionError>("group probabilities have ", q.q.cols(), " columns, not a multiple of ",
                         classes, " classes");
  }
  return GroupSpace(classes, static_cast<int>(q.q.cols()) / classes);
}

Dataset load_annotated(const std::string& path, const char* role) {
  Dataset d = load_csv(path);
  if (!d.has_env()) fail<ValueError>(path, ": ", role, " set needs an env column");
  return d;
}

TrainConfig seeded_train_config(const ExperimentConfig& cfg) {
  TrainConfig t = cfg.train;
  t.seed = derive_seed(cfg.seed, seed_stream::kTraining);
  return t;
}

std::string describe(const MetricsReport& m) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "avg %.4f  worst-group %.4f", m.avg_acc, m.worst_group_acc);
  return buf;
}

}  // namespace

ExperimentConfig resolve_config(const std::optional<std::string>& config_path,
                                const Overrides& o, const char* env_out_dir) {
  ExperimentConfig cfg = config_path ? load_config(*config_path) : ExperimentConfig{};
  if (env_out_dir && *env_out_dir) cfg.out_dir = env_out_dir;
  if (o.out_dir) cfg.out_dir = *o.out_dir;
  if (o.seed) cfg.seed = *o.seed;
  if (o.objective) {
    const Objective obj = parse_objective(*o.objective);
    cfg.train.objective = obj;
    cfg.objectives = {obj};
    cfg.sweep.objectives = {obj};
  }
  if (o.c) cfg.train.c = *o.c;
  if (o.epochs) cfg.train.epochs = *o.epochs;
  if (o.values) cfg.sweep.values = *o.values;
  if (o.resolution) cfg.boundary.resolution = *o.resolution;
  if (o.mode) cfg.labeling.mode = parse_labeling_mode(*o.mode);
  if (o.model) cfg.inputs.model = *o.model;
  if (o.data) cfg.inputs.eval_data = *o.data;
  if (o.probabilities) {
    cfg.inputs.probabilities = *o.probabilities;
    cfg.labeling.probabilities_file = *o.probabilities;
  }
  if (o.jobs) cfg.jobs = *o.jobs;
  cfg.validate();
  return cfg;
}

CommandResult cmd_gen_data(const ExperimentConfig& cfg) {
  const PipelineData data = make_pipeline_data(to_pipeline_config(cfg));
  OutputStage stage(cfg.out_dir);
  stage.add("train.csv", format_csv(data.train));
  stage.add("val.csv", format_csv(data.val));
  stage.add("test.csv", format_csv(data.test));
  CommandResult r;
  r.written = stage.commit();
  const auto sizes = synthetic_group_sizes(cfg.data);
  r.summary = "train " + std::to_string(data.train.size()) + " rows (groups " +
              std::to_string(sizes[0]) + "/" + std::to_string(sizes[1]) + "/" +
              std::to_string(sizes[2]) + "/" + std::to_string(sizes[3]) + "), val " +
              std::to_string(data.val.size()) + ", test " + std::to_string(data.test.size());
  return r;
}

CommandResult cmd_pseudo_label(const ExperimentConfig& cfg) {
  const std::string train_path = input_path(cfg, cfg.inputs.train, "train.csv");
  const Dataset train_set = load_csv(train_path);
  const auto& lab = cfg.labeling;

  nlohmann::json report{{"mode", to_string(lab.mode)}, {"rows", train_set.size()}};
  GroupProbabilities q;
  std::optional<EnvProbabilities> env_probs;
  std::optional<Network> env_net;
  GroupSpace space = infer_space(train_set);

  switch (lab.mode) {
    case LabelingMode::kSupervised: {
      if (!train_set.has_env()) {
        fail<ValueError>(train_path, ": supervised pseudo-labeling needs an env column");
      }
      const PseudoLabels labels =
          supervised_pseudo_labels(train_set, to_pipeline_config(cfg), space);
      q = labels.q;
      env_probs = labels.env_probs;
      env_net = labels.env_net;
      report["labeled_size"] = labels.labeled.indices.size();
      report["labeled_indices"] = labels.labeled.indices;
      break;
    }
    case LabelingMode::kZeroShot: {
      if (lab.embeddings.empty() || lab.prototypes.empty()) {
        fail<ValueError>("zero-shot labeling needs labeling.embeddings and labeling.prototypes");
      }
      EmbeddingSet emb{load_embeddings(lab.embeddings, "index"),
                       load_embeddings(lab.prototypes, "env"), lab.temperature};
      if (emb.inputs.rows() != train_set.size()) {
        fail<DimensionError>(lab.embeddings, ": ", emb.inputs.rows(), " embeddings for ",
                             train_set.size(), " training rows");
      }
      space = infer_space(train_set, static_cast<int>(emb.prototypes.rows()));
      env_probs = apply_probability_floor(zero_shot_env_probs(emb), lab.prob_floor);
      q = env_to_group_probs(*env_probs, train_set.y, space);
      report["temperature"] = lab.temperature;
      break;
    }
    case LabelingMode::kGivenFile: {
      if (lab.probabilities_file.empty()) {
        fail<ValueError>("given-file labeling needs labeling.probabilities_file");
      }
      q = load_group_probs(lab.probabilities_file);
      if (q.size() != train_set.size()) {
        fail<DimensionError>(lab.probabilities_file, ": ", q.size(), " rows for ",
                             train_set.size(), " training rows");
      }
      space = space_for_probs(train_set, q);
      q.validate(train_set.y, space);
      report["source"] = fs::path(lab.probabilities_file).filename().string();
      break;
    }
  }

  report["num_groups"] = space.num_groups();
  std::string text = "mode " + std::string(to_string(lab.mode)) + ", " +
                     std::to_string(train_set.size()) + " rows\n";
  if (train_set.has_env()) {
    MetricsReport labeler;
    if (env_probs) {
      labeler = evaluate_labeler(*env_probs, train_set, space);
    } else {
      // Given group probabilities: score the environment of the argmax group.
      const auto hard = harden(q);
      std::vector<int> pred(hard.size());
      for (std::size_t i = 0; i < hard.size(); ++i) pred[i] = space.components(hard[i]).second;
      labeler = metrics_from_predictions(pred, *train_set.env, train_set.groups(space),
                                         space.num_groups());
    }
    report["labeler"] = to_json(labeler, space);
    text += "environment accuracy of the labeler\n" + format_metrics_table(labeler, space);
  } else {
    report["labeler"] = nullptr;
  }

  OutputStage stage(cfg.out_dir);
  stage.add("group_probs.csv", format_group_probs_csv(q));
  if (env_net) stage.add("env_classifier.txt", format_network(*env_net));
  stage.add("pseudo_label_report.json", dump(report));
  stage.add("pseudo_label_report.txt", text);
  CommandResult r;
  r.written = stage.commit();
  r.summary = text;
  return r;
}

CommandResult cmd_train(const ExperimentConfig& cfg) {
  const Dataset train_set = load_csv(input_path(cfg, cfg.inputs.train, "train.csv"));
  const Dataset val = load_annotated(input_path(cfg, cfg.inputs.val, "val.csv"), "validation");
  const TrainConfig tcfg = seeded_train_config(cfg);
  const std::string probs_path = input_path(cfg, cfg.inputs.probabilities, "group_probs.csv");

  CommandResult r;
  TrainResult result;
  GroupSpace space = infer_space(val);
  if (tcfg.objective == Objective::kErm) {
    if (!cfg.inputs.probabilities.empty() || fs::exists(probs_path)) {
      r.warnings.push_back("ERM ignores the probabilities file " + probs_path);
    }
    result = train_erm(train_set, val, space, tcfg);
  } else {
    const GroupProbabilities q = load_group_probs(probs_path);
    space = space_for_probs(train_set, q);
    result = train(train_set, q, val, space, tcfg);
  }

  const auto& h = result.history;
  nlohmann::json report{{"objective", to_string(tcfg.objective)},
                        {"seed", cfg.seed},
                        {"config", to_json(tcfg)},
                        {"history", to_json(h, space)}};
  std::string text = std::string(to_string(tcfg.objective)) + ", " +
                     std::to_string(h.epochs.size()) + " epochs\n";
  if (h.selected) {
    const auto& best = h.epochs[*h.selected];
    report["selected_val"] = to_json(best.val, space);
    text += "selected epoch " + std::to_string(best.epoch) + " (validation)\n" +
            format_metrics_table(best.val, space);
  } else {
    report["selected_val"] = nullptr;
    text += "no epochs run; the initial network is saved\n";
  }

  OutputStage stage(cfg.out_dir);
  stage.add("model.txt", format_network(result.net));
  stage.add("train_report.json", dump(report));
  stage.add("train_report.txt", text);
  r.written = stage.commit();
  r.summary = text;
  return r;
}

CommandResult cmd_eval(const ExperimentConfig& cfg) {
  const Network net = load_network(input_path(cfg, cfg.inputs.model, "model.txt"));
  const std::string data_path = !cfg.inputs.eval_data.empty()
                                    ? cfg.inputs.eval_data
                                    : input_path(cfg, cfg.inputs.test, "test.csv");
  const Dataset data = load_annotated(data_path, "evaluation");
  const GroupSpace space(static_cast<int>(net.output_dim()), infer_space(data).num_envs());
  const MetricsReport m = evaluate(net, data, space);

  nlohmann::json report{
      {"data", fs::path(data_path).filename().string()}, {"rows", data.size()}, {"metrics", to_json(m, space)}};
  OutputStage stage(cfg.out_dir);
  stage.add("eval_report.json", dump(report));
  stage.add("eval_groups.csv", format_metrics_csv(m, space));
  stage.add("eval_report.txt", format_metrics_table(m, space));
  CommandResult r;
  r.written = stage.commit();
  r.summary = format_metrics_table(m, space);
  return r;
}

CommandResult cmd_sweep_c(const ExperimentConfig& cfg) {
  PipelineData data;
  data.train = load_csv(input_path(cfg, cfg.inputs.train, "train.csv"));
  data.val = load_annotated(input_path(cfg, cfg.inputs.val, "val.csv"), "validation");
  data.test = load_annotated(input_path(cfg, cfg.inputs.test, "test.csv"), "test");
  const GroupProbabilities q =
      load_group_probs(input_path(cfg, cfg.inputs.probabilities, "group_probs.csv"));
  const GroupSpace space = space_for_probs(data.train, q);

  CommandResult r;
  for (auto o : cfg.sweep.objectives) {
    if (o == Objective::kErm) r.warnings.push_back("ERM ignores C; its sweep rows are repeats");
  }
  const auto rows = sweep_c(data, q, space, seeded_train_config(cfg), cfg.sweep.objectives,
                            cfg.sweep.values, cfg.jobs);

  OutputStage stage(cfg.out_dir);
  nlohmann::json report{{"seed", cfg.seed}, {"values", cfg.sweep.values}};
  nlohmann::json per_objective = nlohmann::json::array();
  const std::size_t per = cfg.sweep.values.size();
  for (std::size_t k = 0; k < cfg.sweep.objectives.size(); ++k) {
    const std::string name(to_string(cfg.sweep.objectives[k]));
    std::string csv = "C,avg_acc,worst_group_acc\n";
    nlohmann::json entries = nlohmann::json::array();
    std::size_t best = k * per;
    for (std::size_t j = k * per; j < (k + 1) * per; ++j) {
      const SweepRow& row = rows[j];
      io::append_double(csv, row.c);
      csv += ',';
      io::append_double(csv, row.test.avg_acc);
      csv += ',';
      io::append_double(csv, row.test.worst_group_acc);
      csv += '\n';
      entries.push_back({{"C", row.c}, {"val", to_json(row.val, space)},
                         {"test", to_json(row.test, space)}});
      if (row.val.worst_group_acc > rows[best].val.worst_group_acc) best = j;
    }
    stage.add("sweep_c_" + name + ".csv", csv);
    per_objective.push_back({{"objective", name},
                             {"best_C", rows[best].c},
                             {"best_test_worst_group_acc", rows[best].test.worst_group_acc},
                             {"runs", std::move(entries)}});
    r.summary += name + ": best C " + io::format_double(rows[best].c) +
                 " by validation, test " + describe(rows[best].test) + "\n";
  }
  report["objectives"] = std::move(per_objective);
  stage.add("sweep_c_report.json", dump(report));
  r.written = stage.commit();
  return r;
}

CommandResult cmd_boundary(const ExperimentConfig& cfg) {
  const Network net = load_network(input_path(cfg, cfg.inputs.model, "model.txt"));
  const auto grid = decision_boundary_grid(net, cfg.boundary.x_range, cfg.boundary.y_range,
                                           cfg.boundary.resolution);
  std::string csv = "x1,x2,pred,confidence\n";
  for (const auto& pt : grid) {
    io::append_double(csv, pt.x1);
    csv += ',';
    io::append_double(csv, pt.x2);
    csv += ',' + std::to_string(pt.pred) + ',';
    io::append_double(csv, pt.confidence);
    csv += '\n';
  }
  OutputStage stage(cfg.out_dir);
  stage.add("boundary.csv", csv);
  CommandResult r;
  r.written = stage.commit();
  r.summary = std::to_string(grid.size()) + " grid points";
  return r;
}

CommandResult cmd_pipeline(const ExperimentConfig& cfg) {
  const GroupSpace space(2, 2);
  const PipelineReport report = run_pipeline(to_pipeline_config(cfg), cfg.jobs);
  nlohmann::json j = to_json(report, space);
  j["seed"] = cfg.seed;
  j["config"] = to_json(cfg.train);
  j["config"].erase("seed");
  j["config"].erase("objective");

  std::string text =
      "labeler environment accuracy\n" + format_metrics_table(report.labeler, space);
  OutputStage stage(cfg.out_dir);
  for (const auto& run : report.runs) {
    const std::string name(to_string(run.objective));
    text += "\n" + name + " test\n" + format_metrics_table(run.test, space);
    stage.add("model_" + name + ".txt", format_network(run.result.net));
  }
  stage.add("pipeline_report.json", dump(j));
  stage.add("pipeline_report.txt", text);
  CommandResult r;
  r.written = stage.commit();
  for (const auto& run : report.runs) {
    r.summary += std::string(to_string(run.objective)) + ": test " + describe(run.test) + "\n";
  }
  return r;
}

CommandResult run_command(std::string_view name, const ExperimentConfig& cfg) {
  if (name == "gen-data") return cmd_gen_data(cfg);
  if (name == "pseudo-label") return cmd_pseudo_label(cfg);
  if (name == "train") return cmd_train(cfg);
  if (name == "eval") return cmd_eval(cfg);
  if (name == "sweep-c") return cmd_sweep_c(cfg);
  if (name == "boundary") return cmd_boundary(cfg);
  if (name == "pipeline") return cmd_pipeline(cfg);
  fail<ValueError>("unknown command '", name, "'");
}

std::string error_line(std::string_view command, const std::exception& e) {
  std::string kind = "Error";
  if (dynamic_cast<const DimensionError*>(&e)) {
    kind = "DimensionError";
  } else if (dynamic_cast<const ValueError*>(&e)) {
    kind = "ValueError";
  } else if (dynamic_cast<const IoError*>(&e)) {
    kind = "IoError";
  } else if (!dynamic_cast<const Error*>(&e)) {
    kind = "InternalError";
  }
  return error_line(command, kind, e.what());
}

std::string error_line(std::string_view command, std::string_view kind, std::string_view message) {
  const nlohmann::json j{{"error", kind}, {"command", command}, {"message", message}};
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

}  // namespace pgdro::cli
