#include "pgdro/cli/config.hpp"

#include <set>

#include "pgdro/error.hpp"
#include "pgdro/io.hpp"
#include "pgdro/serialize.hpp"

namespace pgdro::cli {

namespace {

using nlohmann::json;

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be reported as typos.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      fail<ValueError>("config: ", path_.empty() ? "<root>" : path_, " must be an object");
    }
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    const char* expected = nullptr;
    if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) {
        expected = "an integer";
      } else if (std::is_unsigned_v<T> && !v.is_number_unsigned()) {
        expected = "a non-negative integer";
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) expected = "a number";
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) expected = "a string";
    }
    if (expected) fail<ValueError>("config: ", qualified(key), " must be ", expected);
    try {
      out = v.get<T>();
    } catch (const json::exception&) {
      fail<ValueError>("config: ", qualified(key), " has the wrong type");
    }
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    static const json kEmpty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : kEmpty, qualified(key));
  }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string qualified(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) fail<ValueError>("config: unknown key '", qualified(key), "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<Objective> read_objectives(Section& s, const std::string& key,
                                       std::vector<Objective> fallback) {
  const json* v = s.raw(key);
  if (!v) return fallback;
  if (!v->is_array()) fail<ValueError>("config: ", s.qualified(key), " must be a list");
  std::vector<Objective> out;
  for (const auto& item : *v) {
    if (!item.is_string()) {
      fail<ValueError>("config: ", s.qualified(key), " entries must be strings");
    }
    out.push_back(parse_objective(item.get<std::string>()));
  }
  return out;
}

void read_range(Section& s, const std::string& key, std::array<double, 2>& out) {
  const json* v = s.raw(key);
  if (!v) return;
  if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number()) {
    fail<ValueError>("config: ", s.qualified(key), " must be a [low, high] pair");
  }
  out = {(*v)[0].get<double>(), (*v)[1].get<double>()};
}

void read_env_classifier(Section s, EnvClassifierConfig& cfg) {
  s.read("hidden_sizes", cfg.hidden_sizes);
  s.read("epochs", cfg.epochs);
  s.read("batch_size", cfg.batch_size);
  s.read("lr", cfg.lr);
  s.read("l2", cfg.l2);
  s.read("draws_per_epoch", cfg.draws_per_epoch);
  s.finish();
}

void read_train(Section s, TrainConfig& cfg) {
  std::string objective(to_string(cfg.objective));
  std::string mode(to_string(cfg.max_mode));
  s.read("objective", objective);
  s.read("max_mode", mode);
  cfg.objective = parse_objective(objective);
  cfg.max_mode = parse_max_mode(mode);
  s.read("epochs", cfg.epochs);
  s.read("batch_size", cfg.batch_size);
  s.read("lr", cfg.lr);
  s.read("l2", cfg.l2);
  s.read("C", cfg.c);
  s.read("eta_q", cfg.eta_q);
  s.read("hidden_sizes", cfg.hidden_sizes);
  s.finish();
}

}  // namespace

std::string_view to_string(LabelingMode mode) {
  switch (mode) {
    case LabelingMode::kSupervised:
      return "supervised";
    case LabelingMode::kZeroShot:
      return "zero-shot";
    case LabelingMode::kGivenFile:
      return "given-file";
  }
  return "supervised";
}

LabelingMode parse_labeling_mode(std::string_view text) {
  if (text == "supervised") return LabelingMode::kSupervised;
  if (text == "zero-shot") return LabelingMode::kZeroShot;
  if (text == "given-file") return LabelingMode::kGivenFile;
  fail<ValueError>("unknown labeling mode '", text,
                   "' (expected supervised, zero-shot or given-file)");
}

void ExperimentConfig::validate() const {
  data.validate();
  if (val_per_group == 0 || test_per_group == 0) {
    fail<ValueError>("val_per_group and test_per_group must be positive");
  }
  if (labeling.labeled_size == 0) fail<ValueError>("labeled_size must be positive");
  labeling.env_classifier.validate();
  if (!(labeling.temperature > 0.0)) fail<ValueError>("temperature must be positive");
  train.validate();
  if (objectives.empty()) fail<ValueError>("objectives list must not be empty");
  if (sweep.objectives.empty()) fail<ValueError>("sweep objectives list must not be empty");
  if (sweep.values.empty()) fail<ValueError>("sweep values must not be empty");
  for (double c : sweep.values) {
    if (!(c >= 0.0)) fail<ValueError>("sweep values must be non-negative, got ", c);
  }
  if (boundary.resolution == 0) fail<ValueError>("boundary resolution must be positive");
  if (jobs == 0) fail<ValueError>("jobs must be positive");
  if (out_dir.empty()) fail<ValueError>("output directory must not be empty");
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  Section root(j, "");
  root.read("seed", cfg.seed);
  root.read("out_dir", cfg.out_dir);
  root.read("jobs", cfg.jobs);

  {
    Section s = root.child("data");
    s.read("n", cfg.data.n);
    s.read("p", cfg.data.p);
    s.read("sigma2_inv", cfg.data.sigma2_inv);
    s.read("sigma2_e", cfg.data.sigma2_e);
    s.read("val_per_group", cfg.val_per_group);
    s.read("test_per_group", cfg.test_per_group);
    s.finish();
  }
  {
    Section s = root.child("labeling");
    std::string mode(to_string(cfg.labeling.mode));
    s.read("mode", mode);
    cfg.labeling.mode = parse_labeling_mode(mode);
    s.read("labeled_size", cfg.labeling.labeled_size);
    s.read("prob_floor", cfg.labeling.prob_floor);
    s.read("embeddings", cfg.labeling.embeddings);
    s.read("prototypes", cfg.labeling.prototypes);
    s.read("temperature", cfg.labeling.temperature);
    s.read("probabilities_file", cfg.labeling.probabilities_file);
    read_env_classifier(s.child("env_classifier"), cfg.labeling.env_classifier);
    s.finish();
  }
  read_train(root.child("train"), cfg.train);
  cfg.objectives = read_objectives(root, "objectives", cfg.objectives);
  {
    Section s = root.child("sweep");
    s.read("values", cfg.sweep.values);
    cfg.sweep.objectives = read_objectives(s, "objectives", cfg.sweep.objectives);
    s.finish();
  }
  {
    Section s = root.child("boundary");
    s.read("resolution", cfg.boundary.resolution);
    read_range(s, "x_range", cfg.boundary.x_range);
    read_range(s, "y_range", cfg.boundary.y_range);
    s.finish();
  }
  {
    Section s = root.child("inputs");
    s.read("train", cfg.inputs.train);
    s.read("val", cfg.inputs.val);
    s.read("test", cfg.inputs.test);
    s.read("probabilities", cfg.inputs.probabilities);
    s.read("model", cfg.inputs.model);
    s.read("eval_data", cfg.inputs.eval_data);
    s.finish();
  }
  root.finish();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  const std::string text = io::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail<IoError>(path, ": invalid JSON at byte ", e.byte);
  }
  return config_from_json(j);
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  auto objective_names = [](const std::vector<Objective>& list) {
    nlohmann::json out = nlohmann::json::array();
    for (auto o : list) out.push_back(to_string(o));
    return out;
  };
  const auto& env = cfg.labeling.env_classifier;
  nlohmann::json train = pgdro::to_json(cfg.train);
  train.erase("seed");
  return {
      {"seed", cfg.seed},
      {"out_dir", cfg.out_dir},
      {"jobs", cfg.jobs},
      {"data",
       {{"n", cfg.data.n},
        {"p", cfg.data.p},
        {"sigma2_inv", cfg.data.sigma2_inv},
        {"sigma2_e", cfg.data.sigma2_e},
        {"val_per_group", cfg.val_per_group},
        {"test_per_group", cfg.test_per_group}}},
      {"labeling",
       {{"mode", to_string(cfg.labeling.mode)},
        {"labeled_size", cfg.labeling.labeled_size},
        {"prob_floor", cfg.labeling.prob_floor},
        {"embeddings", cfg.labeling.embeddings},
        {"prototypes", cfg.labeling.prototypes},
        {"temperature", cfg.labeling.temperature},
        {"probabilities_file", cfg.labeling.probabilities_file},
        {"env_classifier",
         {{"hidden_sizes", env.hidden_sizes},
          {"epochs", env.epochs},
          {"batch_size", env.batch_size},
          {"lr", env.lr},
          {"l2", env.l2},
          {"draws_per_epoch", env.draws_per_epoch}}}}},
      {"train", std::move(train)},
      {"objectives", objective_names(cfg.objectives)},
      {"sweep",
       {{"values", cfg.sweep.values}, {"objectives", objective_names(cfg.sweep.objectives)}}},
      {"boundary",
       {{"resolution", cfg.boundary.resolution},
        {"x_range", cfg.boundary.x_range},
        {"y_range", cfg.boundary.y_range}}},
      {"inputs",
       {{"train", cfg.inputs.train},
        {"val", cfg.inputs.val},
        {"test", cfg.inputs.test},
        {"probabilities", cfg.inputs.probabilities},
        {"model", cfg.inputs.model},
        {"eval_data", cfg.inputs.eval_data}}},
  };
}

PipelineConfig to_pipeline_config(const ExperimentConfig& cfg) {
  PipelineConfig p;
  p.data = cfg.data;
  p.val_per_group = cfg.val_per_group;
  p.test_per_group = cfg.test_per_group;
  p.labeled_size = cfg.labeling.labeled_size;
  p.prob_floor = cfg.labeling.prob_floor;
  p.env_classifier = cfg.labeling.env_classifier;
  p.train = cfg.train;
  p.objectives = cfg.objectives;
  p.master_seed = cfg.seed;
  return p;
}

}  // namespace pgdro::cli
