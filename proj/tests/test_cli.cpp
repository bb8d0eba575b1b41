#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "pgdro/cli/commands.hpp"
#include "pgdro/error.hpp"
#include "pgdro/io.hpp"
#include "pgdro/serialize.hpp"

using namespace pgdro;
using namespace pgdro::cli;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per test case, removed afterwards.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("pgdro_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

ExperimentConfig quick_config(const TempDir& dir) {
  ExperimentConfig cfg;
  cfg.out_dir = dir.path.string();
  cfg.data.n = 400;
  cfg.val_per_group = 20;
  cfg.test_per_group = 30;
  cfg.labeling.labeled_size = 40;
  cfg.labeling.env_classifier.epochs = 30;
  cfg.train.epochs = 5;
  return cfg;
}

std::vector<std::string> sorted_names(const fs::path& dir) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) names.push_back(e.path().filename().string());
  std::ranges::sort(names);
  return names;
}

std::size_t count_lines(const std::string& text) {
  return static_cast<std::size_t>(std::ranges::count(text, '\n'));
}

}  // namespace

TEST_CASE("config: shipped default file matches the embedded defaults") {
  const auto loaded = load_config(std::string(PGDRO_SOURCE_DIR) + "/configs/default.json");
  CHECK(to_json(loaded) == to_json(ExperimentConfig{}));
}

TEST_CASE("config: partial files keep defaults, typos are rejected") {
  const auto cfg = config_from_json(nlohmann::json::parse(R"({"train": {"C": 3}, "seed": 9})"));
  CHECK(cfg.train.c == 3.0);
  CHECK(cfg.seed == 9);
  CHECK(cfg.train.epochs == 300);
  CHECK_THROWS_WITH_AS(config_from_json(nlohmann::json::parse(R"({"train": {"Cee": 3}})")),
                       doctest::Contains("train.Cee"), ValueError);
  CHECK_THROWS_WITH_AS(config_from_json(nlohmann::json::parse(R"({"data": {"n": "many"}})")),
                       doctest::Contains("data.n"), ValueError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"objectives": ["MAX"]})")),
                  ValueError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"labeling": {"mode": "oracle"}})")),
                  ValueError);
}

TEST_CASE("config: flags beat the environment variable, which beats the file") {
  TempDir dir("precedence");
  io::write_file_atomic(dir.file("cfg.json"), R"({"out_dir": "from_file", "seed": 4})");
  Overrides none;
  CHECK(resolve_config(dir.file("cfg.json"), none, nullptr).out_dir == "from_file");
  CHECK(resolve_config(dir.file("cfg.json"), none, "from_env").out_dir == "from_env");
  Overrides flags;
  flags.out_dir = "from_flag";
  flags.seed = 7;
  flags.objective = "GDRO";
  const auto cfg = resolve_config(dir.file("cfg.json"), flags, "from_env");
  CHECK(cfg.out_dir == "from_flag");
  CHECK(cfg.seed == 7);
  CHECK(cfg.train.objective == Objective::kGdro);
  flags.c = -1.0;
  CHECK_THROWS_AS(resolve_config(std::nullopt, flags, nullptr), ValueError);
}

TEST_CASE("gen-data: default sizes and reproducible bytes") {
  TempDir dir("gen");
  ExperimentConfig cfg;
  cfg.out_dir = dir.path.string();
  const auto r = cmd_gen_data(cfg);
  CHECK(r.written.size() == 3);
  const Dataset train = load_csv(dir.file("train.csv"));
  CHECK(train.size() == 4000);
  std::array<std::size_t, 4> counts{};
  for (int g : train.groups(GroupSpace(2, 2))) ++counts[g];
  CHECK(counts == std::array<std::size_t, 4>{1900, 100, 100, 1900});
  CHECK(load_csv(dir.file("val.csv")).size() == 400);
  CHECK(load_csv(dir.file("test.csv")).size() == 2000);

  const std::string first = io::read_file(dir.file("train.csv"));
  cmd_gen_data(cfg);
  CHECK(io::read_file(dir.file("train.csv")) == first);

  cfg.data.p = 0.5;
  cmd_gen_data(cfg);
  counts = {};
  for (int g : load_csv(dir.file("train.csv")).groups(GroupSpace(2, 2))) ++counts[g];
  CHECK(counts == std::array<std::size_t, 4>{1000, 1000, 1000, 1000});
}

TEST_CASE("pseudo-label: supervised on the default benchmark") {
  TempDir dir("pseudo_sup");
  ExperimentConfig cfg;
  cfg.out_dir = dir.path.string();
  cmd_gen_data(cfg);
  cmd_pseudo_label(cfg);
  const auto q = load_group_probs(dir.file("group_probs.csv"));
  CHECK(q.size() == 4000);
  const Dataset train = load_csv(dir.file("train.csv"));
  CHECK_NOTHROW(q.validate(train.y, GroupSpace(2, 2)));
  const auto report = nlohmann::json::parse(io::read_file(dir.file("pseudo_label_report.json")));
  CHECK(report["labeled_size"] == 100);
  CHECK(report["labeler"]["groups"].size() == 4);
}

TEST_CASE("pseudo-label: zero-shot with symmetric embeddings") {
  TempDir dir("pseudo_zs");
  ExperimentConfig cfg = quick_config(dir);
  cmd_gen_data(cfg);
  const std::size_t n = load_csv(dir.file("train.csv")).size();
  std::string inputs = "index,e0,e1\n";
  for (std::size_t i = 0; i < n; ++i) inputs += std::to_string(i) + ",1,1\n";
  io::write_file_atomic(dir.file("emb.csv"), inputs);
  io::write_file_atomic(dir.file("proto.csv"), "env,e0,e1\n0,1,0\n1,0,1\n");
  cfg.labeling.mode = LabelingMode::kZeroShot;
  cfg.labeling.embeddings = dir.file("emb.csv");
  cfg.labeling.prototypes = dir.file("proto.csv");
  cmd_pseudo_label(cfg);
  const auto q = load_group_probs(dir.file("group_probs.csv"));
  for (std::size_t i = 0; i < q.size(); ++i) {
    double mass = 0.0;
    for (double v : q.q.row(i)) {
      if (v != 0.0) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
      mass += v;
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("pseudo-label: errors leave no partial outputs") {
  TempDir dir("pseudo_err");
  ExperimentConfig cfg = quick_config(dir);
  cmd_gen_data(cfg);
  const auto before = sorted_names(dir.path);

  SUBCASE("missing env column for supervised mode") {
    Dataset train = load_csv(dir.file("train.csv"));
    train.env.reset();
    io::write_file_atomic(dir.file("train.csv"), format_csv(train));
    CHECK_THROWS_WITH_AS(cmd_pseudo_label(cfg), doctest::Contains("env column"), ValueError);
  }
  SUBCASE("malformed embeddings") {
    io::write_file_atomic(dir.file("emb.csv"), "index,e0\n0,abc\n");
    io::write_file_atomic(dir.file("proto.csv"), "env,e0\n0,1\n1,2\n");
    cfg.labeling.mode = LabelingMode::kZeroShot;
    cfg.labeling.embeddings = dir.file("emb.csv");
    cfg.labeling.prototypes = dir.file("proto.csv");
    CHECK_THROWS_AS(cmd_pseudo_label(cfg), IoError);
  }
  SUBCASE("given file with the wrong support") {
    const Dataset train = load_csv(dir.file("train.csv"));
    Matrix wrong(train.size(), 4);
    for (std::size_t i = 0; i < train.size(); ++i) wrong(i, train.y[i] == 0 ? 3 : 0) = 1.0;
    save_group_probs({wrong}, dir.file("given.csv"));
    cfg.labeling.mode = LabelingMode::kGivenFile;
    cfg.labeling.probabilities_file = dir.file("given.csv");
    CHECK_THROWS_AS(cmd_pseudo_label(cfg), ValueError);
  }
  auto after = sorted_names(dir.path);
  std::erase_if(after, [](const std::string& s) { return s == "emb.csv" || s == "proto.csv" ||
                                                         s == "given.csv"; });
  CHECK(after == before);
}

TEST_CASE("train, eval and boundary chain") {
  TempDir dir("chain");
  ExperimentConfig cfg = quick_config(dir);
  cmd_gen_data(cfg);
  cmd_pseudo_label(cfg);

  const auto tr = cmd_train(cfg);
  CHECK(tr.warnings.empty());
  const auto report = nlohmann::json::parse(io::read_file(dir.file("train_report.json")));
  const auto& history = report["history"];
  CHECK(history["epochs"].size() == 5);
  const std::size_t sel = history["selected_index"];
  CHECK(history["selected_epoch"] == history["epochs"][sel]["epoch"]);
  double best = -1.0;
  for (const auto& e : history["epochs"]) best = std::max(best, e["val"]["worst_group_acc"].get<double>());
  CHECK(history["epochs"][sel]["val"]["worst_group_acc"] == best);

  // Reloaded model reproduces the recorded validation metrics exactly.
  const Network net = load_network(dir.file("model.txt"));
  const Dataset val = load_csv(dir.file("val.csv"));
  const GroupSpace space(2, 2);
  CHECK(to_json(evaluate(net, val, space), space) == report["selected_val"]);

  cmd_eval(cfg);
  const Dataset test = load_csv(dir.file("test.csv"));
  const auto eval_report = nlohmann::json::parse(io::read_file(dir.file("eval_report.json")));
  CHECK(eval_report["metrics"] == to_json(evaluate(net, test, space), space));
  CHECK(io::read_file(dir.file("eval_groups.csv")) ==
        format_metrics_csv(evaluate(net, test, space), space));

  cfg.boundary.resolution = 200;
  cmd_boundary(cfg);
  CHECK(count_lines(io::read_file(dir.file("boundary.csv"))) == 1 + 40000);

  cfg.train.objective = Objective::kErm;
  const auto erm = cmd_train(cfg);
  REQUIRE(erm.warnings.size() == 1);
  CHECK(erm.warnings[0].find("ERM ignores") != std::string::npos);
}

TEST_CASE("eval: perfect fit and missing env") {
  TempDir dir("eval");
  ExperimentConfig cfg = quick_config(dir);
  Dataset d = generate_balanced(10, 0.5, 0.05, 1);
  for (std::size_t i = 0; i < d.size(); ++i) d.y[i] = d.x(i, 0) > 0.5 ? 1 : 0;
  save_csv(d, dir.file("data.csv"));
  Network net = Network::zeros({2, 2});
  net.weights[0](0, 1) = 2.0;
  net.biases[0] = {0.0, -1.0};
  save_network(net, dir.file("model.txt"));
  cfg.inputs.eval_data = dir.file("data.csv");
  cmd_eval(cfg);
  const auto report = nlohmann::json::parse(io::read_file(dir.file("eval_report.json")));
  for (const auto& g : report["metrics"]["groups"]) {
    if (g["count"] > 0) CHECK(g["accuracy"] == 1.0);
  }
  d.env.reset();
  save_csv(d, dir.file("data.csv"));
  CHECK_THROWS_AS(cmd_eval(cfg), ValueError);
}

TEST_CASE("boundary: zero-weight model") {
  TempDir dir("boundary");
  ExperimentConfig cfg = quick_config(dir);
  save_network(Network::zeros({2, 4, 2}), dir.file("model.txt"));
  cfg.boundary.resolution = 7;
  cmd_boundary(cfg);
  const std::string csv = io::read_file(dir.file("boundary.csv"));
  const auto lines = io::csv_lines(csv);
  CHECK(lines.size() == 1 + 49);
  for (std::size_t k = 1; k < lines.size(); ++k) {
    CHECK(lines[k].text.ends_with(",0,0.5"));
  }
}

TEST_CASE("sweep-c: one row per value, C echoed exactly") {
  TempDir dir("sweep");
  ExperimentConfig cfg = quick_config(dir);
  cfg.train.epochs = 2;
  cmd_gen_data(cfg);
  cmd_pseudo_label(cfg);
  cfg.sweep.values = {0.0, 0.25, 1.0, 2.0, 3.5, 5.0};
  cmd_sweep_c(cfg);
  for (const char* name : {"sweep_c_GDRO.csv", "sweep_c_PGDRO.csv"}) {
    const std::string csv = io::read_file(dir.file(name));
    const auto lines = io::csv_lines(csv);
    REQUIRE(lines.size() == 7);
    CHECK(lines[0].text == "C,avg_acc,worst_group_acc");
    for (std::size_t k = 0; k < 6; ++k) {
      const auto cells = io::split_csv_line(lines[k + 1].text);
      CHECK(io::parse_double(cells[0], k + 2, 1, name) == cfg.sweep.values[k]);
    }
  }
  cfg.sweep.values = {-1.0};
  CHECK_THROWS_AS(cfg.validate(), ValueError);
}

TEST_CASE("pipeline: fixed seed gives byte-identical outputs") {
  TempDir a("pipe_a");
  TempDir b("pipe_b");
  ExperimentConfig cfg = quick_config(a);
  cmd_pipeline(cfg);
  cfg.out_dir = b.path.string();
  cfg.jobs = 3;
  cmd_pipeline(cfg);
  const auto names = sorted_names(a.path);
  CHECK(names == sorted_names(b.path));
  CHECK(names.size() == 5);
  for (const auto& n : names) CHECK(io::read_file(a.file(n)) == io::read_file(b.file(n)));
}

TEST_CASE("error line is one JSON object") {
  const std::string line = error_line("train", ValueError("bad \"C\"\nvalue"));
  CHECK(line.find('\n') == std::string::npos);
  const auto j = nlohmann::json::parse(line);
  CHECK(j["error"] == "ValueError");
  CHECK(j["command"] == "train");
}
