#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "pgdro/error.hpp"
#include "pgdro/io.hpp"
#include "pgdro/serialize.hpp"
#include "support.hpp"

using namespace pgdro;

TEST_CASE("network text format round trips bit for bit") {
  Rng rng(60);
  for (std::uint64_t s = 0; s < 20; ++s) {
    Network net = init_network({2, 1 + rng.uniform_index(8), 3}, s);
    for (auto& b : net.biases) {
      for (double& v : b) v = rng.normal() * 1e-7;
    }
    net.weights[0](0, 0) = 0.1 + 0.2;  // not the shortest-decimal 0.3
    const std::string text = format_network(net);
    CHECK(text.starts_with(kNetworkMagic));
    CHECK(parse_network(text) == net);
    CHECK(format_network(parse_network(text)) == text);
  }
}

TEST_CASE("network file save and load") {
  const auto dir = std::filesystem::temp_directory_path() / "pgdro_test_serialize";
  std::filesystem::remove_all(dir);
  const std::string path = (dir / "nested" / "model.txt").string();
  const Network net = init_network({2, 4, 2}, 9);
  save_network(net, path);
  CHECK(load_network(path) == net);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_network(path), IoError);
}

TEST_CASE("network parse errors name the problem") {
  const std::string good = format_network(init_network({2, 2}, 1));
  CHECK_THROWS_WITH_AS(parse_network("hello\n"), doctest::Contains("not a model file"), IoError);
  CHECK_THROWS_AS(parse_network(good + "1,2\n"), IoError);
  CHECK_THROWS_AS(parse_network(good.substr(0, good.size() - 4)), IoError);
  CHECK_THROWS_AS(parse_network("pgdro-network v1\nlayers 2,0\n"), IoError);
}

TEST_CASE("metrics JSON and CSV") {
  const GroupSpace space(2, 2);
  MetricsReport m;
  m.avg_acc = 0.75;
  m.worst_group_acc = 0.5;
  m.per_group_acc = {1.0, 0.5, 0.75, 0.75};
  m.group_counts = {4, 2, 4, 4};
  const auto j = to_json(m, space);
  CHECK(j["avg_acc"] == 0.75);
  CHECK(j["groups"].size() == 4);
  CHECK(j["groups"][2]["label"] == 1);
  CHECK(j["groups"][2]["env"] == 0);
  CHECK(j["groups"][1]["count"] == 2);
  const std::string csv = format_metrics_csv(m, space);
  CHECK(csv.starts_with("group,label,env,count,accuracy\n"));
  CHECK(csv.find("1,0,1,2,0.5\n") != std::string::npos);
  CHECK(format_metrics_table(m, space).find("worst") != std::string::npos);
}

TEST_CASE("train config JSON") {
  TrainConfig cfg;
  const auto j = to_json(cfg);
  CHECK(j["objective"] == "PGDRO");
  CHECK(j["C"] == 2.0);
  CHECK(j["hidden_sizes"] == nlohmann::json::array({16, 16, 16}));
}

TEST_CASE("io: strict numeric parsing") {
  CHECK(io::parse_double("2.5", 1, 1, "f") == 2.5);
  CHECK_THROWS_WITH_AS(io::parse_double("2.5x", 3, 2, "f"), doctest::Contains("line 3, column 2"),
                       IoError);
  CHECK_THROWS_AS(io::parse_double("", 1, 1, "f"), IoError);
  CHECK(io::format_double(0.1) == "0.1");
  CHECK_THROWS_AS(io::format_double(std::numeric_limits<double>::infinity()), ValueError);
}
