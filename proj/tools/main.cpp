#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pgdro/cli/commands.hpp"

namespace {

using pgdro::cli::Overrides;

struct Flags {
  std::optional<std::string> config;
  Overrides overrides;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON config file (defaults are embedded)");
  cmd->add_option("--seed", f.overrides.seed, "master seed");
  cmd->add_option("--out", f.overrides.out_dir,
                  std::string("output directory (overrides ") + pgdro::cli::kOutDirEnv + ")");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Group-robust training with probabilistic group labels", "pgdro"};
  app.require_subcommand(1);
  Flags f;
  auto& o = f.overrides;

  auto* gen = app.add_subcommand("gen-data", "write synthetic train/val/test CSVs");
  add_common(gen, f);

  auto* pseudo = app.add_subcommand("pseudo-label", "write group probabilities for the train set");
  add_common(pseudo, f);
  pseudo->add_option("--mode", o.mode, "supervised, zero-shot or given-file");
  pseudo->add_option("--probabilities", o.probabilities, "group-probability CSV for given-file");

  auto* train = app.add_subcommand("train", "train one objective and save the selected model");
  add_common(train, f);
  train->add_option("--objective", o.objective, "ERM, GDRO or PGDRO");
  train->add_option("--c", o.c, "generalization adjustment C");
  train->add_option("--epochs", o.epochs, "training epochs");
  train->add_option("--probabilities", o.probabilities, "group-probability CSV");

  auto* eval = app.add_subcommand("eval", "per-group accuracy of a saved model");
  add_common(eval, f);
  eval->add_option("--model", o.model, "model file");
  eval->add_option("--data", o.data, "annotated dataset CSV (default: test.csv)");

  auto* sweep = app.add_subcommand("sweep-c", "train once per C value");
  add_common(sweep, f);
  sweep->add_option("--values", o.values, "C values")->delimiter(',');
  sweep->add_option("--objective", o.objective, "restrict to one objective");
  sweep->add_option("--epochs", o.epochs, "training epochs");
  sweep->add_option("--jobs", o.jobs, "parallel runs");
  sweep->add_option("--probabilities", o.probabilities, "group-probability CSV");

  auto* boundary = app.add_subcommand("boundary", "export a prediction grid for a 2-D model");
  add_common(boundary, f);
  boundary->add_option("--model", o.model, "model file");
  boundary->add_option("--resolution", o.resolution, "points per axis");

  auto* pipeline = app.add_subcommand("pipeline", "synthetic benchmark end to end");
  add_common(pipeline, f);
  pipeline->add_option("--objective", o.objective, "run a single objective");
  pipeline->add_option("--c", o.c, "generalization adjustment C");
  pipeline->add_option("--epochs", o.epochs, "training epochs");
  pipeline->add_option("--jobs", o.jobs, "parallel objectives");

  std::string command = "pgdro";
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    for (const auto* sub : app.get_subcommands()) command = sub->get_name();
    std::cerr << pgdro::cli::error_line(command, "UsageError", e.what()) << "\n";
    return 2;
  }
  command = app.get_subcommands().front()->get_name();

  try {
    const auto cfg =
        pgdro::cli::resolve_config(f.config, f.overrides, std::getenv(pgdro::cli::kOutDirEnv));
    const auto result = pgdro::cli::run_command(command, cfg);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    if (!result.summary.empty()) {
      std::cout << result.summary;
      if (result.summary.back() != '\n') std::cout << "\n";
    }
    for (const auto& path : result.written) std::cout << "wrote " << path << "\n";
  } catch (const std::exception& e) {
    std::cerr << pgdro::cli::error_line(command, e) << "\n";
    return 1;
  }
  return 0;
}
