#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pgdro/cli/commands.hpp"
#include "pgdro/error.hpp"
#include "pgdro/grouping.hpp"
#include "pgdro/objectives.hpp"
#include "pgdro/pipeline.hpp"
#include "pgdro/serialize.hpp"
#include "pgdro/synthetic.hpp"

namespace py = pybind11;
using namespace pgdro;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw DimensionError("expected a 2-D array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return Matrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

Array to_array(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

py::dict risk_dict(const GroupRiskReport& r) {
  py::dict d;
  d["per_group_risk"] = r.per_group_risk;
  d["adjusted_risk"] = r.adjusted_risk;
  d["worst_group"] = r.worst_group;
  d["objective_value"] = r.objective_value;
  return d;
}

py::object from_json(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Group-robust training with probabilistic group labels";

  py::register_exception<Error>(m, "Error", PyExc_ValueError);

  m.def(
      "generate_synthetic",
      [](std::size_t n, double p, double sigma2_inv, double sigma2_e, std::uint64_t seed) {
        const Dataset d = generate_synthetic({n, p, sigma2_inv, sigma2_e, seed});
        py::dict out;
        out["x"] = to_array(d.x);
        out["y"] = d.y;
        out["env"] = *d.env;
        return out;
      },
      py::arg("n") = 4000, py::arg("p") = 0.95, py::arg("sigma2_inv") = 0.5,
      py::arg("sigma2_e") = 0.05, py::arg("seed") = 0,
      "Two-feature synthetic benchmark as a dict of x, y and env.");

  m.def(
      "env_to_group_probs",
      [](const Array& env_probs, const std::vector<int>& labels, int num_classes) {
        const Matrix p = to_matrix(env_probs);
        const GroupSpace space(num_classes, static_cast<int>(p.cols()));
        return to_array(env_to_group_probs({p}, labels, space).q);
      },
      py::arg("env_probs"), py::arg("labels"), py::arg("num_classes"));

  m.def(
      "effective_group_sizes",
      [](const Array& q) { return effective_group_sizes({to_matrix(q)}); }, py::arg("q"));

  m.def(
      "pg_dro_risk",
      [](const std::vector<double>& losses, const Array& q, double c) {
        const GroupProbabilities gp{to_matrix(q)};
        return risk_dict(pg_dro_risk(losses, gp, effective_group_sizes(gp), c));
      },
      py::arg("losses"), py::arg("q"), py::arg("c") = 0.0);

  m.def(
      "gdro_risk",
      [](const std::vector<double>& losses, const std::vector<int>& groups, int num_groups,
         double c) { return risk_dict(gdro_risk(losses, groups, num_groups, c)); },
      py::arg("losses"), py::arg("groups"), py::arg("num_groups"), py::arg("c") = 0.0);

  m.def(
      "zero_shot_env_probs",
      [](const Array& inputs, const Array& prototypes, double temperature) {
        return to_array(
            zero_shot_env_probs({to_matrix(inputs), to_matrix(prototypes), temperature}).p);
      },
      py::arg("inputs"), py::arg("prototypes"), py::arg("temperature") = 0.01);

  m.def(
      "default_config", [] { return from_json(cli::to_json(cli::ExperimentConfig{})); },
      "Embedded defaults as a dict.");

  m.def(
      "run_command",
      [](const std::string& name, const py::dict& config) {
        const std::string text = py::module_::import("json").attr("dumps")(config).cast<std::string>();
        cli::ExperimentConfig cfg = cli::config_from_json(nlohmann::json::parse(text));
        cfg.validate();
        cli::CommandResult r;
        {
          py::gil_scoped_release release;
          r = cli::run_command(name, cfg);
        }
        py::dict out;
        out["written"] = r.written;
        out["warnings"] = r.warnings;
        out["summary"] = r.summary;
        return out;
      },
      py::arg("name"), py::arg("config"),
      "Run a CLI subcommand in-process with a config dict (missing keys use defaults).");

  m.def(
      "run_pipeline",
      [](std::uint64_t seed, int epochs, std::size_t n, std::size_t jobs) {
        PipelineConfig cfg;
        cfg.master_seed = seed;
        cfg.train.epochs = epochs;
        cfg.data.n = n;
        PipelineReport report;
        {
          py::gil_scoped_release release;
          report = run_pipeline(cfg, jobs);
        }
        return from_json(to_json(report, GroupSpace(2, 2)));
      },
      py::arg("seed") = 0, py::arg("epochs") = 300, py::arg("n") = 4000, py::arg("jobs") = 1,
      "Synthetic benchmark end to end; returns the report dict.");
}
