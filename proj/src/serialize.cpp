#include "pgdro/serialize.hpp"

#include <cstdio>

#include "pgdro/error.hpp"
#include "pgdro/io.hpp"

namespace pgdro {

namespace {

void append_row(std::string& out, std::span<const double> values) {
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (k > 0) out += ',';
    io::append_double(out, values[k]);
  }
  out += '\n';
}

std::vector<double> parse_row(const io::Line& line, std::size_t expected, std::string_view source) {
  const auto cells = io::split_csv_line(line.text);
  if (cells.size() != expected) {
    fail<IoError>(source, ": line ", line.number, " has ", cells.size(), " values, expected ",
                  expected);
  }
  std::vector<double> values;
  values.reserve(expected);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    values.push_back(io::parse_double(cells[c], line.number, c + 1, source));
  }
  return values;
}

}  // namespace

std::string format_network(const Network& net) {
  net.validate();
  std::string out(kNetworkMagic);
  out += "\nlayers ";
  for (std::size_t k = 0; k < net.layer_sizes.size(); ++k) {
    if (k > 0) out += ',';
    out += std::to_string(net.layer_sizes[k]);
  }
  out += '\n';
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    out += "W" + std::to_string(l) + '\n';
    for (std::size_t r = 0; r < net.weights[l].rows(); ++r) append_row(out, net.weights[l].row(r));
    out += "b" + std::to_string(l) + '\n';
    append_row(out, net.biases[l]);
  }
  return out;
}

Network parse_network(std::string_view text, std::string_view source) {
  const auto lines = io::csv_lines(text);
  std::size_t pos = 0;
  auto next = [&](std::string_view what) -> const io::Line& {
    if (pos >= lines.size()) fail<IoError>(source, ": unexpected end of file, expected ", what);
    return lines[pos++];
  };
  if (next("header").text != kNetworkMagic) {
    fail<IoError>(source, ": not a model file (expected header '", kNetworkMagic, "')");
  }
  const auto& layers_line = next("layer sizes");
  if (!layers_line.text.starts_with("layers ")) {
    fail<IoError>(source, ": line ", layers_line.number, ": expected 'layers ...'");
  }
  std::vector<std::size_t> sizes;
  const auto cells = io::split_csv_line(layers_line.text.substr(7));
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto v = io::parse_integer(cells[c], layers_line.number, c + 1, source);
    if (v <= 0) fail<IoError>(source, ": layer sizes must be positive");
    sizes.push_back(static_cast<std::size_t>(v));
  }
  Network net = Network::zeros(sizes);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const std::string w_tag = "W" + std::to_string(l);
    const auto& w_line = next(w_tag);
    if (w_line.text != w_tag) {
      fail<IoError>(source, ": line ", w_line.number, ": expected '", w_tag, "'");
    }
    for (std::size_t r = 0; r < sizes[l]; ++r) {
      const auto row = parse_row(next("weight row"), sizes[l + 1], source);
      std::ranges::copy(row, net.weights[l].row(r).begin());
    }
    const std::string b_tag = "b" + std::to_string(l);
    const auto& b_line = next(b_tag);
    if (b_line.text != b_tag) {
      fail<IoError>(source, ": line ", b_line.number, ": expected '", b_tag, "'");
    }
    net.biases[l] = parse_row(next("bias row"), sizes[l + 1], source);
  }
  if (pos != lines.size()) {
    fail<IoError>(source, ": trailing content at line ", lines[pos].number);
  }
  return net;
}

void save_network(const Network& net, const std::string& path) {
  io::write_file_atomic(path, format_network(net));
}

Network load_network(const std::string& path) { return parse_network(io::read_file(path), path); }

nlohmann::json to_json(const MetricsReport& report, const GroupSpace& space) {
  nlohmann::json groups = nlohmann::json::array();
  for (int g = 0; g < static_cast<int>(report.per_group_acc.size()); ++g) {
    const auto [y, e] = space.components(g);
    groups.push_back({{"group", g},
                      {"label", y},
                      {"env", e},
                      {"count", report.group_counts[g]},
                      {"accuracy", report.per_group_acc[g]}});
  }
  return {{"avg_acc", report.avg_acc},
          {"worst_group_acc", report.worst_group_acc},
          {"groups", std::move(groups)}};
}

nlohmann::json to_json(const TrainHistory& history, const GroupSpace& space) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& rec : history.epochs) {
    epochs.push_back({{"epoch", rec.epoch},
                      {"objective_value", rec.objective_value},
                      {"group_risk", rec.group_risk},
                      {"val", to_json(rec.val, space)}});
  }
  nlohmann::json out{{"epochs", std::move(epochs)}};
  if (history.selected) {
    out["selected_index"] = *history.selected;
    out["selected_epoch"] = history.epochs[*history.selected].epoch;
  } else {
    out["selected_index"] = nullptr;
    out["selected_epoch"] = nullptr;
  }
  return out;
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"objective", to_string(cfg.objective)},
          {"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"lr", cfg.lr},
          {"l2", cfg.l2},
          {"C", cfg.c},
          {"eta_q", cfg.eta_q},
          {"hidden_sizes", cfg.hidden_sizes},
          {"seed", cfg.seed},
          {"max_mode", to_string(cfg.max_mode)}};
}

nlohmann::json to_json(const PipelineReport& report, const GroupSpace& space) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& run : report.runs) {
    nlohmann::json entry{{"objective", to_string(run.objective)},
                         {"val", to_json(run.val, space)},
                         {"test", to_json(run.test, space)}};
    const auto& h = run.result.history;
    entry["selected_epoch"] =
        h.selected ? nlohmann::json(h.epochs[*h.selected].epoch) : nlohmann::json(nullptr);
    runs.push_back(std::move(entry));
  }
  return {{"labeler", to_json(report.labeler, space)}, {"runs", std::move(runs)}};
}

std::string format_metrics_table(const MetricsReport& report, const GroupSpace& space) {
  std::string out;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-6s %-6s %-4s %8s %9s\n", "group", "label", "env", "count",
                "accuracy");
  out += buf;
  for (int g = 0; g < static_cast<int>(report.per_group_acc.size()); ++g) {
    const auto [y, e] = space.components(g);
    std::snprintf(buf, sizeof(buf), "%-6d %-6d %-4d %8zu %9.4f\n", g, y, e,
                  report.group_counts[g], report.per_group_acc[g]);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "average accuracy     %.4f\nworst-group accuracy %.4f\n",
                report.avg_acc, report.worst_group_acc);
  out += buf;
  return out;
}

std::string format_metrics_csv(const MetricsReport& report, const GroupSpace& space) {
  std::string out = "group,label,env,count,accuracy\n";
  for (int g = 0; g < static_cast<int>(report.per_group_acc.size()); ++g) {
    const auto [y, e] = space.components(g);
    out += std::to_string(g) + ',' + std::to_string(y) + ',' + std::to_string(e) + ',' +
           std::to_string(report.group_counts[g]) + ',';
    io::append_double(out, report.per_group_acc[g]);
    out += '\n';
  }
  return out;
}

}  // namespace pgdro
