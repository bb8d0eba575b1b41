#include "pgdro/grouping.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pgdro/error.hpp"
#include "pgdro/io.hpp"
#include "pgdro/rng.hpp"

namespace pgdro {

GroupSpace::GroupSpace(int num_classes, int num_envs)
    : num_classes_(num_classes), num_envs_(num_envs) {
  if (num_classes < 1 || num_envs < 1) {
    fail<ValueError>("group space needs at least one class and one environment");
  }
}

int GroupSpace::group_index(int y, int e) const {
  if (y < 0 || y >= num_classes_ || e < 0 || e >= num_envs_) {
    fail<ValueError>("(label ", y, ", env ", e, ") outside a ", num_classes_, " x ", num_envs_,
                     " group space");
  }
  return y * num_envs_ + e;
}

std::pair<int, int> GroupSpace::components(int g) const {
  if (g < 0 || g >= num_groups()) {
    fail<ValueError>("group ", g, " outside [0, ", num_groups(), ")");
  }
  return {g / num_envs_, g % num_envs_};
}

namespace {

void check_distribution_rows(const Matrix& m, std::string_view what) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double total = 0.0;
    for (double v : m.row(i)) {
      if (!std::isfinite(v) || v < 0.0) {
        fail<ValueError>(what, " row ", i, " has a negative or non-finite entry");
      }
      total += v;
    }
    if (std::abs(total - 1.0) > kRowSumTolerance) {
      fail<ValueError>(what, " row ", i, " sums to ", total, ", expected 1");
    }
  }
}

}  // namespace

void EnvProbabilities::validate() const { check_distribution_rows(p, "environment probability"); }

void GroupProbabilities::validate() const { check_distribution_rows(q, "group probability"); }

void GroupProbabilities::validate(std::span<const int> labels, const GroupSpace& space) const {
  if (q.cols() != static_cast<std::size_t>(space.num_groups())) {
    fail<DimensionError>("group probabilities have ", q.cols(), " columns, group space has ",
                         space.num_groups(), " groups");
  }
  if (labels.size() != q.rows()) {
    fail<DimensionError>("group probabilities have ", q.rows(), " rows for ", labels.size(),
                         " labels");
  }
  validate();
  for (std::size_t i = 0; i < q.rows(); ++i) {
    for (int g = 0; g < space.num_groups(); ++g) {
      if (space.components(g).first != labels[i] && q(i, g) != 0.0) {
        fail<ValueError>("group probability row ", i, " puts mass on group ", g,
                         " whose class differs from label ", labels[i]);
      }
    }
  }
}

GroupProbabilities env_to_group_probs(const EnvProbabilities& env_probs,
                                      std::span<const int> labels, const GroupSpace& space) {
  const Matrix& p = env_probs.p;
  if (p.cols() != static_cast<std::size_t>(space.num_envs())) {
    fail<DimensionError>("environment probabilities have ", p.cols(), " columns, expected ",
                         space.num_envs());
  }
  if (labels.size() != p.rows()) {
    fail<DimensionError>(labels.size(), " labels for ", p.rows(), " probability rows");
  }
  env_probs.validate();
  GroupProbabilities out{Matrix(p.rows(), static_cast<std::size_t>(space.num_groups()))};
  for (std::size_t i = 0; i < p.rows(); ++i) {
    for (int e = 0; e < space.num_envs(); ++e) {
      out.q(i, space.group_index(labels[i], e)) = p(i, e);
    }
  }
  return out;
}

GroupProbabilities one_hot_groups(std::span<const int> groups, const GroupSpace& space) {
  GroupProbabilities out{Matrix(groups.size(), static_cast<std::size_t>(space.num_groups()))};
  for (std::size_t i = 0; i < groups.size(); ++i) {
    space.components(groups[i]);
    out.q(i, groups[i]) = 1.0;
  }
  return out;
}

std::vector<int> harden(const GroupProbabilities& q) {
  std::vector<int> out(q.q.rows());
  for (std::size_t i = 0; i < q.q.rows(); ++i) {
    const auto row = q.q.row(i);
    // max_element keeps the first maximum.
    out[i] = static_cast<int>(std::ranges::max_element(row) - row.begin());
  }
  return out;
}

EnvProbabilities apply_probability_floor(const EnvProbabilities& env_probs, double floor) {
  if (floor < 0.0) fail<ValueError>("probability floor must be non-negative");
  if (floor == 0.0) return env_probs;
  if (floor * static_cast<double>(env_probs.p.cols()) >= 1.0) {
    fail<ValueError>("probability floor ", floor, " too large for ", env_probs.p.cols(),
                     " environments");
  }
  EnvProbabilities out = env_probs;
  for (std::size_t i = 0; i < out.p.rows(); ++i) {
    auto row = out.p.row(i);
    double total = 0.0;
    for (double& v : row) {
      v = std::max(v, floor);
      total += v;
    }
    for (double& v : row) v /= total;
  }
  return out;
}

void EnvClassifierConfig::validate() const {
  if (epochs < 0) fail<ValueError>("env classifier epochs must be non-negative");
  if (batch_size < 1) fail<ValueError>("env classifier batch size must be positive");
  if (!(lr > 0.0)) fail<ValueError>("env classifier learning rate must be positive");
  if (l2 < 0.0) fail<ValueError>("env classifier l2 must be non-negative");
}

Network train_env_classifier(const LabeledSubset& subset, const Dataset& parent,
                             const GroupSpace& space, const EnvClassifierConfig& cfg) {
  cfg.validate();
  if (!parent.has_env()) fail<ValueError>("environment classifier needs env annotations");
  if (subset.indices.empty()) fail<ValueError>("environment classifier needs a non-empty subset");
  std::vector<int> seen(space.num_envs(), 0);
  for (std::size_t idx : subset.indices) {
    if (idx >= parent.size()) fail<DimensionError>("subset index ", idx, " out of range");
    const int e = (*parent.env)[idx];
    if (e < 0 || e >= space.num_envs()) fail<ValueError>("env ", e, " outside the group space");
    seen[e] = 1;
  }
  for (int e = 0; e < space.num_envs(); ++e) {
    if (!seen[e]) {
      fail<ValueError>("environment ", e, " does not occur in the labeled subset");
    }
  }

  std::vector<std::size_t> sizes{parent.dim()};
  sizes.insert(sizes.end(), cfg.hidden_sizes.begin(), cfg.hidden_sizes.end());
  sizes.push_back(static_cast<std::size_t>(space.num_envs()));
  Network net = init_network(sizes, derive_seed(cfg.seed, 0));

  const std::size_t draws = cfg.draws_per_epoch > 0 ? cfg.draws_per_epoch : subset.size();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto stream = frequency_weighted_indices(
        subset, parent, space, draws, derive_seed(cfg.seed, 1 + static_cast<std::uint64_t>(epoch)));
    for (std::size_t start = 0; start < stream.size(); start += batch) {
      const std::size_t stop = std::min(stream.size(), start + batch);
      const std::span<const std::size_t> rows(stream.data() + start, stop - start);
      const Matrix xb = parent.x.select_rows(rows);
      std::vector<int> eb;
      eb.reserve(rows.size());
      for (std::size_t idx : rows) eb.push_back((*parent.env)[idx]);
      const std::vector<double> w(rows.size(), 1.0 / static_cast<double>(rows.size()));
      net = sgd_step(std::move(net), backward(net, xb, eb, w), cfg.lr, cfg.l2);
    }
  }
  return net;
}

EnvProbabilities predict_env_probs(const Network& net, const Matrix& x) {
  return {softmax_rows(forward(net, x))};
}

EnvProbabilities zero_shot_env_probs(const EmbeddingSet& embeddings) {
  const Matrix& in = embeddings.inputs;
  const Matrix& proto = embeddings.prototypes;
  if (!(embeddings.temperature > 0.0)) {
    fail<ValueError>("temperature must be positive, got ", embeddings.temperature);
  }
  if (in.cols() != proto.cols()) {
    fail<DimensionError>("input embeddings have dimension ", in.cols(), ", prototypes ",
                         proto.cols());
  }
  if (proto.rows() == 0) fail<ValueError>("no prototype embeddings");
  auto norms = [](const Matrix& m, std::string_view what) {
    std::vector<double> out(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
      double sq = 0.0;
      for (double v : m.row(i)) sq += v * v;
      out[i] = std::sqrt(sq);
      if (!(out[i] > 0.0) || !std::isfinite(out[i])) {
        fail<ValueError>(what, " embedding ", i, " has zero or non-finite norm");
      }
    }
    return out;
  };
  const auto in_norm = norms(in, "input");
  const auto proto_norm = norms(proto, "prototype");

  Matrix scaled(in.rows(), proto.rows());
  for (std::size_t i = 0; i < in.rows(); ++i) {
    for (std::size_t e = 0; e < proto.rows(); ++e) {
      double dot = 0.0;
      for (std::size_t k = 0; k < in.cols(); ++k) dot += in(i, k) * proto(e, k);
      scaled(i, e) = dot / (in_norm[i] * proto_norm[e]) / embeddings.temperature;
    }
  }
  return {softmax_rows(scaled)};
}

std::string format_group_probs_csv(const GroupProbabilities& q) {
  std::string out = "index";
  for (std::size_t g = 0; g < q.q.cols(); ++g) out += ",q" + std::to_string(g);
  out += '\n';
  for (std::size_t i = 0; i < q.q.rows(); ++i) {
    out += std::to_string(i);
    for (double v : q.q.row(i)) {
      out += ',';
      io::append_double(out, v);
    }
    out += '\n';
  }
  return out;
}

void save_group_probs(const GroupProbabilities& q, const std::string& path) {
  io::write_file_atomic(path, format_group_probs_csv(q));
}

namespace {

// Shared reader for "<key>,<prefix>0,<prefix>1,..." files whose key column
// enumerates rows 0..N-1 in order.
Matrix parse_keyed_matrix(std::string_view text, std::string_view key_column, char prefix,
                          std::string_view source) {
  const auto lines = io::csv_lines(text);
  if (lines.empty()) fail<IoError>(source, ": empty file, expected a header row");
  const auto header = io::split_csv_line(lines.front().text);
  if (header.size() < 2 || header.front() != key_column) {
    fail<IoError>(source, ": header must start with '", key_column, "' followed by value columns");
  }
  for (std::size_t c = 1; c < header.size(); ++c) {
    const std::string expected = std::string(1, prefix) + std::to_string(c - 1);
    if (header[c] != expected) {
      fail<IoError>(source, ": column ", c + 1, " is '", header[c], "', expected '", expected,
                    "'");
    }
  }
  const std::size_t cols = header.size() - 1;
  std::vector<double> values;
  values.reserve((lines.size() - 1) * cols);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = io::split_csv_line(lines[r].text);
    if (cells.size() != header.size()) {
      fail<IoError>(source, ": line ", lines[r].number, " has ", cells.size(),
                    " cells, header has ", header.size());
    }
    const auto key = io::parse_integer(cells[0], lines[r].number, 1, source);
    if (key != static_cast<long long>(r - 1)) {
      fail<IoError>(source, ": line ", lines[r].number, ": ", key_column, " ", key,
                    " out of sequence, expected ", r - 1);
    }
    for (std::size_t c = 1; c < cells.size(); ++c) {
      values.push_back(io::parse_double(cells[c], lines[r].number, c + 1, source));
    }
  }
  return Matrix(lines.size() - 1, cols, std::move(values));
}

}  // namespace

GroupProbabilities parse_group_probs_csv(std::string_view text, std::string_view source) {
  GroupProbabilities q{parse_keyed_matrix(text, "index", 'q', source)};
  q.validate();
  return q;
}

GroupProbabilities load_group_probs(const std::string& path) {
  return parse_group_probs_csv(io::read_file(path), path);
}

Matrix parse_embeddings_csv(std::string_view text, std::string_view key_column,
                            std::string_view source) {
  return parse_keyed_matrix(text, key_column, 'e', source);
}

Matrix load_embeddings(const std::string& path, std::string_view key_column) {
  return parse_embeddings_csv(io::read_file(path), key_column, path);
}

}  // namespace pgdro
