#include "pgdro/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "pgdro/error.hpp"
#include "pgdro/grouping.hpp"
#include "pgdro/io.hpp"
#include "pgdro/rng.hpp"

namespace pgdro {

std::string_view to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::kTrain:
      return "train";
    case SplitTag::kVal:
      return "val";
    case SplitTag::kTest:
      return "test";
  }
  return "train";
}

SplitTag parse_split_tag(std::string_view text) {
  if (text == "train") return SplitTag::kTrain;
  if (text == "val") return SplitTag::kVal;
  if (text == "test") return SplitTag::kTest;
  fail<ValueError>("unknown split tag '", text, "' (expected train, val or test)");
}

void Dataset::validate(std::optional<int> num_classes, std::optional<int> num_envs) const {
  const std::size_t n = y.size();
  if (x.rows() != n) fail<DimensionError>("dataset has ", x.rows(), " feature rows but ", n, " labels");
  if (env && env->size() != n) {
    fail<DimensionError>("dataset has ", env->size(), " env entries for ", n, " rows");
  }
  if (split && split->size() != n) {
    fail<DimensionError>("dataset has ", split->size(), " split tags for ", n, " rows");
  }
  if (!x.all_finite()) fail<ValueError>("dataset features contain non-finite values");
  for (std::size_t i = 0; i < n; ++i) {
    if (y[i] < 0 || (num_classes && y[i] >= *num_classes)) {
      fail<ValueError>("label ", y[i], " at row ", i, " is out of range");
    }
    if (env && ((*env)[i] < 0 || (num_envs && (*env)[i] >= *num_envs))) {
      fail<ValueError>("env ", (*env)[i], " at row ", i, " is out of range");
    }
  }
}

std::vector<int> Dataset::groups(const GroupSpace& space) const {
  if (!env) fail<ValueError>("group indices need environment annotations");
  std::vector<int> g(size());
  for (std::size_t i = 0; i < size(); ++i) g[i] = space.group_index(y[i], (*env)[i]);
  return g;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.x = x.select_rows(indices);
  out.y.reserve(indices.size());
  for (std::size_t i : indices) out.y.push_back(y[i]);
  if (env) {
    out.env.emplace();
    for (std::size_t i : indices) out.env->push_back((*env)[i]);
  }
  if (split) {
    out.split.emplace();
    for (std::size_t i : indices) out.split->push_back((*split)[i]);
  }
  return out;
}

Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.has_env() != b.has_env() || a.split.has_value() != b.split.has_value()) {
    fail<ValueError>("cannot concatenate datasets with different optional columns");
  }
  Dataset out;
  out.x = vstack(a.x, b.x);
  out.y = a.y;
  out.y.insert(out.y.end(), b.y.begin(), b.y.end());
  if (a.env) {
    out.env = *a.env;
    out.env->insert(out.env->end(), b.env->begin(), b.env->end());
  }
  if (a.split) {
    out.split = *a.split;
    out.split->insert(out.split->end(), b.split->begin(), b.split->end());
  }
  return out;
}

namespace {

// Largest-remainder apportionment of `total` by `fractions`; ties go to the
// lower index.
std::array<std::size_t, 3> apportion(std::size_t total, const std::array<double, 3>& fractions) {
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (int s = 0; s < 3; ++s) {
    const double exact = fractions[s] * static_cast<double>(total);
    counts[s] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainders[s] = exact - static_cast<double>(counts[s]);
    assigned += counts[s];
  }
  while (assigned < total) {
    int best = -1;
    for (int s = 0; s < 3; ++s) {
      if (fractions[s] <= 0.0) continue;
      if (best < 0 || remainders[s] > remainders[best]) best = s;
    }
    ++counts[best];
    remainders[best] = -1.0;
    ++assigned;
  }
  return counts;
}

}  // namespace

std::array<std::vector<std::size_t>, 3> split_indices(const Dataset& data,
                                                      SplitFractions fractions,
                                                      std::uint64_t seed) {
  const std::array<double, 3> f{fractions.train, fractions.val, fractions.test};
  double total_fraction = 0.0;
  int active = 0;
  for (double v : f) {
    if (!(v >= 0.0) || !std::isfinite(v)) fail<ValueError>("split fractions must be non-negative");
    total_fraction += v;
    if (v > 0.0) ++active;
  }
  if (std::abs(total_fraction - 1.0) > 1e-9) {
    fail<ValueError>("split fractions sum to ", total_fraction, ", expected 1");
  }

  std::map<std::pair<int, int>, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < data.size(); ++i) {
    strata[{data.y[i], data.env ? (*data.env)[i] : -1}].push_back(i);
  }
  for (const auto& [key, members] : strata) {
    if (members.size() < static_cast<std::size_t>(active)) {
      fail<ValueError>("group (label ", key.first, ", env ", key.second, ") has ",
                       members.size(), " rows, fewer than the ", active, " requested splits");
    }
  }

  const auto targets = apportion(data.size(), f);
  std::array<long long, 3> deficit{};
  std::vector<std::array<std::size_t, 3>> counts;
  std::vector<std::array<double, 3>> remainders;
  for (const auto& [key, members] : strata) {
    std::array<std::size_t, 3> c{};
    std::array<double, 3> r{};
    for (int s = 0; s < 3; ++s) {
      const double exact = f[s] * static_cast<double>(members.size());
      c[s] = static_cast<std::size_t>(std::floor(exact + 1e-9));
      r[s] = exact - static_cast<double>(c[s]);
    }
    counts.push_back(c);
    remainders.push_back(r);
  }
  for (int s = 0; s < 3; ++s) {
    long long placed = 0;
    for (const auto& c : counts) placed += static_cast<long long>(c[s]);
    deficit[s] = static_cast<long long>(targets[s]) - placed;
  }

  std::size_t k = 0;
  for (const auto& [key, members] : strata) {
    auto& c = counts[k];
    auto r = remainders[k];
    std::size_t leftover = members.size() - (c[0] + c[1] + c[2]);
    while (leftover > 0) {
      int best = -1;
      for (int s = 0; s < 3; ++s) {
        if (f[s] <= 0.0 || r[s] < 0.0) continue;
        const bool better = best < 0 || (deficit[s] > 0 && deficit[best] <= 0) ||
                            ((deficit[s] > 0) == (deficit[best] > 0) && r[s] > r[best]);
        if (better) best = s;
      }
      if (best < 0) {
        for (int s = 0; s < 3; ++s) {
          if (f[s] > 0.0) best = s;
        }
      }
      ++c[best];
      --deficit[best];
      r[best] = -1.0;
      --leftover;
    }
    // Every stratum must reach every active split.
    for (int s = 0; s < 3; ++s) {
      if (f[s] <= 0.0 || c[s] > 0) continue;
      const auto donor = static_cast<int>(std::max_element(c.begin(), c.end()) - c.begin());
      --c[donor];
      ++c[s];
    }
    ++k;
  }

  Rng rng(seed);
  std::array<std::vector<std::size_t>, 3> out;
  k = 0;
  for (const auto& [key, members] : strata) {
    std::vector<std::size_t> shuffled = members;
    rng.shuffle(std::span<std::size_t>(shuffled));
    std::size_t pos = 0;
    for (int s = 0; s < 3; ++s) {
      for (std::size_t j = 0; j < counts[k][s]; ++j) out[s].push_back(shuffled[pos++]);
    }
    ++k;
  }
  for (auto& part : out) std::ranges::sort(part);
  return out;
}

DatasetSplits split(const Dataset& data, SplitFractions fractions, std::uint64_t seed) {
  const auto parts = split_indices(data, fractions, seed);
  return {data.subset(parts[0]), data.subset(parts[1]), data.subset(parts[2])};
}

DatasetSplits split_by_tag(const Dataset& data) {
  if (!data.split) fail<ValueError>("dataset has no split column");
  std::array<std::vector<std::size_t>, 3> parts;
  for (std::size_t i = 0; i < data.size(); ++i) {
    parts[static_cast<int>((*data.split)[i])].push_back(i);
  }
  return {data.subset(parts[0]), data.subset(parts[1]), data.subset(parts[2])};
}

LabeledSubset subsample_labeled(const Dataset& data, std::size_t m, std::uint64_t seed) {
  if (!data.has_env()) {
    fail<ValueError>("cannot form a labeled subset without environment annotations");
  }
  if (m > data.size()) {
    fail<ValueError>("labeled subset of size ", m, " requested from ", data.size(), " rows");
  }
  std::vector<std::size_t> pool(data.size());
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  Rng rng(seed);
  // Partial Fisher-Yates: the first m slots become the sample.
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + rng.uniform_index(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(m);
  std::ranges::sort(pool);
  return {std::move(pool)};
}

std::vector<std::size_t> frequency_weighted_indices(const LabeledSubset& subset,
                                                    const Dataset& parent,
                                                    const GroupSpace& space,
                                                    std::size_t count, std::uint64_t seed) {
  if (!parent.has_env()) fail<ValueError>("frequency-weighted sampling needs env annotations");
  if (subset.indices.empty()) fail<ValueError>("frequency-weighted sampling from an empty subset");
  std::vector<std::vector<std::size_t>> by_group(space.num_groups());
  for (std::size_t idx : subset.indices) {
    if (idx >= parent.size()) fail<DimensionError>("subset index ", idx, " out of range");
    by_group[space.group_index(parent.y[idx], (*parent.env)[idx])].push_back(idx);
  }
  std::vector<const std::vector<std::size_t>*> occurring;
  for (const auto& members : by_group) {
    if (!members.empty()) occurring.push_back(&members);
  }
  // Uniform group, then uniform member: P(i) = 1 / (#groups * |group(i)|).
  Rng rng(seed);
  std::vector<std::size_t> draws(count);
  for (auto& d : draws) {
    const auto& members = *occurring[rng.uniform_index(occurring.size())];
    d = members[rng.uniform_index(members.size())];
  }
  return draws;
}

Dataset parse_csv(std::string_view text, const CsvSchema& schema, std::string_view source) {
  const auto lines = io::csv_lines(text);
  if (lines.empty()) fail<IoError>(source, ": empty file, expected a header row");
  const auto header = io::split_csv_line(lines.front().text);

  std::vector<std::size_t> feature_cols;
  std::optional<std::size_t> label_col, env_col, split_col;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto name = header[c];
    if (name == "label") {
      label_col = c;
    } else if (name == "env") {
      env_col = c;
    } else if (name == "split") {
      split_col = c;
    } else {
      feature_cols.push_back(c);
    }
  }
  if (!label_col) fail<IoError>(source, ": missing required column 'label'");
  if (feature_cols.empty()) fail<IoError>(source, ": no feature columns");

  const std::size_t n = lines.size() - 1;
  Dataset data;
  std::vector<double> values;
  values.reserve(n * feature_cols.size());
  data.y.reserve(n);
  if (env_col) data.env.emplace();
  if (split_col) data.split.emplace();
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto& line = lines[r];
    const auto cells = io::split_csv_line(line.text);
    if (cells.size() != header.size()) {
      fail<IoError>(source, ": line ", line.number, " has ", cells.size(), " cells, header has ",
                    header.size());
    }
    for (std::size_t c : feature_cols) {
      values.push_back(io::parse_double(cells[c], line.number, c + 1, source));
    }
    const auto label = io::parse_integer(cells[*label_col], line.number, *label_col + 1, source);
    if (label < 0 || (schema.num_classes && label >= *schema.num_classes)) {
      fail<IoError>(source, ": line ", line.number, ": label ", label, " outside declared ",
                    schema.num_classes.value_or(0), " classes");
    }
    data.y.push_back(static_cast<int>(label));
    if (env_col) {
      const auto e = io::parse_integer(cells[*env_col], line.number, *env_col + 1, source);
      if (e < 0 || (schema.num_envs && e >= *schema.num_envs)) {
        fail<IoError>(source, ": line ", line.number, ": env ", e, " outside declared ",
                      schema.num_envs.value_or(0), " environments");
      }
      data.env->push_back(static_cast<int>(e));
    }
    if (split_col) data.split->push_back(parse_split_tag(cells[*split_col]));
  }
  data.x = Matrix(n, feature_cols.size(), std::move(values));
  return data;
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  return parse_csv(io::read_file(path), schema, path);
}

std::string format_csv(const Dataset& data) {
  data.validate();
  if (data.size() == 0) fail<ValueError>("refusing to write an empty dataset");
  std::string out;
  for (std::size_t c = 0; c < data.dim(); ++c) {
    out += 'f';
    out += std::to_string(c);
    out += ',';
  }
  out += "label";
  if (data.env) out += ",env";
  if (data.split) out += ",split";
  out += '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.x.row(i)) {
      io::append_double(out, v);
      out += ',';
    }
    out += std::to_string(data.y[i]);
    if (data.env) {
      out += ',';
      out += std::to_string((*data.env)[i]);
    }
    if (data.split) {
      out += ',';
      out += to_string((*data.split)[i]);
    }
    out += '\n';
  }
  return out;
}

void save_csv(const Dataset& data, const std::string& path) {
  io::write_file_atomic(path, format_csv(data));
}

}  // namespace pgdro
