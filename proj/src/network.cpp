#include "pgdro/network.hpp"

#include <algorithm>
#include <cmath>

#include "pgdro/error.hpp"
#include "pgdro/rng.hpp"

namespace pgdro {

namespace {

void check_layer_sizes(const std::vector<std::size_t>& sizes) {
  if (sizes.size() < 2) fail<ValueError>("network needs at least input and output sizes");
  for (std::size_t s : sizes) {
    if (s == 0) fail<ValueError>("network layer sizes must be positive");
  }
}

void check_input(const Network& net, const Matrix& x) {
  if (x.cols() != net.input_dim()) {
    fail<DimensionError>("network expects ", net.input_dim(), " input features, got ", x.cols());
  }
}

}  // namespace

Network Network::zeros(std::vector<std::size_t> layer_sizes) {
  check_layer_sizes(layer_sizes);
  Network net;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    net.weights.emplace_back(layer_sizes[l], layer_sizes[l + 1]);
    net.biases.emplace_back(layer_sizes[l + 1], 0.0);
  }
  net.layer_sizes = std::move(layer_sizes);
  return net;
}

std::size_t Network::parameter_count() const {
  std::size_t count = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) count += weights[l].size() + biases[l].size();
  return count;
}

void Network::validate() const {
  check_layer_sizes(layer_sizes);
  if (weights.size() + 1 != layer_sizes.size() || biases.size() != weights.size()) {
    fail<DimensionError>("network has ", weights.size(), " weight matrices and ", biases.size(),
                         " bias vectors for ", layer_sizes.size(), " layer sizes");
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != layer_sizes[l] || weights[l].cols() != layer_sizes[l + 1]) {
      fail<DimensionError>("layer ", l, " weights are ", weights[l].rows(), " x ",
                           weights[l].cols(), ", expected ", layer_sizes[l], " x ",
                           layer_sizes[l + 1]);
    }
    if (biases[l].size() != layer_sizes[l + 1]) {
      fail<DimensionError>("layer ", l, " bias has length ", biases[l].size(), ", expected ",
                           layer_sizes[l + 1]);
    }
  }
}

Gradients Gradients::zeros_like(const Network& net) {
  Gradients g;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    g.weights.emplace_back(net.weights[l].rows(), net.weights[l].cols());
    g.biases.emplace_back(net.biases[l].size(), 0.0);
  }
  return g;
}

Network init_network(std::vector<std::size_t> layer_sizes, std::uint64_t seed) {
  Network net = Network::zeros(std::move(layer_sizes));
  Rng rng(seed);
  for (auto& w : net.weights) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (double& v : w.values()) v = limit * (2.0 * rng.uniform() - 1.0);
  }
  return net;
}

std::vector<double> flatten(const Network& net) {
  std::vector<double> out;
  out.reserve(net.parameter_count());
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    out.insert(out.end(), net.weights[l].values().begin(), net.weights[l].values().end());
    out.insert(out.end(), net.biases[l].begin(), net.biases[l].end());
  }
  return out;
}

std::vector<double> flatten(const Gradients& grads) {
  std::vector<double> out;
  for (std::size_t l = 0; l < grads.weights.size(); ++l) {
    out.insert(out.end(), grads.weights[l].values().begin(), grads.weights[l].values().end());
    out.insert(out.end(), grads.biases[l].begin(), grads.biases[l].end());
  }
  return out;
}

void assign_flat(Network& net, std::span<const double> params) {
  if (params.size() != net.parameter_count()) {
    fail<DimensionError>("expected ", net.parameter_count(), " parameters, got ", params.size());
  }
  std::size_t k = 0;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    for (double& v : net.weights[l].values()) v = params[k++];
    for (double& v : net.biases[l]) v = params[k++];
  }
}

Activations forward_trace(const Network& net, const Matrix& x) {
  check_input(net, x);
  Activations trace;
  trace.layers.reserve(net.num_layers() + 1);
  trace.layers.push_back(x);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Matrix z = matmul(trace.layers.back(), net.weights[l]);
    const bool hidden = l + 1 < net.num_layers();
    for (std::size_t i = 0; i < z.rows(); ++i) {
      auto row = z.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) {
        row[j] += net.biases[l][j];
        if (hidden && row[j] < 0.0) row[j] = 0.0;
      }
    }
    trace.layers.push_back(std::move(z));
  }
  return trace;
}

Matrix forward(const Network& net, const Matrix& x) {
  return std::move(forward_trace(net, x).layers.back());
}

std::vector<double> softmax_cross_entropy(const Matrix& logits, std::span<const int> labels) {
  if (labels.size() != logits.rows()) {
    fail<DimensionError>("cross-entropy: ", labels.size(), " labels for ", logits.rows(),
                         " logit rows");
  }
  std::vector<double> losses(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const int label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= logits.cols()) {
      fail<ValueError>("cross-entropy: label ", label, " at row ", i, " outside [0, ",
                       logits.cols(), ")");
    }
    const auto row = logits.row(i);
    const double mx = *std::ranges::max_element(row);
    double total = 0.0;
    for (double v : row) total += std::exp(v - mx);
    losses[i] = std::log(total) - (row[label] - mx);
  }
  return losses;
}

Gradients backward(const Network& net, const Activations& trace, std::span<const int> labels,
                   std::span<const double> sample_weights) {
  const Matrix& logits = trace.logits();
  const std::size_t n = logits.rows();
  if (labels.size() != n || sample_weights.size() != n) {
    fail<DimensionError>("backward: batch has ", n, " rows but ", labels.size(), " labels and ",
                         sample_weights.size(), " sample weights");
  }
  // d(sum_i w_i CE_i) / d logits = w_i * (softmax_i - onehot(y_i))
  Matrix delta = softmax_rows(logits);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = sample_weights[i];
    if (w < 0.0) fail<ValueError>("backward: negative sample weight at row ", i);
    const int label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= logits.cols()) {
      fail<ValueError>("backward: label ", label, " at row ", i, " outside [0, ", logits.cols(),
                       ")");
    }
    auto row = delta.row(i);
    row[label] -= 1.0;
    for (double& v : row) v *= w;
  }

  Gradients grads = Gradients::zeros_like(net);
  for (std::size_t l = net.num_layers(); l-- > 0;) {
    const Matrix& input = trace.layers[l];
    Matrix& gw = grads.weights[l];
    auto& gb = grads.biases[l];
    for (std::size_t i = 0; i < n; ++i) {
      const auto d = delta.row(i);
      const auto a = input.row(i);
      for (std::size_t r = 0; r < a.size(); ++r) {
        if (a[r] == 0.0) continue;
        auto gw_row = gw.row(r);
        for (std::size_t c = 0; c < d.size(); ++c) gw_row[c] += a[r] * d[c];
      }
      for (std::size_t c = 0; c < d.size(); ++c) gb[c] += d[c];
    }
    if (l == 0) break;
    // Propagate through W^T and the ReLU of the layer below.
    Matrix prev(n, input.cols());
    const Matrix& w = net.weights[l];
    for (std::size_t i = 0; i < n; ++i) {
      const auto d = delta.row(i);
      const auto a = input.row(i);
      auto p = prev.row(i);
      for (std::size_t r = 0; r < a.size(); ++r) {
        if (a[r] <= 0.0) continue;
        const auto w_row = w.row(r);
        double acc = 0.0;
        for (std::size_t c = 0; c < d.size(); ++c) acc += w_row[c] * d[c];
        p[r] = acc;
      }
    }
    delta = std::move(prev);
  }
  return grads;
}

Gradients backward(const Network& net, const Matrix& x, std::span<const int> labels,
                   std::span<const double> sample_weights) {
  return backward(net, forward_trace(net, x), labels, sample_weights);
}

Gradients finite_difference_gradient(const Network& net,
                                     const std::function<double(const Network&)>& loss,
                                     double step) {
  if (!(step > 0.0)) fail<ValueError>("finite-difference step must be positive");
  std::vector<double> params = flatten(net);
  std::vector<double> estimate(params.size());
  Network probe = net;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double saved = params[k];
    params[k] = saved + step;
    assign_flat(probe, params);
    const double up = loss(probe);
    params[k] = saved - step;
    assign_flat(probe, params);
    const double down = loss(probe);
    params[k] = saved;
    estimate[k] = (up - down) / (2.0 * step);
  }
  // Reuse the Network layout to reshape the flat estimate.
  Network shaped = net;
  assign_flat(shaped, estimate);
  Gradients grads;
  grads.weights = std::move(shaped.weights);
  grads.biases = std::move(shaped.biases);
  return grads;
}

Network sgd_step(Network net, const Gradients& grads, double lr, double l2) {
  if (lr < 0.0) fail<ValueError>("learning rate must be non-negative, got ", lr);
  if (l2 < 0.0) fail<ValueError>("l2 penalty must be non-negative, got ", l2);
  if (grads.weights.size() != net.weights.size() || grads.biases.size() != net.biases.size()) {
    fail<DimensionError>("gradients do not match network depth");
  }
  auto update = [&](std::span<double> params, std::span<const double> g, std::size_t layer) {
    if (params.size() != g.size()) {
      fail<DimensionError>("gradient shape mismatch at layer ", layer);
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
      if (!std::isfinite(g[k])) {
        fail<ValueError>("non-finite gradient entry at layer ", layer, ", offset ", k);
      }
      params[k] -= lr * (g[k] + l2 * params[k]);
    }
  };
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    update(net.weights[l].values(), grads.weights[l].values(), l);
    update(net.biases[l], grads.biases[l], l);
  }
  return net;
}

}  // namespace pgdro
