#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "pgdro/matrix.hpp"

namespace pgdro {

// Fully connected classifier. Hidden layers use ReLU; the last layer emits
// raw logits. weights[i] is layer_sizes[i] x layer_sizes[i+1] so that a
// layer computes X * W + b on a row-major batch.
struct Network {
  std::vector<std::size_t> layer_sizes;
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;

  // All parameters zero.
  static Network zeros(std::vector<std::size_t> layer_sizes);

  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t output_dim() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return weights.size(); }
  std::size_t parameter_count() const;

  // Throws DimensionError unless weights/biases match layer_sizes.
  void validate() const;

  friend bool operator==(const Network&, const Network&) = default;
};

// Same shapes as the owning Network.
struct Gradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;

  static Gradients zeros_like(const Network& net);
};

// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
Network init_network(std::vector<std::size_t> layer_sizes, std::uint64_t seed);

// Parameter vectors in a fixed order: for each layer, weights row-major then
// biases.
std::vector<double> flatten(const Network& net);
std::vector<double> flatten(const Gradients& grads);
void assign_flat(Network& net, std::span<const double> params);

// Post-activation of every layer; layers.front() is the input batch and
// layers.back() the logits.
struct Activations {
  std::vector<Matrix> layers;

  const Matrix& logits() const { return layers.back(); }
};

Activations forward_trace(const Network& net, const Matrix& x);

Matrix forward(const Network& net, const Matrix& x);

// Per-sample -log softmax(logits)[label].
std::vector<double> softmax_cross_entropy(const Matrix& logits, std::span<const int> labels);

// Gradient of sum_i w_i * CE(f(x_i), y_i) with respect to every parameter.
Gradients backward(const Network& net, const Activations& trace, std::span<const int> labels,
                   std::span<const double> sample_weights);

Gradients backward(const Network& net, const Matrix& x, std::span<const int> labels,
                   std::span<const double> sample_weights);

// Central differences, one parameter at a time. Test oracle; O(#params)
// loss evaluations.
Gradients finite_difference_gradient(const Network& net,
                                     const std::function<double(const Network&)>& loss,
                                     double step);

// theta <- theta - lr * (grad + l2 * theta). Throws ValueError on a
// non-finite gradient entry.
Network sgd_step(Network net, const Gradients& grads, double lr, double l2);

}  // namespace pgdro
