#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "et/linalg.hpp"
#include "et/random.hpp"

namespace et {

enum class Activation { relu, tanh, sigmoid, softmax, linear };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

struct LayerSpec {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  Activation activation = Activation::linear;

  bool operator==(const LayerSpec&) const = default;
};

struct DenseLayer {
  LayerSpec spec;
  Matrix weights;  // output_dim x input_dim
  Vector bias;     // output_dim

  bool operator==(const DenseLayer&) const = default;
};

/// Feedforward stack of dense layers.
class Network {
 public:
  Network() = default;
  /// Zero-initialised parameters. Validates chaining and softmax placement.
  explicit Network(std::vector<LayerSpec> specs);

  /// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
  static Network glorot(std::vector<LayerSpec> specs, Rng& rng);
  /// Convenience: dims = {in, h1, ..., out}; hidden layers use `hidden`, last uses `output`.
  static Network mlp(std::span<const std::size_t> dims, Activation hidden, Activation output,
                     Rng& rng);

  /// Layers [0, count).
  Network prefix(std::size_t count) const;
  /// Layers [first, end).
  Network suffix(std::size_t first) const;
  /// a followed by b.
  static Network concat(const Network& a, const Network& b);

  std::vector<DenseLayer>& layers() noexcept { return layers_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<LayerSpec> specs() const;
  std::size_t layer_count() const noexcept { return layers_.size(); }
  bool empty() const noexcept { return layers_.empty(); }
  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;

  bool operator==(const Network&) const = default;

 private:
  std::vector<DenseLayer> layers_;
};

void validate_specs(std::span<const LayerSpec> specs);

/// Layer-by-layer evaluation.
Vector forward(const Network& net, std::span<const double> x);

/// Intermediate values of one forward pass. post[i] is the output of layer i.
struct ForwardTrace {
  Vector input;
  std::vector<Vector> pre;
  std::vector<Vector> post;

  const Vector& output() const { return post.back(); }
};

ForwardTrace forward_trace(const Network& net, std::span<const double> x);

struct LayerGradient {
  Matrix weights;
  Vector bias;

  bool operator==(const LayerGradient&) const = default;
};

struct Gradients {
  std::vector<LayerGradient> layers;

  static Gradients zeros_like(const Network& net);
  void scale(double factor);
  void add(const Gradients& other);
  bool operator==(const Gradients&) const = default;
};

/// Backpropagates dL/dz of the last layer's pre-activation. Accumulates
/// parameter gradients into `grads` when non-null; returns dL/dx.
Vector backward_from_preactivation(const Network& net, const ForwardTrace& trace,
                                   Vector last_delta, Gradients* grads);

/// Backpropagates dL/d(output). Handles softmax through its Jacobian.
Vector backward(const Network& net, const ForwardTrace& trace, std::span<const double> output_grad,
                Gradients* grads);

enum class Loss { cross_entropy, binary_cross_entropy };

struct LossResult {
  double loss = 0.0;
  Gradients gradients;
};

/// Mean loss over the batch and its parameter gradients.
/// cross_entropy: softmax output, targets are class indices.
/// binary_cross_entropy: single sigmoid output, targets are 0 or 1.
LossResult loss_and_gradients(const Network& net, std::span<const Vector> inputs,
                              std::span<const std::size_t> targets, Loss loss);

double evaluate_loss(const Network& net, std::span<const Vector> inputs,
                     std::span<const std::size_t> targets, Loss loss);

enum class OptimizerKind { sgd, adam };

std::string_view to_string(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view name);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  bool operator==(const TrainConfig&) const = default;
};

struct OptimizerState {
  Gradients first_moment;
  Gradients second_moment;
  std::size_t steps = 0;

  static OptimizerState for_network(const Network& net);
};

void optimizer_step(Network& net, const Gradients& grads, const TrainConfig& config,
                    OptimizerState& state);

/// Mini-batch training on cross-entropy. Shuffles with config.seed each epoch;
/// the last partial batch is kept.
Network train_supervised(Network net, std::span<const Vector> inputs,
                         std::span<const std::size_t> labels, const TrainConfig& config);

std::size_t argmax(std::span<const double> values);
std::vector<std::size_t> predict(const Network& net, std::span<const Vector> inputs);
double accuracy(const Network& net, std::span<const Vector> inputs,
                std::span<const std::size_t> labels);

/// Forward pass over many inputs, one OpenMP task per sample.
std::vector<Vector> forward_batch(const Network& net, std::span<const Vector> inputs);

}  // namespace et
