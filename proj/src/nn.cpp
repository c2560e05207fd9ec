#include "et/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "et/error.hpp"
#include "et/kernels.hpp"

namespace et {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softmax: return "softmax";
    case Activation::linear: return "linear";
  }
  return "linear";
}

Activation parse_activation(std::string_view name) {
  for (auto a : {Activation::relu, Activation::tanh, Activation::sigmoid, Activation::softmax,
                 Activation::linear})
    if (to_string(a) == name) return a;
  throw Error("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw Error("unknown optimizer '" + std::string(name) + "'");
}

void validate_specs(std::span<const LayerSpec> specs) {
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].input_dim == 0 || specs[i].output_dim == 0)
      throw Error("layer " + std::to_string(i) + ": dimensions must be positive");
    if (i > 0 && specs[i].input_dim != specs[i - 1].output_dim)
      throw Error("layer " + std::to_string(i) + ": input dim does not chain");
    if (specs[i].activation == Activation::softmax && i + 1 != specs.size())
      throw Error("softmax is only permitted on the final layer");
  }
}

Network::Network(std::vector<LayerSpec> specs) {
  validate_specs(specs);
  layers_.reserve(specs.size());
  for (const auto& s : specs) {
    layers_.push_back({s, Matrix(s.output_dim, s.input_dim), Vector(s.output_dim, 0.0)});
  }
}

Network Network::glorot(std::vector<LayerSpec> specs, Rng& rng) {
  Network net(std::move(specs));
  for (auto& layer : net.layers_) {
    const double limit = std::sqrt(
        6.0 / static_cast<double>(layer.spec.input_dim + layer.spec.output_dim));
    for (double& w : layer.weights.values()) w = rng.uniform(-limit, limit);
  }
  return net;
}

Network Network::mlp(std::span<const std::size_t> dims, Activation hidden, Activation output,
                     Rng& rng) {
  if (dims.size() < 2) throw Error("mlp: need at least input and output dims");
  std::vector<LayerSpec> specs;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    specs.push_back({dims[i], dims[i + 1], i + 2 == dims.size() ? output : hidden});
  }
  return glorot(std::move(specs), rng);
}

Network Network::prefix(std::size_t count) const {
  if (count > layers_.size()) throw Error("prefix: layer count out of range");
  Network out;
  out.layers_.assign(layers_.begin(), layers_.begin() + static_cast<std::ptrdiff_t>(count));
  return out;
}

Network Network::suffix(std::size_t first) const {
  if (first > layers_.size()) throw Error("suffix: layer index out of range");
  Network out;
  out.layers_.assign(layers_.begin() + static_cast<std::ptrdiff_t>(first), layers_.end());
  return out;
}

Network Network::concat(const Network& a, const Network& b) {
  Network out = a;
  out.layers_.insert(out.layers_.end(), b.layers_.begin(), b.layers_.end());
  validate_specs(out.specs());
  return out;
}

std::vector<LayerSpec> Network::specs() const {
  std::vector<LayerSpec> s;
  s.reserve(layers_.size());
  for (const auto& l : layers_) s.push_back(l.spec);
  return s;
}

std::size_t Network::input_dim() const {
  if (layers_.empty()) throw Error("empty network");
  return layers_.front().spec.input_dim;
}

std::size_t Network::output_dim() const {
  if (layers_.empty()) throw Error("empty network");
  return layers_.back().spec.output_dim;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.values().size() + l.bias.size();
  return n;
}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Vector affine(const DenseLayer& layer, std::span<const double> x) {
  Vector z(layer.bias);
  for (std::size_t o = 0; o < z.size(); ++o) {
    const auto w = layer.weights.row(o);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += w[i] * x[i];
    z[o] += acc;
  }
  return z;
}

Vector activate(Activation a, const Vector& z) {
  Vector out(z.size());
  switch (a) {
    case Activation::relu:
      for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] > 0.0 ? z[i] : 0.0;
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::tanh(z[i]);
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < z.size(); ++i) out[i] = sigmoid(z[i]);
      break;
    case Activation::softmax: {
      const double top = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) sum += out[i] = std::exp(z[i] - top);
      for (double& v : out) v /= sum;
      break;
    }
    case Activation::linear:
      out = z;
      break;
  }
  return out;
}

// dL/dz from dL/da for elementwise activations and softmax.
Vector activation_backward(Activation a, const Vector& z, const Vector& post,
                           std::span<const double> grad) {
  Vector delta(z.size());
  switch (a) {
    case Activation::relu:
      for (std::size_t i = 0; i < z.size(); ++i) delta[i] = z[i] > 0.0 ? grad[i] : 0.0;
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < z.size(); ++i) delta[i] = grad[i] * (1.0 - post[i] * post[i]);
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < z.size(); ++i) delta[i] = grad[i] * post[i] * (1.0 - post[i]);
      break;
    case Activation::softmax: {
      double inner = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) inner += post[i] * grad[i];
      for (std::size_t i = 0; i < z.size(); ++i) delta[i] = post[i] * (grad[i] - inner);
      break;
    }
    case Activation::linear:
      delta.assign(grad.begin(), grad.end());
      break;
  }
  return delta;
}

void check_input(const Network& net, std::span<const double> x) {
  if (net.empty()) throw Error("forward: empty network");
  if (x.size() != net.input_dim())
    throw Error("forward: dimension mismatch (expected " + std::to_string(net.input_dim()) +
                ", got " + std::to_string(x.size()) + ")");
}

}  // namespace

Vector forward(const Network& net, std::span<const double> x) {
  check_input(net, x);
  Vector a(x.begin(), x.end());
  for (const auto& layer : net.layers()) a = activate(layer.spec.activation, affine(layer, a));
  return a;
}

ForwardTrace forward_trace(const Network& net, std::span<const double> x) {
  check_input(net, x);
  ForwardTrace t;
  t.input.assign(x.begin(), x.end());
  t.pre.reserve(net.layer_count());
  t.post.reserve(net.layer_count());
  for (const auto& layer : net.layers()) {
    const Vector& in = t.post.empty() ? t.input : t.post.back();
    t.pre.push_back(affine(layer, in));
    t.post.push_back(activate(layer.spec.activation, t.pre.back()));
  }
  return t;
}

Gradients Gradients::zeros_like(const Network& net) {
  Gradients g;
  g.layers.reserve(net.layer_count());
  for (const auto& l : net.layers())
    g.layers.push_back({Matrix(l.weights.rows(), l.weights.cols()), Vector(l.bias.size(), 0.0)});
  return g;
}

void Gradients::scale(double factor) {
  for (auto& l : layers) {
    for (double& v : l.weights.values()) v *= factor;
    for (double& v : l.bias) v *= factor;
  }
}

void Gradients::add(const Gradients& other) {
  if (other.layers.size() != layers.size()) throw Error("gradients: shape mismatch");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    auto& w = layers[k].weights.values();
    const auto& ow = other.layers[k].weights.values();
    if (w.size() != ow.size() || layers[k].bias.size() != other.layers[k].bias.size())
      throw Error("gradients: shape mismatch");
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += ow[i];
    for (std::size_t i = 0; i < layers[k].bias.size(); ++i)
      layers[k].bias[i] += other.layers[k].bias[i];
  }
}

Vector backward_from_preactivation(const Network& net, const ForwardTrace& trace,
                                   Vector last_delta, Gradients* grads) {
  if (trace.pre.size() != net.layer_count()) throw Error("backward: trace does not match network");
  if (last_delta.size() != net.output_dim()) throw Error("backward: delta dimension mismatch");
  if (grads && grads->layers.size() != net.layer_count())
    throw Error("backward: gradient shape mismatch");
  Vector delta = std::move(last_delta);
  for (std::size_t k = net.layer_count(); k-- > 0;) {
    const auto& layer = net.layers()[k];
    const Vector& in = k == 0 ? trace.input : trace.post[k - 1];
    if (grads) {
      auto& g = grads->layers[k];
      for (std::size_t o = 0; o < delta.size(); ++o) {
        g.bias[o] += delta[o];
        auto row = g.weights.row(o);
        for (std::size_t i = 0; i < in.size(); ++i) row[i] += delta[o] * in[i];
      }
    }
    Vector grad_in(in.size(), 0.0);
    for (std::size_t o = 0; o < delta.size(); ++o) {
      const auto w = layer.weights.row(o);
      for (std::size_t i = 0; i < in.size(); ++i) grad_in[i] += w[i] * delta[o];
    }
    if (k == 0) return grad_in;
    const auto& below = net.layers()[k - 1];
    delta = activation_backward(below.spec.activation, trace.pre[k - 1], trace.post[k - 1],
                                grad_in);
  }
  return {};
}

Vector backward(const Network& net, const ForwardTrace& trace, std::span<const double> output_grad,
                Gradients* grads) {
  if (output_grad.size() != net.output_dim()) throw Error("backward: gradient dimension mismatch");
  const auto& last = net.layers().back();
  return backward_from_preactivation(
      net, trace,
      activation_backward(last.spec.activation, trace.pre.back(), trace.post.back(), output_grad),
      grads);
}

namespace {

void check_loss_setup(const Network& net, std::span<const Vector> inputs,
                      std::span<const std::size_t> targets, Loss loss) {
  if (inputs.empty()) throw Error("loss: empty batch");
  if (inputs.size() != targets.size()) throw Error("loss: inputs and targets differ in length");
  const auto act = net.layers().back().spec.activation;
  if (loss == Loss::cross_entropy) {
    if (act != Activation::softmax) throw Error("cross_entropy requires a softmax output layer");
    for (std::size_t t : targets)
      if (t >= net.output_dim()) throw Error("invalid target: class index out of range");
  } else {
    if (act != Activation::sigmoid || net.output_dim() != 1)
      throw Error("binary_cross_entropy requires a single sigmoid output");
    for (std::size_t t : targets)
      if (t > 1) throw Error("invalid target: binary label must be 0 or 1");
  }
}

// Per-sample loss from the final pre-activation, computed in log space.
double sample_loss(const ForwardTrace& t, std::size_t target, Loss loss) {
  const Vector& z = t.pre.back();
  if (loss == Loss::cross_entropy) {
    const double top = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - top);
    return -(z[target] - top - std::log(sum));
  }
  const double logit = z[0];
  const double y = static_cast<double>(target);
  return std::max(logit, 0.0) - y * logit + std::log1p(std::exp(-std::abs(logit)));
}

Vector sample_delta(const ForwardTrace& t, std::size_t target, Loss loss) {
  Vector delta = t.output();
  if (loss == Loss::cross_entropy) {
    delta[target] -= 1.0;
  } else {
    delta[0] -= static_cast<double>(target);
  }
  return delta;
}

}  // namespace

LossResult loss_and_gradients(const Network& net, std::span<const Vector> inputs,
                              std::span<const std::size_t> targets, Loss loss) {
  check_loss_setup(net, inputs, targets, loss);
  LossResult result{0.0, Gradients::zeros_like(net)};
  for (std::size_t n = 0; n < inputs.size(); ++n) {
    const auto trace = forward_trace(net, inputs[n]);
    result.loss += sample_loss(trace, targets[n], loss);
    backward_from_preactivation(net, trace, sample_delta(trace, targets[n], loss),
                                &result.gradients);
  }
  const double inv = 1.0 / static_cast<double>(inputs.size());
  result.loss *= inv;
  result.gradients.scale(inv);
  return result;
}

double evaluate_loss(const Network& net, std::span<const Vector> inputs,
                     std::span<const std::size_t> targets, Loss loss) {
  check_loss_setup(net, inputs, targets, loss);
  double total = 0.0;
  for (std::size_t n = 0; n < inputs.size(); ++n)
    total += sample_loss(forward_trace(net, inputs[n]), targets[n], loss);
  return total / static_cast<double>(inputs.size());
}

OptimizerState OptimizerState::for_network(const Network& net) {
  return {Gradients::zeros_like(net), Gradients::zeros_like(net), 0};
}

void optimizer_step(Network& net, const Gradients& grads, const TrainConfig& config,
                    OptimizerState& state) {
  if (grads.layers.size() != net.layer_count()) throw Error("optimizer: shape mismatch");
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    if (grads.layers[k].weights.values().size() != net.layers()[k].weights.values().size() ||
        grads.layers[k].bias.size() != net.layers()[k].bias.size())
      throw Error("optimizer: shape mismatch");
  }
  const double lr = config.learning_rate;
  if (config.optimizer == OptimizerKind::sgd) {
    for (std::size_t k = 0; k < net.layer_count(); ++k) {
      auto& w = net.layers()[k].weights.values();
      const auto& gw = grads.layers[k].weights.values();
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * gw[i];
      auto& b = net.layers()[k].bias;
      for (std::size_t i = 0; i < b.size(); ++i) b[i] -= lr * grads.layers[k].bias[i];
    }
    ++state.steps;
    return;
  }

  if (state.first_moment.layers.size() != net.layer_count())
    state = OptimizerState::for_network(net);
  ++state.steps;
  const double b1 = config.beta1;
  const double b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.steps));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.steps));
  auto update = [&](std::span<double> param, std::span<const double> g, std::span<double> m,
                    std::span<double> v) {
    for (std::size_t i = 0; i < param.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      param[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config.epsilon);
    }
  };
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    auto& layer = net.layers()[k];
    update(layer.weights.values(), grads.layers[k].weights.values(),
           state.first_moment.layers[k].weights.values(),
           state.second_moment.layers[k].weights.values());
    update(layer.bias, grads.layers[k].bias, state.first_moment.layers[k].bias,
           state.second_moment.layers[k].bias);
  }
}

Network train_supervised(Network net, std::span<const Vector> inputs,
                         std::span<const std::size_t> labels, const TrainConfig& config) {
  if (inputs.empty()) throw Error("train_supervised: empty dataset");
  if (inputs.size() != labels.size()) throw Error("train_supervised: labels misaligned");
  for (std::size_t l : labels)
    if (l >= net.output_dim()) throw Error("train_supervised: label out of range");
  if (config.epochs == 0) return net;
  if (config.batch_size == 0) throw Error("train_supervised: batch size must be positive");

  const std::size_t batch = std::min(config.batch_size, inputs.size());
  Rng rng(config.seed);
  auto state = OptimizerState::for_network(net);
  std::vector<Vector> xb;
  std::vector<std::size_t> yb;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = rng.permutation(inputs.size());
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      xb.clear();
      yb.clear();
      for (std::size_t i = start; i < end; ++i) {
        xb.push_back(inputs[order[i]]);
        yb.push_back(labels[order[i]]);
      }
      const auto result = loss_and_gradients(net, xb, yb, Loss::cross_entropy);
      optimizer_step(net, result.gradients, config, state);
    }
  }
  return net;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw Error("argmax: empty vector");
  return static_cast<std::size_t>(
      std::distance(values.begin(), std::max_element(values.begin(), values.end())));
}

std::vector<Vector> forward_batch(const Network& net, std::span<const Vector> inputs) {
  for (const auto& x : inputs) check_input(net, x);
  std::vector<Vector> out(inputs.size());
  kernels::parallel::for_each_index(inputs.size(),
                                    [&](std::size_t i) { out[i] = forward(net, inputs[i]); });
  return out;
}

std::vector<std::size_t> predict(const Network& net, std::span<const Vector> inputs) {
  const auto outputs = forward_batch(net, inputs);
  std::vector<std::size_t> labels(outputs.size());
  for (std::size_t i = 0; i < outputs.size(); ++i) labels[i] = argmax(outputs[i]);
  return labels;
}

double accuracy(const Network& net, std::span<const Vector> inputs,
                std::span<const std::size_t> labels) {
  if (inputs.size() != labels.size()) throw Error("accuracy: length mismatch");
  if (inputs.empty()) return 0.0;
  const auto predicted = predict(net, inputs);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace et
