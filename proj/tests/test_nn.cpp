#include <doctest.h>

#include <cmath>
#include <sstream>

#include "et/checkpoint.hpp"
#include "et/data.hpp"
#include "et/error.hpp"
#include "et/nn.hpp"
#include "support.hpp"

using namespace et;

namespace {

Network random_net(std::vector<std::size_t> dims, Activation hidden, Activation out, Rng& rng) {
  auto net = Network::mlp(dims, hidden, out, rng);
  for (auto& l : net.layers())
    for (auto& b : l.bias) b = rng.uniform(-0.5, 0.5);
  return net;
}

}  // namespace

TEST_CASE("network shapes and validation") {
  Rng rng(1);
  const std::vector<std::size_t> dims{4, 5, 3};
  const auto net = Network::mlp(dims, Activation::relu, Activation::softmax, rng);
  CHECK(net.input_dim() == 4);
  CHECK(net.output_dim() == 3);
  CHECK(net.parameter_count() == 4 * 5 + 5 + 5 * 3 + 3);
  CHECK(forward(net, Vector{1, 2, 3, 4}).size() == 3);
  CHECK_THROWS_AS(forward(net, Vector{1, 2}), Error);
  CHECK_THROWS_AS(Network({{2, 3, Activation::softmax}, {3, 1, Activation::linear}}), Error);
  CHECK_THROWS_AS(Network({{2, 3, Activation::relu}, {4, 1, Activation::linear}}), Error);
  CHECK(Network::concat(net.prefix(1), net.suffix(1)) == net);
}

TEST_CASE("glorot init stays within its bound and biases start at zero") {
  Rng rng(2);
  const auto net = Network::glorot({{10, 6, Activation::tanh}}, rng);
  const double bound = std::sqrt(6.0 / 16.0);
  for (double w : net.layers()[0].weights.values()) CHECK(std::fabs(w) <= bound);
  for (double b : net.layers()[0].bias) CHECK(b == 0.0);
}

TEST_CASE("activations: softmax sums to one, sigmoid in (0, 1)") {
  Rng rng(3);
  const std::vector<std::size_t> dims{3, 4};
  const auto sm = random_net(dims, Activation::relu, Activation::softmax, rng);
  const auto out = forward(sm, Vector{100.0, -50.0, 3.0});
  double total = 0.0;
  for (double v : out) total += v;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  const std::vector<std::size_t> d1{3, 1};
  const auto sg = random_net(d1, Activation::relu, Activation::sigmoid, rng);
  for (int i = 0; i < 20; ++i) {
    const double y = forward(sg, Vector{rng.normal(), rng.normal(), rng.normal()})[0];
    CHECK(y > 0.0);
    CHECK(y < 1.0);
  }
}

TEST_CASE("gradients match finite differences for every activation and both losses") {
  Rng rng(4);
  const Activation hidden[] = {Activation::tanh, Activation::sigmoid, Activation::relu, Activation::linear};
  for (Activation h : hidden) {
    CAPTURE(to_string(h));
    std::vector<Vector> xs(4);
    for (auto& x : xs) x = {rng.normal(), rng.normal(), rng.normal()};
    const std::vector<std::size_t> dims{3, 5, 4, 3};
    const auto ce = random_net(dims, h, Activation::softmax, rng);
    CHECK(oracle::check_gradients(ce, xs, {0, 2, 1, 2}, Loss::cross_entropy).max_rel_error <= 1e-4);
    const std::vector<std::size_t> dims2{3, 5, 1};
    const auto bce = random_net(dims2, h, Activation::sigmoid, rng);
    CHECK(oracle::check_gradients(bce, xs, {0, 1, 1, 0}, Loss::binary_cross_entropy).max_rel_error <= 1e-4);
  }
}

TEST_CASE("backward through softmax equals the preactivation shortcut") {
  // dL/dz for L = -log softmax_t is p - e_t; feeding dL/dp = -e_t/p_t through
  // the softmax Jacobian has to reproduce it.
  Rng rng(5);
  const std::vector<std::size_t> dims{3, 4, 3};
  const auto net = random_net(dims, Activation::tanh, Activation::softmax, rng);
  const auto trace = forward_trace(net, Vector{0.3, -1.0, 2.0});
  Vector output_grad(3, 0.0);
  output_grad[1] = -1.0 / trace.output()[1];
  auto ga = Gradients::zeros_like(net), gb = Gradients::zeros_like(net);
  const auto dx_a = backward(net, trace, output_grad, &ga);
  Vector delta = trace.output();
  delta[1] -= 1.0;
  const auto dx_b = backward_from_preactivation(net, trace, delta, &gb);
  CHECK(oracle::rel_error(dx_a, dx_b) <= 1e-12);
  for (std::size_t l = 0; l < 2; ++l)
    CHECK(oracle::rel_error(ga.layers[l].weights.values(), gb.layers[l].weights.values()) <= 1e-12);
}

TEST_CASE("loss errors") {
  Rng rng(6);
  const std::vector<std::size_t> dims{2, 3};
  const auto net = random_net(dims, Activation::relu, Activation::softmax, rng);
  const std::vector<Vector> xs{{1, 2}};
  const std::vector<std::size_t> bad{3};
  CHECK_THROWS_WITH_AS(loss_and_gradients(net, xs, bad, Loss::cross_entropy), doctest::Contains("invalid target"),
                       Error);
  CHECK_THROWS_AS(loss_and_gradients(net, xs, std::vector<std::size_t>{0}, Loss::binary_cross_entropy), Error);
}

TEST_CASE("adam decreases a convex loss monotonically at a small step size") {
  // Logistic regression on separable data is convex; a small Adam step
  // should never increase the full-batch loss.
  Rng rng(7);
  const auto data = gen_blobs(2, 50, 2, 6.0, 3);
  const std::vector<std::size_t> dims{2, 1};
  auto net = Network::mlp(dims, Activation::linear, Activation::sigmoid, rng);
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  auto state = OptimizerState::for_network(net);
  double prev = evaluate_loss(net, data.samples, data.labels, Loss::binary_cross_entropy);
  for (int step = 0; step < 200; ++step) {
    const auto lg = loss_and_gradients(net, data.samples, data.labels, Loss::binary_cross_entropy);
    optimizer_step(net, lg.gradients, cfg, state);
    const double now = evaluate_loss(net, data.samples, data.labels, Loss::binary_cross_entropy);
    REQUIRE(now <= prev + 1e-15);
    prev = now;
  }
  CHECK(state.steps == 200);
}

TEST_CASE("sgd step moves parameters against the gradient") {
  Rng rng(8);
  const std::vector<std::size_t> dims{2, 2};
  auto net = Network::mlp(dims, Activation::linear, Activation::softmax, rng);
  const auto before = net;
  auto grads = Gradients::zeros_like(net);
  grads.layers[0].weights(0, 1) = 2.0;
  grads.layers[0].bias[1] = -1.0;
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::sgd;
  cfg.learning_rate = 0.5;
  auto state = OptimizerState::for_network(net);
  optimizer_step(net, grads, cfg, state);
  CHECK(net.layers()[0].weights(0, 1) == before.layers()[0].weights(0, 1) - 1.0);
  CHECK(net.layers()[0].bias[1] == before.layers()[0].bias[1] + 0.5);
  CHECK(net.layers()[0].weights(1, 1) == before.layers()[0].weights(1, 1));
}

TEST_CASE("training: separable 2-D blobs reach 0.99, zero epochs is identity, seeds are deterministic") {
  const auto data = gen_blobs(2, 100, 2, 8.0, 1);
  Rng rng(9);
  const std::vector<std::size_t> dims{2, 8, 2};
  const auto init = Network::mlp(dims, Activation::relu, Activation::softmax, rng);
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.epochs = 30;
  cfg.seed = 5;
  const auto a = train_supervised(init, data.samples, data.labels, cfg);
  CHECK(accuracy(a, data.samples, data.labels) >= 0.99);
  CHECK(train_supervised(init, data.samples, data.labels, cfg) == a);
  cfg.epochs = 0;
  CHECK(train_supervised(init, data.samples, data.labels, cfg) == init);
}

TEST_CASE("forward_batch matches forward") {
  Rng rng(10);
  const std::vector<std::size_t> dims{3, 6, 2};
  const auto net = random_net(dims, Activation::tanh, Activation::linear, rng);
  std::vector<Vector> xs(33);
  for (auto& x : xs) x = {rng.normal(), rng.normal(), rng.normal()};
  const auto batch = forward_batch(net, xs);
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(batch[i] == forward(net, xs[i]));
}

TEST_CASE("network checkpoint round-trip is value-exact") {
  Rng rng(11);
  const std::vector<std::size_t> dims{5, 7, 3, 4};
  const auto net = random_net(dims, Activation::tanh, Activation::softmax, rng);
  std::stringstream ss;
  write_network(ss, net);
  TokenReader reader(ss);
  CHECK(read_network(reader) == net);
  for (double v : {0.0, -0.0, 1.0 / 3.0, 1e-300, -7.25e17, 5e-324})
    CHECK(parse_exact(format_exact(v)) == v);
}

TEST_CASE("network checkpoint: malformed input is rejected") {
  std::stringstream bad("network 1 layers 1 layer 2 2 relu weights 2 2 0x1p+0 0x1p+0");
  TokenReader reader(bad);
  CHECK_THROWS_AS(read_network(reader), Error);
  std::stringstream wrong_version("network 9 layers 0 end");
  TokenReader r2(wrong_version);
  CHECK_THROWS_AS(read_network(r2), Error);
}
