// Serial reference vs OpenMP kernels. Argument = sample count.

#include <benchmark/benchmark.h>

#include <vector>

#include "et/features.hpp"
#include "et/kernels.hpp"
#include "et/linalg.hpp"
#include "et/random.hpp"

namespace {

constexpr std::size_t kDim = 34;  // critique size with the default discriminator

std::vector<et::Vector> samples(std::size_t n, std::size_t d) {
  et::Rng rng(1);
  std::vector<et::Vector> xs(n, et::Vector(d));
  for (auto& x : xs)
    for (auto& v : x) v = rng.normal();
  return xs;
}

et::Vector column_mean(const std::vector<et::Vector>& xs) {
  et::Vector mu(xs.front().size(), 0.0);
  for (const auto& x : xs)
    for (std::size_t j = 0; j < mu.size(); ++j) mu[j] += x[j];
  for (auto& v : mu) v /= static_cast<double>(xs.size());
  return mu;
}

template <bool Parallel>
void covariance(benchmark::State& state) {
  const auto xs = samples(static_cast<std::size_t>(state.range(0)), kDim);
  const auto mu = column_mean(xs);
  for (auto _ : state) {
    auto c = Parallel ? et::kernels::parallel::covariance(xs, mu) : et::kernels::serial::covariance(xs, mu);
    benchmark::DoNotOptimize(c);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void mahalanobis(benchmark::State& state) {
  const auto xs = samples(static_cast<std::size_t>(state.range(0)), kDim);
  const auto mu = column_mean(xs);
  const auto precision = et::Matrix::identity(kDim);
  std::vector<double> out(xs.size());
  for (auto _ : state) {
    if (Parallel)
      et::kernels::parallel::mahalanobis(xs, mu, precision, out);
    else
      et::kernels::serial::mahalanobis(xs, mu, precision, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void extraction(benchmark::State& state) {
  et::Rng rng(2);
  const std::vector<std::size_t> dims{64, 64, 64, 64, 10};
  const et::Backbone backbone{et::Network::mlp(dims, et::Activation::relu, et::Activation::softmax, rng), 3, 0.0};
  const auto xs = samples(static_cast<std::size_t>(state.range(0)), 64);
  for (auto _ : state) {
    auto acts = Parallel ? et::extract_activations(backbone, xs, 3) : et::serial::extract_activations(backbone, xs, 3);
    benchmark::DoNotOptimize(acts);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

BENCHMARK(covariance<false>)->Name("covariance/serial")->Arg(1000)->Arg(10000);
BENCHMARK(covariance<true>)->Name("covariance/parallel")->Arg(1000)->Arg(10000);
BENCHMARK(mahalanobis<false>)->Name("mahalanobis/serial")->Arg(1000)->Arg(10000);
BENCHMARK(mahalanobis<true>)->Name("mahalanobis/parallel")->Arg(1000)->Arg(10000);
BENCHMARK(extraction<false>)->Name("extraction/serial")->Arg(1000)->Arg(10000);
BENCHMARK(extraction<true>)->Name("extraction/parallel")->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
