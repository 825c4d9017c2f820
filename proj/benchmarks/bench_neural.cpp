#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "gridrl/neural.hpp"

namespace {

using namespace gridrl;

Mlp actor_like(std::size_t in, std::size_t out) {
  std::mt19937_64 rng(1);
  const std::vector<std::size_t> sizes{in, 64, 64, out};
  const std::vector<Activation> acts{Activation::relu, Activation::relu, Activation::tanh};
  return Mlp::create(sizes, acts, rng, 3e-3);
}

void BM_MlpForward(benchmark::State& state) {
  const Mlp net = actor_like(97, 5);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(97, state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(net, x));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MlpForward)->Arg(1)->Arg(64);

void BM_MlpBackward(benchmark::State& state) {
  const Mlp net = actor_like(97, 5);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(97, 64);
  const Eigen::MatrixXd upstream = Eigen::MatrixXd::Random(5, 64);
  ForwardCache cache;
  forward(net, x, &cache);
  for (auto _ : state) {
    benchmark::DoNotOptimize(backward(net, cache, upstream));
  }
}
BENCHMARK(BM_MlpBackward);

}  // namespace
