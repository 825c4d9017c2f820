#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "gridrl/ddpg.hpp"

namespace {

using namespace gridrl;

// One training-step worth of learning: critic, actor and target updates on a
// 64-sample minibatch at the 37-bus state size.
void BM_DdpgUpdate(benchmark::State& state) {
  Agent agent(97, 5, AgentConfig{}, 1);
  ReplayBuffer buffer(1024);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 1024; ++i) {
    buffer.push(Transition{Eigen::VectorXd::Random(97), Eigen::VectorXd::Random(5),
                           1000.0 * Eigen::VectorXd::Random(1)(0), Eigen::VectorXd::Random(97)});
  }
  for (auto _ : state) {
    const auto batch = buffer.sample(64, rng);
    critic_update(agent, batch);
    actor_update(agent, batch);
    soft_update(agent);
  }
}
BENCHMARK(BM_DdpgUpdate);

void BM_ReplaySample(benchmark::State& state) {
  ReplayBuffer buffer(100000);
  for (int i = 0; i < 100000; ++i) {
    buffer.push(Transition{Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(1),
                           static_cast<double>(i), Eigen::VectorXd::Zero(4)});
  }
  std::mt19937_64 rng(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(buffer.sample(64, rng));
  }
}
BENCHMARK(BM_ReplaySample);

}  // namespace
