#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gridrl/environment.hpp"
#include "gridrl/neural.hpp"
#include "gridrl/scenario.hpp"

namespace gridrl {

struct Transition {
  Eigen::VectorXd state;
  Eigen::VectorXd action;
  double reward = 0.0;
  Eigen::VectorXd next_state;
};

// Fixed-capacity FIFO ring; a full buffer overwrites its oldest entry.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition transition);
  std::size_t size() const noexcept { return size_; }
  std::size_t capacity() const noexcept { return capacity_; }
  // 0 is the oldest stored transition.
  const Transition& at(std::size_t i) const;
  // Uniform draw with replacement.
  std::vector<const Transition*> sample(std::size_t n, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::size_t size_ = 0;
  std::size_t next_ = 0;
  std::vector<Transition> storage_;
};

struct OuConfig {
  double theta = 0.15;
  double sigma = 0.2;
  double mu = 0.0;
  double dt = 1.0;
};

// Ornstein-Uhlenbeck process, one independent component per action.
class OuNoise {
 public:
  OuNoise(std::size_t dim, OuConfig config = {});

  void reset();
  // x <- x + theta (mu - x) dt + sigma sqrt(dt) xi, xi ~ N(0, 1).
  const Eigen::VectorXd& step(std::mt19937_64& rng);

  const Eigen::VectorXd& state() const noexcept { return x_; }
  void set_state(const Eigen::VectorXd& x) { x_ = x; }
  const OuConfig& config() const noexcept { return config_; }

 private:
  OuConfig config_;
  Eigen::VectorXd x_;
};

struct AgentConfig {
  std::vector<std::size_t> hidden{64, 64};
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  double gamma = 0.99;
  double tau = 0.001;
  std::size_t buffer_capacity = 100000;
  std::size_t batch_size = 64;
  OuConfig noise;
  // Multiplies rewards inside the critic target only; logged rewards are raw.
  double reward_scale = 1.0;
  // Half-width of the uniform init of both output layers.
  double final_init = 3e-3;

  // Throws ContractError for out-of-range values.
  void validate() const;
};

// Live and target actor/critic with their optimizers and the shared input
// normalizer. The critic sees [normalized state; action].
struct Agent {
  Agent() = default;
  Agent(std::size_t state_dim, std::size_t action_dim, AgentConfig config,
        std::uint64_t seed);

  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  AgentConfig config;
  Mlp actor;
  Mlp critic;
  Mlp actor_target;
  Mlp critic_target;
  Adam actor_opt;
  Adam critic_opt;
  Normalizer normalizer;

  void save(const std::filesystem::path& path) const;
  static Agent load(const std::filesystem::path& path);
  void write(std::ostream& out) const;
  static Agent read(std::istream& in);
};

// Deterministic policy output for one raw state.
Eigen::VectorXd policy_action(const Agent& agent, const Eigen::VectorXd& state);

// mu(s), plus one OU sample when exploring, clamped to [-1, 1].
Eigen::VectorXd act(const Agent& agent, const Eigen::VectorXd& state, bool explore,
                    OuNoise& noise, std::mt19937_64& rng);

using Batch = std::span<const Transition* const>;

// y = scale * r + gamma * Q'(s', mu'(s')) using target networks only.
Eigen::VectorXd critic_targets(const Agent& agent, Batch batch);

// Mean squared Bellman error of the live critic and its parameter gradient.
std::pair<double, MlpGradients> critic_loss_gradients(const Agent& agent, Batch batch);

// Mean Q(s, mu(s)) under the live critic and the gradient of its negation
// with respect to the actor parameters (a descent direction for Adam).
std::pair<double, MlpGradients> actor_objective_gradients(const Agent& agent, Batch batch);

// One Adam step each; both return the value before the update and throw
// NumericalError on a non-finite loss or gradient.
double critic_update(Agent& agent, Batch batch);
double actor_update(Agent& agent, Batch batch);

// theta' <- tau theta + (1 - tau) theta' for both target networks.
void soft_update(Agent& agent);

struct TerminationConfig {
  std::size_t min_iters_before_check = 200;
  std::size_t window = 5;
  double epsilon = 5.0;
  std::size_t max_iters = 1000;
};

enum class TerminationReason { none, converged, max_iterations };

const char* to_string(TerminationReason reason);

class TerminationTracker {
 public:
  explicit TerminationTracker(TerminationConfig config = {});

  // Records the reward of one iteration and reports whether the episode ends.
  bool record(double reward);
  void reset();

  std::size_t iteration() const noexcept { return iteration_; }
  TerminationReason reason() const noexcept { return reason_; }

 private:
  TerminationConfig config_;
  std::size_t iteration_ = 0;
  std::size_t calm_streak_ = 0;
  double last_reward_ = 0.0;
  TerminationReason reason_ = TerminationReason::none;
};

struct TrainingConfig {
  std::size_t episodes = 1500;
  TerminationConfig termination;
  std::uint64_t seed = 0;
  // Episodes whose non-converged steps exceed this fraction (checked after
  // 20 iterations) are aborted.
  double max_nonconverged_fraction = 0.5;
  std::size_t checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;
};

struct EpisodeRecord {
  std::size_t episode = 0;
  std::string category;
  std::size_t iterations = 0;
  double mean_reward = 0.0;
  double final_reward = 0.0;
  std::string termination;
  std::size_t nonconverged = 0;
};

std::string to_json_line(const EpisodeRecord& record);

struct TrainingLog {
  std::vector<EpisodeRecord> episodes;
  std::size_t total_iterations = 0;
};

// Episode loop: reset on a sampled scenario, then act with exploration,
// step, store, update critic, actor and targets until the tracker fires.
TrainingLog train(Agent& agent, Environment& env, const ScenarioSampler& sampler,
                  const TrainingConfig& config,
                  const std::function<void(const EpisodeRecord&)>& on_episode = {});

}  // namespace gridrl
