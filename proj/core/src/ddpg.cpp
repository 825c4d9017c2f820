#include "gridrl/ddpg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "binary_io.hpp"
#include "gridrl/errors.hpp"

namespace gridrl {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) {
    throw ContractError("replay buffer capacity must be positive");
  }
  storage_.reserve(std::min<std::size_t>(capacity_, 4096));
}

void ReplayBuffer::push(Transition transition) {
  if (storage_.size() < capacity_) {
    storage_.push_back(std::move(transition));
  } else {
    storage_[next_] = std::move(transition);
  }
  next_ = (next_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) {
    throw ContractError(fmt::format("replay index {} out of range ({} stored)", i, size_));
  }
  const std::size_t oldest = size_ < capacity_ ? 0 : next_;
  return storage_[(oldest + i) % capacity_];
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n, std::mt19937_64& rng) const {
  if (size_ == 0) {
    throw ContractError("cannot sample from an empty replay buffer");
  }
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  std::vector<const Transition*> out(n);
  for (auto& t : out) {
    t = &storage_[pick(rng)];
  }
  return out;
}

OuNoise::OuNoise(std::size_t dim, OuConfig config)
    : config_(config), x_(VectorXd::Constant(static_cast<Index>(dim), config.mu)) {}

void OuNoise::reset() { x_.setConstant(config_.mu); }

const VectorXd& OuNoise::step(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double diffusion = config_.sigma * std::sqrt(config_.dt);
  for (Index i = 0; i < x_.size(); ++i) {
    const double xi = config_.sigma == 0.0 ? 0.0 : normal(rng);
    x_(i) += config_.theta * (config_.mu - x_(i)) * config_.dt + diffusion * xi;
  }
  return x_;
}

void AgentConfig::validate() const {
  if (hidden.empty()) {
    throw ContractError("agent needs at least one hidden layer");
  }
  if (!(tau > 0.0 && tau <= 1.0)) {
    throw ContractError(fmt::format("tau {} outside (0, 1]", tau));
  }
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw ContractError(fmt::format("gamma {} outside [0, 1]", gamma));
  }
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) {
    throw ContractError("learning rates must be positive");
  }
  if (batch_size == 0 || buffer_capacity == 0) {
    throw ContractError("batch size and buffer capacity must be positive");
  }
  if (!(reward_scale > 0.0)) {
    throw ContractError("reward_scale must be positive");
  }
}

Agent::Agent(std::size_t state_dim_, std::size_t action_dim_, AgentConfig config_,
             std::uint64_t seed)
    : state_dim(state_dim_), action_dim(action_dim_), config(std::move(config_)) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> actor_sizes{state_dim};
  std::vector<std::size_t> critic_sizes{state_dim + action_dim};
  std::vector<Activation> acts;
  for (std::size_t h : config.hidden) {
    actor_sizes.push_back(h);
    critic_sizes.push_back(h);
    acts.push_back(Activation::relu);
  }
  actor_sizes.push_back(action_dim);
  critic_sizes.push_back(1);
  std::vector<Activation> actor_acts = acts;
  actor_acts.push_back(Activation::tanh);
  std::vector<Activation> critic_acts = acts;
  critic_acts.push_back(Activation::identity);

  actor = Mlp::create(actor_sizes, actor_acts, rng, config.final_init);
  critic = Mlp::create(critic_sizes, critic_acts, rng, config.final_init);
  actor_target = actor;
  critic_target = critic;
  actor_opt = Adam(actor, AdamConfig{config.actor_lr});
  critic_opt = Adam(critic, AdamConfig{config.critic_lr});
  normalizer = Normalizer(state_dim);
}

namespace {

constexpr char kMagic[8] = {'G', 'R', 'I', 'D', 'R', 'L', 'A', 'G'};
constexpr std::uint32_t kCheckpointVersion = 1;

struct BatchMatrices {
  MatrixXd states;       // normalized
  MatrixXd actions;
  VectorXd rewards;
  MatrixXd next_states;  // normalized
};

BatchMatrices gather(const Agent& agent, Batch batch) {
  if (batch.empty()) {
    throw ContractError("minibatch must not be empty");
  }
  const auto d = static_cast<Index>(agent.state_dim);
  const auto m = static_cast<Index>(agent.action_dim);
  const auto n = static_cast<Index>(batch.size());
  MatrixXd s(d, n);
  MatrixXd a(m, n);
  MatrixXd s2(d, n);
  VectorXd r(n);
  for (Index b = 0; b < n; ++b) {
    const Transition& t = *batch[static_cast<std::size_t>(b)];
    if (t.state.size() != d || t.next_state.size() != d || t.action.size() != m) {
      throw DimensionError("transition does not match agent dimensions");
    }
    s.col(b) = t.state;
    a.col(b) = t.action;
    s2.col(b) = t.next_state;
    r(b) = t.reward;
  }
  return {agent.normalizer.normalize(s), std::move(a), std::move(r),
          agent.normalizer.normalize(s2)};
}

MatrixXd stack(const MatrixXd& top, const MatrixXd& bottom) {
  MatrixXd out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

VectorXd targets(const Agent& agent, const BatchMatrices& bm) {
  const MatrixXd next_actions = forward(agent.actor_target, bm.next_states);
  const MatrixXd q_next = forward(agent.critic_target, stack(bm.next_states, next_actions));
  return agent.config.reward_scale * bm.rewards +
         agent.config.gamma * q_next.row(0).transpose();
}

void require_finite(double value, const char* what) {
  if (!std::isfinite(value)) {
    throw NumericalError(fmt::format("{} is not finite", what), 0);
  }
}

void blend(Mlp& target, const Mlp& live, double tau) {
  auto& tl = target.mutable_layers();
  const auto ll = live.layers();
  if (tl.size() != ll.size()) {
    throw DimensionError("soft_update: target and live networks differ in depth");
  }
  for (std::size_t l = 0; l < tl.size(); ++l) {
    if (tl[l].weights.rows() != ll[l].weights.rows() ||
        tl[l].weights.cols() != ll[l].weights.cols()) {
      throw DimensionError("soft_update: target and live layer shapes differ");
    }
    tl[l].weights = tau * ll[l].weights + (1.0 - tau) * tl[l].weights;
    tl[l].biases = tau * ll[l].biases + (1.0 - tau) * tl[l].biases;
  }
}

}  // namespace

void Agent::write(std::ostream& out) const {
  out.write(kMagic, sizeof(kMagic));
  io::put<std::uint32_t>(out, kCheckpointVersion);
  io::put<std::uint64_t>(out, state_dim);
  io::put<std::uint64_t>(out, action_dim);
  io::put<std::uint64_t>(out, config.hidden.size());
  for (std::size_t h : config.hidden) {
    io::put<std::uint64_t>(out, h);
  }
  io::put(out, config.actor_lr);
  io::put(out, config.critic_lr);
  io::put(out, config.gamma);
  io::put(out, config.tau);
  io::put<std::uint64_t>(out, config.buffer_capacity);
  io::put<std::uint64_t>(out, config.batch_size);
  io::put(out, config.noise.theta);
  io::put(out, config.noise.sigma);
  io::put(out, config.noise.mu);
  io::put(out, config.noise.dt);
  io::put(out, config.reward_scale);
  io::put(out, config.final_init);
  write_mlp(out, actor);
  write_mlp(out, critic);
  write_mlp(out, actor_target);
  write_mlp(out, critic_target);
  actor_opt.write(out);
  critic_opt.write(out);
  normalizer.write(out);
}

Agent Agent::read(std::istream& in) {
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(std::begin(magic), std::end(magic), std::begin(kMagic))) {
    throw SchemaError("checkpoint: not an agent checkpoint");
  }
  const auto version = io::get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw SchemaError(fmt::format("checkpoint: unsupported version {}", version));
  }
  Agent a;
  a.state_dim = io::get<std::uint64_t>(in);
  a.action_dim = io::get<std::uint64_t>(in);
  const auto layers = io::get<std::uint64_t>(in);
  if (layers > 64) {
    throw SchemaError("checkpoint: implausible hidden layer count");
  }
  a.config.hidden.clear();
  for (std::uint64_t i = 0; i < layers; ++i) {
    a.config.hidden.push_back(io::get<std::uint64_t>(in));
  }
  a.config.actor_lr = io::get<double>(in);
  a.config.critic_lr = io::get<double>(in);
  a.config.gamma = io::get<double>(in);
  a.config.tau = io::get<double>(in);
  a.config.buffer_capacity = io::get<std::uint64_t>(in);
  a.config.batch_size = io::get<std::uint64_t>(in);
  a.config.noise.theta = io::get<double>(in);
  a.config.noise.sigma = io::get<double>(in);
  a.config.noise.mu = io::get<double>(in);
  a.config.noise.dt = io::get<double>(in);
  a.config.reward_scale = io::get<double>(in);
  a.config.final_init = io::get<double>(in);
  a.actor = read_mlp(in);
  a.critic = read_mlp(in);
  a.actor_target = read_mlp(in);
  a.critic_target = read_mlp(in);
  a.actor_opt = Adam::read(in);
  a.critic_opt = Adam::read(in);
  a.normalizer = Normalizer::read(in);
  if (a.actor.in_dim() != a.state_dim || a.actor.out_dim() != a.action_dim ||
      a.critic.in_dim() != a.state_dim + a.action_dim || a.normalizer.dim() != a.state_dim) {
    throw SchemaError("checkpoint: network shapes disagree with recorded dimensions");
  }
  return a;
}

void Agent::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw SchemaError(fmt::format("cannot write checkpoint {}", path.string()));
  }
  write(out);
}

Agent Agent::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw SchemaError(fmt::format("cannot open checkpoint {}", path.string()));
  }
  return read(in);
}

VectorXd policy_action(const Agent& agent, const VectorXd& state) {
  return forward(agent.actor, agent.normalizer.normalize(state));
}

VectorXd act(const Agent& agent, const VectorXd& state, bool explore, OuNoise& noise,
             std::mt19937_64& rng) {
  VectorXd a = policy_action(agent, state);
  if (explore) {
    a += noise.step(rng);
  }
  return a.cwiseMax(-1.0).cwiseMin(1.0);
}

VectorXd critic_targets(const Agent& agent, Batch batch) {
  return targets(agent, gather(agent, batch));
}

std::pair<double, MlpGradients> critic_loss_gradients(const Agent& agent, Batch batch) {
  const BatchMatrices bm = gather(agent, batch);
  const VectorXd y = targets(agent, bm);
  ForwardCache cache;
  const MatrixXd q = forward(agent.critic, stack(bm.states, bm.actions), &cache);
  const auto n = static_cast<double>(batch.size());
  const MatrixXd err = q - y.transpose();
  const double loss = err.squaredNorm() / n;
  BackwardResult back = backward(agent.critic, cache, (2.0 / n) * err);
  return {loss, std::move(back.params)};
}

std::pair<double, MlpGradients> actor_objective_gradients(const Agent& agent, Batch batch) {
  const BatchMatrices bm = gather(agent, batch);
  ForwardCache actor_cache;
  const MatrixXd actions = forward(agent.actor, bm.states, &actor_cache);
  ForwardCache critic_cache;
  const MatrixXd q = forward(agent.critic, stack(bm.states, actions), &critic_cache);
  const auto n = static_cast<double>(batch.size());
  const double mean_q = q.sum() / n;
  // d(-mean Q)/d(critic input), then keep the action rows.
  const BackwardResult critic_back =
      backward(agent.critic, critic_cache, MatrixXd::Constant(1, q.cols(), -1.0 / n));
  const MatrixXd d_action =
      critic_back.input.bottomRows(static_cast<Index>(agent.action_dim));
  BackwardResult actor_back = backward(agent.actor, actor_cache, d_action);
  return {mean_q, std::move(actor_back.params)};
}

double critic_update(Agent& agent, Batch batch) {
  auto [loss, grads] = critic_loss_gradients(agent, batch);
  require_finite(loss, "critic loss");
  if (!agent.critic_opt.step(agent.critic, grads)) {
    throw NumericalError("critic gradient is not finite", agent.critic_opt.steps());
  }
  return loss;
}

double actor_update(Agent& agent, Batch batch) {
  auto [objective, grads] = actor_objective_gradients(agent, batch);
  require_finite(objective, "actor objective");
  if (!agent.actor_opt.step(agent.actor, grads)) {
    throw NumericalError("actor gradient is not finite", agent.actor_opt.steps());
  }
  return objective;
}

void soft_update(Agent& agent) {
  blend(agent.actor_target, agent.actor, agent.config.tau);
  blend(agent.critic_target, agent.critic, agent.config.tau);
}

const char* to_string(TerminationReason reason) {
  switch (reason) {
    case TerminationReason::none:
      return "none";
    case TerminationReason::converged:
      return "converged";
    case TerminationReason::max_iterations:
      return "max_iterations";
  }
  return "unknown";
}

TerminationTracker::TerminationTracker(TerminationConfig config) : config_(config) {
  if (config_.window == 0 || config_.max_iters == 0) {
    throw ContractError("termination window and max_iters must be positive");
  }
}

void TerminationTracker::reset() {
  iteration_ = 0;
  calm_streak_ = 0;
  last_reward_ = 0.0;
  reason_ = TerminationReason::none;
}

bool TerminationTracker::record(double reward) {
  if (iteration_ > 0 && std::abs(reward - last_reward_) < config_.epsilon) {
    ++calm_streak_;
  } else {
    calm_streak_ = 0;
  }
  last_reward_ = reward;
  ++iteration_;
  if (iteration_ >= config_.min_iters_before_check && calm_streak_ >= config_.window) {
    reason_ = TerminationReason::converged;
    return true;
  }
  if (iteration_ >= config_.max_iters) {
    reason_ = TerminationReason::max_iterations;
    return true;
  }
  return false;
}

std::string to_json_line(const EpisodeRecord& r) {
  return fmt::format(
      R"({{"episode":{},"category":"{}","iterations":{},"mean_reward":{:.17g},)"
      R"("final_reward":{:.17g},"termination":"{}","nonconverged":{}}})",
      r.episode, r.category, r.iterations, r.mean_reward, r.final_reward, r.termination,
      r.nonconverged);
}

TrainingLog train(Agent& agent, Environment& env, const ScenarioSampler& sampler,
                  const TrainingConfig& config,
                  const std::function<void(const EpisodeRecord&)>& on_episode) {
  if (agent.state_dim != env.state_dim() || agent.action_dim != env.action_dim()) {
    throw DimensionError("agent does not match environment dimensions");
  }
  std::mt19937_64 rng(config.seed);
  ReplayBuffer buffer(agent.config.buffer_capacity);
  OuNoise noise(agent.action_dim, agent.config.noise);
  TerminationTracker tracker(config.termination);
  TrainingLog log;

  for (std::size_t ep = 0; ep < config.episodes; ++ep) {
    auto [category, scenario] = sampler.sample(env.network(), rng);
    EpisodeRecord record;
    record.episode = ep;
    record.category = std::string(to_string(category));

    VectorXd state;
    try {
      state = env.reset(scenario);
    } catch (const ScenarioRejected&) {
      record.termination = "rejected";
      log.episodes.push_back(record);
      if (on_episode) {
        on_episode(record);
      }
      continue;
    }
    agent.normalizer.update(state);
    noise.reset();
    tracker.reset();

    double reward_sum = 0.0;
    bool done = false;
    while (!done) {
      const VectorXd action = act(agent, state, true, noise, rng);
      StepResult result = env.step(action);
      agent.normalizer.update(result.state);
      if (!result.solution.converged) {
        ++record.nonconverged;
      }
      buffer.push(Transition{state, action, result.reward.r, result.state});
      if (buffer.size() >= agent.config.batch_size) {
        const auto batch = buffer.sample(agent.config.batch_size, rng);
        critic_update(agent, batch);
        actor_update(agent, batch);
        soft_update(agent);
      }
      reward_sum += result.reward.r;
      record.final_reward = result.reward.r;
      state = std::move(result.state);
      done = tracker.record(record.final_reward);
      ++log.total_iterations;

      const std::size_t it = tracker.iteration();
      if (!done && it >= 20 &&
          static_cast<double>(record.nonconverged) >
              config.max_nonconverged_fraction * static_cast<double>(it)) {
        record.termination = "aborted_nonconverged";
        break;
      }
    }
    record.iterations = tracker.iteration();
    record.mean_reward = reward_sum / static_cast<double>(std::max<std::size_t>(1, record.iterations));
    if (record.termination.empty()) {
      record.termination = to_string(tracker.reason());
    }
    log.episodes.push_back(record);
    if (on_episode) {
      on_episode(record);
    }
    if (config.checkpoint_every > 0 && (ep + 1) % config.checkpoint_every == 0 &&
        !config.checkpoint_dir.empty()) {
      std::filesystem::create_directories(config.checkpoint_dir);
      agent.save(config.checkpoint_dir / fmt::format("agent_ep{:05d}.ckpt", ep + 1));
    }
  }
  return log;
}

}  // namespace gridrl
