// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "gridrl/config.hpp"
#include "gridrl/ddpg.hpp"
#include "gridrl/dispatch.hpp"
#include "gridrl/environment.hpp"
#include "gridrl/harness.hpp"
#include "gridrl/network.hpp"
#include "gridrl/power_flow.hpp"
#include "gridrl/scenario.hpp"
#include "oracle.hpp"

namespace gridrl {
namespace {

using Clock = std::chrono::steady_clock;
using testing::data_path;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const std::string& id, const std::string& title, const Outcome& o) {
  fmt::print("{} [{}] {}: {}\n", o.pass ? "PASS" : "FAIL", id, title, o.detail);
  std::fflush(stdout);
  failures += o.pass ? 0 : 1;
}

template <typename Fn>
void run(const std::string& id, const std::string& title, Fn&& fn) {
  try {
    report(id, title, fn());
  } catch (const std::exception& e) {
    report(id, title, Outcome{false, fmt::format("exception: {}", e.what())});
  }
}

// ---------------------------------------------------------------- power flow

Outcome power_flow_correctness() {
  const auto start = Clock::now();
  double worst_residual = 0.0;
  double worst_gs = 0.0;
  double worst_balance = 0.0;
  std::size_t cases = 0;
  bool all_converged = true;

  for (const char* name : {"two_bus", "five_bus", "thirteen_bus", "ieee37"}) {
    const NetworkModel net =
        load_network(data_path(std::string("networks/") + name + ".json"));
    const AdmittanceMatrix y = build_admittance(net);
    const testing::CMatrix yo = testing::oracle_admittance(net.bus_count(), net.lines());

    std::vector<Scenario> scenarios;
    auto uniform = [&](double load, double pv) {
      Scenario sc;
      sc.load_scale.assign(net.load_buses().size(), load);
      for (const InverterSpec& inv : net.inverters()) sc.pv_avail.push_back(pv * inv.dc_rating);
      return sc;
    };
    scenarios.push_back(uniform(1.0, 0.0));
    scenarios.push_back(uniform(0.3, 1.0));
    scenarios.push_back(uniform(0.0, 0.0));
    std::mt19937_64 rng(2024);
    for (Category c : kCategories) {
      scenarios.push_back(sample_training_scenario(net, c, rng));
    }

    for (double slack : {1.0, 1.02}) {
      for (const Scenario& sc : scenarios) {
        // Unity output plus a mixed reactive dispatch.
        std::vector<double> q(net.inverters().size());
        for (std::size_t i = 0; i < q.size(); ++i) {
          q[i] = (i % 2 == 0 ? 0.4 : -0.6) * net.inverters()[i].s_rating;
        }
        for (const auto& inverters :
             {unity_pf_inverters(net, sc), dispatch_inverters(net, sc, q)}) {
          const InjectionVector inj = build_injections(net, sc, inverters);
          SolverOptions opts;
          opts.slack_vm = slack;
          const PowerFlowSolution s = solve(net, y, inj, opts);
          ++cases;
          if (!s.converged) {
            all_converged = false;
            continue;
          }
          const std::vector<double> p(inj.p.data(), inj.p.data() + inj.p.size());
          const std::vector<double> qv(inj.q.data(), inj.q.data() + inj.q.size());
          const auto v = testing::to_phasors(s);
          worst_residual = std::max(worst_residual, testing::max_pq_residual(yo, v, p, qv));

          const auto gs = testing::gauss_seidel(yo, p, qv, {slack, 0.0});
          if (!gs.converged) {
            all_converged = false;
            continue;
          }
          for (std::size_t k = 0; k < gs.v.size(); ++k) {
            worst_gs = std::max(worst_gs, std::abs(std::abs(gs.v[k]) -
                                                   s.vm(static_cast<Eigen::Index>(k))));
          }
          double net_injection = s.slack_p;
          for (Eigen::Index k = 1; k < inj.p.size(); ++k) net_injection += inj.p(k);
          worst_balance = std::max(worst_balance, std::abs(net_injection - s.total_loss_p));
        }
      }
    }
  }
  const double elapsed = seconds_since(start);
  Outcome o;
  o.pass = all_converged && worst_residual <= 1e-8 && worst_gs <= 1e-6 &&
           worst_balance <= 1e-8 && elapsed < 10.0;
  o.detail = fmt::format(
      "{} solves, max residual {:.2e} (<= 1e-8), max |vm - vm_gs| {:.2e} (<= 1e-6), "
      "max balance error {:.2e} (<= 1e-8), {:.2f} s (< 10 s){}",
      cases, worst_residual, worst_gs, worst_balance, elapsed,
      all_converged ? "" : ", some cases did not converge");
  return o;
}

// -------------------------------------------------------------------- reward

Outcome reward_contract() {
  const NetworkModel net = load_network(data_path("networks/ieee37.json"));
  PowerFlowSolution s;
  s.vm = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(net.bus_count()));
  s.va = Eigen::VectorXd::Zero(s.vm.size());
  s.converged = true;
  const std::vector<InverterState> idle(net.inverters().size());
  const double r = reward(net, s, idle).r;

  struct Case {
    double v;
    Zone zone;
  };
  const double inf = std::numeric_limits<double>::infinity();
  const std::vector<Case> boundary{
      {0.95, Zone::normal},
      {1.05, Zone::normal},
      {0.90, Zone::zone1},
      {1.10, Zone::zone1},
      {std::nextafter(0.95, 0.0), Zone::zone1},
      {std::nextafter(1.05, inf), Zone::zone1},
      {std::nextafter(0.90, 0.0), Zone::zone2},
      {std::nextafter(1.10, inf), Zone::zone2},
  };
  std::size_t boundary_ok = 0;
  for (const Case& c : boundary) boundary_ok += classify_zone(c.v) == c.zone ? 1 : 0;

  Outcome o;
  o.pass = net.inverters().size() == 5 && r == 1000.0 && boundary_ok == boundary.size();
  o.detail = fmt::format("M = {}, reward {} (== 1000 exactly), zone boundaries {}/{}",
                         net.inverters().size(), r, boundary_ok, boundary.size());
  return o;
}

// ----------------------------------------------------------------- gradients

// ReLU on/off pattern of every hidden layer, used to skip finite-difference
// probes that straddle a kink.
using Masks = std::vector<Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>>;

void collect_masks(const Mlp& net, const ForwardCache& cache, Masks& out) {
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    if (net.layers()[l].activation == Activation::relu) {
      out.push_back(cache.outputs[l + 1].array() > 0.0);
    }
  }
}

Eigen::MatrixXd stack(const Eigen::MatrixXd& top, const Eigen::MatrixXd& bottom) {
  Eigen::MatrixXd out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

struct Batches {
  Eigen::MatrixXd s;
  Eigen::MatrixXd a;
  Eigen::VectorXd r;
  Eigen::MatrixXd s2;
};

// Mean squared Bellman error, written out from the definition.
double oracle_critic_loss(const Agent& ag, const Batches& b, Masks* masks) {
  ForwardCache c1;
  ForwardCache c2;
  ForwardCache c3;
  const Eigen::MatrixXd mu2 = forward(ag.actor_target, b.s2, &c1);
  const Eigen::MatrixXd q2 = forward(ag.critic_target, stack(b.s2, mu2), &c2);
  const Eigen::MatrixXd q = forward(ag.critic, stack(b.s, b.a), &c3);
  if (masks != nullptr) {
    collect_masks(ag.actor_target, c1, *masks);
    collect_masks(ag.critic_target, c2, *masks);
    collect_masks(ag.critic, c3, *masks);
  }
  double loss = 0.0;
  for (Eigen::Index i = 0; i < q.cols(); ++i) {
    const double y = ag.config.reward_scale * b.r(i) + ag.config.gamma * q2(0, i);
    loss += (q(0, i) - y) * (q(0, i) - y);
  }
  return loss / static_cast<double>(q.cols());
}

// Negated mean Q(s, mu(s)), the quantity the actor descends.
double oracle_actor_objective(const Agent& ag, const Batches& b, Masks* masks) {
  ForwardCache c1;
  ForwardCache c2;
  const Eigen::MatrixXd mu = forward(ag.actor, b.s, &c1);
  const Eigen::MatrixXd q = forward(ag.critic, stack(b.s, mu), &c2);
  if (masks != nullptr) {
    collect_masks(ag.actor, c1, *masks);
    collect_masks(ag.critic, c2, *masks);
  }
  return -q.mean();
}

struct GradStats {
  double worst = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

void fd_check(Mlp& net, const MlpGradients& g, const std::function<double(Masks*)>& value,
              GradStats& stats) {
  const double h = 1e-6;
  Masks base;
  value(&base);
  auto probe = [&](double& p, double analytic) {
    const double saved = p;
    Masks up_m;
    Masks down_m;
    p = saved + h;
    const double up = value(&up_m);
    p = saved - h;
    const double down = value(&down_m);
    p = saved;
    bool smooth = true;
    for (std::size_t i = 0; i < base.size() && smooth; ++i) {
      smooth = (up_m[i] == base[i]).all() && (down_m[i] == base[i]).all();
    }
    if (!smooth) {
      ++stats.skipped;
      return;
    }
    const double fd = (up - down) / (2.0 * h);
    const double rel = std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-3});
    stats.worst = std::max(stats.worst, rel);
    ++stats.checked;
  };
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    DenseLayer& layer = net.mutable_layers()[l];
    for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) {
        probe(layer.weights(i, j), g.weights[l](i, j));
      }
      probe(layer.biases(i), g.biases[l](i));
    }
  }
}

Outcome gradient_integrity() {
  const auto start = Clock::now();
  GradStats critic;
  GradStats actor;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed * 7919 + 1);
    std::uniform_int_distribution<std::size_t> width(4, 16);
    std::uniform_int_distribution<std::size_t> dim(2, 6);
    AgentConfig cfg;
    cfg.hidden = {width(rng), width(rng)};
    cfg.final_init = 0.3;
    cfg.gamma = 0.9;
    cfg.reward_scale = 0.01;
    const std::size_t d = dim(rng);
    const std::size_t m = std::min<std::size_t>(dim(rng), 3);
    Agent agent(d, m, cfg, seed);
    // Targets differ from live networks so both paths are exercised.
    for (DenseLayer& l : agent.critic_target.mutable_layers()) {
      l.weights *= 0.8;
    }

    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Transition> ts(8);
    for (Transition& t : ts) {
      t.state = Eigen::VectorXd::NullaryExpr(static_cast<Eigen::Index>(d), [&] { return n(rng); });
      t.next_state =
          Eigen::VectorXd::NullaryExpr(static_cast<Eigen::Index>(d), [&] { return n(rng); });
      t.action = Eigen::VectorXd::NullaryExpr(static_cast<Eigen::Index>(m), [&] { return u(rng); });
      t.reward = 300.0 * n(rng);
    }
    std::vector<const Transition*> batch;
    for (const Transition& t : ts) batch.push_back(&t);
    Batches b;
    b.s.resize(static_cast<Eigen::Index>(d), 8);
    b.s2.resize(static_cast<Eigen::Index>(d), 8);
    b.a.resize(static_cast<Eigen::Index>(m), 8);
    b.r.resize(8);
    for (Eigen::Index i = 0; i < 8; ++i) {
      const Transition& t = ts[static_cast<std::size_t>(i)];
      b.s.col(i) = agent.normalizer.normalize(t.state);
      b.s2.col(i) = agent.normalizer.normalize(t.next_state);
      b.a.col(i) = t.action;
      b.r(i) = t.reward;
    }

    const auto [loss, gc] = critic_loss_gradients(agent, batch);
    if (std::abs(loss - oracle_critic_loss(agent, b, nullptr)) > 1e-9 * std::max(1.0, loss)) {
      return {false, fmt::format("seed {}: critic loss disagrees with its definition", seed)};
    }
    fd_check(agent.critic, gc, [&](Masks* mk) { return oracle_critic_loss(agent, b, mk); },
             critic);

    const auto [q, ga] = actor_objective_gradients(agent, batch);
    if (std::abs(-q - oracle_actor_objective(agent, b, nullptr)) > 1e-12) {
      return {false, fmt::format("seed {}: actor objective disagrees with its definition", seed)};
    }
    fd_check(agent.actor, ga, [&](Masks* mk) { return oracle_actor_objective(agent, b, mk); },
             actor);
  }
  const double elapsed = seconds_since(start);
  Outcome o;
  o.pass = critic.worst <= 1e-4 && actor.worst <= 1e-4 && elapsed < 30.0 &&
           critic.checked > 0 && actor.checked > 0;
  o.detail = fmt::format(
      "20 seeds, critic max rel err {:.2e} over {} params, actor {:.2e} over {} params "
      "(<= 1e-4; {} probes skipped at ReLU kinks), {:.2f} s (< 30 s)",
      critic.worst, critic.checked, actor.worst, actor.checked, critic.skipped + actor.skipped,
      elapsed);
  return o;
}

// ------------------------------------------------------------ ddpg mechanics

bool same_mlp(const Mlp& a, const Mlp& b) {
  for (std::size_t l = 0; l < a.layers().size(); ++l) {
    if (a.layers()[l].weights != b.layers()[l].weights ||
        a.layers()[l].biases != b.layers()[l].biases) {
      return false;
    }
  }
  return true;
}

std::string training_fingerprint(const AppConfig& cfg, std::size_t episodes) {
  const auto net = std::make_shared<const NetworkModel>(load_configured_network(cfg));
  Environment env(net, EnvironmentOptions{cfg.solver, cfg.reward});
  TrainingConfig tc = cfg.training;
  tc.episodes = episodes;
  Agent agent(env.state_dim(), env.action_dim(), cfg.agent, tc.seed);
  const TrainingLog log =
      train(agent, env, ScenarioSampler(cfg.scenario_ranges, cfg.category_weights), tc);
  std::ostringstream out;
  for (const EpisodeRecord& r : log.episodes) out << to_json_line(r) << '\n';
  agent.write(out);
  return out.str();
}

Outcome ddpg_mechanics(const AppConfig& cfg) {
  std::vector<std::string> notes;
  bool ok = true;

  // Soft update against an elementwise reference.
  {
    Agent a(6, 3, AgentConfig{}, 11);
    std::mt19937_64 rng(12);
    std::normal_distribution<double> n(0.0, 1.0);
    for (Mlp* m : {&a.actor, &a.critic}) {
      for (DenseLayer& l : m->mutable_layers()) {
        l.weights = l.weights.unaryExpr([&](double) { return n(rng); });
        l.biases = l.biases.unaryExpr([&](double) { return n(rng); });
      }
    }
    bool exact = true;
    for (double tau : {1.0, 0.5, 0.3, 1e-3}) {
      a.config.tau = tau;
      const Mlp at = a.actor_target;
      const Mlp ct = a.critic_target;
      soft_update(a);
      for (std::size_t l = 0; l < at.layers().size(); ++l) {
        for (Eigen::Index k = 0; k < at.layers()[l].weights.size(); ++k) {
          const double ref = tau * a.actor.layers()[l].weights(k) +
                             (1.0 - tau) * at.layers()[l].weights(k);
          exact = exact && a.actor_target.layers()[l].weights(k) == ref;
        }
      }
      for (std::size_t l = 0; l < ct.layers().size(); ++l) {
        for (Eigen::Index k = 0; k < ct.layers()[l].biases.size(); ++k) {
          const double ref = tau * a.critic.layers()[l].biases(k) +
                             (1.0 - tau) * ct.layers()[l].biases(k);
          exact = exact && a.critic_target.layers()[l].biases(k) == ref;
        }
      }
    }
    ok = ok && exact;
    notes.push_back(fmt::format("soft update {}", exact ? "exact" : "MISMATCH"));
  }

  // FIFO buffer, every capacity up to 9.
  {
    bool fifo = true;
    for (std::size_t cap = 1; cap <= 9; ++cap) {
      ReplayBuffer buf(cap);
      for (std::size_t k = 1; k <= 4 * cap; ++k) {
        buf.push(Transition{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1),
                            static_cast<double>(k), Eigen::VectorXd::Zero(1)});
        const std::size_t size = std::min(k, cap);
        fifo = fifo && buf.size() == size;
        for (std::size_t i = 0; i < size; ++i) {
          fifo = fifo && buf.at(i).reward == static_cast<double>(k - size + 1 + i);
        }
      }
    }
    ok = ok && fifo;
    notes.push_back(fmt::format("buffer FIFO {}", fifo ? "exact" : "MISMATCH"));
  }

  // tau = 0: targets and critic targets ignore live-network changes.
  {
    Agent a(5, 2, AgentConfig{}, 13);
    a.config.tau = 0.0;
    std::mt19937_64 rng(14);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<Transition> ts(16);
    for (Transition& t : ts) {
      t.state = Eigen::VectorXd::NullaryExpr(5, [&] { return n(rng); });
      t.next_state = Eigen::VectorXd::NullaryExpr(5, [&] { return n(rng); });
      t.action = Eigen::VectorXd::NullaryExpr(2, [&] { return std::tanh(n(rng)); });
      t.reward = n(rng);
    }
    std::vector<const Transition*> batch;
    for (const Transition& t : ts) batch.push_back(&t);
    const Mlp at = a.actor_target;
    const Mlp ct = a.critic_target;
    const Eigen::VectorXd y0 = critic_targets(a, batch);
    bool invariant = true;
    for (int k = 0; k < 20; ++k) {
      critic_update(a, batch);
      actor_update(a, batch);
      soft_update(a);
      invariant = invariant && critic_targets(a, batch) == y0;
    }
    invariant = invariant && same_mlp(at, a.actor_target) && same_mlp(ct, a.critic_target) &&
                !same_mlp(at, a.actor);
    ok = ok && invariant;
    notes.push_back(fmt::format("tau=0 targets {}", invariant ? "invariant" : "CHANGED"));
  }

  // sigma = 0: OU follows x' = x + theta (mu - x) dt with no randomness.
  {
    const OuConfig oc{0.15, 0.0, 0.2, 0.7};
    OuNoise noise(4, oc);
    Eigen::VectorXd x(4);
    x << 1.0, -1.0, 0.2, 3.0;
    noise.set_state(x);
    std::mt19937_64 rng(15);
    bool exact = true;
    for (int k = 0; k < 100; ++k) {
      for (Eigen::Index i = 0; i < 4; ++i) x(i) = x(i) + oc.theta * (oc.mu - x(i)) * oc.dt;
      exact = exact && noise.step(rng) == x;
    }
    ok = ok && exact;
    notes.push_back(fmt::format("sigma=0 OU {}", exact ? "exact" : "MISMATCH"));
  }

  // Two fixed-seed runs of 10 episodes.
  {
    const auto start = Clock::now();
    const std::string a = training_fingerprint(cfg, 10);
    const std::string b = training_fingerprint(cfg, 10);
    const bool same = a == b;
    ok = ok && same;
    notes.push_back(fmt::format("10-episode training {} ({} bytes, {:.1f} s)",
                                same ? "bit-identical" : "DIFFERS", a.size(),
                                seconds_since(start)));
  }

  std::string detail;
  for (std::size_t i = 0; i < notes.size(); ++i) detail += (i ? ", " : "") + notes[i];
  return {ok, detail};
}

// ------------------------------------------------------ desk-scale experiment

struct TrainedRun {
  std::uint64_t seed = 0;
  TrainingLog log;
  std::unique_ptr<Agent> agent;
  double seconds = 0.0;
};

TrainedRun train_seed(const AppConfig& cfg, std::uint64_t seed, std::size_t episodes) {
  const auto start = Clock::now();
  const auto net = std::make_shared<const NetworkModel>(load_configured_network(cfg));
  Environment env(net, EnvironmentOptions{cfg.solver, cfg.reward});
  TrainingConfig tc = cfg.training;
  tc.episodes = episodes;
  tc.seed = seed;
  TrainedRun run;
  run.seed = seed;
  run.agent = std::make_unique<Agent>(env.state_dim(), env.action_dim(), cfg.agent, seed);
  run.log = train(*run.agent, env, ScenarioSampler(cfg.scenario_ranges, cfg.category_weights),
                  tc);
  run.seconds = seconds_since(start);
  return run;
}

double mean_reward(const TrainingLog& log, std::size_t from, std::size_t to) {
  double sum = 0.0;
  for (std::size_t i = from; i < to; ++i) sum += log.episodes[i].mean_reward;
  return sum / static_cast<double>(to - from);
}

Outcome desk_experiment(const AppConfig& cfg, const TrainedRun& run, const ProfileSet& profiles) {
  const NetworkModel net = load_configured_network(cfg);
  EvaluationOptions eval = cfg.evaluation;
  const auto start = Clock::now();
  std::vector<CaseResult> cases{
      evaluate_case(ControlMode::baseline, net, profiles, eval),
      evaluate_case(ControlMode::voltvar, net, profiles, eval),
      evaluate_case(ControlMode::ddpg, net, profiles, eval, run.agent.get())};
  fmt::print("{}", format_table(cases));

  auto violations = [](const CaseMetrics& m) {
    return m.undervoltage_count + m.overvoltage_count;
  };
  const CaseMetrics& base = cases[0].metrics;
  const CaseMetrics& vv = cases[1].metrics;
  const CaseMetrics& dd = cases[2].metrics;
  const bool converged =
      base.nonconverged_hours == 0 && vv.nonconverged_hours == 0 && dd.nonconverged_hours == 0;
  const bool a = violations(base) > 0;
  const bool b = violations(vv) == 0 && violations(dd) == 0 && converged;
  const bool c = dd.curtailment_kwh <= 0.6 * vv.curtailment_kwh;
  const double dd_extra = dd.losses_kwh - base.losses_kwh;
  const double vv_extra = vv.losses_kwh - base.losses_kwh;
  const bool d = dd_extra <= vv_extra;

  Outcome o;
  o.pass = a && b && c && d && net.inverters().size() == 3 &&
           run.log.episodes.size() <= 500;
  o.detail = fmt::format(
      "{} buses, {} SIs, trained {} episodes in {:.0f} s, {} h from hour {}: "
      "(a) baseline violations {} (> 0) {}; "
      "(b) voltvar {} / ddpg {} violations, non-converged hours {} (== 0) {}; "
      "(c) curtailment ddpg {:.1f} kWh vs voltvar {:.1f} kWh, ratio {:.3f} (<= 0.6) {}; "
      "(d) extra losses ddpg {:.1f} kWh vs voltvar {:.1f} kWh {}; eval {:.1f} s",
      net.bus_count(), net.inverters().size(), run.log.episodes.size(), run.seconds,
      eval.hours, eval.start_hour, violations(base), a ? "ok" : "FAIL", violations(vv),
      violations(dd), base.nonconverged_hours + vv.nonconverged_hours + dd.nonconverged_hours,
      b ? "ok" : "HARD FAIL", dd.curtailment_kwh, vv.curtailment_kwh,
      vv.curtailment_kwh > 0 ? dd.curtailment_kwh / vv.curtailment_kwh : 0.0, c ? "ok" : "FAIL",
      dd_extra, vv_extra, d ? "ok" : "FAIL", seconds_since(start));
  return o;
}

Outcome training_curve(const std::vector<TrainedRun>& runs, double max_reward) {
  const double bar = 0.1 * max_reward;
  std::size_t passed = 0;
  std::string per_seed;
  for (const TrainedRun& r : runs) {
    const std::size_t n = r.log.episodes.size();
    const double first = mean_reward(r.log, 0, 50);
    const double last = mean_reward(r.log, n - 50, n);
    const bool ok = last - first >= bar;
    passed += ok ? 1 : 0;
    per_seed += fmt::format("{}seed {}: {:.1f} -> {:.1f} ({:+.1f})", per_seed.empty() ? "" : "; ",
                            r.seed, first, last, last - first);
  }
  Outcome o;
  o.pass = passed >= 4;
  o.detail = fmt::format("last-50 minus first-50 mean episode reward >= {:.0f} on {}/{} seeds "
                         "(need >= 4): {}",
                         bar, passed, runs.size(), per_seed);
  return o;
}

Outcome reward_level(const std::vector<TrainedRun>& runs, double max_reward) {
  const double bar = 0.8 * max_reward;
  const std::size_t window = 10;
  std::size_t reached = 0;
  std::string per_seed;
  for (const TrainedRun& r : runs) {
    double best = -std::numeric_limits<double>::infinity();
    const std::size_t n = std::min<std::size_t>(r.log.episodes.size(), 200);
    for (std::size_t i = 0; i + window <= n; ++i) {
      best = std::max(best, mean_reward(r.log, i, i + window));
    }
    reached += best >= bar ? 1 : 0;
    per_seed += fmt::format("{}seed {}: {:.1f}", per_seed.empty() ? "" : ", ", r.seed, best);
  }
  Outcome o;
  o.pass = reached >= 4;
  o.detail = fmt::format("best {}-episode mean reward within 200 episodes >= {:.0f} on {}/{} "
                         "seeds (need >= 4): {}",
                         window, bar, reached, runs.size(), per_seed);
  return o;
}

// ---------------------------------------------------------------- droop

// Independent piecewise-linear lookup through the curve's corner points.
double oracle_droop(const DroopCurve& c, double s, double v) {
  const double xs[4] = {c.v1, c.v2, c.v3, c.v4};
  const double ys[4] = {c.q_max * s, 0.0, 0.0, -c.q_max * s};
  if (v <= xs[0]) return ys[0];
  if (v >= xs[3]) return ys[3];
  for (int k = 0; k < 3; ++k) {
    if (v <= xs[k + 1]) {
      return ys[k] + (ys[k + 1] - ys[k]) * (v - xs[k]) / (xs[k + 1] - xs[k]);
    }
  }
  return ys[3];
}

Outcome droop_benchmark(const AppConfig& cfg, const ProfileSet& profiles) {
  const NetworkModel net = load_configured_network(cfg);
  const AdmittanceMatrix y = build_admittance(net);
  const EvaluationOptions& eval = cfg.evaluation;
  std::size_t converged = 0;
  std::size_t max_iters = 0;
  double worst = 0.0;
  for (std::size_t h = eval.start_hour; h < eval.start_hour + eval.hours; ++h) {
    const Scenario sc = scenario_at(net, profiles, h);
    const DroopEquilibrium eq = solve_droop_equilibrium(net, y, sc, cfg.solver, cfg.droop);
    max_iters = std::max(max_iters, eq.iterations);
    if (!eq.converged || !eq.flow.converged || eq.iterations > 100) {
      continue;
    }
    ++converged;
    for (std::size_t i = 0; i < net.inverters().size(); ++i) {
      const InverterSpec& spec = net.inverters()[i];
      const double v = eq.flow.vm(static_cast<Eigen::Index>(spec.bus));
      worst = std::max(worst, std::abs(oracle_droop(net.droop_curves()[i], spec.s_rating, v) -
                                       eq.inverters[i].q_cmd));
    }
  }
  Outcome o;
  o.pass = converged == eval.hours && max_iters <= 100 && worst <= 1e-6;
  o.detail = fmt::format(
      "converged {}/{} hours (100%), max iterations {} (<= 100), max |droop(v) - Q| {:.2e} "
      "(<= 1e-6)",
      converged, eval.hours, max_iters, worst);
  return o;
}

}  // namespace
}  // namespace gridrl

int main() {
  using namespace gridrl;
  const auto start = Clock::now();
  const AppConfig cfg = load_config(data_path("configs/desk_13bus.json"));
  const ProfileSet profiles = load_profiles(cfg.profiles);

  run("1", "power-flow correctness", power_flow_correctness);
  run("2", "reward contract", reward_contract);
  run("3", "gradient integrity", gradient_integrity);
  run("4", "DDPG mechanics", [&] { return ddpg_mechanics(cfg); });

  // Five training runs of 200 episodes in parallel; seed 1 also serves the
  // desk experiment.
  std::vector<TrainedRun> runs;
  try {
    std::vector<std::future<TrainedRun>> jobs;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      jobs.push_back(std::async(std::launch::async, [&cfg, seed] {
        return train_seed(cfg, seed, 200);
      }));
    }
    for (auto& j : jobs) runs.push_back(j.get());
  } catch (const std::exception& e) {
    fmt::print("training failed: {}\n", e.what());
  }
  const double max_reward =
      static_cast<double>(load_configured_network(cfg).inverters().size()) * cfg.reward.c;
  if (runs.size() == 5) {
    run("5", "desk-scale experiment", [&] { return desk_experiment(cfg, runs[0], profiles); });
    run("6", "training curve", [&] { return training_curve(runs, max_reward); });
    run("6b", "reward level", [&] { return reward_level(runs, max_reward); });
  } else {
    report("5", "desk-scale experiment", {false, "training did not complete"});
    report("6", "training curve", {false, "training did not complete"});
    report("6b", "reward level", {false, "training did not complete"});
  }
  run("7", "droop benchmark", [&] { return droop_benchmark(cfg, profiles); });

  fmt::print("{} criteria failed, {:.0f} s total\n", failures, seconds_since(start));
  return failures == 0 ? 0 : 1;
}
