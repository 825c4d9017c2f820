// gridrl: power flow, DDPG training and three-case evaluation from the
// command line. Every subcommand reads one JSON config; `--set key=value`
// overrides individual entries.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "gridrl/config.hpp"
#include "gridrl/ddpg.hpp"
#include "gridrl/dispatch.hpp"
#include "gridrl/environment.hpp"
#include "gridrl/errors.hpp"
#include "gridrl/harness.hpp"
#include "gridrl/scenario.hpp"

namespace fs = std::filesystem;
using namespace gridrl;

namespace {

struct CommonArgs {
  std::string config;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config, "JSON config file")->required()->check(
      CLI::ExistingFile);
  cmd->add_option("--set", args.overrides, "Override a config entry, e.g. agent.gamma=0.9");
}

ProfileSet require_profiles(const AppConfig& cfg) {
  if (cfg.profiles.empty()) {
    throw SchemaError("config: 'profiles' path is required for this command");
  }
  return load_profiles(cfg.profiles);
}

int run_powerflow(const CommonArgs& args, std::optional<std::size_t> hour,
                  std::optional<std::string> category, std::uint64_t seed,
                  const std::string& mode_name, const std::string& checkpoint) {
  const AppConfig cfg = load_config(args.config, args.overrides);
  const NetworkModel net = load_configured_network(cfg);
  const AdmittanceMatrix y = build_admittance(net);

  Scenario sc;
  if (hour) {
    sc = scenario_at(net, require_profiles(cfg), *hour);
  } else if (category) {
    std::mt19937_64 rng(seed);
    sc = sample_training_scenario(net, parse_category(*category), rng, cfg.scenario_ranges);
  } else {
    sc.tag = "nominal";
    sc.load_scale.assign(net.load_buses().size(), 1.0);
    sc.pv_avail.assign(net.inverters().size(), 0.0);
  }

  const ControlMode mode = parse_control_mode(mode_name);
  PowerFlowSolution flow;
  std::vector<InverterState> inverters;
  if (mode == ControlMode::voltvar) {
    DroopEquilibrium eq = solve_droop_equilibrium(net, y, sc, cfg.solver, cfg.droop);
    fmt::print("droop equilibrium: {} after {} iterations (residual {:.3e})\n",
               eq.converged ? "converged" : "NOT converged", eq.iterations, eq.residual);
    flow = std::move(eq.flow);
    inverters = std::move(eq.inverters);
  } else if (mode == ControlMode::baseline) {
    inverters = unity_pf_inverters(net, sc);
    flow = solve(net, y, build_injections(net, sc, inverters), cfg.solver);
  } else {
    if (checkpoint.empty()) {
      throw ContractError("ddpg mode needs --checkpoint");
    }
    const Agent agent = Agent::load(checkpoint);
    const std::vector<InverterState> unity = unity_pf_inverters(net, sc);
    const PowerFlowSolution measured =
        solve(net, y, build_injections(net, sc, unity), cfg.solver);
    if (!measured.converged) {
      fmt::print("unity power factor flow did not converge\n");
      return 2;
    }
    const Eigen::VectorXd action =
        policy_action(agent, assemble_state(net, sc, measured.vm, unity));
    std::vector<double> q(net.inverters().size());
    for (std::size_t i = 0; i < q.size(); ++i) {
      q[i] = action(static_cast<Eigen::Index>(i)) * net.inverters()[i].s_rating;
    }
    inverters = dispatch_inverters(net, sc, q);
    flow = solve(net, y, build_injections(net, sc, inverters), cfg.solver);
  }

  fmt::print("network {} ({} buses), scenario {}\n", net.name(), net.bus_count(), sc.tag);
  fmt::print("converged: {} in {} iterations, max mismatch {:.3e} p.u.\n",
             flow.converged ? "yes" : "no", flow.iterations, flow.max_mismatch);
  if (!flow.converged) {
    return 2;
  }
  fmt::print("{:>5} {:>10} {:>12} {:>8}\n", "bus", "vm (p.u.)", "va (deg)", "zone");
  for (std::size_t k = 0; k < net.bus_count(); ++k) {
    const double vm = flow.vm(static_cast<Eigen::Index>(k));
    fmt::print("{:>5} {:>10.5f} {:>12.5f} {:>8}\n", k, vm,
               flow.va(static_cast<Eigen::Index>(k)) * 180.0 / 3.14159265358979323846,
               to_string(classify_zone(vm, cfg.reward.zones)));
  }
  for (std::size_t i = 0; i < inverters.size(); ++i) {
    fmt::print("SI {} @ bus {}: p_avail {:.4f} p_out {:.4f} q {:+.4f} curtailed {:.4f}\n", i,
               net.inverters()[i].bus, inverters[i].p_avail, inverters[i].p_out,
               inverters[i].q_cmd, inverters[i].curtailed);
  }
  fmt::print("slack P {:.6f} Q {:.6f}, losses {:.6f} p.u. ({:.3f} kW)\n", flow.slack_p,
             flow.slack_q, flow.total_loss_p, pu_to_kw(flow.total_loss_p, net.mva_base()));
  return 0;
}

int run_train(const CommonArgs& args, std::uint64_t seed, std::optional<std::size_t> episodes,
              const std::string& out_override) {
  AppConfig cfg = load_config(args.config, args.overrides);
  if (episodes) {
    cfg.training.episodes = *episodes;
  }
  cfg.training.seed = seed;
  const fs::path out = out_override.empty() ? cfg.output_dir : fs::path(out_override);
  fs::create_directories(out);
  if (cfg.training.checkpoint_dir.empty()) {
    cfg.training.checkpoint_dir = out / "checkpoints";
  }

  auto net = std::make_shared<const NetworkModel>(load_configured_network(cfg));
  Environment env(net, EnvironmentOptions{cfg.solver, cfg.reward});
  Agent agent(env.state_dim(), env.action_dim(), cfg.agent, seed);
  const ScenarioSampler sampler(cfg.scenario_ranges, cfg.category_weights);

  std::ofstream log_file(out / "training_log.jsonl");
  fmt::print("training on {} (state {}, actions {}) for {} episodes, seed {}\n", net->name(),
             env.state_dim(), env.action_dim(), cfg.training.episodes, seed);
  const TrainingLog log =
      train(agent, env, sampler, cfg.training, [&](const EpisodeRecord& rec) {
        log_file << to_json_line(rec) << '\n';
        log_file.flush();
        if ((rec.episode + 1) % 10 == 0) {
          fmt::print("episode {:>5} {:<12} iters {:>4} mean reward {:>9.2f} ({})\n",
                     rec.episode + 1, rec.category, rec.iterations, rec.mean_reward,
                     rec.termination);
        }
      });
  const fs::path final_ckpt = out / "agent_final.ckpt";
  agent.save(final_ckpt);
  fmt::print("{} iterations total; checkpoint written to {}\n", log.total_iterations,
             final_ckpt.string());
  return 0;
}

int finish_evaluation(const std::vector<CaseResult>& cases, const fs::path& out,
                      bool allow_nonconverged) {
  const std::string table = format_table(cases);
  std::cout << table;
  fs::create_directories(out);
  std::ofstream(out / "comparison.txt") << table;
  std::ofstream records(out / "hourly_records.csv");
  write_records(records, cases);
  fmt::print("records written to {}\n", (out / "hourly_records.csv").string());
  std::size_t bad = 0;
  for (const CaseResult& c : cases) {
    bad += c.metrics.nonconverged_hours;
  }
  if (bad > 0) {
    fmt::print(stderr, "{} non-converged evaluation hours\n", bad);
    return allow_nonconverged ? 0 : 3;
  }
  return 0;
}

int run_evaluate(const CommonArgs& args, const std::vector<std::string>& modes,
                 const std::string& checkpoint, bool allow_nonconverged,
                 const std::string& out_override) {
  const AppConfig cfg = load_config(args.config, args.overrides);
  const NetworkModel net = load_configured_network(cfg);
  const ProfileSet profiles = require_profiles(cfg);
  std::optional<Agent> agent;
  std::vector<CaseResult> cases;
  for (const std::string& name : modes) {
    const ControlMode mode = parse_control_mode(name);
    if (mode == ControlMode::ddpg && !agent) {
      if (checkpoint.empty()) {
        throw ContractError("ddpg mode needs --checkpoint");
      }
      agent = Agent::load(checkpoint);
    }
    cases.push_back(
        evaluate_case(mode, net, profiles, cfg.evaluation, agent ? &*agent : nullptr));
  }
  const fs::path out = out_override.empty() ? cfg.output_dir : fs::path(out_override);
  return finish_evaluation(cases, out, allow_nonconverged);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distribution feeder voltage regulation with coordinated smart inverters"};
  app.require_subcommand(1);

  CommonArgs pf_args;
  std::optional<std::size_t> pf_hour;
  std::optional<std::string> pf_category;
  std::uint64_t pf_seed = 0;
  std::string pf_mode = "baseline";
  std::string pf_ckpt;
  auto* pf = app.add_subcommand("powerflow", "Solve one snapshot and print bus voltages");
  add_common(pf, pf_args);
  pf->add_option("--hour", pf_hour, "Profile hour to solve");
  pf->add_option("--category", pf_category, "Sample a training scenario of this category");
  pf->add_option("--seed", pf_seed, "Seed for --category sampling");
  pf->add_option("--mode", pf_mode, "baseline, voltvar or ddpg");
  pf->add_option("--checkpoint", pf_ckpt, "Agent checkpoint for ddpg mode");

  CommonArgs tr_args;
  std::uint64_t tr_seed = 0;
  std::optional<std::size_t> tr_episodes;
  std::string tr_out;
  auto* tr = app.add_subcommand("train", "Train a DDPG agent");
  add_common(tr, tr_args);
  tr->add_option("--seed", tr_seed, "Seed for initialization, sampling and exploration")
      ->required();
  tr->add_option("--episodes", tr_episodes, "Override training.episodes");
  tr->add_option("-o,--out", tr_out, "Output directory (default: config output_dir)");

  CommonArgs ev_args;
  std::vector<std::string> ev_modes{"baseline"};
  std::string ev_ckpt;
  bool ev_allow = false;
  std::string ev_out;
  auto* ev = app.add_subcommand("evaluate", "Evaluate control modes over profile hours");
  add_common(ev, ev_args);
  ev->add_option("--mode", ev_modes, "baseline, voltvar and/or ddpg");
  ev->add_option("--checkpoint", ev_ckpt, "Agent checkpoint for ddpg mode");
  ev->add_flag("--allow-nonconverged", ev_allow, "Exit 0 even with non-converged hours");
  ev->add_option("-o,--out", ev_out, "Output directory (default: config output_dir)");

  CommonArgs cmp_args;
  std::string cmp_ckpt;
  bool cmp_allow = false;
  std::string cmp_out;
  auto* cmp = app.add_subcommand("compare", "Baseline vs Volt-Var vs DDPG comparison table");
  add_common(cmp, cmp_args);
  cmp->add_option("--checkpoint", cmp_ckpt, "Agent checkpoint")->required();
  cmp->add_flag("--allow-nonconverged", cmp_allow, "Exit 0 even with non-converged hours");
  cmp->add_option("-o,--out", cmp_out, "Output directory (default: config output_dir)");

  std::uint64_t syn_seed = 0;
  std::string syn_out;
  auto* syn = app.add_subcommand("synth-profiles", "Write a synthetic 8760-hour profile file");
  syn->add_option("--seed", syn_seed, "Generator seed")->required();
  syn->add_option("-o,--out", syn_out, "Output CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*pf) {
      return run_powerflow(pf_args, pf_hour, pf_category, pf_seed, pf_mode, pf_ckpt);
    }
    if (*tr) {
      return run_train(tr_args, tr_seed, tr_episodes, tr_out);
    }
    if (*ev) {
      return run_evaluate(ev_args, ev_modes, ev_ckpt, ev_allow, ev_out);
    }
    if (*cmp) {
      return run_evaluate(cmp_args, {"baseline", "voltvar", "ddpg"}, cmp_ckpt, cmp_allow,
                          cmp_out);
    }
    if (*syn) {
      std::ofstream out(syn_out);
      write_profiles(out, synthesize_profiles(syn_seed));
      fmt::print("wrote {} hours to {}\n", kHoursPerYear, syn_out);
      return 0;
    }
  } catch (const gridrl::Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
