#include "gridrl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include <fmt/format.h>

#include "gridrl/errors.hpp"

namespace gridrl {

std::string_view to_string(ControlMode mode) {
  switch (mode) {
    case ControlMode::baseline:
      return "baseline";
    case ControlMode::voltvar:
      return "voltvar";
    case ControlMode::ddpg:
      return "ddpg";
  }
  return "unknown";
}

ControlMode parse_control_mode(std::string_view name) {
  for (ControlMode m : {ControlMode::baseline, ControlMode::voltvar, ControlMode::ddpg}) {
    if (to_string(m) == name) {
      return m;
    }
  }
  throw ContractError(fmt::format("unknown control mode '{}'", name));
}

namespace {

double total_p(std::span<const InverterState> inverters) {
  double sum = 0.0;
  for (const InverterState& s : inverters) {
    sum += s.p_out;
  }
  return sum;
}

HourRecord run_hour(ControlMode mode, const NetworkModel& network, const AdmittanceMatrix& y,
                    const ProfileSet& profiles, std::size_t hour,
                    const EvaluationOptions& options, const Agent* agent) {
  const Scenario sc = scenario_at(network, profiles, hour);
  const double to_kwh = network.mva_base() * 1000.0;
  const std::vector<InverterState> unity = unity_pf_inverters(network, sc);

  HourRecord rec;
  rec.hour = hour;
  PowerFlowSolution flow;
  std::vector<InverterState> inverters;
  try {
    switch (mode) {
      case ControlMode::baseline:
        inverters = unity;
        flow = solve(network, y, build_injections(network, sc, inverters), options.solver);
        break;
      case ControlMode::voltvar: {
        DroopEquilibrium eq =
            solve_droop_equilibrium(network, y, sc, options.solver, options.droop);
        rec.droop_iterations = eq.iterations;
        flow = std::move(eq.flow);
        flow.converged = flow.converged && eq.converged;
        inverters = std::move(eq.inverters);
        break;
      }
      case ControlMode::ddpg: {
        // Measure the grid as it stands, then one forward pass of the actor.
        const PowerFlowSolution measured =
            solve(network, y, build_injections(network, sc, unity), options.solver);
        if (!measured.converged) {
          flow = measured;
          inverters = unity;
          break;
        }
        const Eigen::VectorXd state = assemble_state(network, sc, measured.vm, unity);
        const Eigen::VectorXd action = policy_action(*agent, state);
        std::vector<double> q(network.inverters().size());
        for (std::size_t i = 0; i < q.size(); ++i) {
          q[i] = std::clamp(action(static_cast<Eigen::Index>(i)), -1.0, 1.0) *
                 network.inverters()[i].s_rating;
        }
        inverters = dispatch_inverters(network, sc, q);
        flow = solve(network, y, build_injections(network, sc, inverters), options.solver);
        break;
      }
    }
  } catch (const NumericalError&) {
    flow.converged = false;
  }

  rec.converged = flow.converged;
  if (!rec.converged) {
    rec.max_vm = std::numeric_limits<double>::quiet_NaN();
    rec.min_vm = std::numeric_limits<double>::quiet_NaN();
    return rec;
  }
  rec.max_vm = flow.vm.maxCoeff();
  rec.min_vm = flow.vm.minCoeff();
  for (Eigen::Index k = 0; k < flow.vm.size(); ++k) {
    const double v = flow.vm(k);
    if (!is_violation(classify_zone(v, options.zones))) {
      continue;
    }
    if (v < options.zones.normal_low) {
      ++rec.undervoltages;
    } else {
      ++rec.overvoltages;
    }
  }
  rec.pv_kwh = total_p(inverters) * to_kwh;
  rec.curtailment_kwh =
      mode == ControlMode::baseline ? 0.0 : (total_p(unity) - total_p(inverters)) * to_kwh;
  rec.loss_kwh = flow.total_loss_p * to_kwh;
  for (const InverterState& s : inverters) {
    rec.q_total_kvar += s.q_cmd * to_kwh;
  }
  return rec;
}

}  // namespace

CaseResult evaluate_case(ControlMode mode, const NetworkModel& network,
                         const ProfileSet& profiles, const EvaluationOptions& options,
                         const Agent* agent) {
  if (mode == ControlMode::ddpg) {
    if (agent == nullptr) {
      throw ContractError("ddpg evaluation needs a trained agent");
    }
    if (agent->state_dim != StateLayout(network).dimension() ||
        agent->action_dim != network.inverters().size()) {
      throw DimensionError("agent checkpoint does not match the network");
    }
  }
  if (options.start_hour + options.hours > profiles.load.size()) {
    throw ContractError(fmt::format("hours [{}, {}) exceed the {}-hour profile",
                                    options.start_hour, options.start_hour + options.hours,
                                    profiles.load.size()));
  }
  const AdmittanceMatrix y = build_admittance(network);
  CaseResult result;
  result.mode = mode;
  result.hours.resize(options.hours);

  std::size_t workers = options.threads;
  if (workers == 0) {
    workers = std::max(1u, std::thread::hardware_concurrency());
  }
  workers = std::min(workers, std::max<std::size_t>(1, options.hours));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= options.hours) {
        return;
      }
      try {
        result.hours[i] = run_hour(mode, network, y, profiles, options.start_hour + i,
                                   options, agent);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) {
          failure = std::current_exception();
        }
        next = options.hours;
        return;
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back(work);
    }
  }
  if (failure) {
    std::rethrow_exception(failure);
  }

  CaseMetrics& m = result.metrics;
  m.hours = options.hours;
  m.max_vm = -std::numeric_limits<double>::infinity();
  m.min_vm = std::numeric_limits<double>::infinity();
  for (const HourRecord& rec : result.hours) {
    if (!rec.converged) {
      ++m.nonconverged_hours;
      continue;
    }
    m.undervoltage_count += rec.undervoltages;
    m.overvoltage_count += rec.overvoltages;
    m.curtailment_kwh += rec.curtailment_kwh;
    m.losses_kwh += rec.loss_kwh;
    m.max_vm = std::max(m.max_vm, rec.max_vm);
    m.min_vm = std::min(m.min_vm, rec.min_vm);
  }
  return result;
}

std::string format_table(std::span<const CaseResult> cases) {
  std::string out = fmt::format("{:<10} {:>16} {:>16} {:>22} {:>22} {:>8} {:>8} {:>14}\n",
                                "Case", "# Under-voltages", "# Over-voltages",
                                "PV Curtailment (kWh)", "System Losses (kWh)", "Max V",
                                "Min V", "Non-converged");
  for (const CaseResult& c : cases) {
    const CaseMetrics& m = c.metrics;
    out += fmt::format("{:<10} {:>16} {:>16} {:>22.1f} {:>22.1f} {:>8.4f} {:>8.4f} {:>14}\n",
                       to_string(c.mode), m.undervoltage_count, m.overvoltage_count,
                       m.curtailment_kwh, m.losses_kwh, m.max_vm, m.min_vm,
                       m.nonconverged_hours);
  }
  return out;
}

void write_records(std::ostream& out, std::span<const CaseResult> cases) {
  out << "case,hour,converged,undervoltages,overvoltages,max_vm,min_vm,pv_kwh,"
         "curtailment_kwh,loss_kwh,q_total_kvar,droop_iterations\n";
  for (const CaseResult& c : cases) {
    for (const HourRecord& r : c.hours) {
      out << fmt::format("{},{},{},{},{},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{}\n",
                         to_string(c.mode), r.hour, r.converged ? 1 : 0, r.undervoltages,
                         r.overvoltages, r.max_vm, r.min_vm, r.pv_kwh, r.curtailment_kwh,
                         r.loss_kwh, r.q_total_kvar, r.droop_iterations);
    }
  }
}

}  // namespace gridrl
