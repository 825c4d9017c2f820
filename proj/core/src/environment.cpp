#include "gridrl/environment.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "gridrl/errors.hpp"

namespace gridrl {

const char* to_string(Zone zone) {
  switch (zone) {
    case Zone::normal:
      return "normal";
    case Zone::zone1:
      return "zone1";
    case Zone::zone2:
      return "zone2";
  }
  return "unknown";
}

Zone classify_zone(double vm, const ZoneBounds& bounds) {
  if (vm >= bounds.normal_low && vm <= bounds.normal_high) {
    return Zone::normal;
  }
  if (vm >= bounds.zone1_low && vm <= bounds.zone1_high) {
    return Zone::zone1;
  }
  return Zone::zone2;
}

RewardBreakdown reward(const NetworkModel& network, const PowerFlowSolution& solution,
                       std::span<const InverterState> inverters,
                       const RewardConfig& config) {
  const auto specs = network.inverters();
  if (inverters.size() != specs.size()) {
    throw DimensionError("reward: one inverter state per inverter required");
  }
  RewardBreakdown out;
  if (!solution.converged) {
    out.sentinel = true;
    out.r_v_total = config.sentinel(network.bus_count());
    out.r = out.r_v_total;
    out.per_bus_zone.assign(network.bus_count(), Zone::zone2);
    return out;
  }
  out.per_bus_zone.reserve(network.bus_count());
  for (Eigen::Index k = 0; k < solution.vm.size(); ++k) {
    const Zone z = classify_zone(solution.vm(k), config.zones);
    out.per_bus_zone.push_back(z);
    if (z == Zone::zone1) {
      out.r_v_total += config.zone1_penalty;
    } else if (z == Zone::zone2) {
      out.r_v_total += config.zone2_penalty;
    }
  }
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const double utilization = std::abs(inverters[i].q_cmd) / specs[i].s_rating;
    out.r_q += config.c * (1.0 - utilization);
  }
  out.r = out.r_v_total + out.r_q;
  return out;
}

Eigen::VectorXd assemble_state(const NetworkModel& network, const Scenario& scenario,
                               const Eigen::VectorXd& vm,
                               std::span<const InverterState> inverters) {
  const StateLayout layout(network);
  Eigen::VectorXd s(static_cast<Eigen::Index>(layout.dimension()));
  for (std::size_t k = 0; k < layout.buses; ++k) {
    const double v = vm(static_cast<Eigen::Index>(k));
    s(static_cast<Eigen::Index>(k)) = std::isfinite(v) ? v : 0.0;
  }
  auto at = [&](std::size_t i) -> double& { return s(static_cast<Eigen::Index>(i)); };
  for (std::size_t i = 0; i < layout.inverters; ++i) {
    at(layout.inverter_offset() + 2 * i) = inverters[i].p_out;
    at(layout.inverter_offset() + 2 * i + 1) = inverters[i].q_cmd;
  }
  for (std::size_t l = 0; l < layout.loads; ++l) {
    const LoadSpec& load = network.load_at(l);
    at(layout.load_offset() + 2 * l) = scenario.load_scale[l] * load.p_base;
    at(layout.load_offset() + 2 * l + 1) = scenario.load_scale[l] * load.q_base;
  }
  return s;
}

Environment::Environment(std::shared_ptr<const NetworkModel> network,
                         EnvironmentOptions options)
    : network_(std::move(network)),
      options_(options),
      y_(build_admittance(*network_)),
      layout_(*network_) {}

StepResult Environment::evaluate(std::span<const InverterState> inverters) const {
  StepResult out;
  out.inverters.assign(inverters.begin(), inverters.end());
  try {
    out.solution = solve(*network_, y_, build_injections(*network_, *scenario_, inverters),
                         options_.solver);
  } catch (const NumericalError&) {
    out.solution = PowerFlowSolution{};
    out.solution.vm = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(network_->bus_count()));
    out.solution.va = out.solution.vm;
    out.solution.converged = false;
  }
  out.reward = reward(*network_, out.solution, out.inverters, options_.reward);
  if (out.solution.converged) {
    out.state = assemble_state(*network_, *scenario_, out.solution.vm, out.inverters);
  } else {
    // Keep a diverged iterate from flooding the state with huge magnitudes.
    const Eigen::VectorXd vm = out.solution.vm.unaryExpr(
        [](double v) { return std::isfinite(v) ? std::clamp(v, 0.0, 2.0) : 0.0; });
    out.state = assemble_state(*network_, *scenario_, vm, out.inverters);
  }
  return out;
}

Eigen::VectorXd Environment::reset(const Scenario& scenario) {
  validate_scenario(*network_, scenario);
  scenario_ = scenario;
  baseline_.reset();
  StepResult base = evaluate(unity_pf_inverters(*network_, scenario));
  if (!base.solution.converged) {
    scenario_.reset();
    throw ScenarioRejected(fmt::format(
        "scenario '{}': unity power factor flow did not converge (mismatch {:.3e} after {} "
        "iterations)",
        scenario.tag, base.solution.max_mismatch, base.solution.iterations));
  }
  baseline_ = std::move(base);
  return baseline_->state;
}

StepResult Environment::step(std::span<const double> action) const {
  if (!scenario_) {
    throw ContractError("Environment::step called before reset");
  }
  const auto specs = network_->inverters();
  if (action.size() != specs.size()) {
    throw DimensionError(fmt::format("action has {} components, expected {}",
                                     action.size(), specs.size()));
  }
  std::vector<double> q(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const double a = std::isfinite(action[i]) ? std::clamp(action[i], -1.0, 1.0) : 0.0;
    q[i] = a * specs[i].s_rating;
  }
  return evaluate(dispatch_inverters(*network_, *scenario_, q));
}

StepResult Environment::step(const Eigen::VectorXd& action) const {
  return step(std::span<const double>(action.data(), static_cast<std::size_t>(action.size())));
}

const StepResult& Environment::baseline() const {
  if (!baseline_) {
    throw ContractError("Environment::baseline called before reset");
  }
  return *baseline_;
}

const Scenario& Environment::scenario() const {
  if (!scenario_) {
    throw ContractError("Environment::scenario called before reset");
  }
  return *scenario_;
}

}  // namespace gridrl
