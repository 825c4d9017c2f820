#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "gridrl/dispatch.hpp"
#include "gridrl/errors.hpp"
#include "gridrl/inverter.hpp"

namespace gridrl {

InverterState apply_var_priority(const InverterSpec& spec, double p_avail,
                                 double q_cmd) {
  InverterState st;
  st.p_avail = std::max(p_avail, 0.0);
  st.q_cmd = q_cmd;
  if (std::abs(q_cmd) > spec.s_rating) {
    st.q_cmd = std::copysign(spec.s_rating, q_cmd);
    st.q_clamped = true;
  }
  const double headroom =
      std::sqrt(std::max(spec.s_rating * spec.s_rating - st.q_cmd * st.q_cmd, 0.0));
  st.p_out = std::min(st.p_avail, headroom);
  st.curtailed = st.p_avail - st.p_out;
  return st;
}

double droop_q(const DroopCurve& curve, const InverterSpec& spec, double v_local,
               [[maybe_unused]] double p_avail) {
  const double q_limit = curve.q_max * spec.s_rating;
  if (v_local <= curve.v1) {
    return q_limit;
  }
  if (v_local < curve.v2) {
    return q_limit * (curve.v2 - v_local) / (curve.v2 - curve.v1);
  }
  if (v_local <= curve.v3) {
    return 0.0;
  }
  if (v_local < curve.v4) {
    return -q_limit * (v_local - curve.v3) / (curve.v4 - curve.v3);
  }
  return -q_limit;
}

InjectionVector build_injections(const NetworkModel& network,
                                 const Scenario& scenario,
                                 std::span<const InverterState> inverters) {
  if (scenario.load_scale.size() != network.load_buses().size() ||
      inverters.size() != network.inverters().size()) {
    throw DimensionError("build_injections: scenario does not match network");
  }
  InjectionVector inj = InjectionVector::zeros(network.bus_count());
  for (std::size_t l = 0; l < network.load_buses().size(); ++l) {
    const auto bus = static_cast<Eigen::Index>(network.load_buses()[l]);
    const LoadSpec& load = network.load_at(l);
    inj.p(bus) -= scenario.load_scale[l] * load.p_base;
    inj.q(bus) -= scenario.load_scale[l] * load.q_base;
  }
  for (std::size_t i = 0; i < inverters.size(); ++i) {
    const auto bus = static_cast<Eigen::Index>(network.inverters()[i].bus);
    inj.p(bus) += inverters[i].p_out;
    inj.q(bus) += inverters[i].q_cmd;
  }
  return inj;
}

std::vector<InverterState> dispatch_inverters(const NetworkModel& network,
                                              const Scenario& scenario,
                                              std::span<const double> q_cmd) {
  const auto specs = network.inverters();
  if (q_cmd.size() != specs.size() || scenario.pv_avail.size() != specs.size()) {
    throw DimensionError("dispatch_inverters: one command per inverter required");
  }
  std::vector<InverterState> out;
  out.reserve(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    out.push_back(apply_var_priority(specs[i], scenario.pv_avail[i], q_cmd[i]));
  }
  return out;
}

std::vector<InverterState> unity_pf_inverters(const NetworkModel& network,
                                              const Scenario& scenario) {
  const std::vector<double> zeros(network.inverters().size(), 0.0);
  return dispatch_inverters(network, scenario, zeros);
}

namespace {

DroopEquilibrium droop_fixed_point(const NetworkModel& network,
                                   const AdmittanceMatrix& y,
                                   const Scenario& scenario,
                                   std::span<const DroopCurve> curves,
                                   const SolverOptions& solver,
                                   const DroopOptions& opts) {
  const auto specs = network.inverters();
  std::vector<double> q(specs.size(), 0.0);
  DroopEquilibrium eq;
  eq.inverters = dispatch_inverters(network, scenario, q);
  for (std::size_t iter = 1;; ++iter) {
    eq.iterations = iter;
    try {
      eq.flow = solve(network, y, build_injections(network, scenario, eq.inverters),
                      solver);
    } catch (const NumericalError&) {
      eq.converged = false;
      eq.flow.converged = false;
      return eq;
    }
    if (!eq.flow.converged) {
      eq.converged = false;
      return eq;
    }
    std::vector<double> target(specs.size());
    double residual = 0.0;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const double v = eq.flow.vm(static_cast<Eigen::Index>(specs[i].bus));
      target[i] = droop_q(curves[i], specs[i], v, scenario.pv_avail[i]);
      residual = std::max(residual, std::abs(target[i] - q[i]));
    }
    eq.residual = residual;
    if (residual <= opts.tolerance) {
      eq.converged = true;
      return eq;
    }
    if (iter >= opts.max_iter) {
      eq.converged = false;
      return eq;
    }
    for (std::size_t i = 0; i < specs.size(); ++i) {
      q[i] += opts.damping * (target[i] - q[i]);
    }
    eq.inverters = dispatch_inverters(network, scenario, q);
  }
}

}  // namespace

DroopEquilibrium solve_droop_equilibrium(const NetworkModel& network,
                                         const AdmittanceMatrix& y,
                                         const Scenario& scenario,
                                         const SolverOptions& solver,
                                         const DroopOptions& opts) {
  validate_scenario(network, scenario);
  return droop_fixed_point(network, y, scenario, network.droop_curves(), solver,
                           opts);
}

DroopEquilibrium solve_droop_equilibrium(const NetworkModel& network,
                                         const AdmittanceMatrix& y,
                                         const Scenario& scenario,
                                         const DroopCurve& curve,
                                         const SolverOptions& solver,
                                         const DroopOptions& opts) {
  curve.validate();
  validate_scenario(network, scenario);
  const std::vector<DroopCurve> curves(network.inverters().size(), curve);
  return droop_fixed_point(network, y, scenario, curves, solver, opts);
}

}  // namespace gridrl
