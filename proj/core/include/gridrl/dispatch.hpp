#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gridrl/inverter.hpp"
#include "gridrl/network.hpp"
#include "gridrl/power_flow.hpp"
#include "gridrl/scenario.hpp"

namespace gridrl {

// Net injections for a scenario given each inverter's operating point.
InjectionVector build_injections(const NetworkModel& network,
                                 const Scenario& scenario,
                                 std::span<const InverterState> inverters);

// Applies VAR priority to every inverter for the given reactive commands.
std::vector<InverterState> dispatch_inverters(const NetworkModel& network,
                                              const Scenario& scenario,
                                              std::span<const double> q_cmd);

// Unity power factor: Q = 0, p_out = min(p_avail, S).
std::vector<InverterState> unity_pf_inverters(const NetworkModel& network,
                                              const Scenario& scenario);

struct DroopOptions {
  double tolerance = 1e-6;
  double damping = 0.5;
  std::size_t max_iter = 100;
};

struct DroopEquilibrium {
  PowerFlowSolution flow;
  std::vector<InverterState> inverters;
  bool converged = false;
  std::size_t iterations = 0;
  // max_i |droop_q(v_i) - Q_i| at the returned flow.
  double residual = 0.0;
};

// Damped fixed point of power flow and local Volt-Var response. Uses the
// droop curves stored with the network.
DroopEquilibrium solve_droop_equilibrium(const NetworkModel& network,
                                         const AdmittanceMatrix& y,
                                         const Scenario& scenario,
                                         const SolverOptions& solver = {},
                                         const DroopOptions& opts = {});

// Same, with one curve applied to every inverter.
DroopEquilibrium solve_droop_equilibrium(const NetworkModel& network,
                                         const AdmittanceMatrix& y,
                                         const Scenario& scenario,
                                         const DroopCurve& curve,
                                         const SolverOptions& solver = {},
                                         const DroopOptions& opts = {});

}  // namespace gridrl
