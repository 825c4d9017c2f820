#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gridrl/dispatch.hpp"
#include "gridrl/errors.hpp"
#include "gridrl/network.hpp"
#include "gridrl/power_flow.hpp"
#include "gridrl/scenario.hpp"

namespace gridrl {

enum class Zone { normal, zone1, zone2 };

const char* to_string(Zone zone);

// Voltage bands in per-unit. Ties go to the milder zone.
struct ZoneBounds {
  double normal_low = 0.95;
  double normal_high = 1.05;
  double zone1_low = 0.90;
  double zone1_high = 1.10;
};

Zone classify_zone(double vm, const ZoneBounds& bounds = {});

inline bool is_violation(Zone zone) { return zone != Zone::normal; }

struct RewardConfig {
  double c = 200.0;
  double zone1_penalty = -400.0;
  double zone2_penalty = -600.0;
  ZoneBounds zones;

  // Reward for a non-converged power flow: zone-2 penalty at every bus.
  double sentinel(std::size_t bus_count) const {
    return zone2_penalty * static_cast<double>(bus_count);
  }
};

struct RewardBreakdown {
  double r_v_total = 0.0;
  double r_q = 0.0;
  double r = 0.0;
  std::vector<Zone> per_bus_zone;
  bool sentinel = false;
};

// Voltage penalty summed over every bus (slack included) plus the reactive
// utilization term C * (1 - |Q_i| / S_i) per inverter.
RewardBreakdown reward(const NetworkModel& network,
                       const PowerFlowSolution& solution,
                       std::span<const InverterState> inverters,
                       const RewardConfig& config = {});

// Flat state layout: [vm per bus] ++ [p_out, q_cmd per inverter]
// ++ [p_load, q_load per load].
struct StateLayout {
  std::size_t buses = 0;
  std::size_t inverters = 0;
  std::size_t loads = 0;

  explicit StateLayout(const NetworkModel& network)
      : buses(network.bus_count()),
        inverters(network.inverters().size()),
        loads(network.load_buses().size()) {}

  std::size_t dimension() const noexcept { return buses + 2 * inverters + 2 * loads; }
  std::size_t vm_offset() const noexcept { return 0; }
  std::size_t inverter_offset() const noexcept { return buses; }
  std::size_t load_offset() const noexcept { return buses + 2 * inverters; }
};

// Assembles the state from realized inverter output (not p_avail).
Eigen::VectorXd assemble_state(const NetworkModel& network, const Scenario& scenario,
                               const Eigen::VectorXd& vm,
                               std::span<const InverterState> inverters);

struct EnvironmentOptions {
  SolverOptions solver;
  RewardConfig reward;
};

struct StepResult {
  Eigen::VectorXd state;
  RewardBreakdown reward;
  PowerFlowSolution solution;
  std::vector<InverterState> inverters;
};

// Raised by reset() when the unity power factor flow does not converge.
class ScenarioRejected : public Error {
 public:
  using Error::Error;
};

// One-step environment over a fixed scenario. Each step re-solves the same
// operating point under the new reactive commands Q_i = a_i * S_i.
class Environment {
 public:
  Environment(std::shared_ptr<const NetworkModel> network,
              EnvironmentOptions options = {});

  const NetworkModel& network() const noexcept { return *network_; }
  const AdmittanceMatrix& admittance() const noexcept { return y_; }
  const EnvironmentOptions& options() const noexcept { return options_; }
  std::size_t state_dim() const noexcept { return layout_.dimension(); }
  std::size_t action_dim() const noexcept { return network_->inverters().size(); }

  Eigen::VectorXd reset(const Scenario& scenario);
  StepResult step(std::span<const double> action) const;
  StepResult step(const Eigen::VectorXd& action) const;

  // Unity power factor result computed by the last reset().
  const StepResult& baseline() const;
  const Scenario& scenario() const;

 private:
  StepResult evaluate(std::span<const InverterState> inverters) const;

  std::shared_ptr<const NetworkModel> network_;
  EnvironmentOptions options_;
  AdmittanceMatrix y_;
  StateLayout layout_;
  std::optional<Scenario> scenario_;
  std::optional<StepResult> baseline_;
};

}  // namespace gridrl
