#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gridrl/ddpg.hpp"
#include "gridrl/dispatch.hpp"
#include "gridrl/environment.hpp"
#include "gridrl/network.hpp"
#include "gridrl/scenario.hpp"

namespace gridrl {

enum class ControlMode { baseline, voltvar, ddpg };

std::string_view to_string(ControlMode mode);
ControlMode parse_control_mode(std::string_view name);

// Annual (or slice) totals. Violations are counted in bus-hours.
struct CaseMetrics {
  std::size_t undervoltage_count = 0;
  std::size_t overvoltage_count = 0;
  double curtailment_kwh = 0.0;
  double losses_kwh = 0.0;
  double max_vm = 0.0;
  double min_vm = 0.0;
  std::size_t hours = 0;
  std::size_t nonconverged_hours = 0;
};

struct HourRecord {
  std::size_t hour = 0;
  bool converged = false;
  std::size_t undervoltages = 0;
  std::size_t overvoltages = 0;
  double max_vm = 0.0;
  double min_vm = 0.0;
  double pv_kwh = 0.0;
  double curtailment_kwh = 0.0;
  double loss_kwh = 0.0;
  double q_total_kvar = 0.0;
  std::size_t droop_iterations = 0;
};

struct CaseResult {
  ControlMode mode = ControlMode::baseline;
  CaseMetrics metrics;
  std::vector<HourRecord> hours;
};

struct EvaluationOptions {
  std::size_t start_hour = 0;
  std::size_t hours = kHoursPerYear;
  // 0 picks std::thread::hardware_concurrency().
  std::size_t threads = 0;
  SolverOptions solver;
  ZoneBounds zones;
  DroopOptions droop;
};

// Runs one control mode over consecutive profile hours. `agent` is required
// for ControlMode::ddpg and used for inference only. Curtailment is measured
// against the unity power factor output of the same hour.
CaseResult evaluate_case(ControlMode mode, const NetworkModel& network,
                         const ProfileSet& profiles, const EvaluationOptions& options,
                         const Agent* agent = nullptr);

// Aligned comparison table, one row per case in the given order.
std::string format_table(std::span<const CaseResult> cases);

// Delimited per-hour records for every case, header included.
void write_records(std::ostream& out, std::span<const CaseResult> cases);

}  // namespace gridrl
