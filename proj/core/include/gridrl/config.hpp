#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "gridrl/ddpg.hpp"
#include "gridrl/dispatch.hpp"
#include "gridrl/environment.hpp"
#include "gridrl/harness.hpp"
#include "gridrl/power_flow.hpp"
#include "gridrl/scenario.hpp"

namespace gridrl {

// Everything a run needs, loaded from one JSON config file (comments
// allowed). Relative paths resolve against the config file's directory.
struct AppConfig {
  std::filesystem::path network;
  std::filesystem::path profiles;
  std::filesystem::path output_dir = "out";

  SolverOptions solver;
  RewardConfig reward;
  DroopOptions droop;
  // Replaces every per-inverter droop curve from the network file when set.
  std::optional<DroopCurve> droop_curve;

  AgentConfig agent;
  TrainingConfig training;
  ScenarioRanges scenario_ranges;
  std::array<double, 3> category_weights{1.0, 1.0, 1.0};

  EvaluationOptions evaluation;
};

// `overrides` are "dotted.key=value" strings applied to the JSON document
// before it is interpreted; value is parsed as JSON, falling back to a
// plain string.
AppConfig parse_config(std::string_view text, const std::filesystem::path& base_dir,
                       std::span<const std::string> overrides = {});
AppConfig load_config(const std::filesystem::path& path,
                      std::span<const std::string> overrides = {});

// Loads the configured network, replacing droop curves if the config says so.
NetworkModel load_configured_network(const AppConfig& config);

}  // namespace gridrl
