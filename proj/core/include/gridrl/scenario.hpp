#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "gridrl/network.hpp"

namespace gridrl {

// One operating snapshot: a multiplier per load (ordered as
// NetworkModel::load_buses()) and available PV power per inverter.
struct Scenario {
  std::vector<double> load_scale;
  std::vector<double> pv_avail;
  std::string tag;
};

// Throws ContractError if the scenario does not fit the network or breaks
// its invariants (negative multipliers, pv_avail above dc rating).
void validate_scenario(const NetworkModel& network, const Scenario& scenario);

enum class Category { evening, midday_peak, normal };

inline constexpr std::array<Category, 3> kCategories = {
    Category::evening, Category::midday_peak, Category::normal};

std::string_view to_string(Category category);
// Throws ContractError for an unknown name.
Category parse_category(std::string_view name);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

// Load multiplier range and PV availability range (fraction of dc rating).
struct CategoryRanges {
  Range load;
  Range pv;
};

struct ScenarioRanges {
  CategoryRanges evening{{0.8, 1.0}, {0.0, 0.0}};
  CategoryRanges midday_peak{{0.2, 0.5}, {0.8, 1.0}};
  CategoryRanges normal{{0.4, 0.8}, {0.3, 0.7}};

  const CategoryRanges& of(Category category) const;
};

// Each load and each inverter draws independently from the category's range.
Scenario sample_training_scenario(const NetworkModel& network, Category category,
                                  std::mt19937_64& rng,
                                  const ScenarioRanges& ranges = {});

// Draws a category by mixture weight, then a scenario from it.
class ScenarioSampler {
 public:
  explicit ScenarioSampler(ScenarioRanges ranges = {},
                           std::array<double, 3> weights = {1.0, 1.0, 1.0});

  std::pair<Category, Scenario> sample(const NetworkModel& network,
                                       std::mt19937_64& rng) const;

  const ScenarioRanges& ranges() const noexcept { return ranges_; }

 private:
  ScenarioRanges ranges_;
  std::array<double, 3> weights_;
};

inline constexpr std::size_t kHoursPerYear = 8760;

// Normalized hourly load and PV profiles for one year.
struct ProfileSet {
  std::vector<double> load;
  std::vector<double> pv;
};

// Delimited text: header row, then `hour,load_norm,pv_norm` rows.
ProfileSet parse_profiles(std::istream& in);
ProfileSet load_profiles(const std::filesystem::path& path);
void write_profiles(std::ostream& out, const ProfileSet& profiles);

// Uniform load multiplier for the hour; pv_avail = pv_norm * dc_rating.
Scenario scenario_at(const NetworkModel& network, const ProfileSet& profiles,
                     std::size_t hour);

// Synthetic year: double-peak residential load with seasonal swing and
// clear-sky PV bell curves thinned by day-level and hour-level cloud noise.
ProfileSet synthesize_profiles(std::uint64_t seed);

}  // namespace gridrl
