#include "gridrl/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "gridrl/errors.hpp"

namespace gridrl {

void validate_scenario(const NetworkModel& network, const Scenario& scenario) {
  if (scenario.load_scale.size() != network.load_buses().size()) {
    throw ContractError(fmt::format("scenario has {} load multipliers, network {} loads",
                                    scenario.load_scale.size(),
                                    network.load_buses().size()));
  }
  if (scenario.pv_avail.size() != network.inverters().size()) {
    throw ContractError(fmt::format("scenario has {} PV values, network {} inverters",
                                    scenario.pv_avail.size(),
                                    network.inverters().size()));
  }
  for (double s : scenario.load_scale) {
    if (!(s >= 0.0) || !std::isfinite(s)) {
      throw ContractError("scenario load multipliers must be finite and >= 0");
    }
  }
  for (std::size_t i = 0; i < scenario.pv_avail.size(); ++i) {
    const double p = scenario.pv_avail[i];
    if (!(p >= 0.0) || p > network.inverters()[i].dc_rating * (1.0 + 1e-12)) {
      throw ContractError(fmt::format("scenario pv_avail[{}] = {} outside [0, dc]", i, p));
    }
  }
}

std::string_view to_string(Category category) {
  switch (category) {
    case Category::evening:
      return "evening";
    case Category::midday_peak:
      return "midday_peak";
    case Category::normal:
      return "normal";
  }
  return "unknown";
}

Category parse_category(std::string_view name) {
  for (Category c : kCategories) {
    if (to_string(c) == name) {
      return c;
    }
  }
  throw ContractError(fmt::format("unknown scenario category '{}'", name));
}

const CategoryRanges& ScenarioRanges::of(Category category) const {
  switch (category) {
    case Category::evening:
      return evening;
    case Category::midday_peak:
      return midday_peak;
    case Category::normal:
      return normal;
  }
  throw ContractError("unknown scenario category");
}

namespace {

double draw(const Range& r, std::mt19937_64& rng) {
  if (r.hi <= r.lo) {
    return r.lo;
  }
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

}  // namespace

Scenario sample_training_scenario(const NetworkModel& network, Category category,
                                  std::mt19937_64& rng,
                                  const ScenarioRanges& ranges) {
  const CategoryRanges& r = ranges.of(category);
  Scenario sc;
  sc.tag = std::string(to_string(category));
  sc.load_scale.resize(network.load_buses().size());
  for (double& s : sc.load_scale) {
    s = draw(r.load, rng);
  }
  const auto specs = network.inverters();
  sc.pv_avail.resize(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    sc.pv_avail[i] = draw(r.pv, rng) * specs[i].dc_rating;
  }
  return sc;
}

ScenarioSampler::ScenarioSampler(ScenarioRanges ranges, std::array<double, 3> weights)
    : ranges_(ranges), weights_(weights) {
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0)) {
      throw ContractError("category weights must be non-negative");
    }
    total += w;
  }
  if (!(total > 0.0)) {
    throw ContractError("at least one category weight must be positive");
  }
}

std::pair<Category, Scenario> ScenarioSampler::sample(const NetworkModel& network,
                                                      std::mt19937_64& rng) const {
  std::discrete_distribution<std::size_t> pick(weights_.begin(), weights_.end());
  const Category c = kCategories[pick(rng)];
  return {c, sample_training_scenario(network, c, rng, ranges_)};
}

ProfileSet parse_profiles(std::istream& in) {
  ProfileSet out;
  std::string line;
  if (!std::getline(in, line)) {
    throw SchemaError("profiles: empty file");
  }
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") {
      continue;
    }
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    double hour = 0.0;
    double load = 0.0;
    double pv = 0.0;
    if (!(fields >> hour >> load >> pv)) {
      throw SchemaError(fmt::format("profiles: malformed row {}", row + 1));
    }
    if (hour != static_cast<double>(row)) {
      throw SchemaError(fmt::format("profiles: row {} has hour {}", row + 1, hour));
    }
    if (!(load >= 0.0 && load <= 1.0) || !(pv >= 0.0 && pv <= 1.0)) {
      throw SchemaError(fmt::format("profiles: hour {} has values outside [0, 1]", row));
    }
    out.load.push_back(load);
    out.pv.push_back(pv);
    ++row;
  }
  if (row != kHoursPerYear) {
    throw SchemaError(fmt::format("profiles: expected {} hourly rows, got {}",
                                  kHoursPerYear, row));
  }
  return out;
}

ProfileSet load_profiles(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw SchemaError(fmt::format("cannot open profile file {}", path.string()));
  }
  return parse_profiles(in);
}

void write_profiles(std::ostream& out, const ProfileSet& profiles) {
  out << "hour,load_norm,pv_norm\n";
  for (std::size_t h = 0; h < profiles.load.size(); ++h) {
    out << fmt::format("{},{:.6f},{:.6f}\n", h, profiles.load[h], profiles.pv[h]);
  }
}

Scenario scenario_at(const NetworkModel& network, const ProfileSet& profiles,
                     std::size_t hour) {
  if (hour >= profiles.load.size() || hour >= profiles.pv.size()) {
    throw ContractError(fmt::format("hour {} outside profile range", hour));
  }
  Scenario sc;
  sc.tag = fmt::format("hour:{}", hour);
  sc.load_scale.assign(network.load_buses().size(), profiles.load[hour]);
  const auto specs = network.inverters();
  sc.pv_avail.resize(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    sc.pv_avail[i] = profiles.pv[hour] * specs[i].dc_rating;
  }
  return sc;
}

ProfileSet synthesize_profiles(std::uint64_t seed) {
  using std::numbers::pi;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  ProfileSet out;
  out.load.resize(kHoursPerYear);
  out.pv.resize(kHoursPerYear);
  const std::size_t days = kHoursPerYear / 24;
  for (std::size_t d = 0; d < days; ++d) {
    const double season = std::cos(2.0 * pi * (static_cast<double>(d) - 200.0) / 365.0);
    const double sun = std::cos(2.0 * pi * (static_cast<double>(d) - 172.0) / 365.0);
    const double load_level = 0.82 + 0.12 * season + 0.04 * noise(rng);
    const double weekend = (d % 7 == 5 || d % 7 == 6) ? 0.93 : 1.0;

    // Day-level sky condition.
    const double sky = unit(rng);
    double clearness = 0.0;
    double jitter = 0.0;
    if (sky < 0.6) {
      clearness = 0.92 + 0.08 * unit(rng);
      jitter = 0.03;
    } else if (sky < 0.9) {
      clearness = 0.55 + 0.35 * unit(rng);
      jitter = 0.2;
    } else {
      clearness = 0.1 + 0.3 * unit(rng);
      jitter = 0.1;
    }
    const double half_day = 6.0 + 1.4 * sun;
    const double amplitude = 0.82 + 0.18 * sun;

    for (std::size_t hod = 0; hod < 24; ++hod) {
      const std::size_t h = d * 24 + hod;
      const double t = static_cast<double>(hod) + 0.5;
      const double shape = 0.42 + 0.22 * std::exp(-std::pow((t - 8.0) / 2.0, 2)) +
                           0.5 * std::exp(-std::pow((t - 19.5) / 2.6, 2));
      out.load[h] = load_level * weekend * shape * (1.0 + 0.03 * noise(rng));

      const double x = (t - 12.5) / half_day;
      double pv = 0.0;
      if (std::abs(x) < 1.0) {
        const double clear_sky = std::pow(std::cos(0.5 * pi * x), 1.3) * amplitude;
        const double cloud = std::clamp(clearness * (1.0 - jitter * unit(rng)), 0.0, 1.0);
        pv = clear_sky * cloud;
      }
      out.pv[h] = pv;
    }
  }
  const double load_peak = *std::max_element(out.load.begin(), out.load.end());
  const double pv_peak = *std::max_element(out.pv.begin(), out.pv.end());
  for (std::size_t h = 0; h < kHoursPerYear; ++h) {
    out.load[h] = std::clamp(out.load[h] / load_peak, 0.0, 1.0);
    out.pv[h] = pv_peak > 0.0 ? std::clamp(out.pv[h] / pv_peak, 0.0, 1.0) : 0.0;
  }
  return out;
}

}  // namespace gridrl
