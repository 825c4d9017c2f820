#include "gridrl/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "gridrl/errors.hpp"

namespace gridrl {

using json = nlohmann::json;

std::complex<double> series_admittance(const Line& line) {
  return 1.0 / std::complex<double>(line.resistance, line.reactance);
}

void validate_radial(std::size_t bus_count, std::span<const Line> lines) {
  if (bus_count == 0) {
    throw TopologyError("network has no buses");
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const Line& l = lines[i];
    if (l.from >= bus_count || l.to >= bus_count) {
      throw TopologyError(fmt::format("line {} references unknown bus", i));
    }
    if (l.from == l.to) {
      throw TopologyError(fmt::format("line {} is a self loop on bus {}", i, l.from));
    }
    if (!std::isfinite(l.resistance) || !std::isfinite(l.reactance) ||
        !std::isfinite(l.shunt_susceptance)) {
      throw ParameterError(fmt::format("line {} has non-finite parameters", i));
    }
    if (l.resistance < 0.0) {
      throw ParameterError(fmt::format("line {} has negative resistance", i));
    }
    if (l.resistance == 0.0 && l.reactance == 0.0) {
      throw ParameterError(fmt::format("line {} has zero impedance", i));
    }
  }
  if (lines.size() != bus_count - 1) {
    throw TopologyError(fmt::format(
        "a radial feeder over {} buses needs {} lines, got {}", bus_count,
        bus_count - 1, lines.size()));
  }
  // Union-find: n-1 edges without a cycle span the whole tree.
  std::vector<std::size_t> parent(bus_count);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto root = [&](std::size_t v) {
    while (parent[v] != v) {
      parent[v] = parent[parent[v]];
      v = parent[v];
    }
    return v;
  };
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto a = root(lines[i].from);
    const auto b = root(lines[i].to);
    if (a == b) {
      throw TopologyError(fmt::format(
          "line {} ({} -> {}) closes a cycle; feeder must be radial", i,
          lines[i].from, lines[i].to));
    }
    parent[a] = b;
  }
}

void DroopCurve::validate() const {
  if (!(v1 < v2 && v2 <= v3 && v3 < v4)) {
    throw ParameterError(fmt::format(
        "droop breakpoints must satisfy v1 < v2 <= v3 < v4 (got {}, {}, {}, {})",
        v1, v2, v3, v4));
  }
  if (!(q_max >= 0.0 && q_max <= 1.0)) {
    throw ParameterError(fmt::format("droop q_max {} outside [0, 1]", q_max));
  }
}

NetworkModel::NetworkModel(std::string name, double mva_base,
                           std::vector<Bus> buses, std::vector<Line> lines,
                           std::vector<InverterSpec> inverters,
                           std::vector<DroopCurve> droops)
    : name_(std::move(name)),
      mva_base_(mva_base),
      buses_(std::move(buses)),
      lines_(std::move(lines)),
      inverters_(std::move(inverters)),
      droops_(std::move(droops)) {
  if (!(mva_base_ > 0.0)) {
    throw ParameterError("MVA base must be positive");
  }
  std::size_t slack_count = 0;
  for (std::size_t i = 0; i < buses_.size(); ++i) {
    const Bus& bus = buses_[i];
    if (bus.id != i) {
      throw SchemaError(fmt::format(
          "bus ids must be contiguous from 0; position {} holds id {}", i, bus.id));
    }
    if (bus.kind == BusKind::slack) {
      ++slack_count;
      if (bus.id != 0) {
        throw SchemaError(fmt::format("slack bus must have id 0, found {}", bus.id));
      }
    }
    if (!(bus.base_kv > 0.0)) {
      throw ParameterError(fmt::format("bus {} has non-positive kV base", bus.id));
    }
    if (bus.attached_load) {
      if (!(bus.attached_load->p_base >= 0.0) ||
          !std::isfinite(bus.attached_load->q_base)) {
        throw ParameterError(fmt::format("load at bus {} has invalid demand", bus.id));
      }
      load_buses_.push_back(bus.id);
    }
  }
  if (slack_count != 1) {
    throw SchemaError(fmt::format(
        "network must have exactly one slack bus, found {}", slack_count));
  }
  validate_radial(buses_.size(), lines_);

  if (droops_.empty()) {
    droops_.assign(inverters_.size(), DroopCurve{});
  }
  if (droops_.size() != inverters_.size()) {
    throw SchemaError("one droop curve per inverter required");
  }
  for (auto& bus : buses_) {
    bus.attached_pv.reset();
  }
  for (std::size_t i = 0; i < inverters_.size(); ++i) {
    const InverterSpec& inv = inverters_[i];
    if (inv.bus == 0 || inv.bus >= buses_.size()) {
      throw SchemaError(fmt::format("inverter {} must sit on a pq bus", i));
    }
    if (!(inv.s_rating > 0.0) || !(inv.dc_rating > 0.0)) {
      throw ParameterError(fmt::format("inverter {} needs positive ratings", i));
    }
    if (buses_[inv.bus].attached_pv) {
      throw SchemaError(fmt::format("bus {} has more than one inverter", inv.bus));
    }
    buses_[inv.bus].attached_pv = i;
    droops_[i].validate();
  }
}

const LoadSpec& NetworkModel::load_at(std::size_t load_index) const {
  return *buses_.at(load_buses_.at(load_index)).attached_load;
}

double NetworkModel::total_base_load_p() const noexcept {
  double total = 0.0;
  for (std::size_t bus : load_buses_) {
    total += buses_[bus].attached_load->p_base;
  }
  return total;
}

AdmittanceMatrix build_admittance(std::size_t bus_count,
                                  std::span<const Line> lines) {
  validate_radial(bus_count, lines);
  const auto n = static_cast<Eigen::Index>(bus_count);
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
  for (const Line& line : lines) {
    const auto ys = series_admittance(line);
    const std::complex<double> half_shunt(0.0, 0.5 * line.shunt_susceptance);
    const auto k = static_cast<Eigen::Index>(line.from);
    const auto j = static_cast<Eigen::Index>(line.to);
    y(k, j) -= ys;
    y(j, k) -= ys;
    y(k, k) += ys + half_shunt;
    y(j, j) += ys + half_shunt;
  }
  return AdmittanceMatrix{y.real(), y.imag()};
}

AdmittanceMatrix build_admittance(const NetworkModel& network) {
  return build_admittance(network.bus_count(), network.lines());
}

double ohm_to_pu(double ohm, const PerUnitBase& base) {
  return ohm / base.impedance_ohm();
}
double pu_to_ohm(double pu, const PerUnitBase& base) {
  return pu * base.impedance_ohm();
}
double siemens_to_pu(double siemens, const PerUnitBase& base) {
  return siemens * base.impedance_ohm();
}
double pu_to_siemens(double pu, const PerUnitBase& base) {
  return pu / base.impedance_ohm();
}
double kw_to_pu(double kw, double mva_base) { return kw / (1000.0 * mva_base); }
double pu_to_kw(double pu, double mva_base) { return pu * 1000.0 * mva_base; }

namespace {

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                std::string_view where) {
  if (!obj.is_object()) {
    throw SchemaError(fmt::format("{}: expected an object", where));
  }
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw SchemaError(fmt::format("{}: unknown field '{}'", where, key));
    }
  }
}

double number(const json& obj, const char* key, std::string_view where) {
  if (!obj.contains(key)) {
    throw SchemaError(fmt::format("{}: missing field '{}'", where, key));
  }
  const json& v = obj.at(key);
  if (!v.is_number()) {
    throw SchemaError(fmt::format("{}: field '{}' must be a number", where, key));
  }
  return v.get<double>();
}

double number_or(const json& obj, const char* key, double fallback,
                 std::string_view where) {
  return obj.contains(key) ? number(obj, key, where) : fallback;
}

std::size_t index(const json& obj, const char* key, std::string_view where) {
  if (!obj.contains(key) || !obj.at(key).is_number_unsigned()) {
    throw SchemaError(fmt::format("{}: field '{}' must be a non-negative integer",
                                  where, key));
  }
  return obj.at(key).get<std::size_t>();
}

const json& array(const json& doc, const char* key) {
  if (!doc.contains(key)) {
    if (std::string_view(key) == "loads" || std::string_view(key) == "pvs") {
      static const json empty = json::array();
      return empty;
    }
    throw SchemaError(fmt::format("network: missing section '{}'", key));
  }
  const json& v = doc.at(key);
  if (!v.is_array()) {
    throw SchemaError(fmt::format("network: section '{}' must be an array", key));
  }
  return v;
}

}  // namespace

NetworkModel parse_network(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw SchemaError(fmt::format("network: malformed JSON: {}", e.what()));
  }
  check_keys(doc, {"name", "units", "mva_base", "buses", "lines", "loads", "pvs"},
             "network");

  if (!doc.contains("units") || !doc.at("units").is_string()) {
    throw SchemaError("network: 'units' must be \"per_unit\" or \"physical\"");
  }
  const auto units = doc.at("units").get<std::string>();
  bool physical = false;
  if (units == "physical") {
    physical = true;
  } else if (units != "per_unit") {
    throw SchemaError(fmt::format("network: unknown units '{}'", units));
  }
  const double mva_base = number_or(doc, "mva_base", kDefaultMvaBase, "network");
  if (!(mva_base > 0.0)) {
    throw ParameterError("network: mva_base must be positive");
  }
  std::string name = doc.value("name", std::string{"unnamed"});

  // Buses, keyed by id so they may appear in any order.
  std::vector<std::optional<Bus>> by_id;
  for (const json& jb : array(doc, "buses")) {
    check_keys(jb, {"id", "kind", "base_kv"}, "bus");
    Bus bus;
    bus.id = index(jb, "id", "bus");
    const auto kind = jb.value("kind", std::string{"pq"});
    if (kind == "slack") {
      bus.kind = BusKind::slack;
    } else if (kind == "pq") {
      bus.kind = BusKind::pq;
    } else {
      throw SchemaError(fmt::format("bus {}: unknown kind '{}'", bus.id, kind));
    }
    bus.base_kv = number_or(jb, "base_kv", 1.0, "bus");
    if (bus.id >= by_id.size()) {
      by_id.resize(bus.id + 1);
    }
    if (by_id[bus.id]) {
      throw SchemaError(fmt::format("duplicate bus id {}", bus.id));
    }
    by_id[bus.id] = bus;
  }
  std::vector<Bus> buses;
  buses.reserve(by_id.size());
  for (std::size_t i = 0; i < by_id.size(); ++i) {
    if (!by_id[i]) {
      throw SchemaError(fmt::format("bus ids must be contiguous; id {} missing", i));
    }
    buses.push_back(*by_id[i]);
  }
  if (buses.empty()) {
    throw SchemaError("network: no buses");
  }
  if (std::none_of(buses.begin(), buses.end(),
                   [](const Bus& b) { return b.kind == BusKind::slack; })) {
    throw SchemaError("network: missing slack bus");
  }

  auto base_of = [&](std::size_t bus) {
    if (bus >= buses.size()) {
      throw SchemaError(fmt::format("reference to unknown bus {}", bus));
    }
    return PerUnitBase{mva_base, buses[bus].base_kv};
  };

  std::vector<Line> lines;
  for (const json& jl : array(doc, "lines")) {
    check_keys(jl, {"from", "to", "resistance", "reactance", "shunt_susceptance"},
               "line");
    Line line;
    line.from = index(jl, "from", "line");
    line.to = index(jl, "to", "line");
    line.resistance = number(jl, "resistance", "line");
    line.reactance = number(jl, "reactance", "line");
    line.shunt_susceptance = number_or(jl, "shunt_susceptance", 0.0, "line");
    if (physical) {
      const PerUnitBase base = base_of(line.from);
      line.resistance = ohm_to_pu(line.resistance, base);
      line.reactance = ohm_to_pu(line.reactance, base);
      line.shunt_susceptance = siemens_to_pu(line.shunt_susceptance, base);
    }
    lines.push_back(line);
  }

  for (const json& jl : array(doc, "loads")) {
    check_keys(jl, {"bus", "p_base", "q_base"}, "load");
    const std::size_t bus = index(jl, "bus", "load");
    base_of(bus);
    LoadSpec load{number(jl, "p_base", "load"), number_or(jl, "q_base", 0.0, "load")};
    if (physical) {
      load.p_base = kw_to_pu(load.p_base, mva_base);
      load.q_base = kw_to_pu(load.q_base, mva_base);
    }
    if (buses[bus].attached_load) {
      throw SchemaError(fmt::format("bus {} has more than one load", bus));
    }
    buses[bus].attached_load = load;
  }

  std::vector<InverterSpec> inverters;
  std::vector<DroopCurve> droops;
  for (const json& jp : array(doc, "pvs")) {
    check_keys(jp, {"bus", "s_rating", "dc_rating", "droop"}, "pv");
    InverterSpec inv;
    inv.bus = index(jp, "bus", "pv");
    base_of(inv.bus);
    inv.s_rating = number(jp, "s_rating", "pv");
    inv.dc_rating = number(jp, "dc_rating", "pv");
    if (physical) {
      inv.s_rating = kw_to_pu(inv.s_rating, mva_base);
      inv.dc_rating = kw_to_pu(inv.dc_rating, mva_base);
    }
    DroopCurve curve;
    if (jp.contains("droop")) {
      const json& jd = jp.at("droop");
      check_keys(jd, {"v1", "v2", "v3", "v4", "q_max"}, "droop");
      curve.v1 = number_or(jd, "v1", curve.v1, "droop");
      curve.v2 = number_or(jd, "v2", curve.v2, "droop");
      curve.v3 = number_or(jd, "v3", curve.v3, "droop");
      curve.v4 = number_or(jd, "v4", curve.v4, "droop");
      curve.q_max = number_or(jd, "q_max", curve.q_max, "droop");
    }
    inverters.push_back(inv);
    droops.push_back(curve);
  }

  return NetworkModel(std::move(name), mva_base, std::move(buses),
                      std::move(lines), std::move(inverters), std::move(droops));
}

NetworkModel load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw SchemaError(fmt::format("cannot open network file {}", path.string()));
  }
  std::ostringstream text;
  text << in.rdbuf();
  return parse_network(text.str());
}

}  // namespace gridrl
