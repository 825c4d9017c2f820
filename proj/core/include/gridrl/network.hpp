#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "gridrl/inverter.hpp"

namespace gridrl {

enum class BusKind { slack, pq };

struct LoadSpec {
  double p_base = 0.0;  // per-unit real demand at nominal
  double q_base = 0.0;  // per-unit reactive demand at nominal
};

struct Bus {
  std::size_t id = 0;
  BusKind kind = BusKind::pq;
  double base_kv = 1.0;
  std::optional<LoadSpec> attached_load;
  // Index into NetworkModel::inverters().
  std::optional<std::size_t> attached_pv;
};

struct Line {
  std::size_t from = 0;
  std::size_t to = 0;
  double resistance = 0.0;         // per-unit
  double reactance = 0.0;          // per-unit
  double shunt_susceptance = 0.0;  // per-unit, total for the line
};

// Series admittance 1 / (r + jx) of a line.
std::complex<double> series_admittance(const Line& line);

// Validated radial feeder. Immutable once constructed.
class NetworkModel {
 public:
  // Checks every invariant and throws TopologyError, ParameterError or
  // SchemaError on violation. Buses must already be ordered by id.
  // `inverters[i].bus` must name a bus; droops may be empty (defaults).
  NetworkModel(std::string name, double mva_base, std::vector<Bus> buses,
               std::vector<Line> lines, std::vector<InverterSpec> inverters,
               std::vector<DroopCurve> droops = {});

  const std::string& name() const noexcept { return name_; }
  double mva_base() const noexcept { return mva_base_; }
  std::size_t bus_count() const noexcept { return buses_.size(); }
  std::span<const Bus> buses() const noexcept { return buses_; }
  std::span<const Line> lines() const noexcept { return lines_; }
  std::span<const InverterSpec> inverters() const noexcept {
    return inverters_;
  }
  std::span<const DroopCurve> droop_curves() const noexcept { return droops_; }
  // Bus ids carrying a load, ascending. Defines the load ordering used by
  // scenarios and the state vector.
  std::span<const std::size_t> load_buses() const noexcept {
    return load_buses_;
  }
  const LoadSpec& load_at(std::size_t load_index) const;

  double total_base_load_p() const noexcept;

 private:
  std::string name_;
  double mva_base_;
  std::vector<Bus> buses_;
  std::vector<Line> lines_;
  std::vector<InverterSpec> inverters_;
  std::vector<DroopCurve> droops_;
  std::vector<std::size_t> load_buses_;
};

// Throws TopologyError unless the lines form a spanning tree over
// `bus_count` buses, and ParameterError for a line with r = x = 0 or
// negative resistance.
void validate_radial(std::size_t bus_count, std::span<const Line> lines);

struct AdmittanceMatrix {
  Eigen::MatrixXd g;
  Eigen::MatrixXd b;

  std::size_t size() const noexcept { return static_cast<std::size_t>(g.rows()); }
  std::complex<double> operator()(std::size_t k, std::size_t j) const {
    return {g(k, j), b(k, j)};
  }
};

AdmittanceMatrix build_admittance(const NetworkModel& network);
AdmittanceMatrix build_admittance(std::size_t bus_count,
                                  std::span<const Line> lines);

// Per-unit helpers. The impedance base is kV^2 / MVA.
struct PerUnitBase {
  double mva = 1.0;
  double kv = 1.0;

  double impedance_ohm() const noexcept { return kv * kv / mva; }
};

double ohm_to_pu(double ohm, const PerUnitBase& base);
double pu_to_ohm(double pu, const PerUnitBase& base);
double siemens_to_pu(double siemens, const PerUnitBase& base);
double pu_to_siemens(double pu, const PerUnitBase& base);
double kw_to_pu(double kw, double mva_base);
double pu_to_kw(double pu, double mva_base);

inline constexpr double kDefaultMvaBase = 2.74;

// Parses the JSON network schema (comments allowed). See data/ for
// annotated examples.
NetworkModel parse_network(std::string_view text);
NetworkModel load_network(const std::filesystem::path& path);

}  // namespace gridrl
