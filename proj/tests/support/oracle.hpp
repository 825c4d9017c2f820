#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "gridrl/network.hpp"
#include "gridrl/power_flow.hpp"

namespace gridrl::testing {

using cd = std::complex<double>;
using CMatrix = std::vector<std::vector<cd>>;

std::filesystem::path data_path(const std::filesystem::path& relative);

// Bus admittance matrix assembled element by element from the line list.
CMatrix oracle_admittance(std::size_t bus_count, std::span<const Line> lines);

struct GaussSeidelResult {
  std::vector<cd> v;
  bool converged = false;
  std::size_t sweeps = 0;
};

// Plain Gauss-Seidel on V_k = (S_k* / V_k* - sum_{j != k} Y_kj V_j) / Y_kk,
// slack held at `v_slack`. Converges on the voltage update.
GaussSeidelResult gauss_seidel(const CMatrix& y, std::span<const double> p,
                               std::span<const double> q, cd v_slack = {1.0, 0.0},
                               double tolerance = 1e-13, std::size_t max_sweeps = 2000000);

// Complex power injected at each bus, S_k = V_k conj(sum_j Y_kj V_j).
std::vector<cd> injected_power(const CMatrix& y, std::span<const cd> v);

std::vector<cd> to_phasors(const PowerFlowSolution& solution);

// Largest |P_k - P_spec| or |Q_k - Q_spec| over the pq buses (1..N).
double max_pq_residual(const CMatrix& y, std::span<const cd> v, std::span<const double> p,
                       std::span<const double> q);

}  // namespace gridrl::testing
