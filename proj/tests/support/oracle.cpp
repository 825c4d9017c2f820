#include "oracle.hpp"

#include <algorithm>
#include <cmath>

namespace gridrl::testing {

std::filesystem::path data_path(const std::filesystem::path& relative) {
  return std::filesystem::path(GRIDRL_DATA_DIR) / relative;
}

CMatrix oracle_admittance(std::size_t bus_count, std::span<const Line> lines) {
  CMatrix y(bus_count, std::vector<cd>(bus_count, cd{0.0, 0.0}));
  for (const Line& l : lines) {
    const cd z{l.resistance, l.reactance};
    const cd ys = 1.0 / z;
    const cd half_shunt{0.0, l.shunt_susceptance / 2.0};
    y[l.from][l.from] += ys + half_shunt;
    y[l.to][l.to] += ys + half_shunt;
    y[l.from][l.to] -= ys;
    y[l.to][l.from] -= ys;
  }
  return y;
}

GaussSeidelResult gauss_seidel(const CMatrix& y, std::span<const double> p,
                               std::span<const double> q, cd v_slack, double tolerance,
                               std::size_t max_sweeps) {
  const std::size_t n = y.size();
  GaussSeidelResult r;
  r.v.assign(n, v_slack);
  r.v[0] = v_slack;
  for (r.sweeps = 1; r.sweeps <= max_sweeps; ++r.sweeps) {
    double change = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
      cd sum{0.0, 0.0};
      for (std::size_t j = 0; j < n; ++j) {
        if (j != k) {
          sum += y[k][j] * r.v[j];
        }
      }
      const cd s{p[k], q[k]};
      const cd next = (std::conj(s) / std::conj(r.v[k]) - sum) / y[k][k];
      change = std::max(change, std::abs(next - r.v[k]));
      r.v[k] = next;
    }
    if (change < tolerance) {
      r.converged = true;
      return r;
    }
  }
  return r;
}

std::vector<cd> injected_power(const CMatrix& y, std::span<const cd> v) {
  std::vector<cd> s(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    cd current{0.0, 0.0};
    for (std::size_t j = 0; j < v.size(); ++j) {
      current += y[k][j] * v[j];
    }
    s[k] = v[k] * std::conj(current);
  }
  return s;
}

std::vector<cd> to_phasors(const PowerFlowSolution& solution) {
  std::vector<cd> v(static_cast<std::size_t>(solution.vm.size()));
  for (std::size_t k = 0; k < v.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    v[k] = std::polar(solution.vm(i), solution.va(i));
  }
  return v;
}

double max_pq_residual(const CMatrix& y, std::span<const cd> v, std::span<const double> p,
                       std::span<const double> q) {
  const std::vector<cd> s = injected_power(y, v);
  double worst = 0.0;
  for (std::size_t k = 1; k < s.size(); ++k) {
    worst = std::max({worst, std::abs(s[k].real() - p[k]), std::abs(s[k].imag() - q[k])});
  }
  return worst;
}

}  // namespace gridrl::testing
