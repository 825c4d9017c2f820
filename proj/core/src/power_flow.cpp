#include "gridrl/power_flow.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "gridrl/errors.hpp"

namespace gridrl {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

InjectionVector calculated_injections(const AdmittanceMatrix& y,
                                      const VectorXd& vm, const VectorXd& va) {
  const Index n = vm.size();
  InjectionVector out = InjectionVector::zeros(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) {
    double p = 0.0;
    double q = 0.0;
    for (Index j = 0; j < n; ++j) {
      const double g = y.g(k, j);
      const double b = y.b(k, j);
      if (g == 0.0 && b == 0.0) {
        continue;
      }
      const double d = va(k) - va(j);
      const double c = std::cos(d);
      const double s = std::sin(d);
      p += vm(j) * (g * c + b * s);
      q += vm(j) * (g * s - b * c);
    }
    out.p(k) = vm(k) * p;
    out.q(k) = vm(k) * q;
  }
  return out;
}

namespace {

// Largest |mismatch| over pq buses; fills the stacked mismatch vector
// [dP(1..n-1); dQ(1..n-1)].
double mismatch(const AdmittanceMatrix& y, const InjectionVector& inj,
                const VectorXd& vm, const VectorXd& va, VectorXd& f,
                InjectionVector& calc) {
  calc = calculated_injections(y, vm, va);
  const Index m = vm.size() - 1;
  f.resize(2 * m);
  double worst = 0.0;
  for (Index k = 1; k <= m; ++k) {
    f(k - 1) = inj.p(k) - calc.p(k);
    f(m + k - 1) = inj.q(k) - calc.q(k);
    worst = std::max({worst, std::abs(f(k - 1)), std::abs(f(m + k - 1))});
  }
  if (!f.allFinite()) {
    return std::numeric_limits<double>::infinity();
  }
  return worst;
}

MatrixXd jacobian(const AdmittanceMatrix& y, const VectorXd& vm,
                  const VectorXd& va, const InjectionVector& calc) {
  const Index m = vm.size() - 1;
  MatrixXd jac = MatrixXd::Zero(2 * m, 2 * m);
  for (Index k = 1; k <= m; ++k) {
    const Index r = k - 1;
    for (Index j = 1; j <= m; ++j) {
      const Index c = j - 1;
      const double g = y.g(k, j);
      const double b = y.b(k, j);
      if (k == j) {
        const double v = vm(k);
        jac(r, c) = -calc.q(k) - b * v * v;
        jac(r, m + c) = calc.p(k) / v + g * v;
        jac(m + r, c) = calc.p(k) - g * v * v;
        jac(m + r, m + c) = calc.q(k) / v - b * v;
        continue;
      }
      if (g == 0.0 && b == 0.0) {
        continue;
      }
      const double d = va(k) - va(j);
      const double cs = std::cos(d);
      const double sn = std::sin(d);
      const double vv = vm(k) * vm(j);
      jac(r, c) = vv * (g * sn - b * cs);
      jac(r, m + c) = vm(k) * (g * cs + b * sn);
      jac(m + r, c) = -vv * (g * cs + b * sn);
      jac(m + r, m + c) = vm(k) * (g * sn - b * cs);
    }
  }
  return jac;
}

}  // namespace

std::vector<BranchFlow> branch_flows(const NetworkModel& network,
                                     const VectorXd& vm, const VectorXd& va) {
  std::vector<BranchFlow> flows;
  flows.reserve(network.lines().size());
  for (const Line& line : network.lines()) {
    const auto vf = std::polar(vm(static_cast<Index>(line.from)),
                               va(static_cast<Index>(line.from)));
    const auto vt = std::polar(vm(static_cast<Index>(line.to)),
                               va(static_cast<Index>(line.to)));
    const auto ys = series_admittance(line);
    const std::complex<double> ysh(0.0, 0.5 * line.shunt_susceptance);
    const auto i_series = ys * (vf - vt);
    BranchFlow flow;
    flow.s_from = vf * std::conj(i_series + ysh * vf);
    flow.s_to = vt * std::conj(-i_series + ysh * vt);
    flow.loss_p = std::norm(i_series) * line.resistance;
    flows.push_back(flow);
  }
  return flows;
}

PowerFlowSolution solve(const NetworkModel& network, const AdmittanceMatrix& y,
                        const InjectionVector& inj, const SolverOptions& opts) {
  const std::size_t n = network.bus_count();
  if (y.size() != n || static_cast<std::size_t>(inj.p.size()) != n ||
      static_cast<std::size_t>(inj.q.size()) != n) {
    throw DimensionError(fmt::format(
        "power flow: {} buses but admittance {} and injections {}/{}", n,
        y.size(), inj.p.size(), inj.q.size()));
  }
  PowerFlowSolution sol;
  const auto ni = static_cast<Index>(n);
  sol.vm = VectorXd::Ones(ni);
  sol.va = VectorXd::Zero(ni);
  sol.vm(0) = opts.slack_vm;
  sol.va(0) = opts.slack_va;

  const Index m = ni - 1;
  VectorXd f;
  InjectionVector calc;
  double worst = mismatch(y, inj, sol.vm, sol.va, f, calc);
  std::size_t iter = 0;
  while (worst > opts.tolerance && iter < opts.max_iter && std::isfinite(worst)) {
    const MatrixXd jac = jacobian(y, sol.vm, sol.va, calc);
    Eigen::FullPivLU<MatrixXd> lu(jac);
    if (!lu.isInvertible()) {
      throw NumericalError(
          fmt::format("power flow: singular Jacobian at iteration {}", iter), iter);
    }
    const VectorXd dx = lu.solve(f);
    ++iter;
    for (Index k = 1; k <= m; ++k) {
      sol.va(k) += dx(k - 1);
      sol.vm(k) += dx(m + k - 1);
    }
    if (!sol.vm.allFinite() || (sol.vm.array() <= 0.0).any()) {
      worst = std::numeric_limits<double>::infinity();
      break;
    }
    worst = mismatch(y, inj, sol.vm, sol.va, f, calc);
    // Diverging iterates only get worse; stop early.
    if (worst > 1e6) {
      break;
    }
  }
  // One extra Newton step drives the summed mismatch well below tolerance.
  if (worst <= opts.tolerance && worst > 0.0) {
    const MatrixXd jac = jacobian(y, sol.vm, sol.va, calc);
    Eigen::FullPivLU<MatrixXd> lu(jac);
    if (lu.isInvertible()) {
      const VectorXd dx = lu.solve(f);
      VectorXd vm = sol.vm;
      VectorXd va = sol.va;
      for (Index k = 1; k <= m; ++k) {
        va(k) += dx(k - 1);
        vm(k) += dx(m + k - 1);
      }
      VectorXd f2;
      InjectionVector calc2;
      const double polished = mismatch(y, inj, vm, va, f2, calc2);
      if (vm.allFinite() && polished < worst) {
        sol.vm = std::move(vm);
        sol.va = std::move(va);
        calc = std::move(calc2);
        worst = polished;
      }
    }
  }
  sol.iterations = iter;
  sol.max_mismatch = worst;
  sol.converged = worst <= opts.tolerance;
  if (!sol.converged) {
    sol.slack_p = std::numeric_limits<double>::quiet_NaN();
    sol.slack_q = std::numeric_limits<double>::quiet_NaN();
    sol.total_loss_p = std::numeric_limits<double>::quiet_NaN();
    return sol;
  }
  sol.slack_p = calc.p(0);
  sol.slack_q = calc.q(0);
  sol.branch_flows = branch_flows(network, sol.vm, sol.va);
  sol.total_loss_p = 0.0;
  for (const BranchFlow& flow : sol.branch_flows) {
    sol.total_loss_p += flow.loss_p;
  }
  return sol;
}

double compute_losses(const NetworkModel& network, const AdmittanceMatrix& y,
                      const PowerFlowSolution& solution) {
  if (!solution.converged) {
    throw ContractError("compute_losses requires a converged solution");
  }
  if (y.size() != network.bus_count() ||
      static_cast<std::size_t>(solution.vm.size()) != network.bus_count()) {
    throw DimensionError("compute_losses: dimension mismatch");
  }
  double loss = 0.0;
  for (const BranchFlow& flow : branch_flows(network, solution.vm, solution.va)) {
    loss += flow.loss_p;
  }
  return loss;
}

}  // namespace gridrl
