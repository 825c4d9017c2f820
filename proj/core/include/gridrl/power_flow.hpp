#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "gridrl/network.hpp"

namespace gridrl {

// Net per-unit injections (generation minus load). Slack entries are ignored.
struct InjectionVector {
  Eigen::VectorXd p;
  Eigen::VectorXd q;

  static InjectionVector zeros(std::size_t bus_count) {
    const auto n = static_cast<Eigen::Index>(bus_count);
    return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  }
};

struct SolverOptions {
  double tolerance = 1e-8;
  std::size_t max_iter = 50;
  double slack_vm = 1.0;
  double slack_va = 0.0;
};

struct BranchFlow {
  std::complex<double> s_from;  // power leaving the from-bus into the line
  std::complex<double> s_to;    // power leaving the to-bus into the line
  double loss_p = 0.0;
};

struct PowerFlowSolution {
  Eigen::VectorXd vm;
  Eigen::VectorXd va;
  double slack_p = 0.0;
  double slack_q = 0.0;
  double total_loss_p = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  double max_mismatch = 0.0;
  std::vector<BranchFlow> branch_flows;
};

// Calculated injections P_k, Q_k for the given voltages.
InjectionVector calculated_injections(const AdmittanceMatrix& y,
                                      const Eigen::VectorXd& vm,
                                      const Eigen::VectorXd& va);

// Polar Newton-Raphson from a flat start. Returns converged = false with the
// last iterate on divergence or iteration exhaustion; throws NumericalError
// if the Jacobian is singular.
PowerFlowSolution solve(const NetworkModel& network, const AdmittanceMatrix& y,
                        const InjectionVector& inj,
                        const SolverOptions& opts = {});

std::vector<BranchFlow> branch_flows(const NetworkModel& network,
                                     const Eigen::VectorXd& vm,
                                     const Eigen::VectorXd& va);

// Sum of per-branch I^2 R losses. Throws ContractError for a non-converged
// solution.
double compute_losses(const NetworkModel& network, const AdmittanceMatrix& y,
                      const PowerFlowSolution& solution);

}  // namespace gridrl
