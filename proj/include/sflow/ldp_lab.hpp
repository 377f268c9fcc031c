#pragma once

#include <cstdint>
#include <vector>

#include "sflow/control_path.hpp"
#include "sflow/functionals.hpp"
#include "sflow/kernels.hpp"
#include "sflow/montecarlo.hpp"

namespace sflow {

struct LaplaceEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  double min_F = 0.0;  ///< sample minimum of F
  double max_F = 0.0;
  double ess = 0.0;
  std::size_t n = 0;
};

/// F evaluated on the terminal endpoints of `n_samples` independent flows
/// (sample i uses noise stream i of `seed`), integrated from 0 to
/// `horizon` with step `dt` and zero control.
std::vector<double> sample_endpoint_functional(const BasisFamily& basis, double eps, std::size_t n_samples,
                                               const EndpointFunctional& F, const PointSet& points,
                                               double horizon, double dt, std::uint64_t seed,
                                               Execution exec = Execution::kParallel);

/// -eps log mean exp(-F(X^eps_T)/eps) with its delta-method standard error.
LaplaceEstimate laplace_estimate(const BasisFamily& basis, double eps, std::size_t n_samples,
                                 const EndpointFunctional& F, const PointSet& points, double horizon, double dt,
                                 std::uint64_t seed, Execution exec = Execution::kParallel);

struct VariationalOptions {
  std::size_t steps = 50;
  int multistart = 3;
  double init_scale = 0.5;
  double grad_tol = 1e-8;
  std::uint64_t seed = 0;
};

struct VariationalResult {
  double value = 0.0;       ///< F(endpoint) + cost(u)
  double functional = 0.0;  ///< F part
  double cost = 0.0;
  ControlPath u;
  double grad_norm = 0.0;
  bool converged = false;
};

/// inf over piecewise-constant u of F(phi^{0,u}_T(points)) + cost(u), by
/// L-BFGS with discrete-adjoint gradients, best of `multistart` starts.
VariationalResult variational_value(const BasisFamily& basis, const EndpointFunctional& F, const PointSet& points,
                                    double horizon, const VariationalOptions& options = {});

struct ConvergenceRow {
  double eps = 0.0;
  double estimate = 0.0;
  double std_error = 0.0;
  double gap = 0.0;  ///< |estimate - variational value|
  double min_F = 0.0;
  double max_F = 0.0;
};

struct ConvergenceReport {
  double variational = 0.0;
  bool variational_converged = false;
  std::vector<ConvergenceRow> rows;
};

/// One row per eps (strictly decreasing, at least 3 entries). Reports only;
/// asserts nothing.
ConvergenceReport ldp_convergence_report(const BasisFamily& basis, const EndpointFunctional& F,
                                         const PointSet& points, double horizon, double dt,
                                         const std::vector<double>& eps_list, std::size_t n_samples,
                                         std::uint64_t seed, const VariationalOptions& options = {},
                                         Execution exec = Execution::kParallel);

/// Flattens a point set into (x_0, x_1, ...).
std::vector<double> flatten(const PointSet& points);

}  // namespace sflow
