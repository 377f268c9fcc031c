#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sflow/control_path.hpp"
#include "sflow/kernels.hpp"
#include "sflow/lbfgs.hpp"

namespace sflow {

/// Finite-point projection of the rate function: the least control cost
/// that steers the deterministic controlled flow from each start to its
/// target at time `horizon`.
struct EndpointProblem {
  BasisFamily basis;
  PointSet starts;
  PointSet targets;
  double horizon = 1.0;
  std::size_t steps = 50;
  std::vector<double> penalty_schedule{1e1, 1e2, 1e3, 1e4};
  int multistart = 5;
  double tol = 1e-6;           ///< gradient-norm tolerance
  double tol_endpoint = 1e-3;  ///< max endpoint miss for convergence
  double init_scale = 0.5;     ///< std-dev of random multistart perturbations
  std::uint64_t seed = 0;

  double dt() const { return horizon / static_cast<double>(steps); }
  /// Throws ConfigError on inconsistent sizes or horizons.
  void validate() const;
};

struct RateResult {
  double value = 0.0;          ///< control_cost(u_star)
  ControlPath u_star;
  double residual = 0.0;       ///< max_p |phi_T(start_p) - target_p|
  double grad_norm = 0.0;      ///< |grad J_pen| at the final penalty weight
  double penalized = 0.0;      ///< J_pen(u_star) at the final penalty weight
  bool converged = false;
  bool likely_unreachable = false;  ///< no start got the residual below 10 * tol_endpoint
  int best_start = 0;
};

/// J_pen(u) = cost(u) + (w/2) sum_p |phi_T(start_p) - target_p|^2, with its
/// discrete-adjoint gradient written to `grad` when non-null.
double penalized_objective(const EndpointProblem& problem, const ControlPath& u, double weight,
                           std::vector<double>* grad);

/// Penalty continuation over `penalty_schedule` from each multistart
/// initialization; returns the start with the lowest final J_pen (ties to
/// the lower start index). Starts run concurrently under OpenMP.
RateResult endpoint_rate(const EndpointProblem& problem);

struct ScanRow {
  std::vector<double> coefficients;  ///< constant-in-time control, one per mode
  double cost = 0.0;
  double residual = 0.0;
  double penalized = 0.0;  ///< cost + (w_max/2) sum |miss|^2
};

struct ScanTable {
  std::vector<ScanRow> rows;
  std::size_t best = 0;  ///< row with the lowest penalized value
  const ScanRow& best_row() const { return rows[best]; }
};

/// Exhaustive evaluation over a lattice of constant-in-time controls
/// (`count` points per mode on [lo_l, hi_l]). Upper-bound certificate for
/// endpoint_rate. Throws SizeError for more than 3 modes or 10^6 points.
ScanTable rate_lower_bound_scan(const EndpointProblem& problem, std::span<const double> lo,
                                std::span<const double> hi, int count);

}  // namespace sflow
