#pragma once

#include <vector>

#include "sflow/control_path.hpp"
#include "sflow/kernels.hpp"
#include "sflow/trajectory.hpp"

namespace sflow {

/// b_hat_u(x, t) = b(x, t) + sum_l u_l(t) f_l(x, t).
Vec controlled_drift(const BasisFamily& basis, const ControlPath& u, const Vec& x, double t);

/// Classical fourth-order Runge-Kutta integration of dx/dt = b_hat_u(x, t)
/// on the control grid between grid times t0 <= t1. The control is held
/// at its step value across all four stages. Result has eps = 0 and no
/// Jacobians.
FlowTrajectory solve_controlled_flow(const BasisFamily& basis, const ControlPath& u, const PointSet& points,
                                     double t0, double t1);

/// F^{0,u}(x, t) = int_0^t (b_u(x, s) + b(x, s)) ds at fixed x, by the RK4
/// rule applied to an x-independent right-hand side (Simpson per step; a
/// partial final step when t is off-grid).
Vec accumulate_F0u(const BasisFamily& basis, const ControlPath& u, const Vec& x, double t);

/// 1/2 int_0^T |u(s)|^2 ds, exact for piecewise-constant u.
double control_cost(const ControlPath& u);

/// Gradient of control_cost with respect to the control values.
std::vector<double> control_cost_gradient(const ControlPath& u);

/// RK4 shooting of a point set across the full control grid [0, horizon],
/// keeping the step states so that the discrete adjoint can pull terminal
/// sensitivities back onto the control values.
class ControlledShooting {
 public:
  ControlledShooting(const BasisFamily& basis, const ControlPath& u, PointSet starts);

  const PointSet& endpoints() const { return endpoints_; }
  /// States of point p at every grid time.
  const PointSet& states(std::size_t p) const { return states_[p]; }

  /// Given dPhi/dz_p for each endpoint z_p, returns dPhi/du laid out like
  /// ControlPath::values. Exact derivative of the implemented recursion.
  std::vector<double> pullback(const PointSet& terminal_adjoints) const;

 private:
  BasisFamily basis_;
  ControlPath u_;
  PointSet starts_;
  std::vector<PointSet> states_;  // [point][step]
  PointSet endpoints_;
};

}  // namespace sflow
