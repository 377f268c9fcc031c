#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "sflow/control_path.hpp"
#include "sflow/kernels.hpp"
#include "sflow/noise.hpp"
#include "sflow/trajectory.hpp"

namespace sflow {

/// Euler-Maruyama integration of the controlled noisy flow
///
///   x <- x + (b(x,t) + sum_l u_l(t) f_l(x,t)) dt + sqrt(eps) sum_l f_l(x,t) dbeta_l
///
/// for every point in `points`, all driven by the same `noise` increments.
/// With `with_jacobians` the first-variation system
///
///   J <- J + (grad b_hat dt + sqrt(eps) sum_l grad f_l dbeta_l) J,  J(t0) = I
///
/// is advanced alongside. `control` may be null (zero control); when given
/// it must share the noise time step. t0 and t1 must be noise grid times.
///
/// Throws ConfigError on misaligned grids, BlowUpError on non-finite state,
/// CapabilityError when Jacobians are requested for a basis without
/// analytic gradients.
FlowTrajectory simulate_flow(const BasisFamily& basis, const ControlPath* control, double eps,
                             const PointSet& points, double t0, double t1, const NoisePath& noise,
                             bool with_jacobians);

/// Terminal positions only; same recursion as simulate_flow without storing
/// the trajectory. This is the Monte Carlo inner kernel.
PointSet terminal_positions(const BasisFamily& basis, const ControlPath* control, double eps,
                            const PointSet& points, double t0, double t1, const NoisePath& noise);

/// Jacobian sequence J[k][p] of simulate_flow(..., with_jacobians = true).
std::vector<std::vector<Mat>> jacobian_flow(const BasisFamily& basis, const ControlPath* control, double eps,
                                            const PointSet& points, double t0, double t1,
                                            const NoisePath& noise);

/// max_p |phi_{s,u}(x_p) - phi_{t,u}(phi_{s,t}(x_p))|.
///
/// Each of the three legs is integrated with the same number of
/// Euler-Maruyama steps n = (u - s) / noise.dt over its own uniform grid,
/// with Brownian increments taken from the piecewise-linear interpolant of
/// the shared noise path. Leg step sizes therefore differ, and for
/// deterministic flows the discrepancy is first order in dt.
double check_flow_property(const BasisFamily& basis, const ControlPath* control, double eps,
                           const PointSet& points, double s, double t, double u, const NoisePath& noise);

/// Samples phi_{t0,t_k}^{-1}(y) for each lattice point y and grid time t_k,
/// by Newton iteration on the discrete forward map seeded from the nearest
/// forward sample. Jacobians of the inverse map are stored alongside.
FlowTrajectory invert_flow(const BasisFamily& basis, const ControlPath* control, double eps,
                           const PointSet& lattice, double t0, double t1, const NoisePath& noise,
                           double tol = 1e-12, int max_iter = 60);

/// Union over N = 1..n_max of a `per_ball`^d lattice on [-N, N]^d restricted
/// to the ball |x| <= N.
PointSet make_ball_lattice(int dim, int n_max, int per_ball = 16);

/// Sampled surrogate of d_m(phi, psi) = lambda_m(phi, psi) + lambda_m(phi^-1, psi^-1),
/// maximized over the shared grid times. lambda_m sums rho over multi-indices
/// |alpha| <= m (m in {0, 1}; first derivatives are Jacobian columns), and rho
/// truncates the ball sum at n_max with sups replaced by lattice maxima.
double flow_distance(const FlowTrajectory& a, const FlowTrajectory& b, const FlowTrajectory& a_inverse,
                     const FlowTrajectory& b_inverse, int m, int n_max);

/// Grid maximum form of rho for one time slice: sum_{N<=n_max} 2^-N s_N / (1 + s_N).
double truncated_rho(const PointSet& points, std::span<const double> diffs, int n_max);

/// CSV: header "time,point_id,x0..x{d-1}[,j00..j{d-1}{d-1}]", one row per (time, point).
void write_trajectory_csv(const FlowTrajectory& traj, std::ostream& out);

/// Binary dump, little-endian host layout:
///   char[4] "SFLW", u32 version (=1), u32 d, u32 P, u32 M (steps), f64 eps, u64 seed,
///   u32 flags (bit 0: jacobians present), then f64 times[M+1], f64 points[P*d],
///   f64 positions[(M+1)*P*d], and f64 jacobians[(M+1)*P*d*d] when flagged.
void write_trajectory_binary(const FlowTrajectory& traj, std::ostream& out);
FlowTrajectory read_trajectory_binary(std::istream& in);

}  // namespace sflow
