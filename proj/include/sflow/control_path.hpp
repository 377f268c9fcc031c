#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sflow {

/// Deterministic mode coefficients u_l(t), piecewise constant on the grid
/// [j*dt, (j+1)*dt), j = 0..steps-1, starting at t = 0.
struct ControlPath {
  double dt = 0.0;
  std::size_t modes = 0;
  std::size_t steps = 0;
  std::vector<double> values;  ///< row-major [mode][step]
  std::optional<double> bound; ///< cap N on the integral of |u|^2, when set
  std::string id = "control";

  double value(std::size_t l, std::size_t j) const { return values[l * steps + j]; }
  double& at(std::size_t l, std::size_t j) { return values[l * steps + j]; }
  double horizon() const { return static_cast<double>(steps) * dt; }

  /// Coefficients of all modes on step j.
  std::vector<double> coefficients(std::size_t j) const;

  /// Step whose interval contains t; t == horizon maps to the last step.
  /// Throws DomainError outside [0, horizon].
  std::size_t step_at(double t) const;

  /// Throws ConfigError when `bound` is set and violated.
  void check_bound() const;

  ControlPath scaled(double factor) const;

  static ControlPath zeros(std::size_t modes, std::size_t steps, double dt);
  static ControlPath constant(std::span<const double> coeffs, std::size_t steps, double dt);
};

/// CSV with header "t,u1..uL" and one row (t_j, u_1(t_j), ..., u_L(t_j)) per step.
void write_control_csv(const ControlPath& u, std::ostream& out);

/// Inverse of write_control_csv. The step size is taken from the first two
/// rows (or `dt_if_single` for a one-row file); rows must be evenly spaced
/// from t = 0. Throws ConfigError on malformed input.
ControlPath read_control_csv(std::istream& in, double dt_if_single = 0.0);

}  // namespace sflow
