#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace sflow {

/// Per-mode Brownian increments on a uniform time grid t0 + j*dt,
/// j = 0..steps. One scalar Brownian motion per mode, shared by every
/// spatial point advanced under the path.
///
/// Increment (l, j) is counter_normal(seed, j, l, stream) * sqrt(dt), so
/// paths are reproducible and independent of generation order.
struct NoisePath {
  double t0 = 0.0;
  double dt = 0.0;
  std::size_t modes = 0;
  std::size_t steps = 0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::vector<double> increments;  ///< row-major [mode][step]

  double increment(std::size_t l, std::size_t j) const { return increments[l * steps + j]; }
  double t_end() const { return t0 + static_cast<double>(steps) * dt; }
  double time(std::size_t j) const { return t0 + static_cast<double>(j) * dt; }

  /// Brownian value of mode l at grid index j (cumulative sum, beta(t0) = 0).
  double cumulative(std::size_t l, std::size_t j) const;

  /// Grid index of time t; throws ConfigError when t is not on the grid
  /// (relative tolerance 1e-9 of dt) or outside [t0, t_end].
  std::size_t index_of(double t, const char* what) const;

  static NoisePath generate(std::size_t modes, std::size_t steps, double dt, std::uint64_t seed,
                            std::uint64_t stream = 0, double t0 = 0.0);
  static NoisePath zeros(std::size_t modes, std::size_t steps, double dt, double t0 = 0.0);
};

}  // namespace sflow
