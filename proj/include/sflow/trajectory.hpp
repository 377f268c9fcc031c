#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sflow/types.hpp"

namespace sflow {

/// Positions (and optionally first-order Jacobians) of P points at M+1
/// grid times under a flow.
struct FlowTrajectory {
  int dim = 0;
  PointSet points;
  std::vector<double> times;
  std::vector<double> positions;  ///< [(time * P + point) * d + i]
  std::vector<double> jacobians;  ///< [((time * P + point) * d + i) * d + j], empty when absent
  double eps = 0.0;
  std::string basis_id;
  std::string control_id;
  std::uint64_t seed = 0;

  std::size_t num_points() const { return points.size(); }
  std::size_t num_times() const { return times.size(); }
  bool has_jacobians() const { return !jacobians.empty(); }

  Vec position(std::size_t k, std::size_t p) const;
  void set_position(std::size_t k, std::size_t p, const Vec& x);
  Mat jacobian(std::size_t k, std::size_t p) const;
  void set_jacobian(std::size_t k, std::size_t p, const Mat& j);

  /// Allocates storage for `times.size()` rows of `points.size()` points.
  void allocate(bool with_jacobians);
};

}  // namespace sflow
