#include "sflow/trajectory.hpp"

namespace sflow {

Vec FlowTrajectory::position(std::size_t k, std::size_t p) const {
  Vec x(dim);
  const std::size_t base = (k * points.size() + p) * dim;
  for (int i = 0; i < dim; ++i) x[i] = positions[base + i];
  return x;
}

void FlowTrajectory::set_position(std::size_t k, std::size_t p, const Vec& x) {
  const std::size_t base = (k * points.size() + p) * dim;
  for (int i = 0; i < dim; ++i) positions[base + i] = x[i];
}

Mat FlowTrajectory::jacobian(std::size_t k, std::size_t p) const {
  Mat m(dim, dim);
  const std::size_t base = (k * points.size() + p) * dim * dim;
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) m(i, j) = jacobians[base + i * dim + j];
  }
  return m;
}

void FlowTrajectory::set_jacobian(std::size_t k, std::size_t p, const Mat& m) {
  const std::size_t base = (k * points.size() + p) * dim * dim;
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) jacobians[base + i * dim + j] = m(i, j);
  }
}

void FlowTrajectory::allocate(bool with_jacobians) {
  positions.assign(times.size() * points.size() * dim, 0.0);
  if (with_jacobians) {
    jacobians.assign(times.size() * points.size() * dim * dim, 0.0);
  } else {
    jacobians.clear();
  }
}

}  // namespace sflow
