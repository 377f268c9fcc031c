#pragma once

#include <memory>
#include <vector>

#include "sflow/kernels.hpp"

namespace sflow::testing {

// f_1 = v (constant), no drift.
inline BasisFamily constant_mode_basis(const Vec& v, double horizon = 1.0) {
  return BasisFamily(static_cast<int>(v.size()), horizon, {std::make_shared<ConstantField>(v)});
}

// d = 1, f_1(x) = x.
inline BasisFamily linear_mode_basis(double horizon = 1.0) {
  Mat a(1, 1);
  a(0, 0) = 1.0;
  return BasisFamily(1, horizon, {std::make_shared<LinearField>(a, Vec::Zero(1))});
}

// Evenly spaced bump centers on the unit interval, away from the edges.
inline BasisFamily bump_basis_1d(int count, double width, double amplitude) {
  PointSet centers;
  for (int i = 0; i < count; ++i) centers.push_back(make_vec({(i + 0.5) / count}));
  return make_gaussian_bump_basis(1, centers, width, amplitude, Box::unit(1));
}

inline BasisFamily bump_basis_2d(int per_axis, double width, double amplitude) {
  PointSet centers;
  for (int i = 0; i < per_axis; ++i) {
    for (int j = 0; j < per_axis; ++j) centers.push_back(make_vec({(i + 0.5) / per_axis, (j + 0.5) / per_axis}));
  }
  return make_gaussian_bump_basis(2, centers, width, amplitude, Box::unit(2));
}

}  // namespace sflow::testing
