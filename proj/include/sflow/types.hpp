#pragma once

#include <Eigen/Core>
#include <vector>

namespace sflow {

/// Spatial dimension is at most 3; fixed-capacity Eigen types avoid heap
/// traffic in the inner integration loops.
inline constexpr int kMaxDim = 3;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;
using PointSet = std::vector<Vec>;

/// Closed axis-aligned box.
struct Box {
  Vec lo;
  Vec hi;

  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(const Vec& x, double slack = 0.0) const {
    for (int i = 0; i < dim(); ++i) {
      if (x[i] < lo[i] - slack || x[i] > hi[i] + slack) return false;
    }
    return true;
  }
  bool interior(const Vec& x) const {
    for (int i = 0; i < dim(); ++i) {
      if (!(x[i] > lo[i] && x[i] < hi[i])) return false;
    }
    return true;
  }
  double volume() const { return (hi - lo).prod(); }
  Vec center() const { return 0.5 * (lo + hi); }

  static Box unit(int dim) {
    return Box{Vec::Zero(dim), Vec::Ones(dim)};
  }
};

inline Vec make_vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace sflow
