#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sflow/types.hpp"

namespace sflow {

/// A time-dependent velocity field R^d x [0,T] -> R^d.
///
/// `gradient` returns the d x d matrix with entries d f_i / d x_j. Fields
/// that cannot provide it analytically report `has_gradient() == false`
/// and throw CapabilityError from `gradient`.
class VectorField {
 public:
  virtual ~VectorField() = default;

  virtual int dim() const = 0;
  virtual Vec value(const Vec& x, double t) const = 0;
  virtual Mat gradient(const Vec& x, double t) const;
  virtual bool has_gradient() const { return true; }
  /// Number of spatial derivatives available in closed form.
  virtual int analytic_derivatives() const { return has_gradient() ? 1 : 0; }
  virtual std::string describe() const = 0;
};

using FieldPtr = std::shared_ptr<const VectorField>;

class ZeroField final : public VectorField {
 public:
  explicit ZeroField(int dim) : dim_(dim) {}
  int dim() const override { return dim_; }
  Vec value(const Vec&, double) const override { return Vec::Zero(dim_); }
  Mat gradient(const Vec&, double) const override { return Mat::Zero(dim_, dim_); }
  int analytic_derivatives() const override { return 1000; }
  std::string describe() const override { return "zero"; }

 private:
  int dim_;
};

class ConstantField final : public VectorField {
 public:
  explicit ConstantField(Vec c) : c_(std::move(c)) {}
  int dim() const override { return static_cast<int>(c_.size()); }
  Vec value(const Vec&, double) const override { return c_; }
  Mat gradient(const Vec&, double) const override { return Mat::Zero(dim(), dim()); }
  int analytic_derivatives() const override { return 1000; }
  std::string describe() const override { return "constant"; }

 private:
  Vec c_;
};

/// f(x) = A x + c.
class LinearField final : public VectorField {
 public:
  LinearField(Mat a, Vec c);
  int dim() const override { return static_cast<int>(c_.size()); }
  Vec value(const Vec& x, double) const override { return a_ * x + c_; }
  Mat gradient(const Vec&, double) const override { return a_; }
  int analytic_derivatives() const override { return 1000; }
  std::string describe() const override { return "linear"; }

 private:
  Mat a_;
  Vec c_;
};

/// Smooth cutoff equal to 1 on the centered box spanning 90% of each side
/// of `box`, 0 on and outside the boundary, C-infinity in between.
class BoxCutoff {
 public:
  explicit BoxCutoff(Box box) : box_(std::move(box)) {}
  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;
  const Box& box() const { return box_; }

  static constexpr double kInnerFraction = 0.9;

 private:
  Box box_;
};

/// amplitude * exp(-|x - c|^2 / (2 w^2)) * chi(x) * e_axis.
class GaussianBump final : public VectorField {
 public:
  GaussianBump(Vec center, double width, double amplitude, int axis, std::optional<Box> cutoff);
  int dim() const override { return static_cast<int>(center_.size()); }
  Vec value(const Vec& x, double t) const override;
  Mat gradient(const Vec& x, double t) const override;
  std::string describe() const override;

 private:
  Vec center_;
  double width_;
  double amplitude_;
  int axis_;
  std::optional<BoxCutoff> cutoff_;
};

/// amplitude * prod_i sin(k_i pi (x_i - lo_i) / (hi_i - lo_i)) * e_axis
/// inside `box`, zero outside. Vanishes on the boundary of the box.
class SineMode final : public VectorField {
 public:
  SineMode(Box box, std::vector<int> wavenumbers, double amplitude, int axis);
  int dim() const override { return box_.dim(); }
  Vec value(const Vec& x, double t) const override;
  Mat gradient(const Vec& x, double t) const override;
  std::string describe() const override;

 private:
  Box box_;
  std::vector<int> k_;
  double amplitude_;
  int axis_;
};

/// Finite-mode realization of local characteristics (a, b): modes f_l and
/// drift b, with a(x, y, t) = sum_l f_l(x, t) f_l(y, t)^T. Immutable; cheap
/// to copy (fields are shared).
class BasisFamily {
 public:
  BasisFamily(int dim, double horizon, std::vector<FieldPtr> modes, FieldPtr drift = nullptr,
              std::optional<Box> support = std::nullopt, std::string id = "basis");

  int dim() const { return dim_; }
  double horizon() const { return horizon_; }
  std::size_t num_modes() const { return modes_.size(); }
  const std::optional<Box>& support() const { return support_; }
  const std::string& id() const { return id_; }
  const VectorField& mode_field(std::size_t l) const { return *modes_[l]; }
  const std::vector<FieldPtr>& modes() const { return modes_; }
  const FieldPtr& drift_ptr() const { return drift_; }
  const VectorField& drift_field() const { return *drift_; }

  Vec mode(std::size_t l, const Vec& x, double t) const;
  Mat mode_gradient(std::size_t l, const Vec& x, double t) const;
  Vec drift(const Vec& x, double t) const { return drift_->value(x, t); }
  Mat drift_gradient(const Vec& x, double t) const { return drift_->gradient(x, t); }

  bool has_gradients() const;
  int analytic_derivatives() const;

  /// Throws DomainError unless t lies in [0, horizon].
  void check_time(double t) const;

  /// Same modes scaled by `factor`; drift untouched.
  BasisFamily scaled_modes(double factor) const;

 private:
  int dim_;
  double horizon_;
  std::vector<FieldPtr> modes_;
  FieldPtr drift_;
  std::optional<Box> support_;
  std::string id_;
};

/// a(x, y, t) = sum_l f_l(x,t) f_l(y,t)^T.
Mat evaluate_covariance(const BasisFamily& basis, const Vec& x, const Vec& y, double t);

struct ValidationReport {
  double max_trace = 0.0;            ///< sup over samples of sum_l |f_l(x,t)|^2
  double max_trace_mismatch = 0.0;   ///< max relative |sum |f_l|^2 - tr a(x,x,t)|
  std::vector<double> mode_lipschitz;
  double drift_lipschitz = 0.0;
  double gram_min_eigenvalue = 0.0;
  double gram_max_eigenvalue = 0.0;
  int k_effective = 0;
};

ValidationReport validate_basis(const BasisFamily& basis, const PointSet& sample_grid,
                                const std::vector<double>& t_grid);

/// One mode per (center, axis) pair: amplitude * Gaussian(width) * cutoff(box) * e_axis.
BasisFamily make_gaussian_bump_basis(int dim, const PointSet& centers, double width, double amplitude,
                                     const Box& support_box, double horizon = 1.0, FieldPtr drift = nullptr);

/// Sine modes on `box` with wavenumbers 1..count per axis (tensor product
/// in 2-D/3-D), one per axis direction, amplitude scaled by k^-decay where
/// k is the largest wavenumber of the mode.
BasisFamily make_sine_basis(const Box& box, int count, double amplitude, double decay = 0.0,
                            double horizon = 1.0);

/// Evenly spaced lattice with `per_axis` points per side of `box` (endpoints included).
PointSet make_box_lattice(const Box& box, int per_axis);

}  // namespace sflow
