#include "sflow/kernels.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>

#include "sflow/errors.hpp"

namespace sflow {

Mat VectorField::gradient(const Vec&, double) const {
  throw CapabilityError("field '" + describe() + "' has no analytic gradient");
}

LinearField::LinearField(Mat a, Vec c) : a_(std::move(a)), c_(std::move(c)) {
  if (a_.rows() != c_.size() || a_.cols() != c_.size()) {
    throw ConstructionError("linear field: matrix and offset dimensions differ");
  }
}

namespace {

// Smooth step S(s): 0 for s <= 0, 1 for s >= 1, C-infinity.
double smooth_step(double s, double* derivative) {
  if (s <= 0.0) {
    *derivative = 0.0;
    return 0.0;
  }
  if (s >= 1.0) {
    *derivative = 0.0;
    return 1.0;
  }
  const double a = std::exp(-1.0 / s);
  const double b = std::exp(-1.0 / (1.0 - s));
  const double da = a / (s * s);
  const double db = -b / ((1.0 - s) * (1.0 - s));
  const double sum = a + b;
  *derivative = (da * sum - a * (da + db)) / (sum * sum);
  return a / sum;
}

// Per-axis cutoff factor and its derivative in x.
double axis_cutoff(double x, double lo, double hi, double* derivative) {
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  const double r = std::abs(x - mid) / half;
  if (r >= 1.0) {
    *derivative = 0.0;
    return 0.0;
  }
  constexpr double inner = BoxCutoff::kInnerFraction;
  if (r <= inner) {
    *derivative = 0.0;
    return 1.0;
  }
  double ds = 0.0;
  const double s = (r - inner) / (1.0 - inner);
  const double step = smooth_step(s, &ds);
  const double sign = x >= mid ? 1.0 : -1.0;
  *derivative = -ds / (1.0 - inner) * sign / half;
  return 1.0 - step;
}

}  // namespace

double BoxCutoff::value(const Vec& x) const {
  double chi = 1.0;
  double unused = 0.0;
  for (int i = 0; i < box_.dim() && chi != 0.0; ++i) {
    chi *= axis_cutoff(x[i], box_.lo[i], box_.hi[i], &unused);
  }
  return chi;
}

Vec BoxCutoff::gradient(const Vec& x) const {
  const int d = box_.dim();
  Vec factors(d), derivs(d);
  for (int i = 0; i < d; ++i) {
    double der = 0.0;
    factors[i] = axis_cutoff(x[i], box_.lo[i], box_.hi[i], &der);
    derivs[i] = der;
  }
  Vec g(d);
  for (int i = 0; i < d; ++i) {
    double prod = derivs[i];
    for (int j = 0; j < d; ++j) {
      if (j != i) prod *= factors[j];
    }
    g[i] = prod;
  }
  return g;
}

GaussianBump::GaussianBump(Vec center, double width, double amplitude, int axis,
                           std::optional<Box> cutoff)
    : center_(std::move(center)), width_(width), amplitude_(amplitude), axis_(axis) {
  if (!(width_ > 0.0)) throw ConstructionError("gaussian bump: width must be positive");
  if (axis_ < 0 || axis_ >= dim()) throw ConstructionError("gaussian bump: axis out of range");
  if (cutoff) {
    if (cutoff->dim() != dim()) throw ConstructionError("gaussian bump: box dimension mismatch");
    if (!cutoff->contains(center_)) throw ConstructionError("gaussian bump: center outside support box");
    cutoff_.emplace(*cutoff);
  }
}

Vec GaussianBump::value(const Vec& x, double) const {
  Vec out = Vec::Zero(dim());
  const double r2 = (x - center_).squaredNorm();
  const double chi = cutoff_ ? cutoff_->value(x) : 1.0;
  if (chi == 0.0) return out;
  out[axis_] = amplitude_ * std::exp(-r2 / (2.0 * width_ * width_)) * chi;
  return out;
}

Mat GaussianBump::gradient(const Vec& x, double) const {
  const int d = dim();
  Mat g = Mat::Zero(d, d);
  const Vec diff = x - center_;
  const double gauss = amplitude_ * std::exp(-diff.squaredNorm() / (2.0 * width_ * width_));
  const double chi = cutoff_ ? cutoff_->value(x) : 1.0;
  Vec dgauss = -gauss / (width_ * width_) * diff;
  Vec row = dgauss * chi;
  if (cutoff_) row += gauss * cutoff_->gradient(x);
  g.row(axis_) = row.transpose();
  return g;
}

std::string GaussianBump::describe() const {
  std::ostringstream os;
  os << "gaussian_bump(axis=" << axis_ << ", width=" << width_ << ", amplitude=" << amplitude_ << ")";
  return os.str();
}

SineMode::SineMode(Box box, std::vector<int> wavenumbers, double amplitude, int axis)
    : box_(std::move(box)), k_(std::move(wavenumbers)), amplitude_(amplitude), axis_(axis) {
  if (static_cast<int>(k_.size()) != box_.dim()) throw ConstructionError("sine mode: one wavenumber per axis");
  if (axis_ < 0 || axis_ >= box_.dim()) throw ConstructionError("sine mode: axis out of range");
  for (int k : k_) {
    if (k < 1) throw ConstructionError("sine mode: wavenumbers must be >= 1");
  }
}

Vec SineMode::value(const Vec& x, double) const {
  const int d = dim();
  Vec out = Vec::Zero(d);
  if (!box_.contains(x)) return out;
  double prod = amplitude_;
  for (int i = 0; i < d; ++i) {
    const double s = (x[i] - box_.lo[i]) / (box_.hi[i] - box_.lo[i]);
    prod *= std::sin(k_[i] * std::numbers::pi * s);
  }
  out[axis_] = prod;
  return out;
}

Mat SineMode::gradient(const Vec& x, double) const {
  const int d = dim();
  Mat g = Mat::Zero(d, d);
  if (!box_.contains(x)) return g;
  Vec sines(d), coss(d), scale(d);
  for (int i = 0; i < d; ++i) {
    const double len = box_.hi[i] - box_.lo[i];
    const double arg = k_[i] * std::numbers::pi * (x[i] - box_.lo[i]) / len;
    sines[i] = std::sin(arg);
    coss[i] = std::cos(arg);
    scale[i] = k_[i] * std::numbers::pi / len;
  }
  for (int j = 0; j < d; ++j) {
    double prod = amplitude_ * scale[j] * coss[j];
    for (int i = 0; i < d; ++i) {
      if (i != j) prod *= sines[i];
    }
    g(axis_, j) = prod;
  }
  return g;
}

std::string SineMode::describe() const {
  std::ostringstream os;
  os << "sine(axis=" << axis_ << ", k=";
  for (std::size_t i = 0; i < k_.size(); ++i) os << (i ? "," : "") << k_[i];
  os << ", amplitude=" << amplitude_ << ")";
  return os.str();
}

BasisFamily::BasisFamily(int dim, double horizon, std::vector<FieldPtr> modes, FieldPtr drift,
                         std::optional<Box> support, std::string id)
    : dim_(dim),
      horizon_(horizon),
      modes_(std::move(modes)),
      drift_(drift ? std::move(drift) : std::make_shared<ZeroField>(dim)),
      support_(std::move(support)),
      id_(std::move(id)) {
  if (dim_ < 1 || dim_ > kMaxDim) throw ConstructionError("basis: dimension must be 1, 2 or 3");
  if (!(horizon_ > 0.0)) throw ConstructionError("basis: horizon T must be positive");
  for (const auto& m : modes_) {
    if (!m || m->dim() != dim_) throw ConstructionError("basis: mode dimension mismatch");
  }
  if (drift_->dim() != dim_) throw ConstructionError("basis: drift dimension mismatch");
  if (support_ && support_->dim() != dim_) throw ConstructionError("basis: support box dimension mismatch");
}

Vec BasisFamily::mode(std::size_t l, const Vec& x, double t) const {
  if (support_ && !support_->contains(x)) return Vec::Zero(dim_);
  return modes_[l]->value(x, t);
}

Mat BasisFamily::mode_gradient(std::size_t l, const Vec& x, double t) const {
  if (support_ && !support_->contains(x)) return Mat::Zero(dim_, dim_);
  return modes_[l]->gradient(x, t);
}

bool BasisFamily::has_gradients() const {
  if (!drift_->has_gradient()) return false;
  return std::all_of(modes_.begin(), modes_.end(), [](const FieldPtr& m) { return m->has_gradient(); });
}

int BasisFamily::analytic_derivatives() const {
  int k = drift_->analytic_derivatives();
  for (const auto& m : modes_) k = std::min(k, m->analytic_derivatives());
  return k;
}

void BasisFamily::check_time(double t) const {
  constexpr double slack = 1e-12;
  if (!(t >= -slack && t <= horizon_ * (1.0 + slack) + slack)) {
    std::ostringstream os;
    os << "time " << t << " outside [0, " << horizon_ << "]";
    throw DomainError(os.str());
  }
}

namespace {

class ScaledField final : public VectorField {
 public:
  ScaledField(FieldPtr inner, double factor) : inner_(std::move(inner)), factor_(factor) {}
  int dim() const override { return inner_->dim(); }
  Vec value(const Vec& x, double t) const override { return factor_ * inner_->value(x, t); }
  Mat gradient(const Vec& x, double t) const override { return factor_ * inner_->gradient(x, t); }
  bool has_gradient() const override { return inner_->has_gradient(); }
  int analytic_derivatives() const override { return inner_->analytic_derivatives(); }
  std::string describe() const override { return "scaled(" + inner_->describe() + ")"; }

 private:
  FieldPtr inner_;
  double factor_;
};

}  // namespace

BasisFamily BasisFamily::scaled_modes(double factor) const {
  std::vector<FieldPtr> scaled;
  scaled.reserve(modes_.size());
  for (const auto& m : modes_) scaled.push_back(std::make_shared<ScaledField>(m, factor));
  return BasisFamily(dim_, horizon_, std::move(scaled), drift_, support_, id_ + "*scaled");
}

Mat evaluate_covariance(const BasisFamily& basis, const Vec& x, const Vec& y, double t) {
  basis.check_time(t);
  const int d = basis.dim();
  Mat a = Mat::Zero(d, d);
  for (std::size_t l = 0; l < basis.num_modes(); ++l) {
    const Vec fx = basis.mode(l, x, t);
    const Vec fy = basis.mode(l, y, t);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) a(i, j) += fx[i] * fy[j];
    }
  }
  return a;
}

namespace {

double field_lipschitz(const PointSet& grid, const std::vector<double>& times,
                       const std::function<Vec(const Vec&, double)>& f) {
  double best = 0.0;
  for (double t : times) {
    std::vector<Vec> values;
    values.reserve(grid.size());
    for (const auto& x : grid) values.push_back(f(x, t));
    for (std::size_t i = 0; i < grid.size(); ++i) {
      for (std::size_t j = i + 1; j < grid.size(); ++j) {
        const double dx = (grid[i] - grid[j]).norm();
        if (dx <= 0.0) continue;
        best = std::max(best, (values[i] - values[j]).norm() / dx);
      }
    }
  }
  return best;
}

}  // namespace

ValidationReport validate_basis(const BasisFamily& basis, const PointSet& sample_grid,
                                const std::vector<double>& t_grid) {
  if (sample_grid.empty() || t_grid.empty()) throw ConfigError("validate_basis: empty sample or time grid");
  for (double t : t_grid) basis.check_time(t);

  ValidationReport report;
  report.k_effective = std::min(basis.analytic_derivatives(), 1000);
  const int d = basis.dim();
  const std::size_t n = sample_grid.size();

  for (double t : t_grid) {
    for (const auto& x : sample_grid) {
      double trace_sum = 0.0;
      for (std::size_t l = 0; l < basis.num_modes(); ++l) trace_sum += basis.mode(l, x, t).squaredNorm();
      const double trace_a = evaluate_covariance(basis, x, x, t).trace();
      report.max_trace = std::max(report.max_trace, trace_sum);
      const double scale = std::max(std::abs(trace_sum), 1e-300);
      if (trace_sum != trace_a) {
        report.max_trace_mismatch = std::max(report.max_trace_mismatch, std::abs(trace_sum - trace_a) / scale);
      }
    }

    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n * d, n * d);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        gram.block(i * d, j * d, d, d) = evaluate_covariance(basis, sample_grid[i], sample_grid[j], t);
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
    const auto& ev = solver.eigenvalues();
    const double lo = ev.minCoeff();
    const double hi = ev.maxCoeff();
    if (t == t_grid.front()) {
      report.gram_min_eigenvalue = lo;
      report.gram_max_eigenvalue = hi;
    } else {
      report.gram_min_eigenvalue = std::min(report.gram_min_eigenvalue, lo);
      report.gram_max_eigenvalue = std::max(report.gram_max_eigenvalue, hi);
    }
  }
  if (basis.num_modes() == 0) {
    report.gram_min_eigenvalue = 0.0;
    report.gram_max_eigenvalue = 0.0;
  }

  report.mode_lipschitz.reserve(basis.num_modes());
  for (std::size_t l = 0; l < basis.num_modes(); ++l) {
    report.mode_lipschitz.push_back(
        field_lipschitz(sample_grid, t_grid, [&](const Vec& x, double t) { return basis.mode(l, x, t); }));
  }
  report.drift_lipschitz =
      field_lipschitz(sample_grid, t_grid, [&](const Vec& x, double t) { return basis.drift(x, t); });
  return report;
}

BasisFamily make_gaussian_bump_basis(int dim, const PointSet& centers, double width, double amplitude,
                                     const Box& support_box, double horizon, FieldPtr drift) {
  if (!(width > 0.0)) throw ConstructionError("gaussian bump basis: width must be positive");
  if (support_box.dim() != dim) throw ConstructionError("gaussian bump basis: box dimension mismatch");
  std::vector<FieldPtr> modes;
  for (const auto& c : centers) {
    if (c.size() != dim) throw ConstructionError("gaussian bump basis: center dimension mismatch");
    if (!support_box.contains(c)) throw ConstructionError("gaussian bump basis: center outside support box");
    for (int axis = 0; axis < dim; ++axis) {
      modes.push_back(std::make_shared<GaussianBump>(c, width, amplitude, axis, support_box));
    }
  }
  return BasisFamily(dim, horizon, std::move(modes), std::move(drift), support_box, "gaussian_bumps");
}

BasisFamily make_sine_basis(const Box& box, int count, double amplitude, double decay, double horizon) {
  if (count < 1) throw ConstructionError("sine basis: count must be >= 1");
  const int d = box.dim();
  std::vector<FieldPtr> modes;
  std::vector<int> k(d, 1);
  // Odometer over wavenumber tuples in [1, count]^d.
  while (true) {
    const int kmax = *std::max_element(k.begin(), k.end());
    const double amp = amplitude * std::pow(static_cast<double>(kmax), -decay);
    for (int axis = 0; axis < d; ++axis) modes.push_back(std::make_shared<SineMode>(box, k, amp, axis));
    int i = 0;
    while (i < d && ++k[i] > count) k[i++] = 1;
    if (i == d) break;
  }
  return BasisFamily(d, horizon, std::move(modes), nullptr, box, "sine");
}

PointSet make_box_lattice(const Box& box, int per_axis) {
  if (per_axis < 1) throw ConfigError("lattice: need at least one point per axis");
  const int d = box.dim();
  PointSet pts;
  std::vector<int> idx(d, 0);
  while (true) {
    Vec x(d);
    for (int i = 0; i < d; ++i) {
      const double s = per_axis == 1 ? 0.5 : static_cast<double>(idx[i]) / (per_axis - 1);
      x[i] = box.lo[i] + s * (box.hi[i] - box.lo[i]);
    }
    pts.push_back(x);
    int i = 0;
    while (i < d && ++idx[i] >= per_axis) idx[i++] = 0;
    if (i == d) break;
  }
  return pts;
}

}  // namespace sflow
