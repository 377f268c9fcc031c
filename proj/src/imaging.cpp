#include "sflow/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "sflow/control_flow.hpp"
#include "sflow/errors.hpp"
#include "sflow/flow_sim.hpp"
#include "sflow/lbfgs.hpp"
#include "sflow/noise.hpp"
#include "sflow/philox.hpp"

namespace sflow {
namespace {

// ---------------------------------------------------------------------------
// Templates

class ConstantTemplate final : public Template {
 public:
  ConstantTemplate(int dim, double c) : dim_(dim), c_(c) {}
  int dim() const override { return dim_; }
  double value(const Vec&) const override { return c_; }
  Vec gradient(const Vec&) const override { return Vec::Zero(dim_); }
  double bound() const override { return std::abs(c_); }
  std::string name() const override { return "constant"; }

 private:
  int dim_;
  double c_;
};

class AffineTemplate final : public Template {
 public:
  AffineTemplate(double a0, Vec slope) : a0_(a0), slope_(std::move(slope)) {}
  int dim() const override { return static_cast<int>(slope_.size()); }
  double value(const Vec& x) const override { return a0_ + slope_.dot(x); }
  Vec gradient(const Vec&) const override { return slope_; }
  double bound() const override { return std::abs(a0_) + slope_.cwiseAbs().sum(); }
  std::string name() const override { return "affine"; }

 private:
  double a0_;
  Vec slope_;
};

class GaussianTemplate final : public Template {
 public:
  GaussianTemplate(Vec center, double width, double height, double base)
      : center_(std::move(center)), width_(width), height_(height), base_(base) {}
  int dim() const override { return static_cast<int>(center_.size()); }
  double value(const Vec& x) const override {
    return base_ + height_ * std::exp(-(x - center_).squaredNorm() / (2.0 * width_ * width_));
  }
  Vec gradient(const Vec& x) const override {
    const Vec r = x - center_;
    const double g = height_ * std::exp(-r.squaredNorm() / (2.0 * width_ * width_));
    return (-g / (width_ * width_)) * r;
  }
  double bound() const override { return std::abs(base_) + std::abs(height_); }
  std::string name() const override { return "gaussian_blob"; }

 private:
  Vec center_;
  double width_, height_, base_;
};

class EdgeTemplate final : public Template {
 public:
  EdgeTemplate(int dim, int axis, double position, double width, double height, double base)
      : dim_(dim), axis_(axis), position_(position), width_(width), height_(height), base_(base) {}
  int dim() const override { return dim_; }
  double value(const Vec& x) const override { return base_ + height_ * sigmoid(x[axis_]); }
  Vec gradient(const Vec& x) const override {
    const double s = sigmoid(x[axis_]);
    Vec g = Vec::Zero(dim_);
    g[axis_] = height_ * s * (1.0 - s) / width_;
    return g;
  }
  double bound() const override { return std::abs(base_) + std::abs(height_); }
  std::string name() const override { return "edge"; }

 private:
  double sigmoid(double z) const { return 1.0 / (1.0 + std::exp(-(z - position_) / width_)); }
  int dim_, axis_;
  double position_, width_, height_, base_;
};

class RasterTemplate final : public Template {
 public:
  RasterTemplate(int dim, std::vector<int> n, Vec lo, Vec hi, std::vector<double> v)
      : dim_(dim), n_(std::move(n)), lo_(std::move(lo)), hi_(std::move(hi)), v_(std::move(v)) {
    bound_ = 0.0;
    for (double x : v_) bound_ = std::max(bound_, std::abs(x));
  }
  int dim() const override { return dim_; }
  double value(const Vec& x) const override {
    Cellpos c[2];
    for (int a = 0; a < dim_; ++a) c[a] = locate(a, x[a]);
    if (dim_ == 1) return (1.0 - c[0].f) * at(c[0].i, 0) + c[0].f * at(c[0].i + 1, 0);
    const double f0 = c[0].f, f1 = c[1].f;
    const int i = c[0].i, j = c[1].i;
    return (1.0 - f0) * (1.0 - f1) * at(i, j) + f0 * (1.0 - f1) * at(i + 1, j) + (1.0 - f0) * f1 * at(i, j + 1) +
           f0 * f1 * at(i + 1, j + 1);
  }
  Vec gradient(const Vec& x) const override {
    Cellpos c[2];
    for (int a = 0; a < dim_; ++a) c[a] = locate(a, x[a]);
    Vec g = Vec::Zero(dim_);
    if (dim_ == 1) {
      if (!c[0].clamped) g[0] = (at(c[0].i + 1, 0) - at(c[0].i, 0)) / c[0].h;
      return g;
    }
    const double f0 = c[0].f, f1 = c[1].f;
    const int i = c[0].i, j = c[1].i;
    if (!c[0].clamped) {
      g[0] = ((1.0 - f1) * (at(i + 1, j) - at(i, j)) + f1 * (at(i + 1, j + 1) - at(i, j + 1))) / c[0].h;
    }
    if (!c[1].clamped) {
      g[1] = ((1.0 - f0) * (at(i, j + 1) - at(i, j)) + f0 * (at(i + 1, j + 1) - at(i + 1, j))) / c[1].h;
    }
    return g;
  }
  double bound() const override { return bound_; }
  std::string name() const override { return "raster"; }

 private:
  struct Cellpos {
    int i = 0;
    double f = 0.0;
    double h = 1.0;
    bool clamped = false;
  };
  Cellpos locate(int a, double x) const {
    Cellpos c;
    c.h = (hi_[a] - lo_[a]) / static_cast<double>(n_[a] - 1);
    double s = (x - lo_[a]) / c.h;
    const double top = static_cast<double>(n_[a] - 1);
    if (s < 0.0 || s > top) {
      c.clamped = true;
      s = std::clamp(s, 0.0, top);
    }
    c.i = std::min(static_cast<int>(std::floor(s)), n_[a] - 2);
    c.f = s - c.i;
    return c;
  }
  double at(int i, int j) const { return v_[static_cast<std::size_t>(j) * n_[0] + i]; }

  int dim_;
  std::vector<int> n_;
  Vec lo_, hi_;
  std::vector<double> v_;
  double bound_;
};

// ---------------------------------------------------------------------------
// Transform functionals

class ConstantTransformFunctional final : public TransformFunctional {
 public:
  explicit ConstantTransformFunctional(double c) : c_(c) {}
  double value(const PointSet&, const PointSet&) const override { return c_; }
  void gradient(const PointSet& lattice, const PointSet&, PointSet& g) const override {
    g.assign(lattice.size(), Vec());
    for (std::size_t p = 0; p < lattice.size(); ++p) g[p] = Vec::Zero(lattice[p].size());
  }
  std::string name() const override { return "constant"; }

 private:
  double c_;
};

class IdentityDistanceFunctional final : public TransformFunctional {
 public:
  explicit IdentityDistanceFunctional(double w) : w_(w) {}
  double value(const PointSet& lattice, const PointSet& images) const override {
    if (lattice.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t p = 0; p < lattice.size(); ++p) s += (images[p] - lattice[p]).squaredNorm();
    return w_ * s / static_cast<double>(lattice.size());
  }
  void gradient(const PointSet& lattice, const PointSet& images, PointSet& g) const override {
    g.assign(lattice.size(), Vec());
    const double c = lattice.empty() ? 0.0 : 2.0 * w_ / static_cast<double>(lattice.size());
    for (std::size_t p = 0; p < lattice.size(); ++p) g[p] = c * (images[p] - lattice[p]);
  }
  std::string name() const override { return "identity_distance"; }

 private:
  double w_;
};

// ---------------------------------------------------------------------------

constexpr double kGaussNode = 0.7745966692414834;  // sqrt(3/5)
constexpr double kGaussX[3] = {-kGaussNode, 0.0, kGaussNode};
constexpr double kGaussW[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
constexpr double kEscapeSlack = 1e-9;

double overlap_volume(const Box& a, const Box& b) {
  double v = 1.0;
  for (int i = 0; i < a.dim(); ++i) {
    const double w = std::min(a.hi[i], b.hi[i]) - std::max(a.lo[i], b.lo[i]);
    if (w <= 0.0) return 0.0;
    v *= w;
  }
  return v;
}

bool in_half_open(const Box& c, const Vec& x) {
  for (int i = 0; i < c.dim(); ++i) {
    if (x[i] < c.lo[i]) return false;
    if (x[i] >= c.hi[i] && !(x[i] == c.hi[i] && c.hi[i] == 1.0)) return false;
  }
  return true;
}

void check_template_dim(const MatchProblem& problem) {
  if (!problem.templ) throw ConfigError("matching problem has no template");
}

// Cell-wise quadrature of T at transported nodes.
std::vector<double> cell_integrals(const MatchProblem& problem, const PointSet& images) {
  const auto& nodes = problem.partition.nodes();
  std::vector<double> s(problem.partition.size(), 0.0);
  for (std::size_t q = 0; q < nodes.size(); ++q) s[nodes[q].cell] += nodes[q].weight * problem.templ->value(images[q]);
  return s;
}

// Data term and its sensitivity with respect to each transported node.
double data_term(const MatchProblem& problem, Misfit misfit, const PointSet& images, PointSet* adjoints) {
  const auto& nodes = problem.partition.nodes();
  const int d = problem.basis.dim();
  if (adjoints) adjoints->assign(nodes.size(), Vec::Zero(d));
  double total = 0.0;
  if (misfit == Misfit::kField) {
    const auto y = problem.data_averages();
    for (std::size_t q = 0; q < nodes.size(); ++q) {
      const double r = problem.templ->value(images[q]) - y[nodes[q].cell];
      total += 0.5 * nodes[q].weight * r * r;
      if (adjoints) (*adjoints)[q] = (nodes[q].weight * r) * problem.templ->gradient(images[q]);
    }
    return total;
  }
  const auto data = problem.data_integrals();
  const auto s = cell_integrals(problem, images);
  std::vector<double> r(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    r[i] = data[i] - s[i];
    total += 0.5 * r[i] * r[i];
  }
  if (adjoints) {
    for (std::size_t q = 0; q < nodes.size(); ++q) {
      (*adjoints)[q] = (-r[nodes[q].cell] * nodes[q].weight) * problem.templ->gradient(images[q]);
    }
  }
  return total;
}

// Shoots the interior points, leaves the rest fixed, checks confinement.
struct Transport {
  std::vector<std::size_t> moving;  // indices into the input set
  std::optional<ControlledShooting> shooting;
  PointSet images;
};

Transport transport(const MatchProblem& problem, const ControlPath& u, const PointSet& points) {
  const Box box = problem.domain();
  Transport t;
  t.images = points;
  PointSet starts;
  for (std::size_t p = 0; p < points.size(); ++p) {
    if (points[p].size() != box.dim()) throw ConfigError("point dimension does not match the matching problem");
    if (box.interior(points[p])) {
      t.moving.push_back(p);
      starts.push_back(points[p]);
    }
  }
  t.shooting.emplace(problem.basis, u, std::move(starts));
  for (std::size_t k = 0; k < t.moving.size(); ++k) {
    for (const auto& x : t.shooting->states(k)) {
      if (!box.contains(x, kEscapeSlack)) {
        std::ostringstream os;
        os << "transported point " << t.moving[k] << " left the closed domain";
        throw IntegrityError(os.str());
      }
    }
    t.images[t.moving[k]] = t.shooting->endpoints()[k];
  }
  return t;
}

std::vector<double> pull_back(const Transport& t, const PointSet& adjoints) {
  PointSet a;
  a.reserve(t.moving.size());
  for (std::size_t k : t.moving) a.push_back(adjoints[k]);
  return t.shooting->pullback(a);
}

void check_control(const MatchProblem& problem, const ControlPath& u) {
  if (u.modes != problem.basis.num_modes() || u.steps != problem.steps ||
      std::abs(u.dt - problem.dt()) > 1e-12 * problem.dt()) {
    throw ConfigError("control does not match the matching problem grid");
  }
}

// F(h_u on lattice) + J_d(u) with gradient.
double full_objective(const MatchProblem& problem, Misfit misfit, const TransformFunctional* F,
                      const PointSet& lattice, const ControlPath& u, std::vector<double>* grad,
                      ObjectiveValue* parts) {
  const auto& nodes = problem.partition.nodes();
  PointSet points = problem.partition.node_points();
  if (F) points.insert(points.end(), lattice.begin(), lattice.end());
  const Transport t = transport(problem, u, points);

  PointSet images_nodes(t.images.begin(), t.images.begin() + static_cast<std::ptrdiff_t>(nodes.size()));
  PointSet adjoints;
  const double data = data_term(problem, misfit, images_nodes, grad ? &adjoints : nullptr);
  double fval = 0.0;
  if (F) {
    const PointSet images_lat(t.images.begin() + static_cast<std::ptrdiff_t>(nodes.size()), t.images.end());
    fval = F->value(lattice, images_lat);
    if (grad) {
      PointSet g;
      F->gradient(lattice, images_lat, g);
      adjoints.insert(adjoints.end(), g.begin(), g.end());
    }
  }
  const double reg = control_cost(u);
  if (grad) {
    *grad = pull_back(t, adjoints);
    const auto cg = control_cost_gradient(u);
    for (std::size_t k = 0; k < grad->size(); ++k) (*grad)[k] += cg[k];
  }
  if (parts) {
    parts->reg_term = reg;
    parts->data_term = data;
    parts->total = reg + data;
  }
  return fval + reg + data;
}

}  // namespace

// ---------------------------------------------------------------------------

TemplatePtr make_constant_template(int dim, double c) {
  if (dim < 1 || dim > kMaxDim) throw ConfigError("template dimension must be 1..3");
  return std::make_shared<ConstantTemplate>(dim, c);
}

TemplatePtr make_affine_template(double a0, Vec slope) {
  if (slope.size() < 1 || slope.size() > kMaxDim) throw ConfigError("template dimension must be 1..3");
  return std::make_shared<AffineTemplate>(a0, std::move(slope));
}

TemplatePtr make_gaussian_template(Vec center, double width, double height, double base) {
  if (center.size() < 1 || center.size() > kMaxDim) throw ConfigError("template dimension must be 1..3");
  if (!(width > 0.0)) throw ConfigError("gaussian template width must be positive");
  return std::make_shared<GaussianTemplate>(std::move(center), width, height, base);
}

TemplatePtr make_edge_template(int dim, int axis, double position, double width, double height, double base) {
  if (dim < 1 || dim > kMaxDim) throw ConfigError("template dimension must be 1..3");
  if (axis < 0 || axis >= dim) throw ConfigError("edge template axis out of range");
  if (!(width > 0.0)) throw ConfigError("edge template width must be positive");
  return std::make_shared<EdgeTemplate>(dim, axis, position, width, height, base);
}

TemplatePtr load_raster_template(std::istream& in) {
  int dim = 0;
  if (!(in >> dim) || (dim != 1 && dim != 2)) throw ConfigError("raster: dimension must be 1 or 2");
  std::vector<int> n(dim);
  for (int a = 0; a < dim; ++a) {
    if (!(in >> n[a]) || n[a] < 2) throw ConfigError("raster: at least 2 samples per axis required");
  }
  Vec lo(dim), hi(dim);
  for (int a = 0; a < dim; ++a) {
    if (!(in >> lo[a] >> hi[a]) || !(hi[a] > lo[a])) throw ConfigError("raster: bad extent");
  }
  std::size_t count = 1;
  for (int v : n) count *= static_cast<std::size_t>(v);
  std::vector<double> values(count);
  for (auto& v : values) {
    if (!(in >> v)) throw ConfigError("raster: expected " + std::to_string(count) + " values");
    if (!std::isfinite(v)) throw ConfigError("raster: non-finite value");
  }
  return std::make_shared<RasterTemplate>(dim, std::move(n), std::move(lo), std::move(hi), std::move(values));
}

// ---------------------------------------------------------------------------

CellPartition::CellPartition(std::vector<Box> cells, int subdivision)
    : CellPartition(std::move(cells), subdivision, {}) {}

CellPartition::CellPartition(std::vector<Box> cells, int subdivision, std::vector<int> counts)
    : cells_(std::move(cells)), subdivision_(subdivision), counts_(std::move(counts)) {
  if (cells_.empty()) throw ConfigError("partition has no cells");
  if (subdivision_ < 1) throw ConfigError("partition subdivision must be >= 1");
  dim_ = cells_.front().dim();
  if (dim_ < 1 || dim_ > kMaxDim) throw ConfigError("partition dimension must be 1..3");
  const Box unit = Box::unit(dim_);
  double total = 0.0;
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    const Box& c = cells_[i];
    if (c.dim() != dim_ || c.hi.size() != dim_) throw PartitionError("cell dimensions differ");
    if (!unit.contains(c.lo) || !unit.contains(c.hi)) throw PartitionError("cell lies outside the unit box");
    if (!((c.hi - c.lo).minCoeff() > 0.0)) throw PartitionError("cell has zero volume");
    total += c.volume();
  }
  if (std::abs(total - 1.0) > 1e-12) throw PartitionError("cells do not cover the unit box");
  if (counts_.empty()) {
    for (std::size_t i = 0; i < cells_.size(); ++i) {
      for (std::size_t k = i + 1; k < cells_.size(); ++k) {
        if (overlap_volume(cells_[i], cells_[k]) > 1e-14) throw PartitionError("cells overlap");
      }
    }
  }
  build_nodes();
}

CellPartition CellPartition::uniform(std::vector<int> counts, int subdivision) {
  const int d = static_cast<int>(counts.size());
  if (d < 1 || d > kMaxDim) throw ConfigError("partition dimension must be 1..3");
  std::size_t total = 1;
  for (int c : counts) {
    if (c < 1) throw ConfigError("cell counts must be positive");
    total *= static_cast<std::size_t>(c);
  }
  std::vector<Box> cells;
  cells.reserve(total);
  for (std::size_t k = 0; k < total; ++k) {
    Box b{Vec(d), Vec(d)};
    std::size_t r = k;
    for (int a = 0; a < d; ++a) {
      const auto i = static_cast<int>(r % static_cast<std::size_t>(counts[a]));
      r /= static_cast<std::size_t>(counts[a]);
      b.lo[a] = static_cast<double>(i) / counts[a];
      b.hi[a] = static_cast<double>(i + 1) / counts[a];
    }
    cells.push_back(std::move(b));
  }
  return CellPartition(std::move(cells), subdivision, std::move(counts));
}

void CellPartition::build_nodes() {
  nodes_.clear();
  const int per_axis = 3 * subdivision_;
  std::size_t per_cell = 1;
  for (int a = 0; a < dim_; ++a) per_cell *= static_cast<std::size_t>(per_axis);
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    const Box& box = cells_[c];
    for (std::size_t k = 0; k < per_cell; ++k) {
      QuadratureNode node;
      node.x = Vec(dim_);
      node.weight = 1.0;
      node.cell = c;
      std::size_t r = k;
      for (int a = 0; a < dim_; ++a) {
        const int idx = static_cast<int>(r % static_cast<std::size_t>(per_axis));
        r /= static_cast<std::size_t>(per_axis);
        const int sub = idx / 3;
        const int g = idx % 3;
        const double h = (box.hi[a] - box.lo[a]) / subdivision_;
        const double lo = box.lo[a] + sub * h;
        node.x[a] = lo + 0.5 * h * (1.0 + kGaussX[g]);
        node.weight *= 0.5 * h * kGaussW[g];
      }
      nodes_.push_back(std::move(node));
    }
  }
}

PointSet CellPartition::node_points() const {
  PointSet out;
  out.reserve(nodes_.size());
  for (const auto& n : nodes_) out.push_back(n.x);
  return out;
}

std::size_t CellPartition::locate(const Vec& x) const {
  if (x.size() != dim_) throw PartitionError("point dimension does not match partition");
  if (!counts_.empty()) {
    std::size_t index = 0, stride = 1;
    for (int a = 0; a < dim_; ++a) {
      if (!(x[a] >= 0.0 && x[a] <= 1.0)) throw PartitionError("point lies outside the partitioned box");
      int i = static_cast<int>(std::floor(x[a] * counts_[a]));
      i = std::min(i, counts_[a] - 1);
      // Floating floor can land one cell off near a face.
      if (x[a] < static_cast<double>(i) / counts_[a]) --i;
      else if (i + 1 < counts_[a] && x[a] >= static_cast<double>(i + 1) / counts_[a]) ++i;
      index += static_cast<std::size_t>(i) * stride;
      stride *= static_cast<std::size_t>(counts_[a]);
    }
    return index;
  }
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    if (in_half_open(cells_[c], x)) return c;
  }
  throw PartitionError("no cell contains the point");
}

DataImage::DataImage(const CellPartition& partition, std::vector<double> d) : partition_(partition), d_(std::move(d)) {
  if (d_.size() != partition_.size()) throw ConfigError("data image: one value per cell required");
}

// ---------------------------------------------------------------------------

void MatchProblem::validate(bool require_data) const {
  check_template_dim(*this);
  if (templ->dim() != basis.dim()) throw ConfigError("template and basis dimensions differ");
  if (partition.dim() != basis.dim()) throw ConfigError("partition and basis dimensions differ");
  if (steps == 0) throw ConfigError("matching problem: steps must be positive");
  if (basis.horizon() < 1.0 - 1e-12) throw ConfigError("matching problem: basis horizon must cover [0, 1]");
  if (!(eps >= 0.0)) throw ConfigError("matching problem: eps must be non-negative");
  if (basis.support()) {
    const Box unit = Box::unit(basis.dim());
    if (!unit.contains(basis.support()->lo) || !unit.contains(basis.support()->hi)) {
      throw ConfigError("basis support must lie in the unit box");
    }
  }
  if (require_data && data.size() != partition.size()) {
    std::ostringstream os;
    os << "data has " << data.size() << " entries, partition has " << partition.size() << " cells";
    throw ConfigError(os.str());
  }
}

std::vector<double> MatchProblem::data_integrals() const {
  std::vector<double> out = data;
  if (convention == DataConvention::kNormalized) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= partition.cell(i).volume();
  }
  return out;
}

std::vector<double> MatchProblem::data_averages() const {
  std::vector<double> out = data;
  if (convention == DataConvention::kUnnormalized) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] /= partition.cell(i).volume();
  }
  return out;
}

PointSet transport_points(const MatchProblem& problem, const ControlPath& u, const PointSet& points) {
  problem.validate(false);
  check_control(problem, u);
  return transport(problem, u, points).images;
}

double transport_template(const MatchProblem& problem, const ControlPath& u, const Vec& x) {
  return problem.templ->value(transport_points(problem, u, PointSet{x}).front());
}

ObjectiveValue objective_Jd(const MatchProblem& problem, const ControlPath& u, Misfit misfit,
                            std::vector<double>* grad) {
  problem.validate();
  check_control(problem, u);
  ObjectiveValue out;
  full_objective(problem, misfit, nullptr, {}, u, grad, &out);
  return out;
}

TransformFunctionalPtr make_constant_transform_functional(double c) {
  return std::make_shared<ConstantTransformFunctional>(c);
}

TransformFunctionalPtr make_identity_distance_functional(double weight) {
  return std::make_shared<IdentityDistanceFunctional>(weight);
}

MatchResult minimize_with_functional(const MatchProblem& problem, const TransformFunctional* F,
                                     const PointSet& lattice, const MatchOptions& options) {
  problem.validate();
  if (options.multistart < 1) throw ConfigError("multistart must be >= 1");
  const std::size_t L = problem.basis.num_modes();
  LbfgsOptions lo;
  lo.grad_tol = options.grad_tol;
  lo.max_iterations = options.max_iterations;

  MatchResult best;
  bool have = false;
  for (int s = 0; s < options.multistart; ++s) {
    ControlPath u = ControlPath::zeros(L, problem.steps, problem.dt());
    u.id = "u_star";
    if (s > 0) {
      for (std::size_t l = 0; l < L; ++l) {
        for (std::size_t j = 0; j < problem.steps; ++j) {
          u.at(l, j) = options.init_scale * counter_normal(options.seed, static_cast<std::uint32_t>(j),
                                                           static_cast<std::uint32_t>(l),
                                                           static_cast<std::uint64_t>(s));
        }
      }
    }
    const LbfgsResult r = minimize_lbfgs(
        [&](const std::vector<double>& x, std::vector<double>& g) {
          ControlPath trial = u;
          trial.values = x;
          return full_objective(problem, options.misfit, F, lattice, trial, &g, nullptr);
        },
        u.values, lo);
    if (!have || r.f < best.objective) {
      have = true;
      u.values = r.x;
      best.u_star = u;
      best.objective = r.f;
      best.grad_norm = r.grad_norm;
      best.converged = r.converged;
    }
  }
  ObjectiveValue parts;
  full_objective(problem, options.misfit, F, lattice, best.u_star, nullptr, &parts);
  best.data_term = parts.data_term;
  best.reg_term = parts.reg_term;
  return best;
}

MatchResult solve_match(const MatchProblem& problem, const MatchOptions& options) {
  MatchResult r = minimize_with_functional(problem, nullptr, {}, options);
  if (options.hmap_per_axis >= 2) {
    const PointSet grid = make_box_lattice(problem.domain(), options.hmap_per_axis);
    const PointSet images = transport_points(problem, r.u_star, grid);
    r.h_map.reserve(grid.size());
    for (std::size_t p = 0; p < grid.size(); ++p) r.h_map.emplace_back(grid[p], images[p]);
  }
  return r;
}

std::vector<double> synthesize_data(const MatchProblem& problem, const ControlPath* u_true, double eps,
                                    std::uint64_t seed) {
  problem.validate(false);
  if (!(eps >= 0.0)) throw ConfigError("synthesize_data: eps must be non-negative");
  const PointSet nodes = problem.partition.node_points();
  PointSet images;
  if (u_true) {
    check_control(problem, *u_true);
    images = transport(problem, *u_true, nodes).images;
  } else {
    const NoisePath noise = NoisePath::generate(problem.basis.num_modes(), problem.steps, problem.dt(), seed, 0);
    images = terminal_positions(problem.basis, nullptr, eps, nodes, 0.0, 1.0, noise);
  }
  std::vector<double> d = cell_integrals(problem, images);
  // Observation noise uses a stream disjoint from every flow-noise stream.
  constexpr std::uint64_t kObservationStream = std::uint64_t{1} << 63;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (problem.convention == DataConvention::kNormalized) d[i] /= problem.partition.cell(i).volume();
    if (eps > 0.0) d[i] += std::sqrt(eps) * counter_normal(seed, static_cast<std::uint32_t>(i), 0, kObservationStream);
  }
  return d;
}

LambdaCache compute_lambda_d(const MatchProblem& problem, const MatchOptions& options) {
  const MatchResult r = minimize_with_functional(problem, nullptr, {}, options);
  return LambdaCache{r.objective, r.u_star, options.misfit};
}

double rate_Id(const MatchProblem& problem, const ControlPath& u, const LambdaCache* cache) {
  if (!cache) throw std::logic_error("rate_Id: lambda_d cache must be computed first");
  return objective_Jd(problem, u, cache->misfit).total - cache->lambda;
}

PointSet interior_lattice(int dim, int per_axis) {
  if (dim < 1 || dim > kMaxDim || per_axis < 1) throw ConfigError("interior lattice: bad size");
  std::size_t total = 1;
  for (int a = 0; a < dim; ++a) total *= static_cast<std::size_t>(per_axis);
  PointSet out;
  out.reserve(total);
  for (std::size_t k = 0; k < total; ++k) {
    Vec x(dim);
    std::size_t r = k;
    for (int a = 0; a < dim; ++a) {
      x[a] = (static_cast<double>(r % static_cast<std::size_t>(per_axis)) + 0.5) / per_axis;
      r /= static_cast<std::size_t>(per_axis);
    }
    out.push_back(std::move(x));
  }
  return out;
}

PosteriorReport posterior_laplace_check(const MatchProblem& problem, const TransformFunctional& F,
                                        const std::vector<double>& eps_list, std::size_t n_samples,
                                        std::uint64_t seed, const PosteriorOptions& options, Execution exec) {
  problem.validate();
  if (eps_list.empty()) throw ConfigError("posterior check: eps list is empty");
  for (double e : eps_list) {
    if (!(e > 0.0)) throw ConfigError("posterior check: eps values must be positive");
  }
  if (n_samples < 100) throw ConfigError("posterior check: n_samples must be >= 100");

  const PointSet lattice = interior_lattice(problem.basis.dim(), options.lattice_per_axis);
  MatchOptions mo = options.match;
  mo.misfit = Misfit::kCellSum;

  PosteriorReport report;
  const MatchResult with_f = minimize_with_functional(problem, &F, lattice, mo);
  const MatchResult without = minimize_with_functional(problem, nullptr, {}, mo);
  report.inf_with_F = with_f.objective;
  report.lambda = without.objective;
  report.target = with_f.objective - without.objective;
  report.target_converged = with_f.converged && without.converged;

  const PointSet nodes = problem.partition.node_points();
  PointSet points = nodes;
  points.insert(points.end(), lattice.begin(), lattice.end());
  const std::size_t L = problem.basis.num_modes();

  for (double eps : eps_list) {
    struct Sample {
      double f = 0.0;
      double misfit = 0.0;
    };
    const auto samples = sample_map<Sample>(n_samples, exec, [&](std::size_t i) {
      const NoisePath noise = NoisePath::generate(L, problem.steps, problem.dt(), seed, i);
      const PointSet end = terminal_positions(problem.basis, nullptr, eps, points, 0.0, 1.0, noise);
      const PointSet node_images(end.begin(), end.begin() + static_cast<std::ptrdiff_t>(nodes.size()));
      const PointSet lat_images(end.begin() + static_cast<std::ptrdiff_t>(nodes.size()), end.end());
      return Sample{F.value(lattice, lat_images), data_term(problem, Misfit::kCellSum, node_images, nullptr)};
    });
    std::vector<double> joint(n_samples), misfit(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
      joint[i] = samples[i].f + samples[i].misfit;
      misfit[i] = samples[i].misfit;
    }
    const LogMeanExp a = laplace_functional(joint, eps);
    const LogMeanExp b = laplace_functional(misfit, eps);
    PosteriorRow row;
    row.eps = eps;
    row.term1 = a.estimate;
    row.term2 = -b.estimate;
    row.estimate = row.term1 + row.term2;
    row.target = report.target;
    row.gap = std::abs(row.estimate - row.target);
    row.ess = a.ess;
    report.rows.push_back(row);
  }
  return report;
}

ConstantScanResult match_constant_scan(const MatchProblem& problem, Misfit misfit, const TransformFunctional* F,
                                       const PointSet& lattice, std::span<const double> lo,
                                       std::span<const double> hi, int count) {
  problem.validate();
  const std::size_t L = problem.basis.num_modes();
  if (L > 3) throw SizeError("constant scan supports at most 3 modes");
  if (lo.size() != L || hi.size() != L) throw ConfigError("constant scan: one range per mode required");
  if (count < 2) throw ConfigError("constant scan: count must be >= 2");
  std::size_t total = 1;
  for (std::size_t l = 0; l < L; ++l) total *= static_cast<std::size_t>(count);
  if (total > 1000000) throw SizeError("constant scan: too many lattice points");

  ConstantScanResult best;
  best.best_value = std::numeric_limits<double>::infinity();
  std::vector<double> c(L);
  for (std::size_t k = 0; k < total; ++k) {
    std::size_t r = k;
    for (std::size_t l = 0; l < L; ++l) {
      const auto i = static_cast<double>(r % static_cast<std::size_t>(count));
      r /= static_cast<std::size_t>(count);
      c[l] = lo[l] + (hi[l] - lo[l]) * i / (count - 1);
    }
    const ControlPath u = ControlPath::constant(c, problem.steps, problem.dt());
    const double v = full_objective(problem, misfit, F, lattice, u, nullptr, nullptr);
    if (v < best.best_value) {
      best.best_value = v;
      best.best_coefficients = c;
    }
  }
  return best;
}

}  // namespace sflow
