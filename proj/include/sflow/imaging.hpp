#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sflow/control_path.hpp"
#include "sflow/kernels.hpp"
#include "sflow/montecarlo.hpp"

namespace sflow {

// ---------------------------------------------------------------------------
// Templates

/// Bounded scalar image on the closed unit box (p = 1).
class Template {
 public:
  virtual ~Template() = default;
  virtual int dim() const = 0;
  virtual double value(const Vec& x) const = 0;
  virtual Vec gradient(const Vec& x) const = 0;
  /// Declared bound on |T| over the closed unit box.
  virtual double bound() const = 0;
  virtual std::string name() const = 0;
};

using TemplatePtr = std::shared_ptr<const Template>;

TemplatePtr make_constant_template(int dim, double c);
/// T(x) = a0 + slope . x
TemplatePtr make_affine_template(double a0, Vec slope);
/// T(x) = base + height * exp(-|x - center|^2 / (2 width^2))
TemplatePtr make_gaussian_template(Vec center, double width, double height, double base = 0.0);
/// T(x) = base + height / (1 + exp(-(x_axis - position) / width)): a smooth edge.
TemplatePtr make_edge_template(int dim, int axis, double position, double width, double height, double base = 0.0);

/// Raster from plain text: header "dim nx [ny] x0 x1 [y0 y1]" then nx (or
/// nx*ny, row-major with x fastest) values. Linear/bilinear interpolation,
/// clamped to the raster extent.
TemplatePtr load_raster_template(std::istream& in);

// ---------------------------------------------------------------------------
// Cells and quadrature

struct QuadratureNode {
  Vec x;
  double weight = 0.0;
  std::size_t cell = 0;
};

/// Disjoint axis-aligned cells covering the open unit box, each with a
/// tensor-product 3-point Gauss-Legendre rule (optionally on `subdivision`^d
/// sub-cells).
class CellPartition {
 public:
  CellPartition(std::vector<Box> cells, int subdivision = 1);

  /// counts[i] equal cells along axis i.
  static CellPartition uniform(std::vector<int> counts, int subdivision = 1);

  int dim() const { return dim_; }
  std::size_t size() const { return cells_.size(); }
  const Box& cell(std::size_t i) const { return cells_[i]; }
  const std::vector<QuadratureNode>& nodes() const { return nodes_; }
  PointSet node_points() const;
  int subdivision() const { return subdivision_; }
  const std::vector<int>& grid_counts() const { return counts_; }

  /// Index of the cell containing x (half-open cells, upper faces of the
  /// unit box included). Throws PartitionError when no cell contains x.
  std::size_t locate(const Vec& x) const;

  CellPartition refined(int subdivision) const { return CellPartition(cells_, subdivision, counts_); }

 private:
  CellPartition(std::vector<Box> cells, int subdivision, std::vector<int> counts);
  void build_nodes();

  int dim_ = 0;
  std::vector<Box> cells_;
  int subdivision_ = 1;
  std::vector<int> counts_;  // non-empty for uniform grids
  std::vector<QuadratureNode> nodes_;
};

/// Y_d(x) = d_i for x in X_i.
class DataImage {
 public:
  DataImage(const CellPartition& partition, std::vector<double> d);
  double operator()(const Vec& x) const { return d_[partition_.locate(x)]; }

 private:
  const CellPartition& partition_;
  std::vector<double> d_;
};

// ---------------------------------------------------------------------------
// Problem

/// kUnnormalized: d_i ~ integral of T(h) over X_i (the noise-model form).
/// kNormalized: d_i ~ that integral divided by vol(X_i).
enum class DataConvention { kUnnormalized, kNormalized };

/// kField: 1/2 int_O |T(h(x)) - Y_d(x)|^2 dx, Y_d built from cell averages.
/// kCellSum: 1/2 sum_i |d_i - int_{X_i} T(h(y)) dy|^2 with d_i as integrals.
enum class Misfit { kField, kCellSum };

struct MatchProblem {
  TemplatePtr templ;
  CellPartition partition;
  std::vector<double> data;
  BasisFamily basis;  ///< modes phi_l, H-orthonormal by convention, vanishing on the boundary of O
  double eps = 0.0;
  std::size_t steps = 20;  ///< control/transport grid on [0, 1]
  DataConvention convention = DataConvention::kUnnormalized;

  Box domain() const { return Box::unit(basis.dim()); }
  double dt() const { return 1.0 / static_cast<double>(steps); }
  /// Throws ConfigError on inconsistent pieces.
  void validate(bool require_data = true) const;
  /// Cell integrals and cell averages implied by `data` under `convention`.
  std::vector<double> data_integrals() const;
  std::vector<double> data_averages() const;
};

/// h_u(x) = eta_{0,1}(x) for each point (points outside O stay fixed).
/// Throws IntegrityError when a trajectory leaves the closed box by more than 1e-9.
PointSet transport_points(const MatchProblem& problem, const ControlPath& u, const PointSet& points);

/// T(h_u(x)).
double transport_template(const MatchProblem& problem, const ControlPath& u, const Vec& x);

struct ObjectiveValue {
  double total = 0.0;
  double reg_term = 0.0;   ///< control_cost(u)
  double data_term = 0.0;
};

/// J_d(u) = reg_term + data_term; gradient by discrete adjoint when `grad` is non-null.
ObjectiveValue objective_Jd(const MatchProblem& problem, const ControlPath& u, Misfit misfit = Misfit::kField,
                            std::vector<double>* grad = nullptr);

// ---------------------------------------------------------------------------
// Functionals of transformations sampled on a lattice

class TransformFunctional {
 public:
  virtual ~TransformFunctional() = default;
  /// `images[p]` = h(lattice[p]).
  virtual double value(const PointSet& lattice, const PointSet& images) const = 0;
  virtual void gradient(const PointSet& lattice, const PointSet& images, PointSet& g) const = 0;
  virtual std::string name() const = 0;
};

using TransformFunctionalPtr = std::shared_ptr<const TransformFunctional>;

TransformFunctionalPtr make_constant_transform_functional(double c);
/// F(h) = weight * mean_p |h(x_p) - x_p|^2.
TransformFunctionalPtr make_identity_distance_functional(double weight);

// ---------------------------------------------------------------------------
// Solvers

struct MatchOptions {
  Misfit misfit = Misfit::kField;
  int multistart = 3;
  double init_scale = 0.5;
  double grad_tol = 1e-9;
  int max_iterations = 3000;
  std::uint64_t seed = 0;
  int hmap_per_axis = 21;
};

struct MatchResult {
  ControlPath u_star;
  double objective = 0.0;
  double data_term = 0.0;
  double reg_term = 0.0;
  std::vector<std::pair<Vec, Vec>> h_map;  ///< (input point, h(input point)) on an output lattice
  double grad_norm = 0.0;
  bool converged = false;
};

MatchResult solve_match(const MatchProblem& problem, const MatchOptions& options = {});

/// inf over u of F(h_u on lattice) + J_d(u), same machinery as solve_match.
/// With F null this is lambda_d.
MatchResult minimize_with_functional(const MatchProblem& problem, const TransformFunctional* F,
                                     const PointSet& lattice, const MatchOptions& options);

/// d_i = int_{X_i} T(X(x)) dx (divided by vol(X_i) under kNormalized) + sqrt(eps) xi_i.
/// X = h_{u_true} when `u_true` is given, otherwise a prior draw of the
/// stochastic flow at noise level `eps` (Euler-Maruyama, zero drift).
std::vector<double> synthesize_data(const MatchProblem& problem, const ControlPath* u_true, double eps,
                                    std::uint64_t seed);

struct LambdaCache {
  double lambda = 0.0;
  ControlPath argmin;
  Misfit misfit = Misfit::kField;
};

LambdaCache compute_lambda_d(const MatchProblem& problem, const MatchOptions& options = {});

/// I_d evaluated at h_u: J_d(u) - lambda_d. Throws std::logic_error when
/// `cache` is null.
double rate_Id(const MatchProblem& problem, const ControlPath& u, const LambdaCache* cache);

struct PosteriorRow {
  double eps = 0.0;
  double term1 = 0.0;     ///< -eps log mean exp(-(F + misfit)/eps)
  double term2 = 0.0;     ///< +eps log mean exp(-misfit/eps)
  double estimate = 0.0;  ///< term1 + term2
  double target = 0.0;
  double gap = 0.0;
  double ess = 0.0;
};

struct PosteriorReport {
  double target = 0.0;       ///< inf{F + J} - inf{J} with the cell-sum misfit
  double inf_with_F = 0.0;
  double lambda = 0.0;
  bool target_converged = false;
  std::vector<PosteriorRow> rows;
};

struct PosteriorOptions {
  int lattice_per_axis = 9;  ///< interior lattice on which F sees h
  MatchOptions match;        ///< for the variational target (misfit forced to kCellSum)
};

/// Monte Carlo over prior draws of the two Laplace terms of the posterior
/// ratio, against the variational target. Sample i of every eps uses
/// noise stream i of `seed`.
PosteriorReport posterior_laplace_check(const MatchProblem& problem, const TransformFunctional& F,
                                        const std::vector<double>& eps_list, std::size_t n_samples,
                                        std::uint64_t seed, const PosteriorOptions& options = {},
                                        Execution exec = Execution::kParallel);

/// Interior lattice of the unit box: per_axis points per side at (k + 1/2) / per_axis.
PointSet interior_lattice(int dim, int per_axis);

struct ConstantScanResult {
  std::vector<double> best_coefficients;
  double best_value = 0.0;
};

/// Minimum of F + J over constant-in-time controls on a lattice (at most
/// 3 modes); a cross-check for the adjoint optimizer.
ConstantScanResult match_constant_scan(const MatchProblem& problem, Misfit misfit, const TransformFunctional* F,
                                       const PointSet& lattice, std::span<const double> lo,
                                       std::span<const double> hi, int count);

}  // namespace sflow
