#include "builders.hpp"

#include <cmath>
#include <fstream>

namespace sflow::cli {
namespace {

[[noreturn]] void bad(const ConfigReader::Node& node, const std::string& key, const std::string& what) {
  throw ConfigError("config key '" + dotted(node.key_path(key)) + "': " + what);
}

Box read_box(const ConfigReader::Node& node, int dim) {
  Box b{node.vec("lo"), node.vec("hi")};
  if (b.lo.size() != dim || b.hi.size() != dim) bad(node, "lo", "box dimension does not match basis dimension");
  return b;
}

Box optional_box(const ConfigReader::Node& parent, const std::string& key, int dim) {
  if (!parent.has(key)) {
    const Box unit = Box::unit(dim);
    auto t = parent.table(key);
    t.numbers("lo", std::vector<double>(unit.lo.data(), unit.lo.data() + dim));
    t.numbers("hi", std::vector<double>(unit.hi.data(), unit.hi.data() + dim));
    return unit;
  }
  return read_box(parent.child(key), dim);
}

FieldPtr build_field(const ConfigReader::Node& node, int dim) {
  const std::string type = node.text("type");
  if (type == "zero") return std::make_shared<ZeroField>(dim);
  if (type == "constant") {
    Vec v = node.vec("value");
    if (v.size() != dim) bad(node, "value", "dimension does not match basis dimension");
    return std::make_shared<ConstantField>(std::move(v));
  }
  if (type == "linear") {
    Mat a = node.matrix("matrix");
    Vec c = node.has("offset") ? node.vec("offset") : Vec::Zero(dim);
    if (!node.has("offset")) node.numbers("offset", std::vector<double>(static_cast<std::size_t>(dim), 0.0));
    if (a.rows() != dim || c.size() != dim) bad(node, "matrix", "dimension does not match basis dimension");
    return std::make_shared<LinearField>(std::move(a), std::move(c));
  }
  bad(node, "type", "unknown field type '" + type + "' (zero, constant, linear)");
}

}  // namespace

BasisFamily build_basis(const ConfigReader::Node& node) {
  const auto dim_raw = node.integer("dim");
  if (dim_raw < 1 || dim_raw > kMaxDim) bad(node, "dim", "must be 1, 2 or 3");
  const int dim = static_cast<int>(dim_raw);
  const double horizon = node.number("T", 1.0);
  if (!(horizon > 0.0)) bad(node, "T", "must be positive");
  const std::string id = node.text("id", "basis");

  FieldPtr drift;
  if (node.has("drift")) {
    drift = build_field(node.child("drift"), dim);
  } else {
    node.table("drift").text("type", "zero");
    drift = std::make_shared<ZeroField>(dim);
  }

  const auto modes = node.child("modes");
  const std::string type = modes.text("type");
  if (type == "none") return BasisFamily(dim, horizon, {}, drift, std::nullopt, id);
  if (type == "fields") {
    std::vector<FieldPtr> fields;
    for (const auto& f : modes.children("fields")) fields.push_back(build_field(f, dim));
    return BasisFamily(dim, horizon, std::move(fields), drift, std::nullopt, id);
  }
  if (type == "gaussian_bumps") {
    const PointSet centers = modes.points("centers");
    const double width = modes.number("width");
    const double amplitude = modes.number("amplitude", 1.0);
    const Box support = optional_box(modes, "support", dim);
    const BasisFamily b = make_gaussian_bump_basis(dim, centers, width, amplitude, support, horizon, drift);
    return BasisFamily(dim, horizon, b.modes(), drift, support, id);
  }
  if (type == "sine") {
    const auto count = modes.integer("count");
    const double amplitude = modes.number("amplitude", 1.0);
    const double decay = modes.number("decay", 0.0);
    const Box box = optional_box(modes, "box", dim);
    const BasisFamily b = make_sine_basis(box, static_cast<int>(count), amplitude, decay, horizon);
    return BasisFamily(dim, horizon, b.modes(), drift, box, id);
  }
  bad(modes, "type", "unknown mode constructor '" + type + "' (none, fields, gaussian_bumps, sine)");
}

bool build_control(const ConfigReader::Node& node, double dt, double t_end, std::size_t modes, ControlPath& out) {
  const std::string type = node.text("type", "zero");
  const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
  if (type == "zero") return false;
  if (type == "constant") {
    const auto c = node.numbers("coefficients");
    if (c.size() != modes) bad(node, "coefficients", "one coefficient per mode required");
    out = ControlPath::constant(c, steps, dt);
    return true;
  }
  if (type == "csv") {
    const std::string path = node.text("path");
    std::ifstream in(path);
    if (!in) bad(node, "path", "cannot open '" + path + "'");
    out = read_control_csv(in, dt);
    if (out.modes != modes) bad(node, "path", "control file has the wrong number of modes");
    if (std::abs(out.dt - dt) > 1e-12 * dt) bad(node, "path", "control step does not match dt");
    return true;
  }
  bad(node, "type", "unknown control type '" + type + "' (zero, constant, csv)");
}

FunctionalPtr build_endpoint_functional(const ConfigReader::Node& node) {
  const std::string type = node.text("type");
  if (type == "constant") return make_constant_functional(node.number("value"));
  if (type == "quadratic") {
    return make_quadratic_functional(node.numbers("center"), node.number("weight", 1.0), node.number("offset", 0.0));
  }
  if (type == "log_quadratic") {
    return make_log_quadratic_functional(node.numbers("center"), node.number("weight", 1.0), node.number("floor", 1e-3));
  }
  bad(node, "type", "unknown functional '" + type + "' (constant, quadratic, log_quadratic)");
}

TransformFunctionalPtr build_transform_functional(const ConfigReader::Node& node) {
  const std::string type = node.text("type");
  if (type == "zero") return make_constant_transform_functional(0.0);
  if (type == "constant") return make_constant_transform_functional(node.number("value"));
  if (type == "identity_distance") return make_identity_distance_functional(node.number("weight", 1.0));
  bad(node, "type", "unknown functional '" + type + "' (zero, constant, identity_distance)");
}

TemplatePtr build_template(const ConfigReader::Node& node, int dim) {
  const std::string type = node.text("type");
  TemplatePtr t;
  if (type == "constant") {
    t = make_constant_template(dim, node.number("value"));
  } else if (type == "affine") {
    t = make_affine_template(node.number("a0", 0.0), node.vec("slope"));
  } else if (type == "gaussian_blob") {
    t = make_gaussian_template(node.vec("center"), node.number("width"), node.number("height", 1.0),
                               node.number("base", 0.0));
  } else if (type == "edge") {
    t = make_edge_template(dim, static_cast<int>(node.integer("axis", 0)), node.number("position", 0.5),
                           node.number("width", 0.05), node.number("height", 1.0), node.number("base", 0.0));
  } else if (type == "raster") {
    const std::string path = node.text("path");
    std::ifstream in(path);
    if (!in) bad(node, "path", "cannot open '" + path + "'");
    t = load_raster_template(in);
  } else {
    bad(node, "type", "unknown template '" + type + "' (constant, affine, gaussian_blob, edge, raster)");
  }
  if (t->dim() != dim) bad(node, "type", "template dimension does not match basis dimension");
  return t;
}

MatchProblem build_match_problem(const ConfigReader::Node& node, std::uint64_t seed) {
  BasisFamily basis = build_basis(node.child("basis"));
  const int dim = basis.dim();
  TemplatePtr templ = build_template(node.child("template"), dim);
  const auto cells = node.integers("cells");
  if (static_cast<int>(cells.size()) != dim) bad(node, "cells", "one cell count per axis required");
  const auto subdivision = node.integer("subdivision", 1);
  const auto steps = node.integer("steps", 20);
  if (steps < 1) bad(node, "steps", "must be positive");
  const std::string conv = node.text("convention", "unnormalized");
  DataConvention convention;
  if (conv == "unnormalized") convention = DataConvention::kUnnormalized;
  else if (conv == "normalized") convention = DataConvention::kNormalized;
  else bad(node, "convention", "expected 'unnormalized' or 'normalized'");

  MatchProblem problem{std::move(templ), CellPartition::uniform(cells, static_cast<int>(subdivision)), {},
                       std::move(basis), node.number("eps", 0.0), static_cast<std::size_t>(steps), convention};

  const bool has_data = node.has("data");
  const bool has_synth = node.has("synthesize");
  if (has_data == has_synth) bad(node, "data", "give exactly one of 'data' or 'synthesize'");
  if (has_data) {
    problem.data = node.numbers("data");
  } else {
    const auto s = node.child("synthesize");
    const std::string source = s.text("source", "control");
    const double eps = s.number("eps", 0.0);
    const std::uint64_t data_seed = s.u64("seed", seed);
    if (source == "control") {
      const auto c = s.numbers("u_true");
      if (c.size() != problem.basis.num_modes()) bad(s, "u_true", "one coefficient per mode required");
      const ControlPath u = ControlPath::constant(c, problem.steps, problem.dt());
      problem.data = synthesize_data(problem, &u, eps, data_seed);
    } else if (source == "prior") {
      problem.data = synthesize_data(problem, nullptr, eps, data_seed);
    } else {
      bad(s, "source", "expected 'control' or 'prior'");
    }
  }
  problem.validate();
  return problem;
}

MatchOptions build_match_options(const ConfigReader::Node& node, std::uint64_t seed) {
  MatchOptions o;
  const std::string misfit = node.text("misfit", "field");
  if (misfit == "field") o.misfit = Misfit::kField;
  else if (misfit == "cell_sum") o.misfit = Misfit::kCellSum;
  else bad(node, "misfit", "expected 'field' or 'cell_sum'");
  o.multistart = static_cast<int>(node.integer("multistart", 3));
  o.init_scale = node.number("init_scale", 0.5);
  o.grad_tol = node.number("grad_tol", 1e-9);
  o.max_iterations = static_cast<int>(node.integer("max_iterations", 3000));
  o.hmap_per_axis = static_cast<int>(node.integer("hmap_per_axis", 21));
  o.seed = seed;
  if (o.multistart < 1) bad(node, "multistart", "must be >= 1");
  return o;
}

}  // namespace sflow::cli
