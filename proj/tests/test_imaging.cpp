#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "sflow/control_flow.hpp"
#include "sflow/errors.hpp"
#include "sflow/imaging.hpp"
#include "sflow/philox.hpp"
#include "support.hpp"

using namespace sflow;

namespace {

BasisFamily sine_1d(int count, double amplitude) { return make_sine_basis(Box::unit(1), count, amplitude); }

MatchProblem problem_1d(TemplatePtr t, int cells, int modes = 1, double amplitude = 2.0, std::size_t steps = 20) {
  MatchProblem p{std::move(t), CellPartition::uniform({cells}), {}, sine_1d(modes, amplitude), 0.0, steps};
  return p;
}

ControlPath const_control(std::vector<double> c, std::size_t steps) {
  return ControlPath::constant(c, steps, 1.0 / static_cast<double>(steps));
}

ControlPath random_control(std::size_t modes, std::size_t steps, std::uint64_t seed, double scale) {
  ControlPath u = ControlPath::zeros(modes, steps, 1.0 / static_cast<double>(steps));
  for (std::size_t l = 0; l < modes; ++l) {
    for (std::size_t j = 0; j < steps; ++j) u.at(l, j) = scale * counter_normal(seed, j, l, 0);
  }
  return u;
}

// RK4 at dt = 1e-5 straight from the basis, independent of the shooting code.
double fine_transport(const BasisFamily& b, const ControlPath& u, double x) {
  const int n = 100000;
  const double h = 1.0 / n;
  Vec y = make_vec({x});
  auto f = [&](const Vec& z, double t) {
    const std::size_t j = std::min(u.steps - 1, static_cast<std::size_t>(t / u.dt + 1e-12));
    Vec v = Vec::Zero(1);
    for (std::size_t l = 0; l < u.modes; ++l) v += u.value(l, j) * b.mode(l, z, t);
    return v;
  };
  for (int i = 0; i < n; ++i) {
    const double t = i * h;
    const Vec k1 = f(y, t), k2 = f(y + 0.5 * h * k1, t), k3 = f(y + 0.5 * h * k2, t), k4 = f(y + h * k3, t);
    y += (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return y[0];
}

}  // namespace

TEST_CASE("templates") {
  const auto c = make_constant_template(2, 3.0);
  CHECK(c->value(make_vec({0.1, 0.9})) == 3.0);
  CHECK(c->gradient(make_vec({0.1, 0.9})).norm() == 0.0);
  const auto a = make_affine_template(1.0, make_vec({2.0, -1.0}));
  CHECK(a->value(make_vec({0.5, 0.25})) == doctest::Approx(1.75));
  CHECK(a->bound() >= 3.0);
  const auto g = make_gaussian_template(make_vec({0.5}), 0.1, 2.0, 1.0);
  CHECK(g->value(make_vec({0.5})) == doctest::Approx(3.0));
  const auto e = make_edge_template(1, 0, 0.5, 0.05, 1.0);
  CHECK(e->value(make_vec({0.5})) == doctest::Approx(0.5));
  const double h = 1e-6;
  for (const auto& t : {g, e}) {
    const double fd = (t->value(make_vec({0.43 + h})) - t->value(make_vec({0.43 - h}))) / (2 * h);
    CHECK(t->gradient(make_vec({0.43}))[0] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("raster templates") {
  std::istringstream r1("1 3 0 1\n0 1 4\n");
  const auto t1 = load_raster_template(r1);
  CHECK(t1->dim() == 1);
  CHECK(t1->value(make_vec({0.25})) == doctest::Approx(0.5));
  CHECK(t1->value(make_vec({0.75})) == doctest::Approx(2.5));
  CHECK(t1->value(make_vec({2.0})) == doctest::Approx(4.0));
  CHECK(t1->bound() >= 4.0);
  std::istringstream r2("2 2 2 0 1 0 1\n0 1\n2 3\n");
  const auto t2 = load_raster_template(r2);
  CHECK(t2->value(make_vec({0.5, 0.5})) == doctest::Approx(1.5));
  CHECK(t2->value(make_vec({1.0, 0.0})) == doctest::Approx(1.0));
  CHECK(t2->value(make_vec({0.0, 1.0})) == doctest::Approx(2.0));
  std::istringstream short_data("1 3 0 1\n0 1\n");
  CHECK_THROWS_AS(load_raster_template(short_data), ConfigError);
  std::istringstream bad_dim("3 2 2 2 0 1 0 1 0 1\n");
  CHECK_THROWS_AS(load_raster_template(bad_dim), ConfigError);
}

TEST_CASE("partition quadrature") {
  const CellPartition p = CellPartition::uniform({3, 2});
  CHECK(p.size() == 6);
  std::vector<double> vol(p.size(), 0.0);
  for (const auto& n : p.nodes()) vol[n.cell] += n.weight;
  for (double v : vol) CHECK(v == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  // Degree 5 per axis is integrated exactly.
  double s = 0.0;
  for (const auto& n : p.nodes()) s += n.weight * std::pow(n.x[0], 5) * std::pow(n.x[1], 4);
  CHECK(s == doctest::Approx(1.0 / 30.0).epsilon(1e-13));
  const CellPartition r = p.refined(3);
  CHECK(r.nodes().size() == p.nodes().size() * 9);
  CHECK(r.size() == p.size());
}

TEST_CASE("partition validation") {
  auto box = [](double a, double b) { return Box{make_vec({a}), make_vec({b})}; };
  CHECK_THROWS_AS(CellPartition({box(0.0, 0.6)}), PartitionError);
  CHECK_THROWS_AS(CellPartition({box(0.0, 0.6), box(0.5, 1.1)}), PartitionError);
  // Volumes add up to one but the cells overlap.
  CHECK_THROWS_AS(CellPartition({box(0.0, 0.6), box(0.2, 0.6)}), PartitionError);
  CHECK_NOTHROW(CellPartition({box(0.0, 0.3), box(0.3, 1.0)}));
  CHECK_THROWS(CellPartition::uniform({0}));
}

TEST_CASE("data image lookup") {
  const CellPartition one = CellPartition::uniform({1});
  const DataImage y(one, {3.0});
  CHECK(y(make_vec({0.0})) == 3.0);
  CHECK(y(make_vec({0.7})) == 3.0);
  CHECK(y(make_vec({1.0})) == 3.0);
  const CellPartition two = CellPartition::uniform({2});
  const DataImage ind(two, {0.0, 1.0});
  CHECK(ind(make_vec({0.2})) == 0.0);
  CHECK(ind(make_vec({0.5})) == 1.0);
  CHECK(ind(make_vec({0.9})) == 1.0);
  CHECK_THROWS_AS(ind(make_vec({1.2})), PartitionError);
  CHECK_THROWS_AS(DataImage(two, {1.0}), ConfigError);
}

TEST_CASE("cell lookup matches a linear scan") {
  auto scan = [](const CellPartition& p, const Vec& x) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      const Box& b = p.cell(i);
      bool in = true;
      for (int k = 0; k < x.size(); ++k) {
        const bool upper = b.hi[k] == 1.0 ? x[k] <= b.hi[k] : x[k] < b.hi[k];
        in = in && x[k] >= b.lo[k] && upper;
      }
      if (in) return i;
    }
    throw std::logic_error("no cell");
  };
  const CellPartition uni = CellPartition::uniform({5, 3});
  const CellPartition irregular({Box{make_vec({0.0, 0.0}), make_vec({0.3, 1.0})},
                                 Box{make_vec({0.3, 0.0}), make_vec({1.0, 0.45})},
                                 Box{make_vec({0.3, 0.45}), make_vec({0.8, 1.0})},
                                 Box{make_vec({0.8, 0.45}), make_vec({1.0, 1.0})}});
  std::mt19937 gen(77);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (const CellPartition* p : {&uni, &irregular}) {
    for (int i = 0; i < 100; ++i) {
      const double x0 = unif(gen);
      const Vec x = make_vec({x0, unif(gen)});
      CHECK(p->locate(x) == scan(*p, x));
    }
    CHECK(p->locate(make_vec({1.0, 1.0})) == scan(*p, make_vec({1.0, 1.0})));
    CHECK(p->locate(make_vec({0.0, 0.0})) == scan(*p, make_vec({0.0, 0.0})));
  }
  CHECK(uni.locate(make_vec({0.2, 0.5})) == scan(uni, make_vec({0.2, 0.5})));
}

TEST_CASE("transport: identity, boundary and outside points") {
  const auto t = make_gaussian_template(make_vec({0.4}), 0.2, 1.0);
  MatchProblem p = problem_1d(t, 4);
  const ControlPath zero = ControlPath::zeros(1, 20, 0.05);
  for (double x : {0.1, 0.5, 0.93}) CHECK(transport_template(p, zero, make_vec({x})) == t->value(make_vec({x})));
  for (std::uint64_t s = 0; s < 5; ++s) {
    const ControlPath u = random_control(1, 20, s, 2.0);
    for (double x : {0.0, 1.0, -0.3, 1.7}) CHECK(transport_template(p, u, make_vec({x})) == t->value(make_vec({x})));
  }
}

TEST_CASE("transport matches a fine-step integrator") {
  const auto t = make_affine_template(0.0, make_vec({1.0}));
  for (int modes : {1, 2}) {
    const MatchProblem p = problem_1d(t, 4, modes, 1.0, 100);
    const ControlPath u = modes == 1 ? const_control({0.7}, 100) : const_control({0.7, -0.4}, 100);
    for (double x : {0.5, 0.2, 0.85}) {
      CHECK(std::abs(transport_template(p, u, make_vec({x})) - fine_transport(p.basis, u, x)) <= 1e-6);
    }
  }
}

TEST_CASE("transport leaving the box is an integrity error") {
  MatchProblem p{make_constant_template(1, 0.0), CellPartition::uniform({2}), {},
                 sflow::testing::constant_mode_basis(make_vec({1.0})), 0.0, 10};
  const ControlPath u = const_control({2.0}, 10);
  CHECK_THROWS_AS(transport_points(p, u, {make_vec({0.5})}), IntegrityError);
}

TEST_CASE("objective decomposition and trivial values") {
  const auto aff = make_affine_template(0.3, make_vec({1.0}));
  MatchProblem p = problem_1d(aff, 4);
  p.data = synthesize_data(p, nullptr, 0.0, 1);  // u = 0, no noise
  const ControlPath zero = ControlPath::zeros(1, 20, 0.05);
  const ObjectiveValue v = objective_Jd(p, zero, Misfit::kCellSum);
  CHECK(v.data_term <= 1e-8);
  CHECK(v.total == v.reg_term + v.data_term);
  // Against cell averages, slope s on cells of width w leaves 1/2 s^2 w^2 / 12.
  CHECK(objective_Jd(p, zero, Misfit::kField).data_term == doctest::Approx(1.0 / 384.0).epsilon(1e-12));

  MatchProblem z{make_constant_template(1, 0.0), CellPartition::uniform({1}), {1.0}, sine_1d(1, 1.0), 0.0, 20};
  CHECK(objective_Jd(z, zero).total == doctest::Approx(0.5).epsilon(1e-14));
  z.convention = DataConvention::kNormalized;
  CHECK(objective_Jd(z, zero).total == doctest::Approx(0.5).epsilon(1e-14));

  const ControlPath u = random_control(1, 20, 3, 1.0);
  for (Misfit m : {Misfit::kField, Misfit::kCellSum}) {
    const ObjectiveValue w = objective_Jd(p, u, m);
    CHECK(w.reg_term == control_cost(u));
    CHECK(w.total == w.reg_term + w.data_term);
  }
}

TEST_CASE("objective agrees with refined quadrature") {
  const auto t = make_gaussian_template(make_vec({0.45}), 0.25, 1.0);
  MatchProblem p = problem_1d(t, 5, 2, 1.0);
  p.data = {0.05, 0.15, 0.2, 0.15, 0.05};
  MatchProblem fine = p;
  fine.partition = p.partition.refined(2);
  for (std::uint64_t s = 0; s < 3; ++s) {
    const ControlPath u = random_control(2, 20, s, 0.8);
    const double a = objective_Jd(p, u, Misfit::kCellSum).data_term;
    const double b = objective_Jd(fine, u, Misfit::kCellSum).data_term;
    CHECK(std::abs(a - b) <= 1e-4);
  }
}

TEST_CASE("objective gradient matches central differences") {
  const auto t = make_gaussian_template(make_vec({0.4}), 0.2, 1.0, 0.1);
  for (int modes : {1, 2}) {
    MatchProblem p = problem_1d(t, 4, modes, 2.0, 10);
    p.data = {0.02, 0.2, 0.1, 0.03};
    const ControlPath u = random_control(static_cast<std::size_t>(modes), 10, 5, 0.7);
    for (Misfit m : {Misfit::kField, Misfit::kCellSum}) {
      std::vector<double> g;
      objective_Jd(p, u, m, &g);
      const double h = 1e-6;
      for (std::size_t i = 0; i < u.values.size(); ++i) {
        ControlPath up = u, dn = u;
        up.values[i] += h;
        dn.values[i] -= h;
        const double fd = (objective_Jd(p, up, m).total - objective_Jd(p, dn, m).total) / (2 * h);
        CHECK(std::abs(fd - g[i]) <= 1e-4 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST_CASE("synthetic data") {
  MatchProblem one{make_constant_template(1, 1.0), CellPartition::uniform({1}), {}, sine_1d(1, 1.0), 0.0, 20};
  CHECK(synthesize_data(one, nullptr, 0.0, 3) == std::vector<double>{1.0});

  const auto t = make_gaussian_template(make_vec({0.4}), 0.2, 1.0);
  MatchProblem p = problem_1d(t, 4);
  const ControlPath zero = ControlPath::zeros(1, 20, 0.05);
  const auto d = synthesize_data(p, &zero, 0.0, 1);
  std::vector<double> q(4, 0.0);
  for (const auto& n : p.partition.nodes()) q[n.cell] += n.weight * t->value(n.x);
  for (std::size_t i = 0; i < 4; ++i) CHECK(d[i] == doctest::Approx(q[i]).epsilon(1e-14));
  p.convention = DataConvention::kNormalized;
  const auto dn = synthesize_data(p, &zero, 0.0, 1);
  for (std::size_t i = 0; i < 4; ++i) CHECK(dn[i] == doctest::Approx(4.0 * q[i]).epsilon(1e-14));

  const auto a = synthesize_data(p, nullptr, 0.04, 12);
  const auto b = synthesize_data(p, nullptr, 0.04, 12);
  CHECK(a == b);
  CHECK(a != synthesize_data(p, nullptr, 0.04, 13));
}

TEST_CASE("matching: generator dominance and constant templates") {
  MatchProblem p = problem_1d(make_affine_template(0.0, make_vec({1.0})), 4, 1, 4.0);
  p.convention = DataConvention::kNormalized;
  const ControlPath u_true = const_control({0.2}, 20);
  p.data = synthesize_data(p, &u_true, 0.0, 1);
  MatchOptions o;
  o.hmap_per_axis = 5;
  const MatchResult r = solve_match(p, o);
  CHECK(r.converged);
  CHECK(r.objective <= objective_Jd(p, u_true).total + 1e-12);
  CHECK(r.objective == doctest::Approx(r.reg_term + r.data_term).epsilon(1e-14));
  CHECK(r.h_map.size() == 5);
  CHECK(r.h_map.front().second[0] == 0.0);
  CHECK(r.h_map.back().second[0] == 1.0);

  MatchProblem c = problem_1d(make_constant_template(1, 0.7), 3);
  c.data = {0.1, 0.5, 0.2};
  const double base = objective_Jd(c, ControlPath::zeros(1, 20, 0.05)).data_term;
  CHECK(objective_Jd(c, random_control(1, 20, 2, 1.0)).data_term == doctest::Approx(base).epsilon(1e-12));
  const MatchResult rc = solve_match(c, o);
  CHECK(rc.reg_term <= 1e-12);
  for (double v : rc.u_star.values) CHECK(std::abs(v) <= 1e-6);
}

TEST_CASE("rate I_d") {
  MatchProblem p = problem_1d(make_gaussian_template(make_vec({0.4}), 0.2, 1.0), 4, 1, 2.0);
  const ControlPath u_true = const_control({0.5}, 20);
  p.data = synthesize_data(p, &u_true, 0.0, 1);
  CHECK_THROWS_AS(rate_Id(p, u_true, nullptr), std::logic_error);
  const LambdaCache cache = compute_lambda_d(p);
  CHECK(std::abs(rate_Id(p, cache.argmin, &cache)) <= 1e-9);
  const ControlPath twice = cache.argmin.scaled(2.0);
  const double direct = objective_Jd(p, twice, cache.misfit).total - cache.lambda;
  CHECK(std::abs(rate_Id(p, twice, &cache) - direct) <= 1e-10);
  for (std::uint64_t s = 0; s < 5; ++s) CHECK(rate_Id(p, random_control(1, 20, s, 1.0), &cache) >= -1e-9);
}

TEST_CASE("transform functionals") {
  const PointSet lat = interior_lattice(1, 4);
  CHECK(lat.size() == 4);
  CHECK(lat[0][0] == 0.125);
  PointSet img = lat;
  for (auto& x : img) x[0] += 0.1;
  const auto F = make_identity_distance_functional(2.0);
  CHECK(F->value(lat, img) == doctest::Approx(0.02));
  CHECK(F->value(lat, lat) == 0.0);
  CHECK(make_constant_transform_functional(1.5)->value(lat, img) == 1.5);
  PointSet g;
  F->gradient(lat, img, g);
  CHECK(g[0][0] == doctest::Approx(2.0 * 2.0 * 0.1 / 4.0));
  CHECK(interior_lattice(2, 3).size() == 9);
}

TEST_CASE("posterior check: constant functionals are exact") {
  MatchProblem p = problem_1d(make_affine_template(0.0, make_vec({3.0})), 4, 1, 2.0);
  const ControlPath u_true = const_control({0.5}, 20);
  p.data = synthesize_data(p, &u_true, 0.0, 7);
  PosteriorOptions o;
  o.match.multistart = 2;
  const auto zero = posterior_laplace_check(p, *make_constant_transform_functional(0.0), {0.2, 0.1, 0.05}, 500, 3, o);
  CHECK(zero.rows.size() == 3);
  for (const auto& r : zero.rows) CHECK(r.estimate == 0.0);
  CHECK(std::abs(zero.target) <= 1e-12);
  const auto c = posterior_laplace_check(p, *make_constant_transform_functional(0.8), {0.2, 0.1, 0.05}, 500, 3, o);
  for (const auto& r : c.rows) CHECK(std::abs(r.estimate - 0.8) <= 1e-12);
  CHECK(std::abs(c.target - 0.8) <= 1e-9);
  CHECK_THROWS_AS(posterior_laplace_check(p, *make_constant_transform_functional(0.0), {}, 500, 3, o), ConfigError);
}

TEST_CASE("posterior check is deterministic across execution modes") {
  MatchProblem p = problem_1d(make_affine_template(0.0, make_vec({5.0})), 4, 1, 2.0);
  const ControlPath u_true = const_control({0.5}, 20);
  p.data = synthesize_data(p, &u_true, 0.0, 7);
  PosteriorOptions o;
  o.match.multistart = 2;
  const auto F = make_identity_distance_functional(1.0);
  const auto a = posterior_laplace_check(p, *F, {0.3, 0.2, 0.1}, 400, 5, o, Execution::kSerial);
  const auto b = posterior_laplace_check(p, *F, {0.3, 0.2, 0.1}, 400, 5, o, Execution::kParallel);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].term1 == b.rows[i].term1);
    CHECK(a.rows[i].term2 == b.rows[i].term2);
  }
  CHECK(a.target == b.target);
  const double lo[] = {-2.0}, hi[] = {2.0};
  const auto scan = match_constant_scan(p, Misfit::kCellSum, F.get(), interior_lattice(1, o.lattice_per_axis), lo, hi, 401);
  CHECK(a.inf_with_F <= scan.best_value + 1e-9);
  CHECK(a.inf_with_F >= scan.best_value - 1e-3);
}
