// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// usage: acceptance <sflow-cli> <examples-dir> <scratch-dir>

#include <sys/wait.h>

#include <Eigen/LU>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sflow/control_flow.hpp"
#include "sflow/flow_sim.hpp"
#include "sflow/imaging.hpp"
#include "sflow/ldp_lab.hpp"
#include "sflow/rate_fn.hpp"

namespace fs = std::filesystem;
using namespace sflow;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream note;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      note << " [failed: " << what << "]";
    }
  }
};

std::string g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. flow axioms

struct FlowConfig {
  BasisFamily basis;
  BasisFamily driftless;
  double eps;
  PointSet points;
};

FlowConfig random_flow_config(std::mt19937& gen, int dim, double eps) {
  std::uniform_real_distribution<double> unit(0.15, 0.85);
  const int max_centers = dim == 1 ? 8 : 4;
  const int centers_n = std::uniform_int_distribution<int>(1, max_centers)(gen);
  PointSet centers;
  for (int i = 0; i < centers_n; ++i) {
    Vec c(dim);
    for (int k = 0; k < dim; ++k) c[k] = unit(gen);
    centers.push_back(c);
  }
  const double width = std::uniform_real_distribution<double>(0.1, 0.3)(gen);
  const double amp = std::uniform_real_distribution<double>(0.3, 1.0)(gen);
  const Box box = Box::unit(dim);
  // Nonlinear drift: a bump field at its own random center.
  Vec dc(dim);
  for (int k = 0; k < dim; ++k) dc[k] = unit(gen);
  const BasisFamily drift_src = make_gaussian_bump_basis(dim, {dc}, 0.25, 1.0, box);
  const BasisFamily b = make_gaussian_bump_basis(dim, centers, width, amp, box, 1.0, drift_src.modes()[0]);
  const BasisFamily z = make_gaussian_bump_basis(dim, centers, width, amp, box, 1.0);
  PointSet pts;
  for (int i = 0; i < 6; ++i) {
    Vec x(dim);
    for (int k = 0; k < dim; ++k) x[k] = unit(gen);
    pts.push_back(x);
  }
  return {b, z, eps, pts};
}

void criterion_flow_axioms(Outcome& o) {
  std::mt19937 gen(20240917);
  const int dims[] = {1, 2, 2, 1, 2};
  const double epss[] = {0.0, 0.1, 0.0, 0.1, 0.0};
  double worst_lo = INFINITY, worst_hi = -INFINITY, min_det = INFINITY;
  for (int c = 0; c < 5; ++c) {
    const FlowConfig cfg = random_flow_config(gen, dims[c], epss[c]);
    const std::size_t L = cfg.basis.num_modes();
    o.require(L <= 8, "mode count");
    const NoisePath noise = NoisePath::generate(L, 1000, 1e-3, 100 + static_cast<std::uint64_t>(c));
    const FlowTrajectory tr = simulate_flow(cfg.basis, nullptr, cfg.eps, cfg.points, 0.0, 1.0, noise, true);
    const Mat I = Mat::Identity(dims[c], dims[c]);
    for (std::size_t p = 0; p < cfg.points.size(); ++p) {
      o.require(tr.position(0, p) == cfg.points[p] && tr.jacobian(0, p) == I, "identity at start");
    }
    for (std::size_t k = 0; k < tr.num_times(); ++k) {
      for (std::size_t p = 0; p < cfg.points.size(); ++p) min_det = std::min(min_det, tr.jacobian(k, p).determinant());
    }
    const FlowTrajectory id = simulate_flow(cfg.driftless, nullptr, 0.0, cfg.points, 0.0, 1.0, noise, true);
    for (std::size_t k = 0; k < id.num_times(); ++k) {
      for (std::size_t p = 0; p < cfg.points.size(); ++p) {
        o.require(id.position(k, p) == cfg.points[p] && id.jacobian(k, p) == I, "zero-everything identity");
      }
    }
    if (cfg.eps == 0.0) {
      const double d1 = check_flow_property(cfg.basis, nullptr, 0.0, cfg.points, 0.0, 0.3, 1.0,
                                            NoisePath::zeros(L, 100, 0.01));
      const double d2 = check_flow_property(cfg.basis, nullptr, 0.0, cfg.points, 0.0, 0.3, 1.0,
                                            NoisePath::zeros(L, 200, 0.005));
      const double r = d1 / d2;
      worst_lo = std::min(worst_lo, r);
      worst_hi = std::max(worst_hi, r);
      o.require(d2 > 0.0 && r >= 1.7 && r <= 2.3, "defect ratio " + g(r));
    }
  }
  o.require(min_det > 0.0, "det J > 0");
  o.note << "defect ratios in [" << g(worst_lo) << ", " << g(worst_hi) << "], min det J " << g(min_det);
}

// ---------------------------------------------------------------------------
// 2. Jacobian and adjoint gradients

BasisFamily bumps_2d() {
  PointSet c;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) c.push_back(make_vec({(i + 0.5) / 2, (j + 0.5) / 2}));
  }
  return make_gaussian_bump_basis(2, c, 0.25, 0.9, Box::unit(2));
}

double rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return num / den;
}

void criterion_gradients(Outcome& o) {
  const BasisFamily b = bumps_2d();
  const PointSet pts{make_vec({0.3, 0.6}), make_vec({0.55, 0.45}), make_vec({0.8, 0.2})};
  const NoisePath noise = NoisePath::generate(b.num_modes(), 200, 0.005, 17);
  const FlowTrajectory tr = simulate_flow(b, nullptr, 0.1, pts, 0.0, 1.0, noise, true);
  double jac_err = 0.0;
  const double h = 1e-5;
  for (std::size_t p = 0; p < pts.size(); ++p) {
    Mat fd(2, 2);
    for (int c = 0; c < 2; ++c) {
      Vec xp = pts[p], xm = pts[p];
      xp[c] += h;
      xm[c] -= h;
      fd.col(c) = (terminal_positions(b, nullptr, 0.1, {xp}, 0.0, 1.0, noise)[0] -
                   terminal_positions(b, nullptr, 0.1, {xm}, 0.0, 1.0, noise)[0]) /
                  (2 * h);
    }
    jac_err = std::max(jac_err, (tr.jacobian(200, p) - fd).norm() / fd.norm());
  }
  o.require(jac_err <= 1e-3, "Jacobian");

  auto central = [](const ControlPath& u, const std::function<double(const ControlPath&)>& f) {
    std::vector<double> out(u.values.size());
    const double eps = 1e-6;
    for (std::size_t i = 0; i < out.size(); ++i) {
      ControlPath up = u, dn = u;
      up.values[i] += eps;
      dn.values[i] -= eps;
      out[i] = (f(up) - f(dn)) / (2 * eps);
    }
    return out;
  };
  auto wiggle = [](ControlPath u, double scale) {
    std::mt19937 gen(5);
    std::normal_distribution<double> n(0.0, scale);
    for (double& v : u.values) v = n(gen);
    return u;
  };

  EndpointProblem ep{b, {make_vec({0.3, 0.3}), make_vec({0.6, 0.5})}, {make_vec({0.5, 0.4}), make_vec({0.4, 0.6})}, 1.0};
  ep.steps = 8;
  const ControlPath u = wiggle(ControlPath::zeros(b.num_modes(), 8, 0.125), 0.3);
  std::vector<double> grad;
  penalized_objective(ep, u, 100.0, &grad);
  const double pen_err =
      rel_err(grad, central(u, [&](const ControlPath& v) { return penalized_objective(ep, v, 100.0, nullptr); }));
  o.require(pen_err <= 1e-4, "J_pen adjoint");

  double jd_err = 0.0;
  for (int modes : {1, 2}) {
    MatchProblem mp{make_gaussian_template(make_vec({0.4}), 0.2, 1.0, 0.1), CellPartition::uniform({4}), {0.02, 0.2, 0.1, 0.03},
                    make_sine_basis(Box::unit(1), modes, 2.0), 0.0, 10};
    const ControlPath v = wiggle(ControlPath::zeros(static_cast<std::size_t>(modes), 10, 0.1), 0.7);
    for (Misfit m : {Misfit::kField, Misfit::kCellSum}) {
      std::vector<double> gj;
      objective_Jd(mp, v, m, &gj);
      jd_err = std::max(jd_err, rel_err(gj, central(v, [&](const ControlPath& w) { return objective_Jd(mp, w, m).total; })));
    }
  }
  o.require(jd_err <= 1e-4, "J_d adjoint");
  o.note << "Jacobian rel err " << g(jac_err) << ", J_pen " << g(pen_err) << ", J_d " << g(jd_err);
}

// ---------------------------------------------------------------------------
// 3. rate oracles

void criterion_rates(Outcome& o) {
  const BasisFamily trans(1, 1.0, {std::make_shared<ConstantField>(make_vec({1.0}))});
  Mat a(1, 1);
  a(0, 0) = 1.0;
  const BasisFamily lin(1, 1.0, {std::make_shared<LinearField>(a, Vec::Zero(1))});
  EndpointProblem pt{trans, {make_vec({0.0})}, {make_vec({1.0})}, 1.0};
  EndpointProblem pl{lin, {make_vec({1.0})}, {make_vec({std::exp(1.0)})}, 1.0};
  const RateResult rt = endpoint_rate(pt);
  const RateResult rl = endpoint_rate(pl);
  o.require(std::abs(rt.value - 0.5) <= 0.005, "translation");
  o.require(std::abs(rl.value - 0.5) <= 0.01, "linear");

  const double lo[] = {-3.0}, hi[] = {3.0};
  const ScanTable st = rate_lower_bound_scan(pt, lo, hi, 601);
  const ScanTable sl = rate_lower_bound_scan(pl, lo, hi, 601);
  o.require(rt.value <= st.best_row().cost + pt.tol && std::abs(st.best_row().cost - 0.5) <= 0.005, "translation scan");
  o.require(rl.value <= sl.best_row().cost + pl.tol && std::abs(sl.best_row().cost - 0.5) <= 0.01, "linear scan");

  const BasisFamily b = bumps_2d();
  const PointSet s{make_vec({0.3, 0.4}), make_vec({0.7, 0.2})};
  EndpointProblem pz{b, s, s, 1.0};
  const RateResult rz = endpoint_rate(pz);
  o.require(rz.value <= 1e-6, "zero-control case");
  o.note << "translation " << g(rt.value) << " (scan " << g(st.best_row().cost) << "), linear " << g(rl.value)
         << " (scan " << g(sl.best_row().cost) << "), zero case " << g(rz.value);
}

// ---------------------------------------------------------------------------
// 4. Laplace principle on the translation flow

double gaussian_quadrature_truth(double eps) {
  // Trapezoid rule on +-12 sd, shifted by the minimum exponent.
  const double sd = std::sqrt(eps);
  const int n = 200000;
  const double lo = -12.0 * sd, h = 24.0 * sd / n;
  auto e = [](double z) { return 0.5 * (z - 1) * (z - 1) + 0.5 * z * z; };
  double shift = INFINITY;
  for (int i = 0; i <= n; ++i) shift = std::min(shift, e(lo + i * h));
  double s = 0.0;
  for (int i = 0; i <= n; ++i) s += (i == 0 || i == n ? 0.5 : 1.0) * std::exp(-(e(lo + i * h) - shift) / eps);
  s *= h / (sd * std::sqrt(2.0 * std::numbers::pi));
  return shift - eps * std::log(s);
}

void criterion_laplace(Outcome& o) {
  const BasisFamily b(1, 1.0, {std::make_shared<ConstantField>(make_vec({1.0}))});
  const auto F = make_quadratic_functional({1.0}, 1.0);
  VariationalOptions vo;
  vo.steps = 20;
  const ConvergenceReport rep =
      ldp_convergence_report(b, *F, {make_vec({0.0})}, 1.0, 0.01, {0.2, 0.1, 0.05}, 100000, 11, vo);
  o.require(std::abs(rep.variational - 0.25) <= 1e-6, "variational value");
  double prev = INFINITY;
  for (const auto& r : rep.rows) {
    const double gap = std::abs(r.estimate - 0.25);
    o.require(gap <= prev, "monotone gap");
    prev = gap;
    const double truth = gaussian_quadrature_truth(r.eps);
    o.require(std::abs(r.estimate - truth) <= 3.0 * r.std_error, "3 stderr at eps " + g(r.eps));
    o.note << "eps " << g(r.eps) << ": gap " << g(gap) << ", |est - quad|/se "
           << g(std::abs(r.estimate - truth) / r.std_error) << "; ";
  }
  o.require(prev <= 0.05, "final gap");
}

// ---------------------------------------------------------------------------
// 5. covariance PSD on every shipped basis

void criterion_psd(Outcome& o) {
  std::vector<std::pair<std::string, BasisFamily>> bases;
  PointSet c1;
  for (int i = 0; i < 5; ++i) c1.push_back(make_vec({(i + 0.5) / 5}));
  bases.emplace_back("bumps 1-D", make_gaussian_bump_basis(1, c1, 0.15, 1.0, Box::unit(1)));
  bases.emplace_back("bumps 2-D", bumps_2d());
  bases.emplace_back("sine 1-D", make_sine_basis(Box::unit(1), 4, 1.0, 1.0));
  bases.emplace_back("sine 2-D", make_sine_basis(Box::unit(2), 3, 1.0, 1.0));
  bases.emplace_back("sine 3-D", make_sine_basis(Box::unit(3), 2, 1.0));
  bases.emplace_back("constant fields",
                     BasisFamily(2, 1.0, {std::make_shared<ConstantField>(make_vec({1.0, 0.5})),
                                          std::make_shared<ConstantField>(make_vec({0.0, 1.0}))}));
  Mat a(2, 2);
  a << 0.0, -1.0, 1.0, 0.0;
  bases.emplace_back("linear field", BasisFamily(2, 1.0, {std::make_shared<LinearField>(a, make_vec({0.1, 0.0}))}));

  double worst = INFINITY;
  for (const auto& [name, b] : bases) {
    PointSet grid;
    // 20 points: 20 on a line, 5 x 4 in 2-D, 2 x 2 x 5 in 3-D.
    for (int i = 0; i < 20; ++i) {
      const int d = b.dim();
      Vec x(d);
      if (d == 1) x << (i + 0.5) / 20.0;
      if (d == 2) x << (i % 5 + 0.5) / 5.0, (i / 5 + 0.5) / 4.0;
      if (d == 3) x << (i % 2 + 0.5) / 2.0, (i / 2 % 2 + 0.5) / 2.0, (i / 4 + 0.5) / 5.0;
      grid.push_back(x);
    }
    const ValidationReport r = validate_basis(b, grid, {0.0, 0.5, 1.0});
    const double rel = r.gram_min_eigenvalue / r.gram_max_eigenvalue;
    worst = std::min(worst, rel);
    o.require(r.gram_min_eigenvalue >= -1e-8 * r.gram_max_eigenvalue, name);
  }
  o.note << bases.size() << " bases, worst min/max eigenvalue " << g(worst);
}

// ---------------------------------------------------------------------------
// 6. matching recovery

ControlPath refine_steps(const ControlPath& u, std::size_t factor) {
  ControlPath out = ControlPath::zeros(u.modes, u.steps * factor, u.dt / static_cast<double>(factor));
  for (std::size_t l = 0; l < u.modes; ++l) {
    for (std::size_t j = 0; j < out.steps; ++j) out.at(l, j) = u.value(l, j / factor);
  }
  return out;
}

void criterion_matching(Outcome& o) {
  MatchProblem p{make_affine_template(0.0, make_vec({1.0})), CellPartition::uniform({4}), {},
                 make_sine_basis(Box::unit(1), 1, 4.0), 0.0, 20, DataConvention::kNormalized};
  const double c[] = {0.2};
  const ControlPath u_true = ControlPath::constant(c, 20, 0.05);
  p.data = synthesize_data(p, &u_true, 0.0, 3);
  MatchOptions mo;
  mo.seed = 3;
  const MatchResult r = solve_match(p, mo);
  const double j_true = objective_Jd(p, u_true, mo.misfit).total;
  o.require(r.objective <= j_true, "J_d(u*) <= J_d(u_true)");

  // Fine-step transports on a refined quadrature.
  MatchProblem fine = p;
  fine.steps = 2000;
  const CellPartition q = p.partition.refined(8);
  const PointSet nodes = q.node_points();
  const PointSet h_true = transport_points(fine, refine_steps(u_true, 100), nodes);
  const PointSet h_star = transport_points(fine, refine_steps(r.u_star, 100), nodes);
  const DataImage y(p.partition, p.data_averages());
  double floor2 = 0.0, err2 = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double w = q.nodes()[i].weight;
    const double tt = p.templ->value(h_true[i]);
    floor2 += w * std::pow(tt - y(nodes[i]), 2);
    err2 += w * std::pow(p.templ->value(h_star[i]) - tt, 2);
  }
  const double floor = std::sqrt(floor2), err = std::sqrt(err2);
  o.require(err <= 2.0 * floor, "L2 error within twice the floor");
  o.note << "J_d(u*) " << g(r.objective) << " <= J_d(u_true) " << g(j_true) << "; L2 error " << g(err)
         << " vs floor " << g(floor);
}

// ---------------------------------------------------------------------------
// 7. posterior Laplace check

void criterion_posterior(Outcome& o) {
  MatchProblem p{make_affine_template(0.0, make_vec({5.0})), CellPartition::uniform({4}), {},
                 make_sine_basis(Box::unit(1), 1, 2.0), 0.0, 20, DataConvention::kUnnormalized};
  const double c[] = {0.5};
  const ControlPath u_true = ControlPath::constant(c, 20, 0.05);
  p.data = synthesize_data(p, &u_true, 0.0, 7);
  PosteriorOptions po;
  po.match.seed = 7;
  const std::vector<double> eps{0.2, 0.1, 0.05};

  const auto zero = posterior_laplace_check(p, *make_constant_transform_functional(0.0), eps, 20000, 7, po);
  const auto konst = posterior_laplace_check(p, *make_constant_transform_functional(0.7), eps, 20000, 7, po);
  for (std::size_t i = 0; i < eps.size(); ++i) {
    o.require(zero.rows[i].estimate == 0.0, "F = 0 exact");
    o.require(std::abs(konst.rows[i].estimate - 0.7) <= 1e-12, "F = c exact");
  }

  const auto F = make_identity_distance_functional(1.0);
  const PosteriorReport rep = posterior_laplace_check(p, *F, eps, 100000, 7, po);
  o.require(rep.target_converged, "target converged");
  const double lo[] = {-3.0}, hi[] = {3.0};
  const PointSet lattice = interior_lattice(1, po.lattice_per_axis);
  const double scan_F = match_constant_scan(p, Misfit::kCellSum, F.get(), lattice, lo, hi, 601).best_value;
  const double scan_0 = match_constant_scan(p, Misfit::kCellSum, nullptr, lattice, lo, hi, 601).best_value;
  o.require(rep.inf_with_F <= scan_F + 1e-9 && rep.lambda <= scan_0 + 1e-9, "target below the lattice scan");
  double prev = INFINITY;
  o.note << "target " << g(rep.target) << " (scan " << g(scan_F - scan_0) << "); gaps";
  for (const auto& r : rep.rows) {
    o.require(r.gap < prev, "decreasing gap");
    prev = r.gap;
    o.note << " " << g(r.gap);
  }
  o.require(prev <= 0.1, "final gap");
}

// ---------------------------------------------------------------------------
// 8. CLI determinism

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int run_cli(const std::string& cli, const std::string& cmd, const fs::path& config, const fs::path& out,
            int threads) {
  fs::remove_all(out);
  const std::string line = "\"" + cli + "\" " + cmd + " --config \"" + config.string() + "\" --out \"" +
                           out.string() + "\" --threads " + std::to_string(threads) + " > /dev/null 2>&1";
  const int rc = std::system(line.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

bool same_tree(const fs::path& a, const fs::path& b) {
  std::vector<std::string> names_a, names_b;
  for (const auto& e : fs::directory_iterator(a)) names_a.push_back(e.path().filename().string());
  for (const auto& e : fs::directory_iterator(b)) names_b.push_back(e.path().filename().string());
  std::sort(names_a.begin(), names_a.end());
  std::sort(names_b.begin(), names_b.end());
  if (names_a != names_b || names_a.empty()) return false;
  for (const auto& n : names_a) {
    if (slurp(a / n) != slurp(b / n)) return false;
  }
  return true;
}

void criterion_determinism(Outcome& o, const std::string& cli, const fs::path& examples, const fs::path& scratch) {
  const char* cmds[] = {"simulate", "validate-basis", "rate", "laplace", "match", "posterior-check"};
  fs::create_directories(scratch);
  int checked = 0;
  for (const char* cmd : cmds) {
    const fs::path cfg = examples / (std::string(cmd) + ".json");
    const fs::path base = scratch / cmd;
    const int r1 = run_cli(cli, cmd, cfg, base / "t1", 1);
    const int r2 = run_cli(cli, cmd, cfg, base / "t1_again", 1);
    const int r3 = run_cli(cli, cmd, cfg, base / "t3", 3);
    const bool ran = (r1 == 0 || r1 == 4) && r1 == r2 && r1 == r3;
    o.require(ran, std::string(cmd) + " exit codes");
    if (!ran) continue;
    o.require(same_tree(base / "t1", base / "t1_again"), std::string(cmd) + " rerun");
    o.require(same_tree(base / "t1", base / "t3"), std::string(cmd) + " threads");

    // Replay from the embedded resolved config.
    const auto first = nlohmann::json::parse(slurp(base / "t1" / "result.json"));
    const fs::path replay_cfg = base / "resolved.json";
    std::ofstream(replay_cfg) << first["resolved_config"].dump(2);
    const int r4 = run_cli(cli, cmd, replay_cfg, base / "replay", 2);
    const auto replay = nlohmann::json::parse(slurp(base / "replay" / "result.json"));
    o.require(r4 == r1 && replay["payload"] == first["payload"] &&
                  replay["resolved_config"] == first["resolved_config"],
              std::string(cmd) + " replay");
    ++checked;
  }
  o.note << checked << " subcommands byte-identical across reruns and --threads 1/3, replay reproduces payload";
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 4) {
    std::cerr << "usage: acceptance <sflow-cli> <examples-dir> <scratch-dir>\n";
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path examples = argv[2], scratch = argv[3];

  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"flow axioms", criterion_flow_axioms},
      {"Jacobian and adjoint gradients", criterion_gradients},
      {"rate function oracles", criterion_rates},
      {"Laplace principle, translation flow", criterion_laplace},
      {"covariance PSD", criterion_psd},
      {"matching recovery", criterion_matching},
      {"posterior Laplace check", criterion_posterior},
      {"CLI determinism", [&](Outcome& o) { criterion_determinism(o, cli, examples, scratch); }},
  };
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.note << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    all = all && o.pass;
    std::cout << "criterion " << i + 1 << " (" << criteria[i].first << "): " << (o.pass ? "PASS" : "FAIL") << "  "
              << o.note.str() << "  [" << g(secs) << " s]" << std::endl;
  }
  return all ? 0 : 1;
}
