// sflow: batch front-end for the stochastic-flow laboratory.
//
// Exit codes: 0 ok, 1 other failure, 2 configuration error, 3 numerical
// blow-up, 4 optimizer did not converge (results are still written).

#include <omp.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <Eigen/LU>

#include "builders.hpp"
#include "config.hpp"
#include "sflow/errors.hpp"
#include "sflow/flow_sim.hpp"
#include "sflow/imaging.hpp"
#include "sflow/ldp_lab.hpp"
#include "sflow/noise.hpp"
#include "sflow/rate_fn.hpp"

namespace fs = std::filesystem;
using namespace sflow;
using namespace sflow::cli;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitBlowUp = 3;
constexpr int kExitNotConverged = 4;
constexpr long long kSchemaVersion = 1;

struct Run {
  fs::path out_dir;
  Json payload = Json::object();
  std::vector<std::string> summary;
  bool converged = true;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string brief(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

Json to_json(const Vec& x) {
  Json a = Json::array();
  for (int i = 0; i < x.size(); ++i) a.push_back(x[i]);
  return a;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

void write_control(const fs::path& path, const ControlPath& u) {
  std::ostringstream os;
  write_control_csv(u, os);
  write_text(path, os.str());
}

Json gap_series(const std::vector<double>& eps, const std::vector<double>& gap) {
  return Json{{"x_label", "eps"}, {"y_label", "gap"}, {"eps", eps}, {"gap", gap}};
}

// ---------------------------------------------------------------------------

void cmd_simulate(ConfigReader::Node cfg, std::uint64_t seed, Run& run) {
  const BasisFamily basis = build_basis(cfg.child("basis"));
  const double eps = cfg.number("eps", 0.0);
  if (!(eps >= 0.0)) throw ConfigError("config key 'eps': must be non-negative");
  const PointSet points = cfg.points("points");
  const double t0 = cfg.number("t0", 0.0);
  const double t1 = cfg.number("t1", basis.horizon());
  const double dt = cfg.number("dt");
  if (!(dt > 0.0)) throw ConfigError("config key 'dt': must be positive");
  if (!(t1 >= t0)) throw ConfigError("config key 't1': must not be before t0");
  const bool with_jac = cfg.flag("with_jacobians", false);
  const auto outputs = cfg.table("outputs");
  const bool want_csv = outputs.flag("csv", true);
  const bool want_bin = outputs.flag("binary", true);

  const double steps_real = (t1 - t0) / dt;
  const auto steps = static_cast<std::size_t>(std::llround(steps_real));
  if (std::abs(steps_real - static_cast<double>(steps)) > 1e-9 * std::max(1.0, steps_real)) {
    throw ConfigError("config key 't1': t1 - t0 is not a multiple of dt");
  }
  ControlPath control;
  const bool has_control = build_control(cfg.table("control"), dt, t1, basis.num_modes(), control);
  if (has_control && std::abs(t0 / dt - std::round(t0 / dt)) > 1e-9) {
    throw ConfigError("config key 't0': must be a multiple of dt when a control is given");
  }
  const NoisePath noise = NoisePath::generate(basis.num_modes(), steps, dt, seed, 0, t0);
  FlowTrajectory traj =
      simulate_flow(basis, has_control ? &control : nullptr, eps, points, t0, t1, noise, with_jac);
  traj.seed = seed;

  Json files = Json::array();
  if (want_csv) {
    std::ostringstream os;
    write_trajectory_csv(traj, os);
    write_text(run.out_dir / "trajectory.csv", os.str());
    files.push_back("trajectory.csv");
  }
  if (want_bin) {
    std::ostringstream os(std::ios::binary);
    write_trajectory_binary(traj, os);
    write_text(run.out_dir / "trajectory.bin", os.str());
    files.push_back("trajectory.bin");
  }
  const std::size_t last = traj.num_times() - 1;
  Json terminal = Json::array();
  double max_disp = 0.0;
  for (std::size_t p = 0; p < points.size(); ++p) {
    const Vec x = traj.position(last, p);
    terminal.push_back(to_json(x));
    max_disp = std::max(max_disp, (x - points[p]).norm());
  }
  run.payload["terminal_positions"] = terminal;
  run.payload["num_times"] = traj.num_times();
  run.payload["files"] = files;
  if (with_jac) {
    double min_det = INFINITY;
    for (std::size_t k = 0; k < traj.num_times(); ++k) {
      for (std::size_t p = 0; p < points.size(); ++p) min_det = std::min(min_det, traj.jacobian(k, p).determinant());
    }
    run.payload["min_jacobian_determinant"] = min_det;
  }
  run.summary.push_back("simulated " + std::to_string(points.size()) + " points over " + std::to_string(steps) +
                        " steps at eps=" + brief(eps));
  run.summary.push_back("max terminal displacement " + brief(max_disp));
}

void cmd_validate_basis(ConfigReader::Node cfg, std::uint64_t, Run& run) {
  const BasisFamily basis = build_basis(cfg.child("basis"));
  const auto grid = cfg.table("grid");
  const int per_axis = static_cast<int>(grid.integer("per_axis", 20));
  Box box = basis.support().value_or(Box::unit(basis.dim()));
  if (grid.has("lo") || grid.has("hi")) {
    box = Box{grid.vec("lo"), grid.vec("hi")};
  } else {
    grid.numbers("lo", std::vector<double>(box.lo.data(), box.lo.data() + box.dim()));
    grid.numbers("hi", std::vector<double>(box.hi.data(), box.hi.data() + box.dim()));
  }
  if (box.dim() != basis.dim()) throw ConfigError("config key 'grid.lo': dimension does not match basis");
  const auto times = cfg.numbers("times", {0.0});
  const ValidationReport r = validate_basis(basis, make_box_lattice(box, per_axis), times);
  run.payload = Json{{"max_trace", r.max_trace},
                     {"max_trace_mismatch", r.max_trace_mismatch},
                     {"mode_lipschitz", r.mode_lipschitz},
                     {"drift_lipschitz", r.drift_lipschitz},
                     {"gram_min_eigenvalue", r.gram_min_eigenvalue},
                     {"gram_max_eigenvalue", r.gram_max_eigenvalue},
                     {"k_effective", r.k_effective},
                     {"num_modes", basis.num_modes()}};
  const bool psd = r.gram_min_eigenvalue >= -1e-8 * std::max(r.gram_max_eigenvalue, 0.0);
  run.summary.push_back(std::to_string(basis.num_modes()) + " modes, sup trace " + brief(r.max_trace));
  run.summary.push_back(std::string("Gram matrix ") + (psd ? "PSD" : "NOT PSD") + " (min eigenvalue " +
                        brief(r.gram_min_eigenvalue) + ")");
}

void cmd_rate(ConfigReader::Node cfg, std::uint64_t seed, Run& run) {
  EndpointProblem problem{build_basis(cfg.child("basis")), cfg.points("starts"), cfg.points("targets")};
  problem.horizon = cfg.number("T", problem.basis.horizon());
  const auto steps = cfg.integer("steps", 50);
  if (steps < 1) throw ConfigError("config key 'steps': must be positive");
  problem.steps = static_cast<std::size_t>(steps);
  problem.penalty_schedule = cfg.numbers("penalty_schedule", problem.penalty_schedule);
  problem.multistart = static_cast<int>(cfg.integer("multistart", problem.multistart));
  problem.tol = cfg.number("tol", problem.tol);
  problem.tol_endpoint = cfg.number("tol_endpoint", problem.tol_endpoint);
  problem.init_scale = cfg.number("init_scale", problem.init_scale);
  problem.seed = seed;
  problem.validate();

  const RateResult r = endpoint_rate(problem);
  write_control(run.out_dir / "u_star.csv", r.u_star);
  run.payload = Json{{"value", r.value},
                     {"residual", r.residual},
                     {"grad_norm", r.grad_norm},
                     {"penalized", r.penalized},
                     {"converged", r.converged},
                     {"likely_unreachable", r.likely_unreachable},
                     {"best_start", r.best_start},
                     {"files", {"u_star.csv"}}};
  run.converged = r.converged;
  run.summary.push_back("rate value " + brief(r.value) + ", endpoint residual " + brief(r.residual));
  if (r.likely_unreachable) run.summary.push_back("targets look unreachable: the infimum may be +inf");

  if (cfg.has("scan")) {
    const auto scan = cfg.child("scan");
    const auto lo = scan.numbers("lo");
    const auto hi = scan.numbers("hi");
    const int count = static_cast<int>(scan.integer("count", 41));
    const ScanTable table = rate_lower_bound_scan(problem, lo, hi, count);
    const ScanRow& best = table.best_row();
    run.payload["scan"] = Json{{"coefficients", best.coefficients},
                               {"cost", best.cost},
                               {"residual", best.residual},
                               {"penalized", best.penalized}};
    run.summary.push_back("constant-control scan best cost " + brief(best.cost) + " at residual " +
                          brief(best.residual));
  }
}

void cmd_laplace(ConfigReader::Node cfg, std::uint64_t seed, Run& run) {
  const BasisFamily basis = build_basis(cfg.child("basis"));
  const PointSet points = cfg.points("points");
  const double horizon = cfg.number("T", basis.horizon());
  const double dt = cfg.number("dt", 0.01);
  const auto eps_list = cfg.numbers("eps_list");
  const auto n = cfg.integer("n_samples", 100000);
  if (n < 1) throw ConfigError("config key 'n_samples': must be positive");
  const FunctionalPtr F = build_endpoint_functional(cfg.child("functional"));
  const auto v = cfg.table("variational");
  VariationalOptions vo;
  vo.steps = static_cast<std::size_t>(v.integer("steps", 50));
  vo.multistart = static_cast<int>(v.integer("multistart", 3));
  vo.init_scale = v.number("init_scale", 0.5);
  vo.grad_tol = v.number("grad_tol", 1e-8);
  vo.seed = seed;

  const ConvergenceReport rep =
      ldp_convergence_report(basis, *F, points, horizon, dt, eps_list, static_cast<std::size_t>(n), seed, vo);
  std::ostringstream csv;
  csv << "eps,estimate,std_error,variational,gap,min_F,max_F\n";
  Json rows = Json::array();
  std::vector<double> es, gaps;
  for (const auto& r : rep.rows) {
    csv << fmt(r.eps) << ',' << fmt(r.estimate) << ',' << fmt(r.std_error) << ',' << fmt(rep.variational) << ','
        << fmt(r.gap) << ',' << fmt(r.min_F) << ',' << fmt(r.max_F) << "\n";
    rows.push_back(Json{{"eps", r.eps}, {"estimate", r.estimate}, {"std_error", r.std_error}, {"gap", r.gap},
                        {"min_F", r.min_F}, {"max_F", r.max_F}});
    es.push_back(r.eps);
    gaps.push_back(r.gap);
    run.summary.push_back("eps=" + brief(r.eps) + " estimate " + brief(r.estimate) + " +/- " + brief(r.std_error) +
                          ", gap " + brief(r.gap));
  }
  write_text(run.out_dir / "report.csv", csv.str());
  write_text(run.out_dir / "gap_series.json", gap_series(es, gaps).dump(2) + "\n");
  run.payload = Json{{"variational", rep.variational},
                     {"variational_converged", rep.variational_converged},
                     {"rows", rows},
                     {"files", {"report.csv", "gap_series.json"}}};
  run.converged = rep.variational_converged;
  run.summary.insert(run.summary.begin(), "variational value " + brief(rep.variational));
}

void cmd_match(ConfigReader::Node cfg, std::uint64_t seed, Run& run) {
  const MatchProblem problem = build_match_problem(cfg.child("problem"), seed);
  const MatchOptions options = build_match_options(cfg.table("options"), seed);
  const MatchResult r = solve_match(problem, options);
  write_control(run.out_dir / "u_star.csv", r.u_star);
  std::ostringstream csv;
  const int d = problem.basis.dim();
  csv << "point_id";
  for (int i = 0; i < d; ++i) csv << ",x" << i;
  for (int i = 0; i < d; ++i) csv << ",h" << i;
  csv << "\n";
  for (std::size_t p = 0; p < r.h_map.size(); ++p) {
    csv << p;
    for (int i = 0; i < d; ++i) csv << ',' << fmt(r.h_map[p].first[i]);
    for (int i = 0; i < d; ++i) csv << ',' << fmt(r.h_map[p].second[i]);
    csv << "\n";
  }
  write_text(run.out_dir / "h_map.csv", csv.str());
  run.payload = Json{{"objective", r.objective},
                     {"data_term", r.data_term},
                     {"reg_term", r.reg_term},
                     {"grad_norm", r.grad_norm},
                     {"converged", r.converged},
                     {"data", problem.data},
                     {"files", {"u_star.csv", "h_map.csv"}}};
  run.converged = r.converged;
  run.summary.push_back("J_d(u*) = " + brief(r.objective) + " (data " + brief(r.data_term) + ", regularization " +
                        brief(r.reg_term) + ")");
}

void cmd_posterior_check(ConfigReader::Node cfg, std::uint64_t seed, Run& run) {
  const MatchProblem problem = build_match_problem(cfg.child("problem"), seed);
  const TransformFunctionalPtr F = build_transform_functional(cfg.child("functional"));
  const auto eps_list = cfg.numbers("eps_list");
  const auto n = cfg.integer("n_samples", 100000);
  if (n < 1) throw ConfigError("config key 'n_samples': must be positive");
  PosteriorOptions po;
  po.lattice_per_axis = static_cast<int>(cfg.integer("lattice_per_axis", 9));
  po.match = build_match_options(cfg.table("options"), seed);

  const PosteriorReport rep =
      posterior_laplace_check(problem, *F, eps_list, static_cast<std::size_t>(n), seed, po);
  std::ostringstream csv;
  csv << "eps,term1,term2,estimate,target,gap,ess\n";
  Json rows = Json::array();
  std::vector<double> es, gaps;
  for (const auto& r : rep.rows) {
    csv << fmt(r.eps) << ',' << fmt(r.term1) << ',' << fmt(r.term2) << ',' << fmt(r.estimate) << ','
        << fmt(r.target) << ',' << fmt(r.gap) << ',' << fmt(r.ess) << "\n";
    rows.push_back(Json{{"eps", r.eps}, {"term1", r.term1}, {"term2", r.term2}, {"estimate", r.estimate},
                        {"gap", r.gap}, {"ess", r.ess}});
    es.push_back(r.eps);
    gaps.push_back(r.gap);
    run.summary.push_back("eps=" + brief(r.eps) + " estimate " + brief(r.estimate) + ", gap " + brief(r.gap));
  }
  write_text(run.out_dir / "report.csv", csv.str());
  write_text(run.out_dir / "gap_series.json", gap_series(es, gaps).dump(2) + "\n");
  run.payload = Json{{"target", rep.target},
                     {"inf_with_F", rep.inf_with_F},
                     {"lambda", rep.lambda},
                     {"target_converged", rep.target_converged},
                     {"rows", rows},
                     {"files", {"report.csv", "gap_series.json"}}};
  run.converged = rep.target_converged;
  run.summary.insert(run.summary.begin(), "variational target " + brief(rep.target));
}

using Command = void (*)(ConfigReader::Node, std::uint64_t, Run&);

int execute(const std::string& name, Command command, const std::string& config_path,
            const std::optional<std::uint64_t>& seed_override, const fs::path& out_dir) {
  std::ifstream in(config_path);
  if (!in) throw ConfigError("cannot open config file '" + config_path + "'");
  Json raw;
  try {
    raw = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (seed_override) {
    if (!raw.is_object()) throw ConfigError("config root must be an object");
    raw["seed"] = *seed_override;
  }
  ConfigReader reader(std::move(raw));
  auto root = reader.root();
  const auto version = root.integer("schema_version", kSchemaVersion);
  if (version != kSchemaVersion) throw ConfigError("config key 'schema_version': only version 1 is supported");
  const std::uint64_t seed = root.u64("seed", 0);

  fs::create_directories(out_dir);
  Run run;
  run.out_dir = out_dir;
  command(root, seed, run);
  reader.finish();

  Json result{{"command", name},
              {"resolved_config", reader.resolved()},
              {"payload", run.payload},
              {"summary", run.summary},
              {"converged", run.converged}};
  write_text(out_dir / "result.json", result.dump(2) + "\n");
  for (const auto& line : run.summary) std::cout << line << "\n";
  if (!run.converged) {
    std::cerr << "warning: optimizer did not converge (results written)\n";
    return kExitNotConverged;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic flows of diffeomorphisms: simulation, rate functions, Laplace checks, image matching"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out_dir = ".";

  const std::vector<std::pair<std::string, Command>> commands{
      {"simulate", cmd_simulate},          {"validate-basis", cmd_validate_basis},
      {"rate", cmd_rate},                  {"laplace", cmd_laplace},
      {"match", cmd_match},                {"posterior-check", cmd_posterior_check}};
  const std::vector<std::string> help{
      "Integrate the noisy controlled flow for a point set",
      "Report trace, Lipschitz and covariance-PSD diagnostics of a basis",
      "Endpoint projection of the rate function by penalized optimal control",
      "Monte Carlo Laplace estimates against the variational value",
      "Solve the template-matching variational problem",
      "Posterior Laplace check against inf{F + I_d}"};
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    CLI::App* sub = app.add_subcommand(commands[i].first, help[i]);
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--seed", seed, "Override the config seed");
    sub->add_option("--threads", threads, "Cap on worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", out_dir, "Output directory")->capture_default_str();
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  if (threads) omp_set_num_threads(*threads);

  for (std::size_t i = 0; i < commands.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    try {
      return execute(commands[i].first, commands[i].second, config_path, seed, out_dir);
    } catch (const ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return kExitConfig;
    } catch (const BlowUpError& e) {
      std::cerr << "numerical blow-up: " << e.what() << "\n";
      return kExitBlowUp;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitFailure;
    }
  }
  return kExitFailure;
}
