#include "sflow/ldp_lab.hpp"

#include <cmath>

#include "sflow/control_flow.hpp"
#include "sflow/errors.hpp"
#include "sflow/flow_sim.hpp"
#include "sflow/lbfgs.hpp"
#include "sflow/philox.hpp"

namespace sflow {

std::vector<double> flatten(const PointSet& points) {
  std::vector<double> z;
  for (const auto& p : points) {
    for (int i = 0; i < p.size(); ++i) z.push_back(p[i]);
  }
  return z;
}

namespace {

std::size_t grid_steps(double horizon, double dt) {
  if (!(dt > 0.0) || !(horizon > 0.0)) throw ConfigError("horizon and dt must be positive");
  const double m = horizon / dt;
  const double r = std::round(m);
  if (std::abs(m - r) > 1e-9 * std::max(1.0, m) || r < 1.0) throw ConfigError("horizon must be a multiple of dt");
  return static_cast<std::size_t>(r);
}

}  // namespace

std::vector<double> sample_endpoint_functional(const BasisFamily& basis, double eps, std::size_t n_samples,
                                               const EndpointFunctional& F, const PointSet& points,
                                               double horizon, double dt, std::uint64_t seed, Execution exec) {
  if (!(eps > 0.0)) throw ConfigError("laplace estimate: eps must be positive");
  const std::size_t steps = grid_steps(horizon, dt);
  const std::size_t L = basis.num_modes();
  return sample_map<double>(n_samples, exec, [&](std::size_t i) {
    const NoisePath noise = NoisePath::generate(L, steps, dt, seed, i);
    const PointSet end = terminal_positions(basis, nullptr, eps, points, 0.0, horizon, noise);
    return F.value(flatten(end));
  });
}

LaplaceEstimate laplace_estimate(const BasisFamily& basis, double eps, std::size_t n_samples,
                                 const EndpointFunctional& F, const PointSet& points, double horizon, double dt,
                                 std::uint64_t seed, Execution exec) {
  if (n_samples < 100) throw ConfigError("laplace estimate: n_samples must be >= 100");
  const auto values = sample_endpoint_functional(basis, eps, n_samples, F, points, horizon, dt, seed, exec);
  const LogMeanExp lme = laplace_functional(values, eps);
  LaplaceEstimate out;
  out.estimate = lme.estimate;
  out.std_error = lme.std_error;
  out.min_F = lme.min_value;
  out.max_F = lme.max_value;
  out.ess = lme.ess;
  out.n = n_samples;
  return out;
}

VariationalResult variational_value(const BasisFamily& basis, const EndpointFunctional& F, const PointSet& points,
                                    double horizon, const VariationalOptions& options) {
  if (options.steps == 0) throw ConfigError("variational value: steps must be positive");
  if (options.multistart < 1) throw ConfigError("variational value: multistart must be >= 1");
  const std::size_t L = basis.num_modes();
  const double dt = horizon / static_cast<double>(options.steps);
  const int d = basis.dim();

  auto objective = [&](const ControlPath& u, std::vector<double>* grad, double* f_part) {
    const ControlledShooting shooting(basis, u, points);
    const auto z = flatten(shooting.endpoints());
    const double fv = F.value(z);
    if (f_part) *f_part = fv;
    if (grad) {
      std::vector<double> gz(z.size());
      F.gradient(z, gz);
      PointSet adjoints(points.size(), Vec::Zero(d));
      for (std::size_t p = 0; p < points.size(); ++p) {
        for (int i = 0; i < d; ++i) adjoints[p][i] = gz[p * d + i];
      }
      *grad = shooting.pullback(adjoints);
      const auto cg = control_cost_gradient(u);
      for (std::size_t k = 0; k < grad->size(); ++k) (*grad)[k] += cg[k];
    }
    return fv + control_cost(u);
  };

  VariationalResult best;
  bool have = false;
  for (int s = 0; s < options.multistart; ++s) {
    ControlPath u = ControlPath::zeros(L, options.steps, dt);
    u.id = "u_star";
    if (s > 0) {
      for (std::size_t l = 0; l < L; ++l) {
        for (std::size_t j = 0; j < options.steps; ++j) {
          u.at(l, j) = options.init_scale * counter_normal(options.seed, static_cast<std::uint32_t>(j),
                                                           static_cast<std::uint32_t>(l),
                                                           static_cast<std::uint64_t>(s));
        }
      }
    }
    LbfgsOptions lo;
    lo.grad_tol = options.grad_tol;
    lo.max_iterations = 4000;
    const LbfgsResult r = minimize_lbfgs(
        [&](const std::vector<double>& x, std::vector<double>& g) {
          ControlPath trial = u;
          trial.values = x;
          return objective(trial, &g, nullptr);
        },
        u.values, lo);
    u.values = r.x;
    if (!have || r.f < best.value) {
      have = true;
      best.u = u;
      best.value = r.f;
      best.grad_norm = r.grad_norm;
      best.converged = r.converged;
      best.cost = control_cost(u);
      objective(u, nullptr, &best.functional);
    }
  }
  return best;
}

ConvergenceReport ldp_convergence_report(const BasisFamily& basis, const EndpointFunctional& F,
                                         const PointSet& points, double horizon, double dt,
                                         const std::vector<double>& eps_list, std::size_t n_samples,
                                         std::uint64_t seed, const VariationalOptions& options, Execution exec) {
  if (eps_list.size() < 3) throw ConfigError("eps_list needs at least 3 entries");
  for (std::size_t i = 1; i < eps_list.size(); ++i) {
    if (!(eps_list[i] < eps_list[i - 1])) throw ConfigError("eps_list must be strictly decreasing");
  }
  ConvergenceReport report;
  const VariationalResult var = variational_value(basis, F, points, horizon, options);
  report.variational = var.value;
  report.variational_converged = var.converged;
  for (double eps : eps_list) {
    const LaplaceEstimate est = laplace_estimate(basis, eps, n_samples, F, points, horizon, dt, seed, exec);
    ConvergenceRow row;
    row.eps = eps;
    row.estimate = est.estimate;
    row.std_error = est.std_error;
    row.gap = std::abs(est.estimate - var.value);
    row.min_F = est.min_F;
    row.max_F = est.max_F;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace sflow
