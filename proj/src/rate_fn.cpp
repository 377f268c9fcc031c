#include "sflow/rate_fn.hpp"

#include <algorithm>
#include <cmath>

#include "sflow/control_flow.hpp"
#include "sflow/errors.hpp"
#include "sflow/philox.hpp"

namespace sflow {

void EndpointProblem::validate() const {
  if (starts.empty()) throw ConfigError("rate problem: need at least one start point");
  if (starts.size() != targets.size()) throw ConfigError("rate problem: starts and targets differ in length");
  for (std::size_t p = 0; p < starts.size(); ++p) {
    if (starts[p].size() != basis.dim() || targets[p].size() != basis.dim()) {
      throw ConfigError("rate problem: point dimension does not match basis");
    }
  }
  if (!(horizon > 0.0) || horizon > basis.horizon() * (1.0 + 1e-12)) {
    throw ConfigError("rate problem: horizon must lie in (0, basis T]");
  }
  if (steps == 0) throw ConfigError("rate problem: steps must be positive");
  if (penalty_schedule.empty()) throw ConfigError("rate problem: empty penalty schedule");
  for (std::size_t i = 1; i < penalty_schedule.size(); ++i) {
    if (!(penalty_schedule[i] > penalty_schedule[i - 1])) {
      throw ConfigError("rate problem: penalty schedule must be increasing");
    }
  }
  if (multistart < 1) throw ConfigError("rate problem: multistart must be >= 1");
}

double penalized_objective(const EndpointProblem& problem, const ControlPath& u, double weight,
                           std::vector<double>* grad) {
  const ControlledShooting shooting(problem.basis, u, problem.starts);
  double miss = 0.0;
  PointSet adjoints;
  adjoints.reserve(problem.starts.size());
  for (std::size_t p = 0; p < problem.starts.size(); ++p) {
    const Vec diff = shooting.endpoints()[p] - problem.targets[p];
    miss += diff.squaredNorm();
    adjoints.push_back(weight * diff);
  }
  if (grad) {
    *grad = shooting.pullback(adjoints);
    const auto cg = control_cost_gradient(u);
    for (std::size_t i = 0; i < grad->size(); ++i) (*grad)[i] += cg[i];
  }
  return control_cost(u) + 0.5 * weight * miss;
}

namespace {

double max_residual(const EndpointProblem& problem, const ControlPath& u) {
  const ControlledShooting shooting(problem.basis, u, problem.starts);
  double worst = 0.0;
  for (std::size_t p = 0; p < problem.starts.size(); ++p) {
    worst = std::max(worst, (shooting.endpoints()[p] - problem.targets[p]).norm());
  }
  return worst;
}

struct StartOutcome {
  ControlPath u;
  double penalized = 0.0;
  double grad_norm = 0.0;
  double residual = 0.0;
};

StartOutcome run_start(const EndpointProblem& problem, int start) {
  const std::size_t L = problem.basis.num_modes();
  ControlPath u = ControlPath::zeros(L, problem.steps, problem.dt());
  u.id = "u_star";
  if (start > 0) {
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t j = 0; j < problem.steps; ++j) {
        u.at(l, j) = problem.init_scale * counter_normal(problem.seed, static_cast<std::uint32_t>(j),
                                                         static_cast<std::uint32_t>(l),
                                                         static_cast<std::uint64_t>(start));
      }
    }
  }
  StartOutcome out;
  for (std::size_t stage = 0; stage < problem.penalty_schedule.size(); ++stage) {
    const double w = problem.penalty_schedule[stage];
    const bool last = stage + 1 == problem.penalty_schedule.size();
    LbfgsOptions opts;
    opts.grad_tol = last ? 0.1 * problem.tol : std::max(problem.tol, 1e-6);
    opts.max_iterations = last ? 4000 : 1000;
    auto fn = [&](const std::vector<double>& x, std::vector<double>& g) {
      ControlPath trial = u;
      trial.values = x;
      return penalized_objective(problem, trial, w, &g);
    };
    const LbfgsResult r = minimize_lbfgs(fn, u.values, opts);
    u.values = r.x;
    out.penalized = r.f;
    out.grad_norm = r.grad_norm;
  }
  out.residual = max_residual(problem, u);
  out.u = std::move(u);
  return out;
}

}  // namespace

RateResult endpoint_rate(const EndpointProblem& problem) {
  problem.validate();
  std::vector<StartOutcome> outcomes(static_cast<std::size_t>(problem.multistart));
  std::vector<std::string> failures(outcomes.size());
#pragma omp parallel for schedule(dynamic)
  for (int s = 0; s < problem.multistart; ++s) {
    try {
      outcomes[static_cast<std::size_t>(s)] = run_start(problem, s);
    } catch (const std::exception& e) {
      failures[static_cast<std::size_t>(s)] = e.what();
    }
  }
  int best = -1;
  for (int s = 0; s < problem.multistart; ++s) {
    if (!failures[static_cast<std::size_t>(s)].empty()) continue;
    if (best < 0 || outcomes[static_cast<std::size_t>(s)].penalized < outcomes[static_cast<std::size_t>(best)].penalized) {
      best = s;
    }
  }
  if (best < 0) throw BlowUpError(0, "every multistart run failed: " + failures.front());

  const StartOutcome& o = outcomes[static_cast<std::size_t>(best)];
  RateResult result;
  result.u_star = o.u;
  result.value = control_cost(o.u);
  result.residual = o.residual;
  result.grad_norm = o.grad_norm;
  result.penalized = o.penalized;
  result.best_start = best;
  result.converged = o.residual <= problem.tol_endpoint && o.grad_norm <= problem.tol;
  result.likely_unreachable = std::none_of(outcomes.begin(), outcomes.end(), [&](const StartOutcome& x) {
    return !x.u.values.empty() && x.residual < 10.0 * problem.tol_endpoint;
  });
  if (result.likely_unreachable) result.converged = false;
  return result;
}

ScanTable rate_lower_bound_scan(const EndpointProblem& problem, std::span<const double> lo,
                                std::span<const double> hi, int count) {
  problem.validate();
  const std::size_t L = problem.basis.num_modes();
  if (L > 3) throw SizeError("rate scan: at most 3 modes supported");
  if (lo.size() != L || hi.size() != L) throw ConfigError("rate scan: one range per mode required");
  if (count < 1) throw ConfigError("rate scan: count must be positive");
  const double total = std::pow(static_cast<double>(count), static_cast<double>(L));
  if (total > 1e6) throw SizeError("rate scan: lattice exceeds 10^6 points");

  const double w_max = problem.penalty_schedule.back();
  ScanTable table;
  std::vector<int> idx(L, 0);
  while (true) {
    ScanRow row;
    row.coefficients.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
      row.coefficients[l] = count == 1 ? lo[l] : lo[l] + (hi[l] - lo[l]) * idx[l] / (count - 1);
    }
    const ControlPath u = ControlPath::constant(row.coefficients, problem.steps, problem.dt());
    const ControlledShooting shooting(problem.basis, u, problem.starts);
    double miss = 0.0;
    for (std::size_t p = 0; p < problem.starts.size(); ++p) {
      const double r = (shooting.endpoints()[p] - problem.targets[p]).norm();
      miss += r * r;
      row.residual = std::max(row.residual, r);
    }
    row.cost = control_cost(u);
    row.penalized = row.cost + 0.5 * w_max * miss;
    if (table.rows.empty() || row.penalized < table.rows[table.best].penalized) table.best = table.rows.size();
    table.rows.push_back(std::move(row));
    std::size_t i = 0;
    while (i < L && ++idx[i] >= count) idx[i++] = 0;
    if (i == L) break;
  }
  return table;
}

}  // namespace sflow
