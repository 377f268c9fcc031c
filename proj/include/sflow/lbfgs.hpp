#pragma once

#include <functional>
#include <vector>

namespace sflow {

struct LbfgsOptions {
  int max_iterations = 2000;
  int history = 10;
  double grad_tol = 1e-8;      ///< stop when |grad|_2 <= grad_tol
  double rel_f_tol = 1e-15;    ///< stop when relative decrease stalls below this for several iterations
  double armijo = 1e-4;
  double wolfe = 0.9;
};

struct LbfgsResult {
  std::vector<double> x;
  double f = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Objective returns f(x) and writes grad f(x) into its second argument.
using Objective = std::function<double(const std::vector<double>&, std::vector<double>&)>;

/// Limited-memory BFGS with a bracketing line search for the weak Wolfe
/// conditions. Deterministic.
LbfgsResult minimize_lbfgs(const Objective& objective, std::vector<double> x0, const LbfgsOptions& options = {});

}  // namespace sflow
