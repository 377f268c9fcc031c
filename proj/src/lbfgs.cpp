#include "sflow/lbfgs.hpp"

#include <cmath>
#include <deque>
#include <numeric>

namespace sflow {
namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

}  // namespace

LbfgsResult minimize_lbfgs(const Objective& objective, std::vector<double> x0, const LbfgsOptions& options) {
  const std::size_t n = x0.size();
  LbfgsResult result;
  result.x = std::move(x0);
  std::vector<double> g(n), x_new(n), g_new(n), dir(n);
  double f = objective(result.x, g);
  result.f = f;
  result.grad_norm = norm(g);
  if (n == 0 || result.grad_norm <= options.grad_tol) {
    result.converged = true;
    return result;
  }

  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;
  int stalled = 0;

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    // Two-loop recursion.
    dir = g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha[k] = rho_hist[k] * dot(s_hist[k], dir);
      for (std::size_t i = 0; i < n; ++i) dir[i] -= alpha[k] * y_hist[k][i];
    }
    if (!s_hist.empty()) {
      const double gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
      for (double& v : dir) v *= gamma;
    } else {
      const double scale = 1.0 / std::max(1.0, norm(g));
      for (double& v : dir) v *= scale;
    }
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * dot(y_hist[k], dir);
      for (std::size_t i = 0; i < n; ++i) dir[i] += s_hist[k][i] * (alpha[k] - beta);
    }
    for (double& v : dir) v = -v;
    double slope = dot(g, dir);
    if (!(slope < 0.0)) {
      // Not a descent direction: reset memory and use steepest descent.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      const double scale = 1.0 / std::max(1.0, norm(g));
      for (std::size_t i = 0; i < n; ++i) dir[i] = -g[i] * scale;
      slope = dot(g, dir);
    }

    // Bracketing line search (weak Wolfe).
    double step = 1.0, lo = 0.0, hi = INFINITY;
    double f_new = f;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = result.x[i] + step * dir[i];
      f_new = objective(x_new, g_new);
      if (!std::isfinite(f_new) || f_new > f + options.armijo * step * slope) {
        hi = step;
      } else if (dot(g_new, dir) < options.wolfe * slope) {
        lo = step;
      } else {
        accepted = true;
        break;
      }
      step = std::isinf(hi) ? 2.0 * lo : 0.5 * (lo + hi);
      if (step < 1e-20) break;
    }
    if (!accepted) {
      // Accept a strictly decreasing point if we found one.
      if (!(std::isfinite(f_new) && f_new < f)) {
        result.iterations = iter;
        break;
      }
    }

    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_new[i] - result.x[i];
      y[i] = g_new[i] - g[i];
    }
    const double sy = dot(s, y);
    if (sy > 1e-16 * norm(s) * norm(y)) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > options.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    const double decrease = f - f_new;
    result.x.swap(x_new);
    g.swap(g_new);
    f = f_new;
    result.f = f;
    result.grad_norm = norm(g);
    result.iterations = iter + 1;
    if (result.grad_norm <= options.grad_tol) {
      result.converged = true;
      break;
    }
    stalled = decrease <= options.rel_f_tol * std::max(1.0, std::abs(f)) ? stalled + 1 : 0;
    if (stalled >= 5) break;
  }
  return result;
}

}  // namespace sflow
