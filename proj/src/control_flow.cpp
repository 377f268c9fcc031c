#include "sflow/control_flow.hpp"

#include <cmath>
#include <sstream>

#include "sflow/errors.hpp"

namespace sflow {
namespace {

void check_modes(const BasisFamily& basis, const ControlPath& u) {
  if (u.modes != basis.num_modes()) {
    std::ostringstream os;
    os << "control has " << u.modes << " modes, basis has " << basis.num_modes();
    throw ConfigError(os.str());
  }
}

Vec drift_with(const BasisFamily& basis, const ControlPath& u, std::size_t j, const Vec& x, double t) {
  Vec v = basis.drift(x, t);
  for (std::size_t l = 0; l < u.modes; ++l) {
    const double c = u.value(l, j);
    if (c != 0.0) v += c * basis.mode(l, x, t);
  }
  return v;
}

Vec rk4_step(const BasisFamily& basis, const ControlPath& u, std::size_t j, const Vec& x, double t, double h) {
  const Vec k1 = drift_with(basis, u, j, x, t);
  const Vec k2 = drift_with(basis, u, j, x + 0.5 * h * k1, t + 0.5 * h);
  const Vec k3 = drift_with(basis, u, j, x + 0.5 * h * k2, t + 0.5 * h);
  const Vec k4 = drift_with(basis, u, j, x + h * k3, t + h);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

std::size_t grid_index(const ControlPath& u, double t, const char* what) {
  const double pos = t / u.dt;
  const double r = std::round(pos);
  if (std::abs(pos - r) > 1e-9 || r < 0.0 || r > static_cast<double>(u.steps)) {
    std::ostringstream os;
    os << what << "=" << t << " is not a grid time of the control path";
    throw ConfigError(os.str());
  }
  return static_cast<std::size_t>(r);
}

}  // namespace

Vec controlled_drift(const BasisFamily& basis, const ControlPath& u, const Vec& x, double t) {
  check_modes(basis, u);
  basis.check_time(t);
  return drift_with(basis, u, u.step_at(t), x, t);
}

FlowTrajectory solve_controlled_flow(const BasisFamily& basis, const ControlPath& u, const PointSet& points,
                                     double t0, double t1) {
  check_modes(basis, u);
  if (!(t0 <= t1)) throw ConfigError("t0 must not exceed t1");
  basis.check_time(t0);
  basis.check_time(t1);
  const std::size_t j0 = grid_index(u, t0, "t0");
  const std::size_t j1 = grid_index(u, t1, "t1");

  FlowTrajectory traj;
  traj.dim = basis.dim();
  traj.points = points;
  traj.eps = 0.0;
  traj.basis_id = basis.id();
  traj.control_id = u.id;
  for (std::size_t j = j0; j <= j1; ++j) traj.times.push_back(static_cast<double>(j) * u.dt);
  traj.allocate(false);

  for (std::size_t p = 0; p < points.size(); ++p) {
    if (points[p].size() != basis.dim()) throw ConfigError("point dimension does not match basis dimension");
    Vec x = points[p];
    traj.set_position(0, p, x);
    for (std::size_t j = j0; j < j1; ++j) {
      x = rk4_step(basis, u, j, x, static_cast<double>(j) * u.dt, u.dt);
      if (!x.allFinite()) throw BlowUpError(j - j0 + 1, "non-finite position in controlled flow");
      traj.set_position(j - j0 + 1, p, x);
    }
  }
  return traj;
}

Vec accumulate_F0u(const BasisFamily& basis, const ControlPath& u, const Vec& x, double t) {
  check_modes(basis, u);
  basis.check_time(t);
  u.step_at(t);  // domain check
  Vec total = Vec::Zero(basis.dim());
  double s = 0.0;
  for (std::size_t j = 0; j < u.steps && s < t; ++j) {
    const double end = std::min(t, static_cast<double>(j + 1) * u.dt);
    const double h = end - s;
    if (h <= 0.0) break;
    const Vec g0 = drift_with(basis, u, j, x, s);
    const Vec gm = drift_with(basis, u, j, x, s + 0.5 * h);
    const Vec g1 = drift_with(basis, u, j, x, end);
    total += (h / 6.0) * (g0 + 4.0 * gm + g1);
    s = end;
  }
  return total;
}

double control_cost(const ControlPath& u) {
  double sum = 0.0;
  for (double v : u.values) sum += v * v;
  return 0.5 * sum * u.dt;
}

std::vector<double> control_cost_gradient(const ControlPath& u) {
  std::vector<double> g(u.values.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = u.values[i] * u.dt;
  return g;
}

ControlledShooting::ControlledShooting(const BasisFamily& basis, const ControlPath& u, PointSet starts)
    : basis_(basis), u_(u), starts_(std::move(starts)) {
  check_modes(basis_, u_);
  basis_.check_time(u_.horizon());
  states_.resize(starts_.size());
  endpoints_.reserve(starts_.size());
  for (std::size_t p = 0; p < starts_.size(); ++p) {
    if (starts_[p].size() != basis_.dim()) throw ConfigError("point dimension does not match basis dimension");
    auto& states = states_[p];
    states.reserve(u_.steps + 1);
    Vec x = starts_[p];
    states.push_back(x);
    for (std::size_t j = 0; j < u_.steps; ++j) {
      x = rk4_step(basis_, u_, j, x, static_cast<double>(j) * u_.dt, u_.dt);
      if (!x.allFinite()) throw BlowUpError(j + 1, "non-finite position in controlled flow");
      states.push_back(x);
    }
    endpoints_.push_back(x);
  }
}

std::vector<double> ControlledShooting::pullback(const PointSet& terminal_adjoints) const {
  if (terminal_adjoints.size() != starts_.size()) throw ConfigError("pullback: one adjoint per endpoint required");
  const std::size_t L = u_.modes;
  const int d = basis_.dim();
  const double h = u_.dt;
  std::vector<double> grad(L * u_.steps, 0.0);

  // Per-stage value of b_hat, its spatial Jacobian, and the mode values
  // (the Jacobian of b_hat with respect to the step's coefficients).
  struct Stage {
    Mat jac;
    std::vector<Vec> modes;
  };
  auto evaluate = [&](std::size_t j, const Vec& y, double t, Vec& value, Stage& st) {
    value = basis_.drift(y, t);
    st.jac = basis_.drift_gradient(y, t);
    st.modes.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
      st.modes[l] = basis_.mode(l, y, t);
      const double c = u_.value(l, j);
      value += c * st.modes[l];
      if (c != 0.0) st.jac += c * basis_.mode_gradient(l, y, t);
    }
  };

  Stage s1, s2, s3, s4;
  Vec k1, k2, k3, k4;
  for (std::size_t p = 0; p < starts_.size(); ++p) {
    if (terminal_adjoints[p].size() != d) throw ConfigError("pullback: adjoint dimension mismatch");
    Vec lambda = terminal_adjoints[p];
    for (std::size_t jj = u_.steps; jj-- > 0;) {
      const Vec& x = states_[p][jj];
      const double t = static_cast<double>(jj) * h;
      evaluate(jj, x, t, k1, s1);
      const Vec y2 = x + 0.5 * h * k1;
      evaluate(jj, y2, t + 0.5 * h, k2, s2);
      const Vec y3 = x + 0.5 * h * k2;
      evaluate(jj, y3, t + 0.5 * h, k3, s3);
      const Vec y4 = x + h * k3;
      evaluate(jj, y4, t + h, k4, s4);

      // x_{n+1} = x + h/6 (k1 + 2k2 + 2k3 + k4); adjoints of the stage values:
      Vec a4 = (h / 6.0) * lambda;
      Vec a3 = (h / 3.0) * lambda;
      Vec a2 = (h / 3.0) * lambda;
      Vec a1 = (h / 6.0) * lambda;
      Vec lx = lambda;

      auto backprop = [&](const Stage& st, const Vec& a, Vec& feed, double feed_scale) {
        const Vec ly = st.jac.transpose() * a;
        for (std::size_t l = 0; l < L; ++l) grad[l * u_.steps + jj] += st.modes[l].dot(a);
        lx += ly;
        if (feed_scale != 0.0) feed += feed_scale * ly;
      };
      Vec none = Vec::Zero(d);
      backprop(s4, a4, a3, h);
      backprop(s3, a3, a2, 0.5 * h);
      backprop(s2, a2, a1, 0.5 * h);
      backprop(s1, a1, none, 0.0);
      lambda = lx;
    }
  }
  return grad;
}

}  // namespace sflow
