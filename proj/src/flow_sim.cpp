#include "sflow/flow_sim.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "sflow/errors.hpp"

namespace sflow {
namespace {

bool all_finite(const Vec& x) { return x.allFinite(); }

// Noise/control window shared by the integrators.
struct Window {
  std::size_t j0 = 0;       // first noise step
  std::size_t j1 = 0;       // one past the last noise step
  std::size_t c0 = 0;       // control step aligned with j0
};

Window check_grids(const BasisFamily& basis, const ControlPath* control, const NoisePath& noise,
                   const PointSet& points, double t0, double t1) {
  if (!(t0 <= t1)) throw ConfigError("t0 must not exceed t1");
  basis.check_time(t0);
  basis.check_time(t1);
  if (noise.modes != basis.num_modes()) {
    std::ostringstream os;
    os << "noise path has " << noise.modes << " modes, basis has " << basis.num_modes();
    throw ConfigError(os.str());
  }
  for (const auto& p : points) {
    if (p.size() != basis.dim()) throw ConfigError("point dimension does not match basis dimension");
  }
  Window w;
  w.j0 = noise.index_of(t0, "t0");
  w.j1 = noise.index_of(t1, "t1");
  if (control) {
    if (control->modes != basis.num_modes()) throw ConfigError("control mode count does not match basis");
    if (std::abs(control->dt - noise.dt) > 1e-12 * noise.dt) {
      throw ConfigError("control and noise paths must share the same time step");
    }
    const double pos = noise.time(w.j0) / control->dt;
    const double c0 = std::round(pos);
    if (std::abs(pos - c0) > 1e-9 || c0 < 0.0) throw ConfigError("control grid is not aligned with the noise grid");
    w.c0 = static_cast<std::size_t>(c0);
    if (w.c0 + (w.j1 - w.j0) > control->steps) throw ConfigError("control grid does not cover [t0, t1]");
  }
  return w;
}

// One Euler-Maruyama step. `weights[l]` = u_l h + sqrt(eps) dbeta_l.
void euler_step(const BasisFamily& basis, std::span<const double> weights, double t, double h, Vec& x,
                Mat* jac) {
  Vec dx = basis.drift(x, t) * h;
  Mat g;
  if (jac) g = basis.drift_gradient(x, t) * h;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const double w = weights[l];
    if (w == 0.0) continue;
    dx += w * basis.mode(l, x, t);
    if (jac) g += w * basis.mode_gradient(l, x, t);
  }
  x += dx;
  if (jac) *jac += g * (*jac);
}

// Integrates one point over noise steps [w.j0, w.j1), calling
// on_step(k, x, J) after each step (k = 1..j1-j0).
template <typename OnStep>
void integrate_point(const BasisFamily& basis, const ControlPath* control, double sqrt_eps,
                     const NoisePath& noise, const Window& w, Vec& x, Mat* jac, OnStep&& on_step) {
  const std::size_t L = basis.num_modes();
  std::vector<double> weights(L, 0.0);
  const double h = noise.dt;
  for (std::size_t j = w.j0; j < w.j1; ++j) {
    const std::size_t c = w.c0 + (j - w.j0);
    for (std::size_t l = 0; l < L; ++l) {
      double wl = sqrt_eps * noise.increment(l, j);
      if (control) wl += control->value(l, c) * h;
      weights[l] = wl;
    }
    euler_step(basis, weights, noise.time(j), h, x, jac);
    if (!all_finite(x) || (jac && !jac->allFinite())) {
      throw BlowUpError(j - w.j0 + 1, "non-finite position or Jacobian");
    }
    on_step(j - w.j0 + 1, x, jac);
  }
}

void check_eps(double eps) {
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw ConfigError("eps must be a finite non-negative number");
}

}  // namespace

FlowTrajectory simulate_flow(const BasisFamily& basis, const ControlPath* control, double eps,
                             const PointSet& points, double t0, double t1, const NoisePath& noise,
                             bool with_jacobians) {
  check_eps(eps);
  const Window w = check_grids(basis, control, noise, points, t0, t1);
  if (with_jacobians && !basis.has_gradients()) {
    throw CapabilityError("Jacobians requested but the basis lacks analytic gradients");
  }
  const int d = basis.dim();
  FlowTrajectory traj;
  traj.dim = d;
  traj.points = points;
  traj.eps = eps;
  traj.basis_id = basis.id();
  traj.control_id = control ? control->id : "zero";
  traj.seed = noise.seed;
  for (std::size_t j = w.j0; j <= w.j1; ++j) traj.times.push_back(noise.time(j));
  traj.allocate(with_jacobians);

  const double sqrt_eps = std::sqrt(eps);
  for (std::size_t p = 0; p < points.size(); ++p) {
    Vec x = points[p];
    Mat jac = Mat::Identity(d, d);
    traj.set_position(0, p, x);
    if (with_jacobians) traj.set_jacobian(0, p, jac);
    integrate_point(basis, control, sqrt_eps, noise, w, x, with_jacobians ? &jac : nullptr,
                    [&](std::size_t k, const Vec& xk, const Mat* jk) {
                      traj.set_position(k, p, xk);
                      if (jk) traj.set_jacobian(k, p, *jk);
                    });
  }
  return traj;
}

PointSet terminal_positions(const BasisFamily& basis, const ControlPath* control, double eps,
                            const PointSet& points, double t0, double t1, const NoisePath& noise) {
  check_eps(eps);
  const Window w = check_grids(basis, control, noise, points, t0, t1);
  const double sqrt_eps = std::sqrt(eps);
  PointSet out = points;
  for (auto& x : out) {
    integrate_point(basis, control, sqrt_eps, noise, w, x, nullptr, [](std::size_t, const Vec&, const Mat*) {});
  }
  return out;
}

std::vector<std::vector<Mat>> jacobian_flow(const BasisFamily& basis, const ControlPath* control, double eps,
                                            const PointSet& points, double t0, double t1,
                                            const NoisePath& noise) {
  const FlowTrajectory traj = simulate_flow(basis, control, eps, points, t0, t1, noise, true);
  std::vector<std::vector<Mat>> out(traj.num_times());
  for (std::size_t k = 0; k < traj.num_times(); ++k) {
    out[k].reserve(points.size());
    for (std::size_t p = 0; p < points.size(); ++p) out[k].push_back(traj.jacobian(k, p));
  }
  return out;
}

namespace {

// Piecewise-linear interpolant of each mode's Brownian path.
class InterpolatedBrownian {
 public:
  explicit InterpolatedBrownian(const NoisePath& noise) : noise_(noise), cum_(noise.modes) {
    for (std::size_t l = 0; l < noise.modes; ++l) {
      cum_[l].resize(noise.steps + 1, 0.0);
      for (std::size_t j = 0; j < noise.steps; ++j) cum_[l][j + 1] = cum_[l][j] + noise.increment(l, j);
    }
  }

  double at(std::size_t l, double t) const {
    const double pos = std::clamp((t - noise_.t0) / noise_.dt, 0.0, static_cast<double>(noise_.steps));
    const auto i = static_cast<std::size_t>(std::floor(pos));
    if (i >= noise_.steps) return cum_[l][noise_.steps];
    const double frac = pos - static_cast<double>(i);
    return cum_[l][i] + frac * (cum_[l][i + 1] - cum_[l][i]);
  }

 private:
  const NoisePath& noise_;
  std::vector<std::vector<double>> cum_;
};

Vec integrate_leg(const BasisFamily& basis, const ControlPath* control, double sqrt_eps,
                  const InterpolatedBrownian& brownian, Vec x, double a, double b, std::size_t n) {
  if (n == 0 || a == b) return x;
  const std::size_t L = basis.num_modes();
  std::vector<double> weights(L);
  const double h = (b - a) / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double ta = a + static_cast<double>(k) * h;
    const double tb = k + 1 == n ? b : a + static_cast<double>(k + 1) * h;
    const std::size_t c = control ? control->step_at(ta) : 0;
    for (std::size_t l = 0; l < L; ++l) {
      double wl = sqrt_eps * (brownian.at(l, tb) - brownian.at(l, ta));
      if (control) wl += control->value(l, c) * (tb - ta);
      weights[l] = wl;
    }
    euler_step(basis, weights, ta, tb - ta, x, nullptr);
    if (!x.allFinite()) throw BlowUpError(k + 1, "non-finite position in flow-property leg");
  }
  return x;
}

}  // namespace

double check_flow_property(const BasisFamily& basis, const ControlPath* control, double eps,
                           const PointSet& points, double s, double t, double u, const NoisePath& noise) {
  check_eps(eps);
  if (!(s <= t && t <= u)) throw ConfigError("flow property check needs s <= t <= u");
  for (double tt : {s, t, u}) {
    basis.check_time(tt);
    if (tt < noise.t0 - 1e-12 || tt > noise.t_end() + 1e-12) throw ConfigError("noise path does not cover [s, u]");
  }
  if (noise.modes != basis.num_modes()) throw ConfigError("noise path mode count does not match basis");
  if (control) {
    if (control->modes != basis.num_modes()) throw ConfigError("control mode count does not match basis");
    if (std::abs(control->dt - noise.dt) > 1e-12 * noise.dt) {
      throw ConfigError("control and noise paths must share the same time step");
    }
  }
  const auto n = static_cast<std::size_t>(std::llround((u - s) / noise.dt));
  const InterpolatedBrownian brownian(noise);
  const double sqrt_eps = std::sqrt(eps);
  double worst = 0.0;
  for (const auto& x : points) {
    const Vec direct = integrate_leg(basis, control, sqrt_eps, brownian, x, s, u, n);
    const Vec mid = integrate_leg(basis, control, sqrt_eps, brownian, x, s, t, n);
    const Vec composed = integrate_leg(basis, control, sqrt_eps, brownian, mid, t, u, n);
    worst = std::max(worst, (direct - composed).norm());
  }
  return worst;
}

FlowTrajectory invert_flow(const BasisFamily& basis, const ControlPath* control, double eps,
                           const PointSet& lattice, double t0, double t1, const NoisePath& noise, double tol,
                           int max_iter) {
  const FlowTrajectory forward = simulate_flow(basis, control, eps, lattice, t0, t1, noise, true);
  const Window w = check_grids(basis, control, noise, lattice, t0, t1);
  const int d = basis.dim();
  const double sqrt_eps = std::sqrt(eps);

  FlowTrajectory inv;
  inv.dim = d;
  inv.points = lattice;
  inv.times = forward.times;
  inv.eps = eps;
  inv.basis_id = forward.basis_id + "^-1";
  inv.control_id = forward.control_id;
  inv.seed = forward.seed;
  inv.allocate(true);

  // Forward map and Jacobian from t0 to grid index k.
  auto forward_map = [&](const Vec& x0, std::size_t k, Vec& x, Mat& jac) {
    x = x0;
    jac = Mat::Identity(d, d);
    Window wk = w;
    wk.j1 = w.j0 + k;
    integrate_point(basis, control, sqrt_eps, noise, wk, x, &jac, [](std::size_t, const Vec&, const Mat*) {});
  };

  auto newton = [&](Vec x, const Vec& y, std::size_t k, Vec& solution, Mat& inv_jac) {
    Vec fx;
    Mat jac;
    forward_map(x, k, fx, jac);
    double res = (fx - y).norm();
    const double target = tol * std::max(1.0, y.norm());
    for (int it = 0; it < max_iter && res > target; ++it) {
      const Vec step = jac.fullPivLu().solve(fx - y);
      double alpha = 1.0;
      bool improved = false;
      for (int ls = 0; ls < 30; ++ls) {
        const Vec trial = x - alpha * step;
        Vec ft;
        Mat jt;
        forward_map(trial, k, ft, jt);
        const double rt = (ft - y).norm();
        if (rt < res) {
          x = trial;
          fx = ft;
          jac = jt;
          res = rt;
          improved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!improved) break;
    }
    solution = x;
    inv_jac = jac.inverse();
    return res <= target;
  };

  for (std::size_t p = 0; p < lattice.size(); ++p) {
    inv.set_position(0, p, lattice[p]);
    inv.set_jacobian(0, p, Mat::Identity(d, d));
  }
  for (std::size_t k = 1; k < forward.num_times(); ++k) {
    for (std::size_t p = 0; p < lattice.size(); ++p) {
      const Vec& y = lattice[p];
      std::size_t nearest = 0;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t q = 0; q < lattice.size(); ++q) {
        const double dist = (forward.position(k, q) - y).squaredNorm();
        if (dist < best) {
          best = dist;
          nearest = q;
        }
      }
      Vec sol;
      Mat inv_jac;
      bool ok = newton(lattice[nearest], y, k, sol, inv_jac);
      if (!ok) ok = newton(inv.position(k - 1, p), y, k, sol, inv_jac);
      if (!ok) {
        std::ostringstream os;
        os << "inverse flow: Newton failed for lattice point " << p << " at time index " << k;
        throw IntegrityError(os.str());
      }
      inv.set_position(k, p, sol);
      inv.set_jacobian(k, p, inv_jac);
    }
  }
  return inv;
}

PointSet make_ball_lattice(int dim, int n_max, int per_ball) {
  if (dim < 1 || dim > kMaxDim || n_max < 1 || per_ball < 2) throw ConfigError("ball lattice: bad parameters");
  PointSet out;
  for (int n = 1; n <= n_max; ++n) {
    Box cube{Vec::Constant(dim, -n), Vec::Constant(dim, n)};
    for (const auto& x : make_box_lattice(cube, per_ball)) {
      if (x.norm() <= n * (1.0 + 1e-12)) out.push_back(x);
    }
  }
  return out;
}

double truncated_rho(const PointSet& points, std::span<const double> diffs, int n_max) {
  double rho = 0.0;
  double weight = 1.0;
  for (int n = 1; n <= n_max; ++n) {
    weight *= 0.5;
    double sup = 0.0;
    const double radius = n * (1.0 + 1e-12);
    for (std::size_t p = 0; p < points.size(); ++p) {
      if (points[p].norm() <= radius) sup = std::max(sup, diffs[p]);
    }
    rho += weight * sup / (1.0 + sup);
  }
  return rho;
}

namespace {

void check_same_samples(const FlowTrajectory& a, const FlowTrajectory& b, const char* what) {
  if (a.dim != b.dim || a.points.size() != b.points.size() || a.times.size() != b.times.size()) {
    throw ConfigError(std::string("flow_distance: mismatched grids (") + what + ")");
  }
  for (std::size_t p = 0; p < a.points.size(); ++p) {
    if (a.points[p] != b.points[p]) throw ConfigError(std::string("flow_distance: sample points differ (") + what + ")");
  }
  for (std::size_t k = 0; k < a.times.size(); ++k) {
    if (std::abs(a.times[k] - b.times[k]) > 1e-12) {
      throw ConfigError(std::string("flow_distance: time grids differ (") + what + ")");
    }
  }
}

double lambda_m(const FlowTrajectory& a, const FlowTrajectory& b, std::size_t k, int m, int n_max) {
  const std::size_t P = a.points.size();
  std::vector<double> diffs(P);
  for (std::size_t p = 0; p < P; ++p) diffs[p] = (a.position(k, p) - b.position(k, p)).norm();
  double total = truncated_rho(a.points, diffs, n_max);
  if (m >= 1) {
    for (int i = 0; i < a.dim; ++i) {
      for (std::size_t p = 0; p < P; ++p) diffs[p] = (a.jacobian(k, p).col(i) - b.jacobian(k, p).col(i)).norm();
      total += truncated_rho(a.points, diffs, n_max);
    }
  }
  return total;
}

}  // namespace

double flow_distance(const FlowTrajectory& a, const FlowTrajectory& b, const FlowTrajectory& a_inverse,
                     const FlowTrajectory& b_inverse, int m, int n_max) {
  if (m < 0 || m > 1) throw ConfigError("flow_distance: derivative order must be 0 or 1");
  if (n_max < 1) throw ConfigError("flow_distance: n_max must be >= 1");
  check_same_samples(a, b, "forward");
  check_same_samples(a_inverse, b_inverse, "inverse");
  if (a_inverse.times.size() != a.times.size()) throw ConfigError("flow_distance: inverse time grid differs");
  if (m == 1 && !(a.has_jacobians() && b.has_jacobians() && a_inverse.has_jacobians() && b_inverse.has_jacobians())) {
    throw ConfigError("flow_distance: m = 1 needs Jacobians on all four trajectories");
  }
  double best = 0.0;
  for (std::size_t k = 0; k < a.times.size(); ++k) {
    const double value = lambda_m(a, b, k, m, n_max) + lambda_m(a_inverse, b_inverse, k, m, n_max);
    best = std::max(best, value);
  }
  return best;
}

void write_trajectory_csv(const FlowTrajectory& traj, std::ostream& out) {
  const int d = traj.dim;
  out << "time,point_id";
  for (int i = 0; i < d; ++i) out << ",x" << i;
  if (traj.has_jacobians()) {
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) out << ",j" << i << j;
    }
  }
  out << '\n';
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (std::size_t k = 0; k < traj.num_times(); ++k) {
    for (std::size_t p = 0; p < traj.num_points(); ++p) {
      put(traj.times[k]);
      out << ',' << p;
      const Vec x = traj.position(k, p);
      for (int i = 0; i < d; ++i) {
        out << ',';
        put(x[i]);
      }
      if (traj.has_jacobians()) {
        const Mat jac = traj.jacobian(k, p);
        for (int i = 0; i < d; ++i) {
          for (int j = 0; j < d; ++j) {
            out << ',';
            put(jac(i, j));
          }
        }
      }
      out << '\n';
    }
  }
}

namespace {

constexpr char kMagic[4] = {'S', 'F', 'L', 'W'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_raw(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get_raw(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw ConfigError("trajectory binary: truncated input");
  return v;
}

}  // namespace

void write_trajectory_binary(const FlowTrajectory& traj, std::ostream& out) {
  out.write(kMagic, 4);
  put_raw<std::uint32_t>(out, kVersion);
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(traj.dim));
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(traj.num_points()));
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(traj.num_times() - 1));
  put_raw<double>(out, traj.eps);
  put_raw<std::uint64_t>(out, traj.seed);
  put_raw<std::uint32_t>(out, traj.has_jacobians() ? 1u : 0u);
  for (double t : traj.times) put_raw(out, t);
  for (const auto& p : traj.points) {
    for (int i = 0; i < traj.dim; ++i) put_raw(out, p[i]);
  }
  for (double v : traj.positions) put_raw(out, v);
  for (double v : traj.jacobians) put_raw(out, v);
}

FlowTrajectory read_trajectory_binary(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw ConfigError("trajectory binary: bad magic");
  if (get_raw<std::uint32_t>(in) != kVersion) throw ConfigError("trajectory binary: unsupported version");
  FlowTrajectory traj;
  traj.dim = static_cast<int>(get_raw<std::uint32_t>(in));
  const auto P = get_raw<std::uint32_t>(in);
  const auto M = get_raw<std::uint32_t>(in);
  traj.eps = get_raw<double>(in);
  traj.seed = get_raw<std::uint64_t>(in);
  const auto flags = get_raw<std::uint32_t>(in);
  if (traj.dim < 1 || traj.dim > kMaxDim) throw ConfigError("trajectory binary: bad dimension");
  traj.times.resize(M + 1);
  for (double& t : traj.times) t = get_raw<double>(in);
  traj.points.assign(P, Vec::Zero(traj.dim));
  for (auto& p : traj.points) {
    for (int i = 0; i < traj.dim; ++i) p[i] = get_raw<double>(in);
  }
  traj.allocate((flags & 1u) != 0);
  for (double& v : traj.positions) v = get_raw<double>(in);
  for (double& v : traj.jacobians) v = get_raw<double>(in);
  return traj;
}

}  // namespace sflow
