#include "sflow/control_path.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>
#include <sstream>

#include "sflow/errors.hpp"

namespace sflow {

std::vector<double> ControlPath::coefficients(std::size_t j) const {
  std::vector<double> c(modes);
  for (std::size_t l = 0; l < modes; ++l) c[l] = value(l, j);
  return c;
}

std::size_t ControlPath::step_at(double t) const {
  const double end = horizon();
  const double slack = 1e-12 * std::max(1.0, end);
  if (!(t >= -slack && t <= end + slack) || steps == 0) {
    std::ostringstream os;
    os << "time " << t << " outside control grid [0, " << end << "]";
    throw DomainError(os.str());
  }
  const double pos = t / dt;
  auto j = static_cast<std::size_t>(std::max(0.0, std::floor(pos + 1e-9)));
  return std::min(j, steps - 1);
}

void ControlPath::check_bound() const {
  if (!bound) return;
  double energy = 0.0;
  for (double v : values) energy += v * v * dt;
  if (energy > *bound) {
    std::ostringstream os;
    os << "control energy " << energy << " exceeds bound " << *bound;
    throw ConfigError(os.str());
  }
}

ControlPath ControlPath::scaled(double factor) const {
  ControlPath out = *this;
  for (double& v : out.values) v *= factor;
  return out;
}

ControlPath ControlPath::zeros(std::size_t modes, std::size_t steps, double dt) {
  if (!(dt > 0.0)) throw ConfigError("control path: dt must be positive");
  ControlPath u;
  u.dt = dt;
  u.modes = modes;
  u.steps = steps;
  u.values.assign(modes * steps, 0.0);
  return u;
}

ControlPath ControlPath::constant(std::span<const double> coeffs, std::size_t steps, double dt) {
  ControlPath u = zeros(coeffs.size(), steps, dt);
  for (std::size_t l = 0; l < coeffs.size(); ++l) {
    for (std::size_t j = 0; j < steps; ++j) u.at(l, j) = coeffs[l];
  }
  return u;
}

void write_control_csv(const ControlPath& u, std::ostream& out) {
  out << "t";
  for (std::size_t l = 0; l < u.modes; ++l) out << ",u" << (l + 1);
  out << "\n";
  char buf[32];
  for (std::size_t j = 0; j < u.steps; ++j) {
    std::snprintf(buf, sizeof buf, "%.17g", static_cast<double>(j) * u.dt);
    out << buf;
    for (std::size_t l = 0; l < u.modes; ++l) {
      std::snprintf(buf, sizeof buf, "%.17g", u.value(l, j));
      out << ',' << buf;
    }
    out << "\n";
  }
}

ControlPath read_control_csv(std::istream& in, double dt_if_single) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("t", 0) != 0) throw ConfigError("control csv: missing header");
  const auto modes = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  std::vector<double> times;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(row, cell, ',')) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ConfigError("control csv: bad number '" + cell + "'");
      }
    }
    if (v.size() != modes + 1) throw ConfigError("control csv: row has the wrong number of columns");
    times.push_back(v[0]);
    rows.emplace_back(v.begin() + 1, v.end());
  }
  if (rows.empty()) throw ConfigError("control csv: no rows");
  const double dt = rows.size() > 1 ? times[1] - times[0] : dt_if_single;
  if (!(dt > 0.0)) throw ConfigError("control csv: cannot determine a positive step");
  for (std::size_t j = 0; j < times.size(); ++j) {
    if (std::abs(times[j] - static_cast<double>(j) * dt) > 1e-9 * std::max(1.0, dt)) {
      throw ConfigError("control csv: rows must be evenly spaced from t = 0");
    }
  }
  ControlPath u = ControlPath::zeros(modes, rows.size(), dt);
  for (std::size_t j = 0; j < rows.size(); ++j) {
    for (std::size_t l = 0; l < modes; ++l) u.at(l, j) = rows[j][l];
  }
  return u;
}

}  // namespace sflow
