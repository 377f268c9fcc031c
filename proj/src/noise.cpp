#include "sflow/noise.hpp"

#include <cmath>
#include <sstream>

#include "sflow/errors.hpp"
#include "sflow/philox.hpp"

namespace sflow {

double NoisePath::cumulative(std::size_t l, std::size_t j) const {
  double b = 0.0;
  for (std::size_t k = 0; k < j; ++k) b += increment(l, k);
  return b;
}

std::size_t NoisePath::index_of(double t, const char* what) const {
  const double pos = (t - t0) / dt;
  const double rounded = std::round(pos);
  if (std::abs(pos - rounded) > 1e-9 || rounded < 0.0 || rounded > static_cast<double>(steps)) {
    std::ostringstream os;
    os << what << "=" << t << " is not a grid time of the noise path (t0=" << t0 << ", dt=" << dt
       << ", steps=" << steps << ")";
    throw ConfigError(os.str());
  }
  return static_cast<std::size_t>(rounded);
}

NoisePath NoisePath::generate(std::size_t modes, std::size_t steps, double dt, std::uint64_t seed,
                              std::uint64_t stream, double t0) {
  if (!(dt > 0.0)) throw ConfigError("noise path: dt must be positive");
  NoisePath path;
  path.t0 = t0;
  path.dt = dt;
  path.modes = modes;
  path.steps = steps;
  path.seed = seed;
  path.stream = stream;
  path.increments.resize(modes * steps);
  const double scale = std::sqrt(dt);
  for (std::size_t l = 0; l < modes; ++l) {
    for (std::size_t j = 0; j < steps; ++j) {
      path.increments[l * steps + j] =
          scale * counter_normal(seed, static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(l), stream);
    }
  }
  return path;
}

NoisePath NoisePath::zeros(std::size_t modes, std::size_t steps, double dt, double t0) {
  if (!(dt > 0.0)) throw ConfigError("noise path: dt must be positive");
  NoisePath path;
  path.t0 = t0;
  path.dt = dt;
  path.modes = modes;
  path.steps = steps;
  path.increments.assign(modes * steps, 0.0);
  return path;
}

}  // namespace sflow
