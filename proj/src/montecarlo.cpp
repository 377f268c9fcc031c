#include "sflow/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sflow/errors.hpp"

namespace sflow {

LogMeanExp laplace_functional(std::span<const double> values, double eps) {
  if (values.empty()) throw ConfigError("laplace functional: no samples");
  if (!(eps > 0.0)) throw ConfigError("laplace functional: eps must be positive");
  LogMeanExp out;
  out.min_value = values[0];
  out.max_value = values[0];
  for (double v : values) {
    if (!std::isfinite(v)) throw UnderflowError("laplace functional: non-finite sample value");
    out.min_value = std::min(out.min_value, v);
    out.max_value = std::max(out.max_value, v);
  }
  const auto n = static_cast<double>(values.size());
  double sum = 0.0, sum_sq = 0.0;
  for (double v : values) {
    const double w = std::exp(-(v - out.min_value) / eps);
    sum += w;
    sum_sq += w * w;
  }
  out.ess = sum * sum / sum_sq;
  if (values.size() > 1 && out.ess < 2.0 && out.max_value > out.min_value) {
    std::ostringstream os;
    os << "laplace functional: weights degenerate (effective sample size " << out.ess
       << "); use a larger eps or more samples";
    throw UnderflowError(os.str());
  }
  const double mean = sum / n;
  out.estimate = out.min_value - eps * std::log(mean);
  if (values.size() > 1) {
    const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
    out.std_error = eps * std::sqrt(var / n) / mean;
  }
  return out;
}

}  // namespace sflow
