#pragma once

#include <cstddef>
#include <exception>
#include <span>
#include <vector>

namespace sflow {

/// Serial is the reference path; Parallel distributes samples over OpenMP
/// threads. Both produce bit-identical results: every sample is keyed by
/// its index and reductions run serially in index order.
enum class Execution { kSerial, kParallel };

/// out[i] = fn(i) for i in [0, n). The first exception (lowest index) is
/// rethrown after the loop.
template <typename T, typename Fn>
std::vector<T> sample_map(std::size_t n, Execution exec, Fn&& fn) {
  std::vector<T> out(n);
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<long long>(n);
  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < count; ++i) {
      try {
        out[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  } else {
    for (long long i = 0; i < count; ++i) {
      try {
        out[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

struct LogMeanExp {
  double estimate = 0.0;   ///< -eps log( (1/n) sum exp(-v_i / eps) )
  double std_error = 0.0;  ///< delta-method standard error of `estimate`
  double min_value = 0.0;
  double max_value = 0.0;
  double ess = 0.0;        ///< effective sample size of the weights
};

/// Streaming log-sum-exp in index order, shifted by min v. Throws
/// UnderflowError when the weights degenerate to an effective sample size
/// below 2 (the estimate would rest on a single draw).
LogMeanExp laplace_functional(std::span<const double> values, double eps);

}  // namespace sflow
