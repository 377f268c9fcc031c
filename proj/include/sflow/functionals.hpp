#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sflow {

/// Scalar functional of a flattened endpoint vector z = (x_0, x_1, ...),
/// bounded below by `lower_bound()`.
class EndpointFunctional {
 public:
  virtual ~EndpointFunctional() = default;
  virtual double value(std::span<const double> z) const = 0;
  virtual void gradient(std::span<const double> z, std::span<double> g) const = 0;
  virtual double lower_bound() const = 0;
  virtual std::string name() const = 0;
};

using FunctionalPtr = std::shared_ptr<const EndpointFunctional>;

/// F(z) = c.
FunctionalPtr make_constant_functional(double c);

/// F(z) = offset + (weight/2) |z - center|^2.
FunctionalPtr make_quadratic_functional(std::vector<double> center, double weight, double offset = 0.0);

/// F(z) = (weight/2) sum_i (g(z_i) - center_i)^2 with g = log on [floor, inf)
/// and its second-order Taylor extension below `floor` (C^2, defined on R).
FunctionalPtr make_log_quadratic_functional(std::vector<double> center, double weight, double floor = 1e-3);

}  // namespace sflow
