#include "sflow/functionals.hpp"

#include <cmath>
#include <sstream>

#include "sflow/errors.hpp"

namespace sflow {
namespace {

void check_size(std::size_t expected, std::size_t got) {
  if (expected != got) {
    std::ostringstream os;
    os << "functional expects an endpoint vector of length " << expected << ", got " << got;
    throw ConfigError(os.str());
  }
}

class ConstantFunctional final : public EndpointFunctional {
 public:
  explicit ConstantFunctional(double c) : c_(c) {}
  double value(std::span<const double>) const override { return c_; }
  void gradient(std::span<const double>, std::span<double> g) const override {
    for (double& v : g) v = 0.0;
  }
  double lower_bound() const override { return c_; }
  std::string name() const override { return "constant"; }

 private:
  double c_;
};

class QuadraticFunctional final : public EndpointFunctional {
 public:
  QuadraticFunctional(std::vector<double> center, double weight, double offset)
      : center_(std::move(center)), weight_(weight), offset_(offset) {
    if (!(weight_ >= 0.0)) throw ConfigError("quadratic functional: weight must be non-negative");
  }
  double value(std::span<const double> z) const override {
    check_size(center_.size(), z.size());
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) s += (z[i] - center_[i]) * (z[i] - center_[i]);
    return offset_ + 0.5 * weight_ * s;
  }
  void gradient(std::span<const double> z, std::span<double> g) const override {
    check_size(center_.size(), z.size());
    for (std::size_t i = 0; i < z.size(); ++i) g[i] = weight_ * (z[i] - center_[i]);
  }
  double lower_bound() const override { return offset_; }
  std::string name() const override { return "quadratic"; }

 private:
  std::vector<double> center_;
  double weight_;
  double offset_;
};

class LogQuadraticFunctional final : public EndpointFunctional {
 public:
  LogQuadraticFunctional(std::vector<double> center, double weight, double floor)
      : center_(std::move(center)), weight_(weight), floor_(floor) {
    if (!(weight_ >= 0.0)) throw ConfigError("log-quadratic functional: weight must be non-negative");
    if (!(floor_ > 0.0)) throw ConfigError("log-quadratic functional: floor must be positive");
  }
  double value(std::span<const double> z) const override {
    check_size(center_.size(), z.size());
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double r = extended_log(z[i]) - center_[i];
      s += r * r;
    }
    return 0.5 * weight_ * s;
  }
  void gradient(std::span<const double> z, std::span<double> g) const override {
    check_size(center_.size(), z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
      g[i] = weight_ * (extended_log(z[i]) - center_[i]) * extended_log_derivative(z[i]);
    }
  }
  double lower_bound() const override { return 0.0; }
  std::string name() const override { return "log_quadratic"; }

 private:
  double extended_log(double x) const {
    if (x >= floor_) return std::log(x);
    const double h = x - floor_;
    return std::log(floor_) + h / floor_ - h * h / (2.0 * floor_ * floor_);
  }
  double extended_log_derivative(double x) const {
    if (x >= floor_) return 1.0 / x;
    return 1.0 / floor_ - (x - floor_) / (floor_ * floor_);
  }

  std::vector<double> center_;
  double weight_;
  double floor_;
};

}  // namespace

FunctionalPtr make_constant_functional(double c) { return std::make_shared<ConstantFunctional>(c); }

FunctionalPtr make_quadratic_functional(std::vector<double> center, double weight, double offset) {
  return std::make_shared<QuadraticFunctional>(std::move(center), weight, offset);
}

FunctionalPtr make_log_quadratic_functional(std::vector<double> center, double weight, double floor) {
  return std::make_shared<LogQuadraticFunctional>(std::move(center), weight, floor);
}

}  // namespace sflow
