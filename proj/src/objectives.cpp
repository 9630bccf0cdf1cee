#include "leamvd/objectives.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace leamvd {

double sphere(std::span<const double> x) {
  double sum = 0.0;
  for (double xi : x) sum += xi * xi;
  return sum;
}

double ellipsoid(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 1) return x[0] * x[0];
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double scale = std::pow(1e6, static_cast<double>(i) / static_cast<double>(n - 1));
    sum += scale * x[i] * x[i];
  }
  return sum;
}

double rosenbrock(std::span<const double> x) {
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double a = x[i + 1] - x[i] * x[i];
    const double b = 1.0 - x[i];
    sum += 100.0 * a * a + b * b;
  }
  return sum;
}

ObjectiveFn synthetic_objective(std::string_view name, std::size_t n_var) {
  ObjectiveFn fn;
  fn.n_var = n_var;
  if (name == "sphere") {
    fn.evaluate = sphere;
  } else if (name == "ellipsoid") {
    fn.evaluate = ellipsoid;
  } else if (name == "rosenbrock") {
    fn.evaluate = rosenbrock;
  } else {
    throw std::invalid_argument("unknown synthetic function '" + std::string(name) + "'");
  }
  return fn;
}

}  // namespace leamvd
