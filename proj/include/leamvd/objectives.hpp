#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>

#include "leamvd/types.hpp"

namespace leamvd {

/// Minimization objective over length-n_var vectors. `evaluate` must be pure.
/// `evaluate_rows`, when set, evaluates the listed rows of a population in
/// one call (and may do so concurrently); out[i] receives the value of row rows[i].
struct ObjectiveFn {
  std::size_t n_var = 0;
  std::function<double(std::span<const double>)> evaluate;
  std::function<void(const RowMatrix&, std::span<const std::size_t>, std::span<double>)>
      evaluate_rows;
};

double sphere(std::span<const double> x);
/// Axis-aligned ellipsoid with condition number 1e6.
double ellipsoid(std::span<const double> x);
double rosenbrock(std::span<const double> x);

/// "sphere", "ellipsoid" or "rosenbrock"; throws std::invalid_argument otherwise.
ObjectiveFn synthetic_objective(std::string_view name, std::size_t n_var);

}  // namespace leamvd
