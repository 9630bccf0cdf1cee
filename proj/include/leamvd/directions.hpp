#pragma once

#include <cstddef>
#include <span>

#include "leamvd/rng.hpp"
#include "leamvd/types.hpp"

namespace leamvd {

/// Direction state carried across generations.
///   p      smoothed displacement of the best individual
///   c_ani  smoothed anisotropic (best-minus-worse) direction
///   mu_ani, sigma_ani  mean / std of the non-best individuals' offsets from
///                      the best, projected on c_ani
struct DirectionState {
  Vector p;
  Vector c_ani;
  double mu_ani = 0.0;
  double sigma_ani = 0.0;

  static DirectionState zeros(std::size_t n_var);
};

/// p' = 0.1 (x_best - x_best_prev) + 0.9 p
Vector update_p(const Vector& prev, std::span<const double> x_best,
                std::span<const double> x_best_prev);
void update_p_in_place(Vector& p, std::span<const double> x_best,
                       std::span<const double> x_best_prev);

/// Dominant eigenvector of a small symmetric positive semi-definite matrix by
/// the power method. The matrix is first raised to a large power by repeated
/// squaring, then a few plain power steps polish the result. Returns a unit
/// vector, or zeros if the matrix is zero.
Eigen::VectorXd dominant_eigenvector(const Eigen::MatrixXd& gram);

/// Unit vector of maximum projection onto the rows of `diffs` (k x n, one
/// difference vector per row) after removing each row's component along `p`.
/// Computed through the k x k Gram matrix, so the cost is O(k^2 n).
/// `diffs` is deflated in place. The sign is chosen so the result has a
/// non-negative dot product with the sum of the rows. Zero when the deflated
/// rows span nothing (norm below 1e-12).
Vector main_variance_direction(RowMatrix& diffs, const Vector& p);

/// One anisotropic-direction update on a ranked population (ix best-first).
/// Consumes `worst_sample_count` draws from rng to pick the worse
/// individuals, updates state.c_ani, state.mu_ani and state.sigma_ani.
/// state.p must already hold this generation's improvement direction.
void estimate_anisotropic(const RowMatrix& population, std::span<const std::size_t> ix,
                          DirectionState& state, std::size_t worst_sample_count, Rng& rng);

}  // namespace leamvd
