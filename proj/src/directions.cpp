#include "leamvd/directions.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace leamvd {
namespace {

constexpr double kSmoothing = 0.1;
constexpr int kMaxSquarings = 64;
constexpr int kMaxPowerSteps = 100;
constexpr double kPowerTolerance = 1e-10;
constexpr double kZeroDirection = 1e-12;

Eigen::Map<const Vector> as_vector(std::span<const double> s) {
  return {s.data(), static_cast<Eigen::Index>(s.size())};
}

}  // namespace

DirectionState DirectionState::zeros(std::size_t n_var) {
  const auto n = static_cast<Eigen::Index>(n_var);
  return {Vector::Zero(n), Vector::Zero(n), 0.0, 0.0};
}

Vector update_p(const Vector& prev, std::span<const double> x_best,
                std::span<const double> x_best_prev) {
  Vector p = prev;
  update_p_in_place(p, x_best, x_best_prev);
  return p;
}

void update_p_in_place(Vector& p, std::span<const double> x_best,
                       std::span<const double> x_best_prev) {
  if (x_best.size() != static_cast<std::size_t>(p.size()) || x_best_prev.size() != x_best.size())
    throw std::invalid_argument("update_p: length mismatch");
  p = kSmoothing * (as_vector(x_best) - as_vector(x_best_prev)) + (1.0 - kSmoothing) * p;
}

Eigen::VectorXd dominant_eigenvector(const Eigen::MatrixXd& gram) {
  const Eigen::Index k = gram.rows();
  const double scale = gram.cwiseAbs().maxCoeff();
  if (k == 0 || !(scale > 0.0)) return Eigen::VectorXd::Zero(k);

  // M = gram^(2^s), renormalized each step; converges to a multiple of the
  // projector on the dominant eigenspace.
  Eigen::MatrixXd m = gram / scale;
  for (int s = 0; s < kMaxSquarings; ++s) {
    Eigen::MatrixXd sq = m * m;
    sq /= sq.cwiseAbs().maxCoeff();
    const double change = (sq - m).cwiseAbs().maxCoeff();
    m = std::move(sq);
    if (change < 1e-15) break;
  }
  Eigen::Index best_col = 0;
  m.colwise().norm().maxCoeff(&best_col);
  Eigen::VectorXd w = m.col(best_col).normalized();

  for (int it = 0; it < kMaxPowerSteps; ++it) {
    Eigen::VectorXd next = gram * w;
    const double norm = next.norm();
    if (!(norm > 0.0)) break;
    next /= norm;
    const double change = (next - w).norm();
    w = std::move(next);
    if (change < kPowerTolerance) break;
  }
  return w;
}

Vector main_variance_direction(RowMatrix& diffs, const Vector& p) {
  const double p_norm = p.norm();
  if (p_norm > 0.0) {
    const Vector p_unit = p / p_norm;
    for (Eigen::Index j = 0; j < diffs.rows(); ++j)
      diffs.row(j) -= diffs.row(j).dot(p_unit) * p_unit.transpose();
  }

  const Eigen::MatrixXd gram = diffs * diffs.transpose();
  const Eigen::VectorXd w = dominant_eigenvector(gram);
  Vector c = diffs.transpose() * w;
  if (p_norm > 0.0) {
    const double along = c.dot(p) / (p_norm * p_norm);
    c -= along * p;
  }
  const double c_norm = c.norm();
  if (!(c_norm >= kZeroDirection)) return Vector::Zero(diffs.cols());
  c /= c_norm;

  double orientation = 0.0;
  for (Eigen::Index j = 0; j < diffs.rows(); ++j) orientation += diffs.row(j).dot(c);
  if (orientation < 0.0) c = -c;
  return c;
}

void estimate_anisotropic(const RowMatrix& population, std::span<const std::size_t> ix,
                          DirectionState& state, std::size_t worst_sample_count, Rng& rng) {
  const std::size_t lambda = ix.size();
  if (worst_sample_count + 1 > lambda)
    throw std::invalid_argument("estimate_anisotropic: worst_sample_count must be <= lambda - 1");
  const auto n = population.cols();
  const auto best = population.row(static_cast<Eigen::Index>(ix[0]));

  // Partial Fisher-Yates over rank positions 1..lambda-1.
  std::vector<std::size_t> positions(lambda - 1);
  std::iota(positions.begin(), positions.end(), std::size_t{1});
  RowMatrix diffs(static_cast<Eigen::Index>(worst_sample_count), n);
  for (std::size_t j = 0; j < worst_sample_count; ++j) {
    const std::size_t pick = j + rng.index(positions.size() - j);
    std::swap(positions[j], positions[pick]);
    diffs.row(static_cast<Eigen::Index>(j)) =
        best - population.row(static_cast<Eigen::Index>(ix[positions[j]]));
  }

  const Vector fresh = main_variance_direction(diffs, state.p);
  diffs.resize(0, 0);
  state.c_ani = kSmoothing * fresh + (1.0 - kSmoothing) * state.c_ani;

  state.mu_ani = 0.0;
  state.sigma_ani = 0.0;
  const double c_norm = state.c_ani.norm();
  if (!(c_norm > 0.0) || lambda < 2) return;

  std::vector<double> proj(lambda - 1);
  for (std::size_t j = 1; j < lambda; ++j)
    proj[j - 1] =
        (population.row(static_cast<Eigen::Index>(ix[j])) - best).dot(state.c_ani) / c_norm;
  const double count = static_cast<double>(proj.size());
  const double mean = std::accumulate(proj.begin(), proj.end(), 0.0) / count;
  double var = 0.0;
  for (double v : proj) var += (v - mean) * (v - mean);
  state.mu_ani = mean;
  state.sigma_ani = std::sqrt(var / count);
}

}  // namespace leamvd
