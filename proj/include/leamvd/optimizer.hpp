#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "leamvd/directions.hpp"
#include "leamvd/objectives.hpp"
#include "leamvd/rng.hpp"
#include "leamvd/types.hpp"

namespace leamvd {

enum class InitMode { UniformBounds, GaussianAroundSeed };
enum class StopReason { GenerationBudget, SigmaConverged };

std::string to_string(StopReason reason);

/// Configuration of one optimizer run. Bounds are scalars broadcast to every
/// variable and only shape the initial population unless clamp_to_bounds is set.
struct OptimizerConfig {
  std::size_t lambda = 24;
  std::size_t n_elite = 4;
  std::size_t n_var = 0;
  double x_inf = -0.1;
  double x_sup = 0.1;
  std::size_t n_gen = 50;
  double sigma_min_scale = 1e-4;
  std::size_t stagnation_limit = 10;
  double perturb_prob = 0.02;
  std::size_t worst_sample_count = 4;
  std::uint64_t rng_seed = 0;
  InitMode init_mode = InitMode::UniformBounds;
  std::vector<double> seed_vector;  // GaussianAroundSeed only
  double seed_sigma = 0.1;
  bool clamp_to_bounds = false;
  bool reevaluate_elite = false;

  /// sigma_min_scale * sqrt(n_var)
  double sigma_min() const;
  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
};

/// One individual per row of x; f[i] is the objective value of row i.
struct Population {
  RowMatrix x;
  Vector f;
  std::size_t generation = 0;
};

/// ix: all row indexes ordered best-first (ascending objective, ties by index).
/// ibest: the first n_elite entries of ix.
struct Ranking {
  std::vector<std::size_t> ix;
  std::vector<std::size_t> ibest;
};

struct DiagonalModel {
  Vector mu;
  Vector sigma;
};

struct StepSizes {
  double beta1 = 1.0;
  double beta2 = 0.9;
  std::size_t count_felite = 0;
};

struct GenerationRecord {
  std::size_t generation = 0;
  double f_best = 0.0;
  double sigma_norm = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  bool restarted = false;
  std::size_t evals_cumulative = 0;
  double mu_ani = 0.0;
  double sigma_ani = 0.0;
};

struct RunResult {
  Vector x_best;
  double f_best = 0.0;
  std::size_t generations_used = 0;
  StopReason stop_reason = StopReason::GenerationBudget;
  std::vector<GenerationRecord> history;
};

/// Raised when the objective returns NaN or an infinity.
class ObjectiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Initial lambda x n_var population (fitness left as NaN). Uniform on
/// [x_inf, x_sup], or Normal(seed, seed_sigma) with row 0 set to the seed.
/// Draws are consumed row-major.
Population initial_population(const OptimizerConfig& config, Rng& rng);

Ranking selection(std::span<const double> f, std::size_t n_elite);

/// Rank weights G[k] = (lambda - k)^1.5 / sum_j j^1.5, best rank first.
Vector esd_weights(std::size_t lambda);

/// Per-variable mean and standard deviation of the population under rank
/// weights g, where g[k] applies to row ix[k].
DiagonalModel weighted_mean_std(const RowMatrix& x, std::span<const std::size_t> ix,
                                const Vector& g);
void weighted_mean_std_into(const RowMatrix& x, std::span<const std::size_t> ix,
                            const Vector& g, DiagonalModel& out);

/// Replaces the population in place: the elite rows of `ranking` move to
/// rows 0..n_elite-1 (best first, keeping their cached fitness) and every
/// other row is resampled as
///   (z * sigma + mu + beta1 * (beta2 * p + (1 - beta2) * mu_ani * c_ani)) * factor
/// with z ~ N(0,1) and factor = 1 + U(-0.5, 0.5) with probability
/// perturb_prob, else 1. Per entry the stream order is: normal, uniform,
/// then the factor draw when it fires. Resampled rows get NaN fitness.
void repopulate(Population& population, const Ranking& ranking, const DiagonalModel& model,
                const DirectionState& directions, const StepSizes& steps,
                const OptimizerConfig& config, Rng& rng);

StepSizes adapt_step_sizes(StepSizes steps, bool improved);

/// After `stagnation_limit` non-improving generations: sigma = 1, beta1 = 0.1,
/// counter reset. Returns whether the restart fired.
bool maybe_restart(StepSizes& steps, DiagonalModel& model, const OptimizerConfig& config);

using GenerationObserver = std::function<void(const GenerationRecord&)>;

/// Minimizes `objective`. Deterministic for a fixed config (including rng_seed)
/// and a pure objective. Per generation the stream is consumed by the
/// worse-individual draws of the direction update, then by repopulate.
RunResult run(const OptimizerConfig& config, const ObjectiveFn& objective,
              const GenerationObserver& observer = {});

}  // namespace leamvd
