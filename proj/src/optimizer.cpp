#include "leamvd/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace leamvd {
namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void evaluate_rows(Population& pop, const ObjectiveFn& objective,
                   std::span<const std::size_t> rows) {
  if (rows.empty()) return;
  std::vector<double> values(rows.size());
  if (objective.evaluate_rows) {
    objective.evaluate_rows(pop.x, rows, values);
  } else {
    const auto n = static_cast<std::size_t>(pop.x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
      values[i] = objective.evaluate({pop.x.row(static_cast<Eigen::Index>(rows[i])).data(), n});
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!std::isfinite(values[i])) {
      std::ostringstream msg;
      msg << "objective returned " << values[i] << " at generation " << pop.generation
          << ", individual " << rows[i];
      throw ObjectiveError(msg.str());
    }
    pop.f[static_cast<Eigen::Index>(rows[i])] = values[i];
  }
}

std::vector<std::size_t> index_range(std::size_t first, std::size_t last) {
  std::vector<std::size_t> out(last - first);
  std::iota(out.begin(), out.end(), first);
  return out;
}

}  // namespace

std::string to_string(StopReason reason) {
  return reason == StopReason::GenerationBudget ? "GenerationBudget" : "SigmaConverged";
}

double OptimizerConfig::sigma_min() const {
  return sigma_min_scale * std::sqrt(static_cast<double>(n_var));
}

void OptimizerConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("optimizer config: " + what); };
  if (n_var == 0) fail("n_var must be positive");
  if (lambda < 2) fail("lambda must be at least 2");
  if (n_elite < 1 || n_elite >= lambda) fail("n_elite must satisfy 1 <= n_elite < lambda");
  if (n_gen < 1) fail("n_gen must be positive");
  if (!std::isfinite(x_inf) || !std::isfinite(x_sup) || x_inf > x_sup)
    fail("bounds must be finite with x_inf <= x_sup");
  if (!(sigma_min_scale > 0.0)) fail("sigma_min_scale must be positive");
  if (stagnation_limit < 1) fail("stagnation_limit must be positive");
  if (!(perturb_prob >= 0.0 && perturb_prob <= 1.0)) fail("perturb_prob must lie in [0, 1]");
  if (worst_sample_count < 1 || worst_sample_count > lambda - 1)
    fail("worst_sample_count must satisfy 1 <= worst_sample_count <= lambda - 1");
  if (init_mode == InitMode::GaussianAroundSeed) {
    if (seed_vector.size() != n_var) fail("seed vector length differs from n_var");
    if (!(seed_sigma >= 0.0)) fail("seed_sigma must be non-negative");
  }
}

Population initial_population(const OptimizerConfig& config, Rng& rng) {
  if (config.lambda == 0 || config.n_var == 0)
    throw std::invalid_argument("initial_population: lambda and n_var must be positive");
  if (!std::isfinite(config.x_inf) || !std::isfinite(config.x_sup) || config.x_inf > config.x_sup)
    throw std::invalid_argument("initial_population: bounds must be finite with x_inf <= x_sup");
  if (config.init_mode == InitMode::GaussianAroundSeed && config.seed_vector.size() != config.n_var)
    throw std::invalid_argument("initial_population: seed length " +
                                std::to_string(config.seed_vector.size()) + " differs from n_var " +
                                std::to_string(config.n_var));
  const auto rows = static_cast<Eigen::Index>(config.lambda);
  const auto cols = static_cast<Eigen::Index>(config.n_var);
  Population pop{RowMatrix(rows, cols), Vector::Constant(rows, kNan), 1};
  if (config.init_mode == InitMode::UniformBounds) {
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) pop.x(i, j) = rng.uniform(config.x_inf, config.x_sup);
  } else {
    const Eigen::Map<const Vector> seed(config.seed_vector.data(), cols);
    pop.x.row(0) = seed.transpose();
    for (Eigen::Index i = 1; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j)
        pop.x(i, j) = seed[j] + config.seed_sigma * rng.normal();
  }
  return pop;
}

Ranking selection(std::span<const double> f, std::size_t n_elite) {
  for (std::size_t i = 0; i < f.size(); ++i)
    if (!std::isfinite(f[i]))
      throw std::invalid_argument("selection: non-finite fitness at index " + std::to_string(i));
  if (n_elite > f.size()) throw std::invalid_argument("selection: n_elite exceeds population size");
  Ranking r;
  r.ix = index_range(0, f.size());
  std::stable_sort(r.ix.begin(), r.ix.end(), [&](std::size_t a, std::size_t b) { return f[a] < f[b]; });
  r.ibest.assign(r.ix.begin(), r.ix.begin() + static_cast<std::ptrdiff_t>(n_elite));
  return r;
}

Vector esd_weights(std::size_t lambda) {
  if (lambda == 0) throw std::invalid_argument("esd_weights: lambda must be positive");
  const auto n = static_cast<Eigen::Index>(lambda);
  Vector g(n);
  for (Eigen::Index k = 0; k < n; ++k) g[k] = std::pow(static_cast<double>(n - k), 1.5);
  // Sum smallest terms first.
  double total = 0.0;
  for (Eigen::Index k = n - 1; k >= 0; --k) total += g[k];
  return g / total;
}

DiagonalModel weighted_mean_std(const RowMatrix& x, std::span<const std::size_t> ix,
                                const Vector& g) {
  DiagonalModel model;
  weighted_mean_std_into(x, ix, g, model);
  return model;
}

void weighted_mean_std_into(const RowMatrix& x, std::span<const std::size_t> ix,
                            const Vector& g, DiagonalModel& out) {
  if (ix.size() != static_cast<std::size_t>(x.rows()) || g.size() != x.rows())
    throw std::invalid_argument("weighted_mean_std: dimension mismatch");
  const auto n = x.cols();
  out.mu.setZero(n);
  out.sigma.setZero(n);
  for (std::size_t k = 0; k < ix.size(); ++k)
    out.mu += g[static_cast<Eigen::Index>(k)] * x.row(static_cast<Eigen::Index>(ix[k])).transpose();
  for (std::size_t k = 0; k < ix.size(); ++k)
    out.sigma.array() += g[static_cast<Eigen::Index>(k)] *
        (x.row(static_cast<Eigen::Index>(ix[k])).transpose() - out.mu).array().square();
  out.sigma = out.sigma.cwiseSqrt();
}

void repopulate(Population& population, const Ranking& ranking, const DiagonalModel& model,
                const DirectionState& directions, const StepSizes& steps,
                const OptimizerConfig& config, Rng& rng) {
  auto& x = population.x;
  auto& f = population.f;
  const auto lambda = static_cast<std::size_t>(x.rows());
  const auto n = x.cols();
  if (model.mu.size() != n || model.sigma.size() != n || directions.p.size() != n ||
      directions.c_ani.size() != n || ranking.ix.size() != lambda ||
      ranking.ibest.size() >= lambda || ranking.ibest.empty())
    throw std::invalid_argument("repopulate: dimension mismatch");

  // Bring the elite rows to the top in rank order using row swaps.
  std::vector<std::size_t> row_of = index_range(0, lambda);
  std::vector<std::size_t> origin_at = index_range(0, lambda);
  for (std::size_t k = 0; k < ranking.ibest.size(); ++k) {
    const std::size_t wanted = ranking.ibest[k];
    const std::size_t r = row_of[wanted];
    if (r == k) continue;
    const auto ri = static_cast<Eigen::Index>(r);
    const auto ki = static_cast<Eigen::Index>(k);
    x.row(ri).swap(x.row(ki));
    std::swap(f[ri], f[ki]);
    const std::size_t displaced = origin_at[k];
    origin_at[k] = wanted;
    origin_at[r] = displaced;
    row_of[wanted] = k;
    row_of[displaced] = r;
  }

  const double beta1 = steps.beta1;
  const double beta2 = steps.beta2;
  const double c_weight = (1.0 - beta2) * directions.mu_ani;
  for (auto i = static_cast<Eigen::Index>(ranking.ibest.size()); i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double shift = beta2 * directions.p[j] + c_weight * directions.c_ani[j];
      double value = rng.normal() * model.sigma[j] + model.mu[j] + beta1 * shift;
      if (rng.uniform() < config.perturb_prob) value *= 1.0 + rng.uniform(-0.5, 0.5);
      if (config.clamp_to_bounds) value = std::clamp(value, config.x_inf, config.x_sup);
      x(i, j) = value;
    }
    f[i] = kNan;
  }
}

StepSizes adapt_step_sizes(StepSizes steps, bool improved) {
  if (improved) {
    steps.count_felite = 0;
    steps.beta2 = std::min(1.0, 0.2 + steps.beta2);
    steps.beta1 = steps.beta1 > 1.0 ? std::min(3.0, 1.1 * steps.beta1) : 1.4 * steps.beta1;
  } else {
    steps.count_felite += 1;
    steps.beta2 = std::max(0.0, steps.beta2 - 0.1);
    steps.beta1 = steps.beta1 < 1.0 ? 0.8 * steps.beta1 : 0.5 * steps.beta1;
  }
  return steps;
}

bool maybe_restart(StepSizes& steps, DiagonalModel& model, const OptimizerConfig& config) {
  if (steps.count_felite != config.stagnation_limit) return false;
  model.sigma.setOnes();
  steps.count_felite = 0;
  steps.beta1 = 0.1;
  return true;
}

RunResult run(const OptimizerConfig& config, const ObjectiveFn& objective,
              const GenerationObserver& observer) {
  config.validate();
  if (objective.n_var != config.n_var)
    throw std::invalid_argument("run: objective arity differs from n_var");
  if (!objective.evaluate && !objective.evaluate_rows)
    throw std::invalid_argument("run: objective has no evaluation function");

  Rng rng(config.rng_seed);
  const Vector weights = esd_weights(config.lambda);
  const double sigma_min = config.sigma_min();
  const auto n = static_cast<Eigen::Index>(config.n_var);

  Population pop = initial_population(config, rng);
  const std::vector<std::size_t> all_rows = index_range(0, config.lambda);
  const std::vector<std::size_t> fresh_rows =
      config.reevaluate_elite ? all_rows : index_range(config.n_elite, config.lambda);
  evaluate_rows(pop, objective, all_rows);
  std::size_t evals = config.lambda;

  Ranking ranking = selection({pop.f.data(), config.lambda}, config.n_elite);
  double f_best = pop.f[static_cast<Eigen::Index>(ranking.ix[0])];
  Vector x_best = pop.x.row(static_cast<Eigen::Index>(ranking.ix[0])).transpose();
  Vector x_best_prev = x_best;

  StepSizes steps;
  double sigma_norm = (sigma_min + 1.0) * std::sqrt(static_cast<double>(config.n_var));
  DirectionState directions = DirectionState::zeros(config.n_var);
  DiagonalModel model{Vector::Zero(n), Vector::Zero(n)};

  RunResult result;
  result.history.reserve(config.n_gen);
  auto record = [&](bool restarted) {
    GenerationRecord rec{pop.generation, f_best, sigma_norm, steps.beta1, steps.beta2,
                         restarted, evals, directions.mu_ani, directions.sigma_ani};
    result.history.push_back(rec);
    if (observer) observer(rec);
  };
  record(false);

  while (true) {
    if (pop.generation >= config.n_gen) {
      result.stop_reason = StopReason::GenerationBudget;
      break;
    }
    if (!(sigma_norm > sigma_min)) {
      result.stop_reason = StopReason::SigmaConverged;
      break;
    }
    weighted_mean_std_into(pop.x, ranking.ix, weights, model);
    update_p_in_place(directions.p, {x_best.data(), config.n_var},
                      {x_best_prev.data(), config.n_var});
    estimate_anisotropic(pop.x, ranking.ix, directions, config.worst_sample_count, rng);
    const bool restarted = maybe_restart(steps, model, config);
    sigma_norm = model.sigma.norm();

    repopulate(pop, ranking, model, directions, steps, config, rng);
    pop.generation += 1;
    evaluate_rows(pop, objective, fresh_rows);
    evals += fresh_rows.size();

    ranking = selection({pop.f.data(), config.lambda}, config.n_elite);
    const auto best_row = static_cast<Eigen::Index>(ranking.ix[0]);
    const double f_new = pop.f[best_row];
    const bool improved = f_new < f_best;
    x_best_prev = x_best;
    x_best = pop.x.row(best_row).transpose();
    f_best = f_new;
    steps = adapt_step_sizes(steps, improved);
    record(restarted);
  }

  result.generations_used = pop.generation;
  result.f_best = f_best;
  result.x_best = std::move(x_best);
  return result;
}

}  // namespace leamvd
