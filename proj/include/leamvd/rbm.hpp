#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "leamvd/objectives.hpp"
#include "leamvd/optimizer.hpp"
#include "leamvd/rng.hpp"
#include "leamvd/types.hpp"

namespace leamvd {

struct LayerShape {
  std::size_t n_visible = 0;
  std::size_t n_hidden = 0;

  /// n_visible * n_hidden weights plus both bias vectors.
  std::size_t parameter_count() const { return n_visible * n_hidden + n_visible + n_hidden; }
  bool operator==(const LayerShape&) const = default;
};

/// Stacked RBM architecture; each layer's visible size equals the previous
/// layer's hidden size.
class DbnSpec {
 public:
  explicit DbnSpec(std::vector<LayerShape> layers);

  static DbnSpec small7x7();   // (49,30) (30,30) (30,120)
  static DbnSpec full28x28();  // (784,500) (500,500) (500,2000)

  const std::vector<LayerShape>& layers() const { return layers_; }
  std::size_t input_width() const { return layers_.front().n_visible; }

 private:
  std::vector<LayerShape> layers_;
};

/// Read-only view of flattened RBM parameters laid out as
/// [W (n_visible x n_hidden, row-major), b (visible bias), c (hidden bias)].
struct RbmView {
  std::size_t n_visible = 0;
  std::size_t n_hidden = 0;
  std::span<const double> params;

  Eigen::Map<const RowMatrix> weights() const;
  Eigen::Map<const Vector> visible_bias() const;
  Eigen::Map<const Vector> hidden_bias() const;
};

class Rbm {
 public:
  /// All-zero parameters.
  Rbm(std::size_t n_visible, std::size_t n_hidden);

  std::size_t n_visible() const { return n_visible_; }
  std::size_t n_hidden() const { return n_hidden_; }
  LayerShape shape() const { return {n_visible_, n_hidden_}; }

  Eigen::Map<RowMatrix> weights();
  Eigen::Map<Vector> visible_bias();
  Eigen::Map<Vector> hidden_bias();
  RbmView view() const { return {n_visible_, n_hidden_, params_}; }
  std::span<const double> params() const { return params_; }

 private:
  friend Rbm unflatten(std::span<const double>, std::size_t, std::size_t);
  std::size_t n_visible_;
  std::size_t n_hidden_;
  // Aligned so Eigen's vectorized kernels take the same path on every copy;
  // otherwise results can differ in the last bit between equal models.
  std::vector<double, Eigen::aligned_allocator<double>> params_;
};

std::vector<double> flatten(const Rbm& rbm);
/// Throws std::invalid_argument when the length is not n_v*n_h + n_v + n_h.
Rbm unflatten(std::span<const double> params, std::size_t n_visible, std::size_t n_hidden);

/// Weights ~ Normal(0, 0.01), zero biases.
Rbm random_rbm(std::size_t n_visible, std::size_t n_hidden, Rng& rng);

/// logistic(V W + c), one row per input row.
RowMatrix hidden_activation(const RbmView& rbm, const RowMatrix& visible);
/// Mean-field reconstruction logistic(H W^T + b) with H = hidden_activation.
RowMatrix reconstruct(const RbmView& rbm, const RowMatrix& visible);
/// Sum over all entries of (V - reconstruct(V))^2.
double reconstruction_error(const RbmView& rbm, const RowMatrix& visible);

inline RowMatrix hidden_activation(const Rbm& rbm, const RowMatrix& v) { return hidden_activation(rbm.view(), v); }
inline RowMatrix reconstruct(const Rbm& rbm, const RowMatrix& v) { return reconstruct(rbm.view(), v); }
inline double reconstruction_error(const Rbm& rbm, const RowMatrix& v) { return reconstruction_error(rbm.view(), v); }

/// Reconstruction error on `data` as a function of the flattened parameters.
/// `data` must outlive the returned objective.
ObjectiveFn reconstruction_objective(const RowMatrix& data, LayerShape shape);

struct CdConfig {
  std::size_t epochs = 50;
  double learning_rate = 0.1;
  std::size_t minibatch_size = 100;
  std::uint64_t rng_seed = 0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CdResult {
  Rbm rbm;
  std::vector<double> epoch_errors;  // reconstruction error after each epoch
};

using EpochCallback = std::function<void(std::size_t epoch, double error)>;

/// CD-1 with plain SGD over shuffled minibatches. Per epoch the stream is
/// consumed by the shuffle, then by the hidden-state samples of each batch.
/// The error after each epoch is measured on `train`.
CdResult cd1_train(Rbm rbm, const RowMatrix& train, const CdConfig& config,
                   const EpochCallback& on_epoch = {});

enum class Trainer { CD, LeaMvd, LeaMvdSeededByCd };

std::string to_string(Trainer trainer);
/// Accepts "CD", "LEA_MVD" and "LEA_MVD_seeded_by_CD".
Trainer parse_trainer(std::string_view name);

struct PretrainConfig {
  Trainer trainer = Trainer::LeaMvdSeededByCd;
  /// CD epochs or optimizer generations per layer.
  std::size_t budget = 50;
  std::uint64_t seed = 1;
  CdConfig cd;
  /// lambda, n_elite, bounds and the other tuning fields; n_var, n_gen,
  /// rng_seed and the init mode are filled in per layer.
  OptimizerConfig optimizer;
};

struct LayerResult {
  Rbm rbm;
  /// One record per epoch (CD) or generation (LEA-MVD). For CD, f_best is
  /// that epoch's error and evals_cumulative counts epochs.
  std::vector<GenerationRecord> history;
  std::uint64_t layer_seed = 0;
  StopReason stop_reason = StopReason::GenerationBudget;
};

using LayerObserver = std::function<void(std::size_t layer, const GenerationRecord&)>;

/// Greedy layer-wise pretraining; layer k+1 trains on the hidden
/// probabilities of trained layer k. Layer k (0-based) draws all of its
/// randomness from derive_seed(config.seed, k): sub-stream 0 initializes the
/// RBM, 1 drives CD, 2 drives the optimizer, so on a shared input the CD
/// trainer and the CD-seeded optimizer start from the same first CD epoch.
std::vector<LayerResult> pretrain_dbn(const DbnSpec& spec, const RowMatrix& data,
                                      const PretrainConfig& config,
                                      const LayerObserver& observer = {});

}  // namespace leamvd
