#include "leamvd/rbm.hpp"

#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>

namespace leamvd {
namespace {

template <typename Derived>
void logistic_in_place(Eigen::MatrixBase<Derived>& m) {
  m.derived().array() = 1.0 / (1.0 + (-m.derived().array()).exp());
}

void check_width(const RbmView& rbm, const RowMatrix& visible) {
  if (static_cast<std::size_t>(visible.cols()) != rbm.n_visible)
    throw std::invalid_argument("rbm: input has " + std::to_string(visible.cols()) +
                                " columns, expected " + std::to_string(rbm.n_visible));
  if (rbm.params.size() != LayerShape{rbm.n_visible, rbm.n_hidden}.parameter_count())
    throw std::invalid_argument("rbm: parameter vector length does not match the layer shape");
}

using AlignedParams = std::vector<double, Eigen::aligned_allocator<double>>;

// Eigen peels vectorized loops by address, so the last bit of a result can
// depend on where the parameters live. Working on an aligned copy makes every
// evaluation a function of the values alone.
RbmView aligned(const RbmView& rbm, AlignedParams& storage) {
  if (reinterpret_cast<std::uintptr_t>(rbm.params.data()) % EIGEN_MAX_ALIGN_BYTES == 0) return rbm;
  storage.assign(rbm.params.begin(), rbm.params.end());
  return {rbm.n_visible, rbm.n_hidden, storage};
}

RowMatrix hidden_activation_aligned(const RbmView& rbm, const RowMatrix& visible) {
  RowMatrix h = visible * rbm.weights();
  h.rowwise() += rbm.hidden_bias().transpose();
  logistic_in_place(h);
  return h;
}

RowMatrix reconstruct_aligned(const RbmView& rbm, const RowMatrix& visible) {
  const RowMatrix h = hidden_activation_aligned(rbm, visible);
  RowMatrix v = h * rbm.weights().transpose();
  v.rowwise() += rbm.visible_bias().transpose();
  logistic_in_place(v);
  return v;
}

}  // namespace

DbnSpec::DbnSpec(std::vector<LayerShape> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw std::invalid_argument("DbnSpec: at least one layer required");
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    if (layers_[k].n_visible == 0 || layers_[k].n_hidden == 0)
      throw std::invalid_argument("DbnSpec: layer sizes must be positive");
    if (k > 0 && layers_[k].n_visible != layers_[k - 1].n_hidden)
      throw std::invalid_argument("DbnSpec: layer " + std::to_string(k + 1) +
                                  " visible size does not match layer " + std::to_string(k) +
                                  " hidden size");
  }
}

DbnSpec DbnSpec::small7x7() { return DbnSpec({{49, 30}, {30, 30}, {30, 120}}); }
DbnSpec DbnSpec::full28x28() { return DbnSpec({{784, 500}, {500, 500}, {500, 2000}}); }

Eigen::Map<const RowMatrix> RbmView::weights() const {
  return {params.data(), static_cast<Eigen::Index>(n_visible), static_cast<Eigen::Index>(n_hidden)};
}
Eigen::Map<const Vector> RbmView::visible_bias() const {
  return {params.data() + n_visible * n_hidden, static_cast<Eigen::Index>(n_visible)};
}
Eigen::Map<const Vector> RbmView::hidden_bias() const {
  return {params.data() + n_visible * n_hidden + n_visible, static_cast<Eigen::Index>(n_hidden)};
}

Rbm::Rbm(std::size_t n_visible, std::size_t n_hidden)
    : n_visible_(n_visible),
      n_hidden_(n_hidden),
      params_(LayerShape{n_visible, n_hidden}.parameter_count(), 0.0) {}

Eigen::Map<RowMatrix> Rbm::weights() {
  return {params_.data(), static_cast<Eigen::Index>(n_visible_), static_cast<Eigen::Index>(n_hidden_)};
}
Eigen::Map<Vector> Rbm::visible_bias() {
  return {params_.data() + n_visible_ * n_hidden_, static_cast<Eigen::Index>(n_visible_)};
}
Eigen::Map<Vector> Rbm::hidden_bias() {
  return {params_.data() + n_visible_ * n_hidden_ + n_visible_, static_cast<Eigen::Index>(n_hidden_)};
}

std::vector<double> flatten(const Rbm& rbm) {
  return {rbm.params().begin(), rbm.params().end()};
}

Rbm unflatten(std::span<const double> params, std::size_t n_visible, std::size_t n_hidden) {
  const std::size_t expected = LayerShape{n_visible, n_hidden}.parameter_count();
  if (params.size() != expected)
    throw std::invalid_argument("unflatten: got " + std::to_string(params.size()) +
                                " values, expected " + std::to_string(expected) + " for (" +
                                std::to_string(n_visible) + "," + std::to_string(n_hidden) + ")");
  Rbm rbm(n_visible, n_hidden);
  std::copy(params.begin(), params.end(), rbm.params_.begin());
  return rbm;
}

Rbm random_rbm(std::size_t n_visible, std::size_t n_hidden, Rng& rng) {
  Rbm rbm(n_visible, n_hidden);
  auto w = rbm.weights();
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = 0.01 * rng.normal();
  return rbm;
}

RowMatrix hidden_activation(const RbmView& rbm, const RowMatrix& visible) {
  check_width(rbm, visible);
  AlignedParams storage;
  return hidden_activation_aligned(aligned(rbm, storage), visible);
}

RowMatrix reconstruct(const RbmView& rbm, const RowMatrix& visible) {
  check_width(rbm, visible);
  AlignedParams storage;
  return reconstruct_aligned(aligned(rbm, storage), visible);
}

double reconstruction_error(const RbmView& rbm, const RowMatrix& visible) {
  check_width(rbm, visible);
  AlignedParams storage;
  return (visible - reconstruct_aligned(aligned(rbm, storage), visible)).squaredNorm();
}

ObjectiveFn reconstruction_objective(const RowMatrix& data, LayerShape shape) {
  ObjectiveFn fn;
  fn.n_var = shape.parameter_count();
  fn.evaluate = [&data, shape](std::span<const double> params) {
    return reconstruction_error(RbmView{shape.n_visible, shape.n_hidden, params}, data);
  };
  return fn;
}

CdResult cd1_train(Rbm rbm, const RowMatrix& train, const CdConfig& config,
                   const EpochCallback& on_epoch) {
  if (config.minibatch_size == 0 || !(config.learning_rate >= 0.0))
    throw std::invalid_argument("cd1_train: minibatch size must be positive, learning rate non-negative");
  if (static_cast<std::size_t>(train.cols()) != rbm.n_visible())
    throw std::invalid_argument("cd1_train: data width does not match n_visible");
  const auto m = static_cast<std::size_t>(train.rows());
  if (m == 0) throw std::invalid_argument("cd1_train: empty training set");

  Rng rng(config.rng_seed);
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  CdResult result{std::move(rbm), {}};
  Rbm& model = result.rbm;
  const auto nv = static_cast<Eigen::Index>(model.n_visible());

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = m - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);

    for (std::size_t start = 0; start < m; start += config.minibatch_size) {
      const std::size_t size = std::min(config.minibatch_size, m - start);
      const auto bs = static_cast<Eigen::Index>(size);
      RowMatrix v0(bs, nv);
      for (Eigen::Index r = 0; r < bs; ++r) v0.row(r) = train.row(static_cast<Eigen::Index>(order[start + static_cast<std::size_t>(r)]));

      const RowMatrix h0 = hidden_activation(model.view(), v0);
      RowMatrix h_sample(h0.rows(), h0.cols());
      for (Eigen::Index r = 0; r < h0.rows(); ++r)
        for (Eigen::Index c = 0; c < h0.cols(); ++c) h_sample(r, c) = rng.uniform() < h0(r, c) ? 1.0 : 0.0;
      RowMatrix v1 = h_sample * model.weights().transpose();
      v1.rowwise() += model.visible_bias().transpose();
      logistic_in_place(v1);
      const RowMatrix h1 = hidden_activation(model.view(), v1);

      const double step = config.learning_rate / static_cast<double>(size);
      model.weights() += step * (v0.transpose() * h0 - v1.transpose() * h1);
      model.visible_bias() += step * (v0 - v1).colwise().sum().transpose();
      model.hidden_bias() += step * (h0 - h1).colwise().sum().transpose();
    }

    for (double p : model.params())
      if (!std::isfinite(p))
        throw TrainingDiverged("CD-1 diverged: non-finite parameter after epoch " + std::to_string(epoch));
    const double error = reconstruction_error(model.view(), train);
    result.epoch_errors.push_back(error);
    if (on_epoch) on_epoch(epoch, error);
  }
  return result;
}

std::string to_string(Trainer trainer) {
  switch (trainer) {
    case Trainer::CD: return "CD";
    case Trainer::LeaMvd: return "LEA_MVD";
    case Trainer::LeaMvdSeededByCd: return "LEA_MVD_seeded_by_CD";
  }
  return "unknown";
}

Trainer parse_trainer(std::string_view name) {
  if (name == "CD") return Trainer::CD;
  if (name == "LEA_MVD") return Trainer::LeaMvd;
  if (name == "LEA_MVD_seeded_by_CD") return Trainer::LeaMvdSeededByCd;
  throw std::invalid_argument("unknown trainer '" + std::string(name) +
                              "' (expected CD, LEA_MVD or LEA_MVD_seeded_by_CD)");
}

std::vector<LayerResult> pretrain_dbn(const DbnSpec& spec, const RowMatrix& data,
                                      const PretrainConfig& config, const LayerObserver& observer) {
  if (static_cast<std::size_t>(data.cols()) != spec.input_width())
    throw std::invalid_argument("pretrain_dbn: data width " + std::to_string(data.cols()) +
                                " does not match first layer n_visible " +
                                std::to_string(spec.input_width()));
  if (config.budget == 0) throw std::invalid_argument("pretrain_dbn: budget must be positive");

  std::vector<LayerResult> layers;
  RowMatrix layer_input = data;
  for (std::size_t k = 0; k < spec.layers().size(); ++k) {
    const LayerShape shape = spec.layers()[k];
    const std::uint64_t layer_seed = derive_seed(config.seed, k);
    Rng init_rng(derive_seed(layer_seed, 0));
    Rbm initial = random_rbm(shape.n_visible, shape.n_hidden, init_rng);
    CdConfig cd = config.cd;
    cd.rng_seed = derive_seed(layer_seed, 1);

    LayerResult layer{Rbm(shape.n_visible, shape.n_hidden), {}, layer_seed};
    auto emit = [&](const GenerationRecord& rec) {
      layer.history.push_back(rec);
      if (observer) observer(k, rec);
    };

    if (config.trainer == Trainer::CD) {
      cd.epochs = config.budget;
      CdResult trained = cd1_train(std::move(initial), layer_input, cd, [&](std::size_t epoch, double error) {
        emit(GenerationRecord{epoch, error, 0.0, 0.0, 0.0, false, epoch, 0.0, 0.0});
      });
      layer.rbm = std::move(trained.rbm);
    } else {
      OptimizerConfig opt = config.optimizer;
      opt.n_var = shape.parameter_count();
      opt.n_gen = config.budget;
      opt.rng_seed = derive_seed(layer_seed, 2);
      if (config.trainer == Trainer::LeaMvdSeededByCd) {
        cd.epochs = 1;
        CdResult seeded = cd1_train(std::move(initial), layer_input, cd);
        opt.init_mode = InitMode::GaussianAroundSeed;
        opt.seed_vector = flatten(seeded.rbm);
      } else {
        opt.init_mode = InitMode::UniformBounds;
        opt.seed_vector.clear();
      }
      const ObjectiveFn objective = reconstruction_objective(layer_input, shape);
      RunResult run_result = run(opt, objective, emit);
      layer.stop_reason = run_result.stop_reason;
      layer.rbm = unflatten({run_result.x_best.data(), static_cast<std::size_t>(run_result.x_best.size())},
                            shape.n_visible, shape.n_hidden);
    }

    if (k + 1 < spec.layers().size()) layer_input = hidden_activation(layer.rbm.view(), layer_input);
    layers.push_back(std::move(layer));
  }
  return layers;
}

}  // namespace leamvd
