#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "leamvd/dataio.hpp"
#include "leamvd/rbm.hpp"

using namespace leamvd;

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Rbm random_params(Rng& rng, std::size_t nv, std::size_t nh) {
  std::vector<double> p(LayerShape{nv, nh}.parameter_count());
  for (double& v : p) v = rng.uniform(-1.0, 1.0);
  return unflatten(p, nv, nh);
}

RowMatrix random_binaryish(Rng& rng, Eigen::Index m, Eigen::Index n) {
  RowMatrix v(m, n);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) v(i, j) = rng.uniform();
  return v;
}

// Scalar-loop oracles reading parameters straight from the flat layout.
RowMatrix naive_hidden(const std::vector<double>& p, std::size_t nv, std::size_t nh, const RowMatrix& v) {
  RowMatrix h(v.rows(), static_cast<Eigen::Index>(nh));
  for (Eigen::Index r = 0; r < v.rows(); ++r)
    for (std::size_t j = 0; j < nh; ++j) {
      double a = p[nv * nh + nv + j];
      for (std::size_t i = 0; i < nv; ++i) a += v(r, i) * p[i * nh + j];
      h(r, j) = logistic(a);
    }
  return h;
}

RowMatrix naive_reconstruct(const std::vector<double>& p, std::size_t nv, std::size_t nh, const RowMatrix& v) {
  const RowMatrix h = naive_hidden(p, nv, nh, v);
  RowMatrix out(v.rows(), static_cast<Eigen::Index>(nv));
  for (Eigen::Index r = 0; r < v.rows(); ++r)
    for (std::size_t i = 0; i < nv; ++i) {
      double a = p[nv * nh + i];
      for (std::size_t j = 0; j < nh; ++j) a += h(r, j) * p[i * nh + j];
      out(r, i) = logistic(a);
    }
  return out;
}

double naive_error(const std::vector<double>& p, std::size_t nv, std::size_t nh, const RowMatrix& v) {
  const RowMatrix rec = naive_reconstruct(p, nv, nh, v);
  double sum = 0.0;
  for (Eigen::Index r = 0; r < v.rows(); ++r)
    for (Eigen::Index i = 0; i < v.cols(); ++i) sum += (v(r, i) - rec(r, i)) * (v(r, i) - rec(r, i));
  return sum;
}

}  // namespace

TEST_CASE("flatten layout") {
  const std::vector<double> p{1, 2, 3, 4, 5};
  Rbm rbm = unflatten(p, 2, 1);
  CHECK(rbm.weights()(0, 0) == 1);
  CHECK(rbm.weights()(1, 0) == 2);
  CHECK(rbm.visible_bias()[0] == 3);
  CHECK(rbm.visible_bias()[1] == 4);
  CHECK(rbm.hidden_bias()[0] == 5);
  CHECK(flatten(rbm) == p);
}

TEST_CASE("unflatten length checks") {
  CHECK_NOTHROW(unflatten(std::vector<double>(1549), 49, 30));
  CHECK_THROWS_AS(unflatten(std::vector<double>(1548), 49, 30), std::invalid_argument);
}

TEST_CASE("flatten/unflatten round trip for every layer of both architectures") {
  Rng rng(12);
  const DbnSpec specs[] = {DbnSpec::small7x7(), DbnSpec::full28x28()};
  for (const auto& spec : specs)
    for (const auto& shape : spec.layers()) {
      Rbm a = random_rbm(shape.n_visible, shape.n_hidden, rng);
      a.visible_bias()[0] = 0.125;
      a.hidden_bias()[shape.n_hidden - 1] = -3.5;
      const std::vector<double> flat = flatten(a);
      REQUIRE(flat.size() == shape.parameter_count());
      REQUIRE(flatten(unflatten(flat, shape.n_visible, shape.n_hidden)) == flat);
    }
}

TEST_CASE("architecture parameter counts") {
  std::vector<std::size_t> small, full;
  const DbnSpec small_spec = DbnSpec::small7x7(), full_spec = DbnSpec::full28x28();
  for (const auto& s : small_spec.layers()) small.push_back(s.parameter_count());
  for (const auto& s : full_spec.layers()) full.push_back(s.parameter_count());
  CHECK(small == std::vector<std::size_t>{1549, 960, 3750});
  CHECK(full == std::vector<std::size_t>{393284, 251000, 1002500});
  CHECK_THROWS_AS(DbnSpec({{49, 30}, {31, 30}}), std::invalid_argument);
  CHECK_THROWS_AS(DbnSpec({}), std::invalid_argument);
}

TEST_CASE("hidden activation and reconstruction at zero parameters") {
  const Rbm zero(6, 4);
  Rng rng(1);
  const RowMatrix v = random_binaryish(rng, 5, 6);
  CHECK(hidden_activation(zero, v).isApproxToConstant(0.5, 0.0));
  const RowMatrix rec = reconstruct(zero, v);
  CHECK(rec.rows() == 5);
  CHECK(rec.cols() == 6);
  CHECK(rec.isApproxToConstant(0.5, 0.0));
  CHECK(reconstruction_error(zero, RowMatrix::Constant(3, 6, 0.5)) == 0.0);
  CHECK_THROWS_AS(hidden_activation(zero, RowMatrix::Zero(2, 5)), std::invalid_argument);
}

TEST_CASE("hidden activation saturates") {
  Rbm one(1, 1);
  one.hidden_bias()[0] = 30.0;
  CHECK(hidden_activation(one, RowMatrix::Ones(1, 1))(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("reconstruction error of a single wrong pixel") {
  // Strong biases pin the reconstruction to (1, 0, 0); data is all zero.
  Rbm rbm(3, 2);
  rbm.visible_bias() << 40.0, -40.0, -40.0;
  CHECK(reconstruction_error(rbm, RowMatrix::Zero(1, 3)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("matrix routines agree with loop oracles") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t nv = 1 + rng.index(16), nh = 1 + rng.index(16);
    const Rbm rbm = random_params(rng, nv, nh);
    const std::vector<double> p = flatten(rbm);
    const RowMatrix v = random_binaryish(rng, static_cast<Eigen::Index>(1 + rng.index(10)), static_cast<Eigen::Index>(nv));
    REQUIRE((hidden_activation(rbm, v) - naive_hidden(p, nv, nh, v)).cwiseAbs().maxCoeff() <= 1e-12);
    REQUIRE((reconstruct(rbm, v) - naive_reconstruct(p, nv, nh, v)).cwiseAbs().maxCoeff() <= 1e-12);
    const double expected = naive_error(p, nv, nh, v);
    REQUIRE(std::abs(reconstruction_error(rbm, v) - expected) <= 1e-9 * std::max(1.0, expected));
    const ObjectiveFn obj = reconstruction_objective(v, {nv, nh});
    REQUIRE(obj.evaluate(p) == reconstruction_error(rbm, v));
    REQUIRE(reconstruction_error(rbm, v) >= 0.0);
  }
}

TEST_CASE("CD-1 with zero learning rate leaves parameters unchanged") {
  Rng rng(4);
  const Rbm start = random_rbm(10, 5, rng);
  const RowMatrix data = random_binaryish(rng, 37, 10);
  CdConfig cfg;
  cfg.epochs = 7;
  cfg.learning_rate = 0.0;
  cfg.minibatch_size = 10;
  const CdResult r = cd1_train(start, data, cfg);
  const std::vector<double> after = flatten(r.rbm), before = flatten(start);
  CHECK(after == before);
  CHECK(r.epoch_errors.size() == 7);
}

TEST_CASE("CD-1 on constant data improves in most seeds") {
  const RowMatrix data = RowMatrix::Ones(100, 1);
  int monotone = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    CdConfig cfg;
    cfg.rng_seed = seed + 100;
    const CdResult r = cd1_train(random_rbm(1, 1, rng), data, cfg);
    bool ok = true;
    for (std::size_t e = 1; e < r.epoch_errors.size(); ++e) ok = ok && r.epoch_errors[e] <= r.epoch_errors[e - 1];
    monotone += ok ? 1 : 0;
  }
  CHECK(monotone >= 18);
}

TEST_CASE("CD-1 is deterministic and rejects bad input") {
  Rng rng(6);
  const RowMatrix data = random_binaryish(rng, 50, 8);
  CdConfig cfg;
  cfg.epochs = 3;
  cfg.rng_seed = 5;
  const Rbm start = random_rbm(8, 4, rng);
  const std::vector<double> first = flatten(cd1_train(start, data, cfg).rbm);
  const std::vector<double> second = flatten(cd1_train(start, data, cfg).rbm);
  CHECK(first == second);
  CHECK_THROWS_AS(cd1_train(start, RowMatrix::Zero(5, 7), cfg), std::invalid_argument);
  cfg.learning_rate = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(cd1_train(start, data, cfg), TrainingDiverged);
}

TEST_CASE("CD-1 reduces error on downscaled MNIST") {
  const Dataset raw = binarize(load_idx(LEA_MVD_TEST_DATA_DIR "/train-images-idx3-ubyte.gz"));
  const Dataset data = subset(downscale_7x7(raw), 500, 3);
  Rng rng(1);
  CdConfig cfg;
  cfg.rng_seed = 2;
  const CdResult r = cd1_train(random_rbm(49, 30, rng), data.images, cfg);
  REQUIRE(r.epoch_errors.size() == 50);
  CHECK(r.epoch_errors.back() < r.epoch_errors.front());
}

TEST_CASE("pretrain_dbn") {
  Rng rng(8);
  const RowMatrix data = random_binaryish(rng, 60, 12).array().round().matrix();
  const DbnSpec spec({{12, 6}, {6, 5}, {5, 9}});
  PretrainConfig cfg;
  cfg.budget = 6;
  cfg.seed = 42;
  cfg.cd.minibatch_size = 20;

  SUBCASE("layer outputs stay in (0,1) and histories have one row per step") {
    for (Trainer t : {Trainer::CD, Trainer::LeaMvd, Trainer::LeaMvdSeededByCd}) {
      cfg.trainer = t;
      const auto layers = pretrain_dbn(spec, data, cfg);
      REQUIRE(layers.size() == 3);
      RowMatrix input = data;
      for (std::size_t k = 0; k < 3; ++k) {
        CHECK(layers[k].history.size() <= 6);
        if (t == Trainer::CD) CHECK(layers[k].history.size() == 6);
        CHECK(layers[k].rbm.shape() == spec.layers()[k]);
        if (k > 0) {
          CHECK(input.minCoeff() > 0.0);
          CHECK(input.maxCoeff() < 1.0);
        }
        input = hidden_activation(layers[k].rbm, input);
      }
    }
  }

  SUBCASE("single CD layer equals direct training") {
    const DbnSpec one({{12, 6}});
    cfg.trainer = Trainer::CD;
    const auto layers = pretrain_dbn(one, data, cfg);
    const std::uint64_t layer_seed = derive_seed(42, 0);
    Rng init(derive_seed(layer_seed, 0));
    CdConfig cd = cfg.cd;
    cd.epochs = 6;
    cd.rng_seed = derive_seed(layer_seed, 1);
    const CdResult direct = cd1_train(random_rbm(12, 6, init), data, cd);
    const std::vector<double> via_pretrain = flatten(layers[0].rbm), via_cd = flatten(direct.rbm);
    CHECK(via_pretrain == via_cd);
    CHECK(layers[0].history.back().f_best == direct.epoch_errors.back());
  }

  SUBCASE("CD-seeded optimizer never starts worse than the first CD epoch") {
    const DbnSpec one({{12, 6}});
    cfg.trainer = Trainer::LeaMvdSeededByCd;
    const auto seeded = pretrain_dbn(one, data, cfg);
    cfg.trainer = Trainer::CD;
    const auto cd = pretrain_dbn(one, data, cfg);
    CHECK(seeded[0].history.front().f_best <= cd[0].history.front().f_best);
    for (std::size_t t = 1; t < seeded[0].history.size(); ++t)
      CHECK(seeded[0].history[t].f_best <= seeded[0].history[t - 1].f_best);
    CHECK(reconstruction_error(seeded[0].rbm, data) == seeded[0].history.back().f_best);
  }

  SUBCASE("errors") {
    CHECK_THROWS_AS(pretrain_dbn(spec, RowMatrix::Zero(4, 11), cfg), std::invalid_argument);
    CHECK(parse_trainer("LEA_MVD_seeded_by_CD") == Trainer::LeaMvdSeededByCd);
    CHECK_THROWS_AS(parse_trainer("cmaes"), std::invalid_argument);
  }
}
