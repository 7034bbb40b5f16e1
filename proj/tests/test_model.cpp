#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gpae/model.hpp"
#include "gpae/rng.hpp"
#include "gpae/serialize.hpp"

using namespace gpae;

namespace {

GpaeModel small_model(std::uint64_t seed, int D, int d, int S_e, int S_d) {
  GpaeModel m;
  m.rff_enc = sample_rff_map(derive_seed(seed, "e"), S_e, D, 1.3);
  m.rff_dec = sample_rff_map(derive_seed(seed, "d"), S_d, d, 1.0);
  CounterRng rng(derive_seed(seed, "w"));
  m.enc_weights = rng.normal_matrix(S_e, d);
  m.dec_weights = rng.normal_matrix(S_d, D);
  m.clf_weights = rng.normal_vector(d);
  m.clf_bias = rng.normal();
  return m;
}

Dataset two_gaussians_dataset(int n, std::uint64_t seed) {
  Dataset ds;
  ds.schema.columns = {{"x1", ColumnKind::Continuous, {}, false}, {"x2", ColumnKind::Continuous, {}, false}};
  ds.schema.label_column = "label";
  ds.schema.positive_label = "pos";
  ds.layout = make_layout(ds.schema);
  ds.scaler = {{0.0, 0.0}, {1.0, 1.0}};
  ds.X.resize(n, 2);
  ds.y.resize(n);
  CounterRng rng(seed);
  for (int i = 0; i < n; ++i) {
    int label = i % 2;
    ds.X(i, 0) = (label == 1 ? 2.0 : -2.0) + rng.normal();
    ds.X(i, 1) = rng.normal();
    ds.y[i] = label;
  }
  return ds;
}

// FD oracle over an arbitrary scalar-in-parameter direction; param points
// into model.
double fd_loss(GpaeModel& model, const MatrixXd& X, const VectorXd& y, double alpha, double* param, double h) {
  double orig = *param;
  *param = orig + h;
  double up = compute_loss(model, X, y, alpha).total;
  *param = orig - h;
  double down = compute_loss(model, X, y, alpha).total;
  *param = orig;
  return (up - down) / (2.0 * h);
}

}  // namespace

TEST_CASE("encode/decode linear structure") {
  GpaeModel m = small_model(1, 3, 2, 8, 8);
  VectorXd x(3);
  x << 0.4, -1.0, 2.0;

  GpaeModel zeroed = m;
  zeroed.enc_weights.setZero();
  CHECK(zeroed.encode(x).cwiseAbs().maxCoeff() == 0.0);

  GpaeModel doubled = m;
  doubled.enc_weights *= 2.0;
  CHECK((doubled.encode(x) - 2.0 * m.encode(x)).cwiseAbs().maxCoeff() < 1e-14);

  GpaeModel dec_zero = m;
  dec_zero.dec_weights.setZero();
  CHECK(dec_zero.decode(m.encode(x)).cwiseAbs().maxCoeff() == 0.0);

  GpaeModel dec_doubled = m;
  dec_doubled.dec_weights *= 2.0;
  VectorXd lat = m.encode(x);
  CHECK((dec_doubled.decode(lat) - 2.0 * m.decode(lat)).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("encode matches a hand-multiplied case") {
  GpaeModel m;
  m.rff_enc.feature_count = 2;
  m.rff_enc.input_dim = 2;
  m.rff_enc.bandwidth = 1.0;
  m.rff_enc.frequencies = MatrixXd(2, 2);
  m.rff_enc.frequencies << 1.0, 0.0, 0.5, -1.0;
  m.rff_enc.phases = VectorXd(2);
  m.rff_enc.phases << 0.25, 1.5;
  m.enc_weights = MatrixXd(2, 1);
  m.enc_weights << 0.7, -0.2;

  VectorXd x(2);
  x << 0.3, 0.9;
  double phi0 = std::cos(1.0 * 0.3 + 0.0 * 0.9 + 0.25);
  double phi1 = std::cos(0.5 * 0.3 - 1.0 * 0.9 + 1.5);
  double expected = phi0 * 0.7 + phi1 * (-0.2);
  CHECK(m.encode(x)[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("classify") {
  GpaeModel m = small_model(2, 3, 2, 8, 8);
  m.clf_weights.setZero();
  m.clf_bias = 0.0;
  VectorXd lat(2);
  lat << 0.3, -0.8;
  CHECK(m.classify(lat) == 0.5);

  m.clf_weights << 2.0, -1.0;
  m.clf_bias = -1.0;
  VectorXd one(2);
  one << 1.0, 1.0;
  CHECK(m.classify(one) == doctest::Approx(0.5).epsilon(1e-15));

  // monotone in the logit
  double prev = 0.0;
  for (double t = -5.0; t <= 5.0; t += 0.5) {
    VectorXd v(2);
    v << t, 0.0;
    double p = m.classify(v);
    CHECK(p > prev);
    prev = p;
  }
}

TEST_CASE("loss values") {
  GpaeModel m = small_model(3, 2, 1, 4, 4);
  m.dec_weights.setZero();
  m.clf_weights.setZero();
  m.clf_bias = 0.0;

  MatrixXd X(1, 2);
  X << 3.0, 4.0;  // decode == 0, residual (3,4)
  VectorXd y(1);
  y << 1.0;
  Losses l = compute_loss(m, X, y, 1.0);
  CHECK(l.recon == doctest::Approx(25.0).epsilon(1e-12));
  CHECK(l.cls == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(l.total == doctest::Approx(25.0 + std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("training gradients match finite differences") {
  CounterRng rng(77);
  for (int trial = 0; trial < 6; ++trial) {
    int D = 2 + static_cast<int>(rng.below(2));
    int d = 1 + static_cast<int>(rng.below(2));
    GpaeModel m = small_model(100 + static_cast<std::uint64_t>(trial), D, d, 6, 5);
    m.enc_weights *= 0.5;  // keep latents in a well-conditioned range
    MatrixXd X = rng.normal_matrix(5, D);
    VectorXd y(5);
    for (int i = 0; i < 5; ++i) y[i] = static_cast<double>(rng.below(2));
    double alpha = trial % 2 == 0 ? 1.0 : 0.3;

    Gradients g = loss_gradients(m, X, y, alpha);
    const double h = 1e-6;
    double worst = 0.0;
    auto track = [&](double analytic, double fd) {
      double rel = std::abs(analytic - fd) / std::max(1.0, std::abs(fd));
      worst = std::max(worst, rel);
    };
    for (int r = 0; r < m.enc_weights.rows(); ++r)
      for (int c = 0; c < m.enc_weights.cols(); ++c)
        track(g.enc_weights(r, c), fd_loss(m, X, y, alpha, &m.enc_weights(r, c), h));
    for (int r = 0; r < m.dec_weights.rows(); ++r)
      for (int c = 0; c < m.dec_weights.cols(); ++c)
        track(g.dec_weights(r, c), fd_loss(m, X, y, alpha, &m.dec_weights(r, c), h));
    for (int r = 0; r < m.clf_weights.size(); ++r)
      track(g.clf_weights[r], fd_loss(m, X, y, alpha, &m.clf_weights[r], h));
    track(g.clf_bias, fd_loss(m, X, y, alpha, &m.clf_bias, h));
    CHECK(worst <= 1e-5);
  }
}

TEST_CASE("encoder jacobian trivial and FD cases") {
  GpaeModel m = small_model(5, 3, 2, 8, 8);
  VectorXd x(3);
  x << 0.2, 0.4, -0.6;

  GpaeModel zero_w = m;
  zero_w.enc_weights.setZero();
  CHECK(zero_w.encoder_jacobian(x).cwiseAbs().maxCoeff() == 0.0);

  GpaeModel zero_z = m;
  zero_z.rff_enc.frequencies.setZero();
  CHECK(zero_z.encoder_jacobian(x).cwiseAbs().maxCoeff() == 0.0);

  CounterRng rng(55);
  for (int trial = 0; trial < 20; ++trial) {
    GpaeModel t = small_model(200 + static_cast<std::uint64_t>(trial), 3, 2, 10, 6);
    VectorXd p = rng.normal_vector(3);
    MatrixXd analytic = t.encoder_jacobian(p);
    MatrixXd fd(2, 3);
    const double h = 1e-5;
    for (int j = 0; j < 3; ++j) {
      VectorXd hi = p, lo = p;
      hi[j] += h;
      lo[j] -= h;
      fd.col(j) = (t.encode(hi) - t.encode(lo)) / (2.0 * h);
    }
    double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
    CHECK((analytic - fd).cwiseAbs().maxCoeff() / scale <= 1e-6);
  }
}

TEST_CASE("probability gradient matches FD") {
  CounterRng rng(66);
  for (int trial = 0; trial < 10; ++trial) {
    GpaeModel m = small_model(300 + static_cast<std::uint64_t>(trial), 3, 2, 10, 6);
    VectorXd x = rng.normal_vector(3);
    VectorXd g = m.probability_gradient(x);
    const double h = 1e-6;
    for (int j = 0; j < 3; ++j) {
      VectorXd hi = x, lo = x;
      hi[j] += h;
      lo[j] -= h;
      double fd = (m.classify(m.encode(hi)) - m.classify(m.encode(lo))) / (2.0 * h);
      CHECK(std::abs(g[j] - fd) / std::max(1.0, std::abs(fd)) <= 1e-5);
    }
  }
}

TEST_CASE("training reduces validation loss on two gaussians") {
  Dataset train = two_gaussians_dataset(2000, 10);
  Dataset val = two_gaussians_dataset(400, 11);
  TrainConfig cfg;
  cfg.enc_features = 100;
  cfg.dec_features = 100;
  cfg.latent_dim = 2;
  cfg.max_epochs = 250;
  cfg.lr_init = 0.08;  // few batches per epoch at this n, so step up
  cfg.seed = 7;
  TrainLog log;
  GpaeModel m = train_gpae(train, val, cfg, &log);
  REQUIRE(log.epochs.size() >= 50);
  CHECK(log.epochs[49].val_total < log.epochs.front().val_total);

  // the best-so-far trajectory is non-increasing
  double best = log.epochs.front().val_total;
  for (const auto& e : log.epochs) best = std::min(best, e.val_total);
  CHECK(log.best_val == doctest::Approx(best));

  // accuracy should be far above chance on 4-sigma-separated classes
  int correct = 0;
  for (Eigen::Index i = 0; i < val.X.rows(); ++i)
    if (m.predict(val.X.row(i).transpose()) == static_cast<int>(val.y[i])) ++correct;
  CHECK(static_cast<double>(correct) / static_cast<double>(val.X.rows()) > 0.9);
}

TEST_CASE("training is deterministic") {
  Dataset train = two_gaussians_dataset(300, 20);
  Dataset val = two_gaussians_dataset(100, 21);
  TrainConfig cfg;
  cfg.enc_features = 50;
  cfg.dec_features = 50;
  cfg.latent_dim = 2;
  cfg.max_epochs = 5;
  cfg.seed = 9;
  GpaeModel a = train_gpae(train, val, cfg);
  GpaeModel b = train_gpae(train, val, cfg);
  CHECK(a.enc_weights == b.enc_weights);
  CHECK(a.dec_weights == b.dec_weights);
  CHECK(a.clf_weights == b.clf_weights);
  CHECK(a.clf_bias == b.clf_bias);
}

TEST_CASE("divergence aborts with the epoch") {
  Dataset train = two_gaussians_dataset(200, 30);
  Dataset val = two_gaussians_dataset(100, 31);
  TrainConfig cfg;
  cfg.enc_features = 30;
  cfg.dec_features = 30;
  cfg.latent_dim = 2;
  cfg.lr_init = 1e12;
  cfg.max_epochs = 10;
  cfg.seed = 3;
  try {
    train_gpae(train, val, cfg);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  cfg.stop_patience = 5;
  cfg.plateau_patience = 10;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("serialized model reloads to identical predictions") {
  Dataset train = two_gaussians_dataset(300, 40);
  Dataset val = two_gaussians_dataset(100, 41);
  TrainConfig cfg;
  cfg.enc_features = 40;
  cfg.dec_features = 40;
  cfg.latent_dim = 2;
  cfg.max_epochs = 3;
  cfg.seed = 12;
  GpaeModel m = train_gpae(train, val, cfg);
  GpaeModel back = model_from_json(model_to_json(m));
  CHECK(back.enc_weights == m.enc_weights);
  CHECK(back.rff_enc.frequencies == m.rff_enc.frequencies);
  Losses l1 = compute_loss(m, val.X, val.y, 1.0);
  Losses l2 = compute_loss(back, val.X, val.y, 1.0);
  CHECK(l1.total == l2.total);
}

TEST_CASE("median pairwise bandwidth is sane") {
  CounterRng rng(50);
  MatrixXd X = rng.normal_matrix(100, 4);
  double med = median_pairwise_distance(X, 1);
  // E|x-y| for standard normals in 4-d is around sqrt(2*4)
  CHECK(med > 1.0);
  CHECK(med < 5.0);
}
