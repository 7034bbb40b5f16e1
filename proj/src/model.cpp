#include "gpae/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gpae/rng.hpp"

namespace gpae {

namespace {
constexpr double kProbClamp = 1e-12;
}

void TrainConfig::validate() const {
  if (latent_dim < 1 || enc_features < 1 || dec_features < 1) throw Error("train config: dimensions must be >= 1");
  if (batch_size < 1) throw Error("train config: batch_size must be >= 1");
  if (!(lr_init > 0.0) || !(lr_decay > 0.0)) throw Error("train config: learning rates must be positive");
  if (plateau_patience < 1 || stop_patience < 1) throw Error("train config: patience must be positive");
  if (stop_patience <= plateau_patience) throw Error("train config: stop_patience must exceed plateau_patience");
  if (class_weight < 0.0) throw Error("train config: class_weight must be >= 0");
  if (max_epochs < 1) throw Error("train config: max_epochs must be >= 1");
}

VectorXd GpaeModel::encode(const VectorXd& x) const { return enc_weights.transpose() * rff_enc.apply(x); }

MatrixXd GpaeModel::encode_rows(const MatrixXd& X) const { return rff_enc.apply_rows(X) * enc_weights; }

VectorXd GpaeModel::decode(const VectorXd& latent) const { return dec_weights.transpose() * rff_dec.apply(latent); }

MatrixXd GpaeModel::decode_rows(const MatrixXd& latents) const { return rff_dec.apply_rows(latents) * dec_weights; }

double GpaeModel::classify(const VectorXd& latent) const { return sigmoid(logit(latent)); }

MatrixXd GpaeModel::encoder_jacobian(const VectorXd& x) const {
  return enc_weights.transpose() * rff_enc.jacobian(x);
}

VectorXd GpaeModel::probability_gradient(const VectorXd& x) const {
  VectorXd latent = encode(x);
  double p = classify(latent);
  return p * (1.0 - p) * (encoder_jacobian(x).transpose() * clf_weights);
}

Losses compute_loss(const GpaeModel& model, const MatrixXd& X, const VectorXd& y, double class_weight) {
  if (X.rows() == 0) throw Error("loss: empty batch");
  const double n = static_cast<double>(X.rows());
  MatrixXd latents = model.encode_rows(X);
  MatrixXd recon = model.decode_rows(latents);
  Losses out;
  out.recon = (recon - X).squaredNorm() / n;
  VectorXd logits = latents * model.clf_weights;
  logits.array() += model.clf_bias;
  double bce = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    double p = std::clamp(sigmoid(logits[i]), kProbClamp, 1.0 - kProbClamp);
    bce -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
  }
  out.cls = bce / n;
  out.total = out.recon + class_weight * out.cls;
  return out;
}

Gradients loss_gradients(const GpaeModel& model, const MatrixXd& X, const VectorXd& y, double class_weight) {
  if (X.rows() == 0) throw Error("gradients: empty batch");
  const double n = static_cast<double>(X.rows());

  MatrixXd phi_e = model.rff_enc.apply_rows(X);        // n x S_e
  MatrixXd latents = phi_e * model.enc_weights;        // n x d
  MatrixXd phi_d = model.rff_dec.apply_rows(latents);  // n x S_d
  MatrixXd residual = phi_d * model.dec_weights - X;   // n x D

  Gradients g;
  g.losses.recon = residual.squaredNorm() / n;
  g.dec_weights = (2.0 / n) * phi_d.transpose() * residual;

  // Backprop into the latents. Reconstruction path goes through the decoder
  // RFF layer: dL/dlat_i = J_d(lat_i)^T W_d (2/n) r_i, with
  // J_d = -(sqrt(2/S_d)/b) diag(sin(Z lat + c)) Z.
  MatrixXd arg = (latents / model.rff_dec.bandwidth) * model.rff_dec.frequencies.transpose();
  arg.rowwise() += model.rff_dec.phases.transpose();
  MatrixXd sin_d = arg.array().sin().matrix();                               // n x S_d
  MatrixXd v = residual * model.dec_weights.transpose();                     // n x S_d
  double dec_scale = -model.rff_dec.scale() / model.rff_dec.bandwidth;
  MatrixXd dlat = (2.0 / n) * dec_scale * (sin_d.array() * v.array()).matrix() * model.rff_dec.frequencies;

  VectorXd logits = latents * model.clf_weights;
  logits.array() += model.clf_bias;
  VectorXd perr(logits.size());
  double bce = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    double p = sigmoid(logits[i]);
    perr[i] = p - y[i];
    p = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
    bce -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
  }
  g.losses.cls = bce / n;
  g.losses.total = g.losses.recon + class_weight * g.losses.cls;

  if (class_weight != 0.0) {
    dlat += (class_weight / n) * perr * model.clf_weights.transpose();
    g.clf_weights = (class_weight / n) * latents.transpose() * perr;
    g.clf_bias = (class_weight / n) * perr.sum();
  } else {
    g.clf_weights = VectorXd::Zero(model.clf_weights.size());
    g.clf_bias = 0.0;
  }

  g.enc_weights = phi_e.transpose() * dlat;
  return g;
}

double median_pairwise_distance(const MatrixXd& X, std::uint64_t seed, int max_points) {
  Eigen::Index n = std::min<Eigen::Index>(X.rows(), max_points);
  std::vector<std::size_t> idx(static_cast<std::size_t>(X.rows()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  CounterRng rng(derive_seed(seed, "median_bandwidth"));
  rng.shuffle(idx);
  std::vector<double> dists;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      dists.push_back((X.row(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)])) -
                       X.row(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(j)])))
                          .norm());
  if (dists.empty()) return 1.0;
  std::nth_element(dists.begin(), dists.begin() + static_cast<long>(dists.size() / 2), dists.end());
  double med = dists[dists.size() / 2];
  return med > 0.0 ? med : 1.0;
}

GpaeModel init_gpae(const TrainConfig& config, int input_dim, const MatrixXd& train_X) {
  config.validate();
  GpaeModel model;
  double enc_b = config.enc_bandwidth;
  if (config.enc_bandwidth_median) enc_b = median_pairwise_distance(train_X, config.seed);
  model.rff_enc = sample_rff_map(derive_seed(config.seed, "rff_enc"), config.enc_features, input_dim, enc_b);
  model.rff_dec = sample_rff_map(derive_seed(config.seed, "rff_dec"), config.dec_features, config.latent_dim,
                                 config.dec_bandwidth);
  CounterRng rng(derive_seed(config.seed, "weights"));
  model.enc_weights = rng.normal_matrix(config.enc_features, config.latent_dim);
  model.dec_weights = rng.normal_matrix(config.dec_features, input_dim);
  model.clf_weights = VectorXd::Zero(config.latent_dim);
  model.clf_bias = 0.0;
  return model;
}

namespace {

struct AdamState {
  MatrixXd m_enc, v_enc, m_dec, v_dec;
  VectorXd m_clf, v_clf;
  double m_bias = 0.0, v_bias = 0.0;
  int t = 0;

  explicit AdamState(const GpaeModel& model)
      : m_enc(MatrixXd::Zero(model.enc_weights.rows(), model.enc_weights.cols())),
        v_enc(m_enc),
        m_dec(MatrixXd::Zero(model.dec_weights.rows(), model.dec_weights.cols())),
        v_dec(m_dec),
        m_clf(VectorXd::Zero(model.clf_weights.size())),
        v_clf(m_clf) {}
};

void adam_update(double& param, double grad, double& m, double& v, double lr, int t) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  m = b1 * m + (1 - b1) * grad;
  v = b2 * v + (1 - b2) * grad * grad;
  double mhat = m / (1 - std::pow(b1, t));
  double vhat = v / (1 - std::pow(b2, t));
  param -= lr * mhat / (std::sqrt(vhat) + eps);
}

template <typename Mat>
void adam_update_mat(Mat& param, const Mat& grad, Mat& m, Mat& v, double lr, int t) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  m = b1 * m + (1 - b1) * grad;
  v = (b2 * v.array() + (1 - b2) * grad.array().square()).matrix();
  double c1 = 1.0 / (1 - std::pow(b1, t));
  double c2 = 1.0 / (1 - std::pow(b2, t));
  param.array() -= lr * (c1 * m.array()) / ((c2 * v.array()).sqrt() + eps);
}

}  // namespace

GpaeModel train_gpae(const Dataset& train, const Dataset& val, const TrainConfig& config, TrainLog* log) {
  config.validate();
  if (train.X.rows() == 0) throw Error("train: empty training split");
  if (train.X.cols() != val.X.cols()) throw Error("train: train/val dimension mismatch");

  GpaeModel model = init_gpae(config, static_cast<int>(train.X.cols()), train.X);
  const bool use_adam = config.optimizer == "adam";
  AdamState adam(model);

  const Eigen::Index n = train.X.rows();
  const Eigen::Index bs = std::min<Eigen::Index>(config.batch_size, n);
  const Eigen::Index batches = (n + bs - 1) / bs;

  double lr = config.lr_init;
  double best_val = std::numeric_limits<double>::infinity();
  GpaeModel best_model = model;
  int best_epoch = -1;
  int plateau = 0, stalled = 0;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    CounterRng shuffle_rng(derive_seed(config.seed, "epoch_shuffle", static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    Losses epoch_train;
    for (Eigen::Index b = 0; b < batches; ++b) {
      Eigen::Index lo = b * bs;
      Eigen::Index hi = std::min(lo + bs, n);
      MatrixXd bx(hi - lo, train.X.cols());
      VectorXd by(hi - lo);
      for (Eigen::Index i = lo; i < hi; ++i) {
        bx.row(i - lo) = train.X.row(order[static_cast<std::size_t>(i)]);
        by[i - lo] = train.y[order[static_cast<std::size_t>(i)]];
      }
      Gradients g = loss_gradients(model, bx, by, config.class_weight);
      epoch_train.recon += g.losses.recon / static_cast<double>(batches);
      epoch_train.cls += g.losses.cls / static_cast<double>(batches);
      epoch_train.total += g.losses.total / static_cast<double>(batches);
      if (use_adam) {
        ++adam.t;
        adam_update_mat(model.enc_weights, g.enc_weights, adam.m_enc, adam.v_enc, lr, adam.t);
        adam_update_mat(model.dec_weights, g.dec_weights, adam.m_dec, adam.v_dec, lr, adam.t);
        if (config.class_weight != 0.0) {
          adam_update_mat(model.clf_weights, g.clf_weights, adam.m_clf, adam.v_clf, lr, adam.t);
          adam_update(model.clf_bias, g.clf_bias, adam.m_bias, adam.v_bias, lr, adam.t);
        }
      } else {
        model.enc_weights -= lr * g.enc_weights;
        model.dec_weights -= lr * g.dec_weights;
        if (config.class_weight != 0.0) {
          model.clf_weights -= lr * g.clf_weights;
          model.clf_bias -= lr * g.clf_bias;
        }
      }
    }

    // the epoch's training loss is the mean over its batches; only the
    // validation split gets a full forward pass
    Losses val_loss = compute_loss(model, val.X, val.y, config.class_weight);
    if (!std::isfinite(epoch_train.total) || !std::isfinite(val_loss.total))
      throw Error("train: non-finite loss at epoch " + std::to_string(epoch));

    if (log) log->epochs.push_back({epoch, epoch_train.recon, epoch_train.cls, epoch_train.total, val_loss.total, lr});

    double bar = best_val - config.min_rel_improve * std::abs(best_val);
    if (val_loss.total < bar || best_epoch < 0) {
      best_val = val_loss.total;
      best_model = model;
      best_epoch = epoch;
      plateau = 0;
      stalled = 0;
    } else {
      ++plateau;
      ++stalled;
      if (stalled >= config.stop_patience) break;
      if (plateau >= config.plateau_patience) {
        lr *= config.lr_decay;
        plateau = 0;
      }
    }
  }

  if (log) {
    log->best_epoch = best_epoch;
    log->best_val = best_val;
  }
  return best_model;
}

}  // namespace gpae
