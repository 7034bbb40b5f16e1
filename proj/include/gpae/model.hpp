#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gpae/common.hpp"
#include "gpae/dataio.hpp"
#include "gpae/rff.hpp"

namespace gpae {

struct TrainConfig {
  int latent_dim = 4;
  int enc_features = 1000;  // S_e
  int dec_features = 1000;  // S_d
  int batch_size = 512;
  double lr_init = 1e-3;
  int plateau_patience = 10;   // epochs without improvement before lr decay
  int stop_patience = 20;      // epochs without improvement before stopping
  double lr_decay = 0.1;
  double class_weight = 1.0;   // alpha; 0 trains a plain autoencoder
  int max_epochs = 400;
  double min_rel_improve = 1e-4;  // "significant" validation decrease
  double enc_bandwidth = 1.0;     // input-space map; latent-space maps stay at 1
  bool enc_bandwidth_median = false;  // override enc_bandwidth with the median pairwise distance
  double dec_bandwidth = 1.0;
  std::string optimizer = "gd";  // "gd" | "adam"
  std::uint64_t seed = 0;

  void validate() const;
};

// Encoder, decoder and latent linear classifier. The RFF maps are frozen;
// the trainable state is enc_weights, dec_weights, clf_weights, clf_bias.
struct GpaeModel {
  RffMap rff_enc;         // D -> S_e
  MatrixXd enc_weights;   // S_e x d
  RffMap rff_dec;         // d -> S_d
  MatrixXd dec_weights;   // S_d x D
  VectorXd clf_weights;   // d
  double clf_bias = 0.0;

  int input_dim() const { return rff_enc.input_dim; }
  int latent_dim() const { return static_cast<int>(enc_weights.cols()); }

  VectorXd encode(const VectorXd& x) const;
  MatrixXd encode_rows(const MatrixXd& X) const;
  VectorXd decode(const VectorXd& latent) const;
  MatrixXd decode_rows(const MatrixXd& latents) const;
  double classify(const VectorXd& latent) const;  // sigmoid(latent . theta + bias)
  double logit(const VectorXd& latent) const { return latent.dot(clf_weights) + clf_bias; }
  int predict(const VectorXd& x) const { return classify(encode(x)) >= 0.5 ? 1 : 0; }

  // d(encode)/dx, d x D: clf and search both backprop through this.
  MatrixXd encoder_jacobian(const VectorXd& x) const;

  // d p / d x for p = classify(encode(x)).
  VectorXd probability_gradient(const VectorXd& x) const;
};

struct Losses {
  double recon = 0.0;
  double cls = 0.0;
  double total = 0.0;
};

struct Gradients {
  MatrixXd enc_weights;
  MatrixXd dec_weights;
  VectorXd clf_weights;
  double clf_bias = 0.0;
  Losses losses;  // of the same batch, from the forward pass
};

Losses compute_loss(const GpaeModel& model, const MatrixXd& X, const VectorXd& y, double class_weight);

// Analytic gradients of the total loss over the batch; matches central
// finite differences of compute_loss.
Gradients loss_gradients(const GpaeModel& model, const MatrixXd& X, const VectorXd& y, double class_weight);

struct EpochRecord {
  int epoch = 0;
  double train_recon = 0.0, train_class = 0.0, train_total = 0.0;
  double val_total = 0.0;
  double lr = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_val = 0.0;
};

GpaeModel init_gpae(const TrainConfig& config, int input_dim, const MatrixXd& train_X);

GpaeModel train_gpae(const Dataset& train, const Dataset& val, const TrainConfig& config, TrainLog* log = nullptr);

// Median pairwise distance over a deterministic subsample; the usual
// kernel-bandwidth heuristic.
double median_pairwise_distance(const MatrixXd& X, std::uint64_t seed, int max_points = 256);

}  // namespace gpae
