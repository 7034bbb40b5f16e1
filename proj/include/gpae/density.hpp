#pragma once

#include <cstdint>
#include <utility>

#include "gpae/common.hpp"
#include "gpae/rff.hpp"
#include "gpae/rng.hpp"

namespace gpae {

struct DensityConfig {
  int feature_count = 512;        // S_rho
  double bandwidth = 1.0;         // latent-space map
  int normalizer_samples = 1024;  // K
  double step_size = 0.5;
  int max_steps = 5000;
  double grad_tol = 1e-5;
  std::uint64_t seed = 0;
};

// Latent density p(lambda) proportional to exp(w . phi(lambda)) * N(lambda | mu, Sigma),
// with a diagonal Gaussian envelope fitted to the training latents.
struct DensityModel {
  RffMap rff;        // d -> S_rho
  VectorXd weights;  // w
  VectorXd mean;     // mu
  VectorXd var;      // Sigma diagonal, floored at 1e-8
  int normalizer_samples = 1024;  // K
  std::uint64_t seed = 0;

  int latent_dim() const { return rff.input_dim; }

  // w . phi(lambda) + log N(lambda | mu, Sigma); the normalizer is dropped.
  double log_density_unnorm(const VectorXd& latent) const;

  // Gradient of log_density_unnorm: J_phi(lambda)^T w + Sigma^{-1}(mu - lambda).
  VectorXd grad_log_density(const VectorXd& latent) const;

  // Draws K envelope samples and returns log (1/K) sum exp(w . phi(lambda_k)),
  // an MC estimate of the log normalizer.
  double estimate_log_z(std::uint64_t draw_seed) const;

  VectorXd sample_envelope(CounterRng& rng) const;
};

// Empirical mean and unbiased diagonal variance, floored at 1e-8.
std::pair<VectorXd, VectorXd> fit_envelope(const MatrixXd& latents);

// (1/N) dL/dw of the MAP objective:
//   -w/N + mean_i phi(lambda_i) - sum_k softmax_k(w.phi) phi(lambda_k)
VectorXd map_gradient(const DensityModel& dm, const MatrixXd& data_latents, const MatrixXd& norm_samples);

// MAP objective L(w) = -0.5 w.w + sum_i w.phi(lambda_i) - N log (1/K) sum_k exp(w.phi(lambda_k)).
double map_objective(const DensityModel& dm, const MatrixXd& data_latents, const MatrixXd& norm_samples);

// Gradient ascent on the MAP objective with fresh envelope samples per step.
DensityModel fit_density(const MatrixXd& latents, const DensityConfig& config);

}  // namespace gpae
