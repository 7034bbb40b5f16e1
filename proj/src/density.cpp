#include "gpae/density.hpp"

#include <cmath>
#include <numbers>

namespace gpae {

namespace {
constexpr double kVarFloor = 1e-8;

double log_normal_diag(const VectorXd& x, const VectorXd& mean, const VectorXd& var) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double d = x[i] - mean[i];
    acc += -0.5 * (d * d / var[i] + std::log(2.0 * std::numbers::pi * var[i]));
  }
  return acc;
}

}  // namespace

std::pair<VectorXd, VectorXd> fit_envelope(const MatrixXd& latents) {
  if (latents.rows() < 2) throw Error("fit_envelope: need at least 2 latents");
  const double n = static_cast<double>(latents.rows());
  VectorXd mean = latents.colwise().mean();
  VectorXd var(latents.cols());
  for (Eigen::Index j = 0; j < latents.cols(); ++j) {
    double ss = (latents.col(j).array() - mean[j]).square().sum();
    var[j] = std::max(ss / (n - 1.0), kVarFloor);
  }
  return {mean, var};
}

double DensityModel::log_density_unnorm(const VectorXd& latent) const {
  return weights.dot(rff.apply(latent)) + log_normal_diag(latent, mean, var);
}

VectorXd DensityModel::grad_log_density(const VectorXd& latent) const {
  VectorXd g = rff.jacobian(latent).transpose() * weights;
  g.array() += (mean - latent).array() / var.array();
  return g;
}

VectorXd DensityModel::sample_envelope(CounterRng& rng) const {
  VectorXd s(mean.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = mean[i] + std::sqrt(var[i]) * rng.normal();
  return s;
}

double DensityModel::estimate_log_z(std::uint64_t draw_seed) const {
  if (normalizer_samples < 1) throw Error("estimate_log_z: K must be >= 1");
  CounterRng rng(draw_seed);
  VectorXd scores(normalizer_samples);
  for (int k = 0; k < normalizer_samples; ++k) scores[k] = weights.dot(rff.apply(sample_envelope(rng)));
  double m = scores.maxCoeff();
  double acc = (scores.array() - m).exp().sum();
  return m + std::log(acc / normalizer_samples);
}

VectorXd map_gradient(const DensityModel& dm, const MatrixXd& data_latents, const MatrixXd& norm_samples) {
  if (data_latents.rows() == 0 || norm_samples.rows() == 0) throw Error("map_gradient: empty input");
  const double n = static_cast<double>(data_latents.rows());
  VectorXd data_mean = dm.rff.apply_rows(data_latents).colwise().mean();

  MatrixXd phi_k = dm.rff.apply_rows(norm_samples);  // K x S
  VectorXd scores = phi_k * dm.weights;
  double m = scores.maxCoeff();
  VectorXd q = (scores.array() - m).exp();
  q /= q.sum();

  return -dm.weights / n + data_mean - phi_k.transpose() * q;
}

double map_objective(const DensityModel& dm, const MatrixXd& data_latents, const MatrixXd& norm_samples) {
  const double n = static_cast<double>(data_latents.rows());
  double fit = (dm.rff.apply_rows(data_latents) * dm.weights).sum();
  VectorXd scores = dm.rff.apply_rows(norm_samples) * dm.weights;
  double m = scores.maxCoeff();
  double log_z = m + std::log((scores.array() - m).exp().mean());
  return -0.5 * dm.weights.squaredNorm() + fit - n * log_z;
}

DensityModel fit_density(const MatrixXd& latents, const DensityConfig& config) {
  DensityModel dm;
  dm.rff = sample_rff_map(derive_seed(config.seed, "rff_density"), config.feature_count,
                          static_cast<int>(latents.cols()), config.bandwidth);
  auto [mean, var] = fit_envelope(latents);
  dm.mean = mean;
  dm.var = var;
  dm.normalizer_samples = config.normalizer_samples;
  dm.seed = config.seed;
  dm.weights = VectorXd::Zero(config.feature_count);

  // The data-side mean feature vector never changes; only the normalizer
  // side is re-sampled per step.
  VectorXd data_mean = dm.rff.apply_rows(latents).colwise().mean();
  const double n = static_cast<double>(latents.rows());

  for (int step = 0; step < config.max_steps; ++step) {
    CounterRng rng(derive_seed(config.seed, "density_norm", static_cast<std::uint64_t>(step)));
    MatrixXd samples(config.normalizer_samples, latents.cols());
    for (int k = 0; k < config.normalizer_samples; ++k) samples.row(k) = dm.sample_envelope(rng).transpose();

    MatrixXd phi_k = dm.rff.apply_rows(samples);
    VectorXd scores = phi_k * dm.weights;
    double m = scores.maxCoeff();
    VectorXd q = (scores.array() - m).exp();
    q /= q.sum();
    VectorXd grad = -dm.weights / n + data_mean - phi_k.transpose() * q;

    if (!grad.allFinite()) throw Error("fit_density: non-finite gradient at step " + std::to_string(step));
    if (grad.norm() <= config.grad_tol) break;
    dm.weights += config.step_size * grad;
  }
  if (!dm.weights.allFinite()) throw Error("fit_density: non-finite weights");
  return dm;
}

}  // namespace gpae
