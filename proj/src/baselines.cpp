#include "gpae/baselines.hpp"

#include <cmath>

namespace gpae {

LogRegModel logreg_train(const Dataset& train, const LogRegConfig& config) {
  const Eigen::Index n = train.X.rows();
  if (n == 0) throw Error("logreg_train: empty dataset");
  LogRegModel model;
  model.weights = VectorXd::Zero(train.X.cols());
  model.bias = 0.0;

  for (int step = 0; step < config.max_steps; ++step) {
    VectorXd p(n);
    for (Eigen::Index i = 0; i < n; ++i) p[i] = sigmoid(train.X.row(i).dot(model.weights) + model.bias);
    VectorXd err = p - train.y;
    VectorXd gw = train.X.transpose() * err / static_cast<double>(n);
    double gb = err.mean();
    if (!gw.allFinite() || !std::isfinite(gb)) throw Error("logreg_train: divergence at step " + std::to_string(step));
    double gnorm = std::sqrt(gw.squaredNorm() + gb * gb);
    if (gnorm <= config.grad_tol) break;
    model.weights -= config.lr * gw;
    model.bias -= config.lr * gb;
  }
  return model;
}

VectorXd logreg_cf(const LogRegModel& model, const VectorXd& x, double step) {
  double ww = model.weights.squaredNorm();
  if (ww == 0.0) throw Error("logreg_cf: zero weight vector");
  double margin = model.weights.dot(x) + model.bias;
  return x - step * (margin / ww) * model.weights;
}

CfResult wachter_cf(const GpaeModel& model, const VectorXd& x, const VectorXd& mask, int target_label, double step,
                    int max_iters, double eps_m) {
  CfResult result;
  result.x = x;
  result.x_cf = x;
  result.target_label = target_label;
  const double sign = target_label == 1 ? 1.0 : -1.0;

  for (int iter = 0; iter <= max_iters; ++iter) {
    double p = model.classify(model.encode(result.x_cf));
    if (sign * (p - 0.5) >= eps_m) {
      result.converged = true;
      result.label_flipped = true;
      break;
    }
    if (iter == max_iters) break;
    VectorXd g = model.probability_gradient(result.x_cf);
    if (!g.allFinite()) {
      result.diagnostic = "non-finite gradient at iteration " + std::to_string(iter);
      break;
    }
    for (Eigen::Index j = 0; j < g.size(); ++j)
      if (mask[j] == 0.0) g[j] = 0.0;
    result.x_cf += step * sign * g;
    result.iterations = iter + 1;
  }

  result.delta = result.x_cf - x;
  for (Eigen::Index j = 0; j < result.delta.size(); ++j)
    if (mask[j] == 0.0) result.delta[j] = 0.0;
  result.x_cf = x + result.delta;
  result.latent_cf = model.encode(result.x_cf);
  result.boundary_residual = model.logit(result.latent_cf);
  int hard = model.classify(result.latent_cf) >= 0.5 ? 1 : 0;
  result.label_flipped = hard == result.target_label;
  return result;
}

}  // namespace gpae
