#include "gpae/cfsearch.hpp"

#include <cmath>

namespace gpae {

void SearchConfig::validate() const {
  if (beta < 0.0) throw Error("search config: beta must be >= 0");
  if (!(step_delta > 0.0) || !(step_eta > 0.0)) throw Error("search config: steps must be positive");
  if (!(tol_step > 0.0) || !(tol_boundary > 0.0)) throw Error("search config: tolerances must be positive");
  if (max_iters < 1) throw Error("search config: max_iters must be >= 1");
  if (overshoot_margin < 0.0 || overshoot_margin >= 0.5) throw Error("search config: margin must be in [0, 0.5)");
}

VectorXd grad_delta(const GpaeModel& model, const DensityModel& dm, const VectorXd& x, const VectorXd& delta,
                    double beta, double eta) {
  VectorXd xc = x + delta;
  MatrixXd jac = model.encoder_jacobian(xc);  // d x D
  VectorXd g = delta + eta * (jac.transpose() * model.clf_weights);
  if (beta != 0.0) g -= beta * (jac.transpose() * dm.grad_log_density(model.encode(xc)));
  return g;
}

double grad_eta(const GpaeModel& model, const VectorXd& x, const VectorXd& delta) {
  return model.logit(model.encode(x + delta));
}

double lagrangian(const GpaeModel& model, const DensityModel& dm, const VectorXd& x, const VectorXd& delta,
                  double beta, double eta) {
  VectorXd latent = model.encode(x + delta);
  return 0.5 * delta.squaredNorm() - beta * dm.log_density_unnorm(latent) + eta * model.logit(latent);
}

namespace {

void apply_mask(VectorXd& v, const VectorXd& mask) {
  for (Eigen::Index j = 0; j < v.size(); ++j)
    if (mask[j] == 0.0) v[j] = 0.0;
}

}  // namespace

CfResult search(const GpaeModel& model, const DensityModel& dm, const CfQuery& query) {
  query.config.validate();
  if (query.x.size() != model.input_dim()) throw Error("search: query dimension mismatch");
  if (query.mask.size() != query.x.size()) throw Error("search: mask dimension mismatch");
  const SearchConfig& cfg = query.config;

  CfResult result;
  result.x = query.x;
  result.target_label = model.predict(query.x) == 1 ? 0 : 1;

  VectorXd delta = VectorXd::Zero(query.x.size());
  double eta = 0.0;
  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    VectorXd g = grad_delta(model, dm, query.x, delta, cfg.beta, eta);
    VectorXd step = cfg.step_delta * g;
    apply_mask(step, query.mask);
    VectorXd next = delta - step;
    apply_mask(next, query.mask);

    if (!next.allFinite()) {
      result.diagnostic = "non-finite iterate at iteration " + std::to_string(iter);
      result.iterations = iter;
      break;
    }

    double residual = grad_eta(model, query.x, next);
    eta += cfg.step_eta * residual;
    double move = (next - delta).norm();
    delta = next;
    result.iterations = iter;
    if (move <= cfg.tol_step && std::abs(residual) <= cfg.tol_boundary) {
      result.converged = true;
      break;
    }
  }

  result.delta = delta;
  result.x_cf = query.x + delta;
  result.eta = eta;
  result.latent_cf = model.encode(result.x_cf);
  result.boundary_residual = model.logit(result.latent_cf);
  result.log_density_at_cf = dm.log_density_unnorm(result.latent_cf);
  int hard = model.classify(result.latent_cf) >= 0.5 ? 1 : 0;
  result.label_flipped = hard == result.target_label;
  return result;
}

CfResult overshoot(const GpaeModel& model, const CfResult& result, const VectorXd& mask, double eps_m,
                   int max_steps) {
  if (!result.converged) return result;
  CfResult out = result;
  const double sign = out.target_label == 1 ? 1.0 : -1.0;
  if (eps_m == 0.0) {
    // the boundary point is accepted as-is
    int hard = model.classify(model.encode(out.x_cf)) >= 0.5 ? 1 : 0;
    out.label_flipped = hard == out.target_label;
    return out;
  }
  const double target_logit = sign * std::log((0.5 + eps_m) / (0.5 - eps_m));

  bool at_margin = false;
  for (int step = 0; step <= max_steps; ++step) {
    VectorXd latent = model.encode(out.x_cf);
    double p = model.classify(latent);
    if (sign * (p - 0.5) >= eps_m) {
      at_margin = true;
      break;
    }
    if (step == max_steps) break;

    // Newton step on the linearized logit: move just far enough along the
    // masked constraint gradient to reach the target logit.
    VectorXd g = model.encoder_jacobian(out.x_cf).transpose() * model.clf_weights;
    for (Eigen::Index j = 0; j < g.size(); ++j)
      if (mask[j] == 0.0) g[j] = 0.0;
    double gg = g.squaredNorm();
    if (gg < 1e-18) break;  // nothing mutable moves the logit
    double need = target_logit - model.logit(latent);
    out.x_cf += (need / gg) * g;
  }

  if (!at_margin) {
    // Could not reach the margin; hand back the boundary point untouched,
    // flagged by label_flipped.
    out = result;
    int hard = model.classify(model.encode(out.x_cf)) >= 0.5 ? 1 : 0;
    out.label_flipped = hard == out.target_label;
    return out;
  }

  out.delta = out.x_cf - out.x;
  for (Eigen::Index j = 0; j < out.delta.size(); ++j)
    if (mask[j] == 0.0) out.delta[j] = 0.0;
  out.x_cf = out.x + out.delta;
  out.latent_cf = model.encode(out.x_cf);
  out.boundary_residual = model.logit(out.latent_cf);
  int hard = model.classify(out.latent_cf) >= 0.5 ? 1 : 0;
  out.label_flipped = hard == out.target_label;
  return out;
}

CfResult snap_onehot(const GpaeModel& model, const CfResult& result, const FeatureSchema& schema,
                     const EncodedLayout& layout, const VectorXd& mask, double eps_m) {
  CfResult out = result;
  bool snapped = false;
  for (std::size_t j = 0; j < schema.columns.size(); ++j) {
    if (schema.columns[j].kind != ColumnKind::Categorical) continue;
    auto [b, e] = layout.col_range[j];
    if (mask[b] == 0.0) continue;  // immutable groups were never perturbed
    int best = 0;
    for (int k = 1; k < e - b; ++k)
      if (out.x_cf[b + k] > out.x_cf[b + best]) best = k;
    for (int k = 0; k < e - b; ++k) {
      double v = (k == best) ? 1.0 : 0.0;
      if (out.x_cf[b + k] != v) snapped = true;
      out.x_cf[b + k] = v;
    }
  }
  if (!snapped) return out;

  out.delta = out.x_cf - out.x;
  for (Eigen::Index j = 0; j < out.delta.size(); ++j)
    if (mask[j] == 0.0) out.delta[j] = 0.0;
  out.x_cf = out.x + out.delta;
  out.latent_cf = model.encode(out.x_cf);
  out.boundary_residual = model.logit(out.latent_cf);
  int hard = model.classify(out.latent_cf) >= 0.5 ? 1 : 0;
  bool was_flipped = out.label_flipped;
  out.label_flipped = hard == out.target_label;
  if (was_flipped && !out.label_flipped) {
    // Rounding pushed the point back across the boundary; one more
    // continuous overshoot pass restores the margin.
    VectorXd cont_mask = mask;
    for (std::size_t j = 0; j < schema.columns.size(); ++j) {
      if (schema.columns[j].kind != ColumnKind::Categorical) continue;
      auto [b, e] = layout.col_range[j];
      for (int k = b; k < e; ++k) cont_mask[k] = 0.0;  // keep snapped groups fixed
    }
    out = overshoot(model, out, cont_mask, eps_m);
  }
  return out;
}

}  // namespace gpae
