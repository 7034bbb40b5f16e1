#include "gpae/betaselect.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gpae/rng.hpp"

namespace gpae {

ProjectionBasis gram_schmidt_basis(const VectorXd& clf_weights, double clf_bias) {
  const Eigen::Index d = clf_weights.size();
  double norm = clf_weights.norm();
  if (norm == 0.0) throw Error("gram_schmidt_basis: zero classifier weights");

  ProjectionBasis out;
  out.basis = MatrixXd::Zero(d, d);
  out.basis.col(0) = clf_weights / norm;
  Eigen::Index have = 1;
  for (Eigen::Index i = 0; i < d && have < d; ++i) {
    VectorXd cand = VectorXd::Unit(d, i);
    for (Eigen::Index k = 0; k < have; ++k) cand -= out.basis.col(k).dot(cand) * out.basis.col(k);
    double r = cand.norm();
    if (r < 1e-8) continue;  // candidate (numerically) in the span already
    out.basis.col(have++) = cand / r;
  }
  if (have < d) throw Error("gram_schmidt_basis: failed to complete the basis");
  out.proj = out.basis.rightCols(d - 1);
  out.offset = -clf_bias / (norm * norm) * clf_weights;
  return out;
}

VectorXd project_to_boundary(const ProjectionBasis& basis, const VectorXd& latent) {
  return basis.proj.transpose() * (latent - basis.offset);
}

VectorXd embed_from_boundary(const ProjectionBasis& basis, const VectorXd& gamma) {
  return basis.proj * gamma + basis.offset;
}

double log_q_boundary(const VectorXd& gamma, const MatrixXd& cf_latents, const ProjectionBasis& basis,
                      double sigma_q) {
  if (cf_latents.rows() == 0) throw Error("log_q_boundary: no centers");
  if (!(sigma_q > 0.0)) throw Error("log_q_boundary: sigma_q must be positive");
  const Eigen::Index n = cf_latents.rows();
  const double m = static_cast<double>(gamma.size());
  double log_norm = -0.5 * m * std::log(2.0 * std::numbers::pi * sigma_q * sigma_q);
  VectorXd terms(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    VectorXd center = project_to_boundary(basis, cf_latents.row(i).transpose());
    terms[i] = log_norm - (gamma - center).squaredNorm() / (2.0 * sigma_q * sigma_q);
  }
  double mx = terms.maxCoeff();
  return mx + std::log((terms.array() - mx).exp().sum()) - std::log(static_cast<double>(n));
}

double log_p_boundary_unnorm(const VectorXd& gamma, const DensityModel& dm, const ProjectionBasis& basis) {
  return dm.log_density_unnorm(embed_from_boundary(basis, gamma));
}

namespace {

// Mixture evaluation against pre-projected centers.
double log_q_projected(const VectorXd& gamma, const MatrixXd& centers, double sigma_q) {
  const Eigen::Index n = centers.rows();
  const double m = static_cast<double>(gamma.size());
  double log_norm = -0.5 * m * std::log(2.0 * std::numbers::pi * sigma_q * sigma_q);
  VectorXd terms(n);
  for (Eigen::Index i = 0; i < n; ++i)
    terms[i] = log_norm - (gamma - centers.row(i).transpose()).squaredNorm() / (2.0 * sigma_q * sigma_q);
  double mx = terms.maxCoeff();
  return mx + std::log((terms.array() - mx).exp().sum()) - std::log(static_cast<double>(n));
}

}  // namespace

KlEstimate mc_kl_against(const MatrixXd& projected_centers, double sigma_q,
                         const std::function<double(const VectorXd&)>& log_p, int steps, int samples_per_step,
                         std::uint64_t seed, KlMode mode) {
  if (steps < 2 || samples_per_step < 1) throw Error("mc_kl: need steps >= 2 and samples_per_step >= 1");
  if (projected_centers.rows() == 0) throw Error("mc_kl: no centers");
  const Eigen::Index m = projected_centers.cols();
  CounterRng rng(seed);

  auto draw_q = [&]() -> VectorXd {
    Eigen::Index i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(projected_centers.rows())));
    VectorXd g = projected_centers.row(i).transpose();
    for (Eigen::Index k = 0; k < m; ++k) g[k] += sigma_q * rng.normal();
    return g;
  };

  VectorXd step_values(steps);
  for (int l = 0; l < steps; ++l) {
    if (mode == KlMode::PaperAveraged) {
      VectorXd avg = VectorXd::Zero(m);
      for (int j = 0; j < samples_per_step; ++j) avg += draw_q();
      avg /= static_cast<double>(samples_per_step);
      step_values[l] = log_q_projected(avg, projected_centers, sigma_q) - log_p(avg);
    } else {
      double acc = 0.0;
      for (int j = 0; j < samples_per_step; ++j) {
        VectorXd g = draw_q();
        acc += log_q_projected(g, projected_centers, sigma_q) - log_p(g);
      }
      step_values[l] = acc / samples_per_step;
    }
  }

  KlEstimate est;
  est.kl = step_values.mean();
  double ss = (step_values.array() - est.kl).square().sum() / (steps - 1);
  est.stderr_ = std::sqrt(ss / steps);
  return est;
}

KlEstimate mc_kl(const MatrixXd& cf_latents, const DensityModel& dm, const ProjectionBasis& basis, double sigma_q,
                 int steps, int samples_per_step, std::uint64_t seed, KlMode mode) {
  MatrixXd centers(cf_latents.rows(), cf_latents.cols() - 1);
  for (Eigen::Index i = 0; i < cf_latents.rows(); ++i)
    centers.row(i) = project_to_boundary(basis, cf_latents.row(i).transpose()).transpose();
  auto log_p = [&](const VectorXd& gamma) { return log_p_boundary_unnorm(gamma, dm, basis); };
  return mc_kl_against(centers, sigma_q, log_p, steps, samples_per_step, seed, mode);
}

namespace {

double median_pairwise(const MatrixXd& rows) {
  std::vector<double> d;
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    for (Eigen::Index j = i + 1; j < rows.rows(); ++j) d.push_back((rows.row(i) - rows.row(j)).norm());
  if (d.empty()) return 1.0;
  std::nth_element(d.begin(), d.begin() + static_cast<long>(d.size() / 2), d.end());
  return d[d.size() / 2];
}

}  // namespace

BetaSelection select_beta(const GpaeModel& model, const DensityModel& dm, const Dataset& queries_from,
                          const VectorXd& mask, const SearchConfig& base, const BetaSelectConfig& config) {
  if (config.grid.empty()) throw Error("select_beta: empty grid");

  // Rejected-class queries, in dataset order.
  std::vector<Eigen::Index> queries;
  for (Eigen::Index i = 0; i < queries_from.X.rows() && static_cast<int>(queries.size()) < config.queries_per_beta;
       ++i) {
    if (model.predict(queries_from.X.row(i).transpose()) == 0) queries.push_back(i);
  }
  if (queries.empty()) throw Error("select_beta: no rejected-class queries available");

  ProjectionBasis basis = gram_schmidt_basis(model.clf_weights, model.clf_bias);
  std::uint64_t kl_seed = derive_seed(config.seed, "mc_kl");

  // Each grid point scores its own empirical q: the mixture bandwidth is
  // 0.1 x the median pairwise distance of that point's projected centers.
  // The MC seed is shared across the grid so the argmin compares common
  // random numbers.
  BetaSelection out;
  bool any = false;
  for (std::size_t gi = 0; gi < config.grid.size(); ++gi) {
    BetaGridPoint point;
    point.beta = config.grid[gi];

    std::vector<VectorXd> latents;
    for (Eigen::Index qi : queries) {
      CfQuery query{queries_from.X.row(qi).transpose(), mask, base};
      query.config.beta = point.beta;
      CfResult res = search(model, dm, query);
      if (res.converged) latents.push_back(res.latent_cf);
    }
    point.n_converged = static_cast<int>(latents.size());

    if (point.n_converged >= config.min_converged) {
      MatrixXd centers(point.n_converged, model.latent_dim() - 1);
      MatrixXd full(point.n_converged, model.latent_dim());
      for (int i = 0; i < point.n_converged; ++i) {
        full.row(i) = latents[static_cast<std::size_t>(i)].transpose();
        centers.row(i) = project_to_boundary(basis, latents[static_cast<std::size_t>(i)]).transpose();
      }
      point.sigma_q = std::max(config.sigma_q_scale * median_pairwise(centers), 1e-6);
      KlEstimate est = mc_kl(full, dm, basis, point.sigma_q, config.mc_steps, config.mc_samples_per_step, kl_seed,
                             config.mode);
      point.kl = est.kl;
      point.stderr_ = est.stderr_;
      point.usable = true;
      any = true;
    }
    out.curve.push_back(point);
  }
  if (!any) throw Error("select_beta: no grid point had enough converged searches");

  std::size_t best = 0;
  bool found = false;
  for (std::size_t i = 0; i < out.curve.size(); ++i) {
    if (!out.curve[i].usable) continue;
    if (!found || out.curve[i].kl < out.curve[best].kl) {
      best = i;
      found = true;
    }
  }
  out.beta_star = out.curve[best].beta;
  out.sigma_q = out.curve[best].sigma_q;
  return out;
}

}  // namespace gpae
