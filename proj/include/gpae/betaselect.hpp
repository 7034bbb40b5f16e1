#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "gpae/cfsearch.hpp"
#include "gpae/common.hpp"
#include "gpae/density.hpp"
#include "gpae/model.hpp"

namespace gpae {

// Orthonormal latent basis whose first column is the boundary normal.
// offset is a point on the affine boundary {theta . v + theta_0 = 0}.
struct ProjectionBasis {
  MatrixXd basis;   // d x d, column 1 parallel to theta
  MatrixXd proj;    // A: d x (d-1), columns 2..d of basis
  VectorXd offset;  // -theta_0 theta / |theta|^2
};

ProjectionBasis gram_schmidt_basis(const VectorXd& clf_weights, double clf_bias);

// gamma = A^T (lambda - offset)
VectorXd project_to_boundary(const ProjectionBasis& basis, const VectorXd& latent);

VectorXd embed_from_boundary(const ProjectionBasis& basis, const VectorXd& gamma);

// log of the isotropic Gaussian mixture with one component per projected
// counterfactual latent; log-sum-exp throughout.
double log_q_boundary(const VectorXd& gamma, const MatrixXd& cf_latents, const ProjectionBasis& basis,
                      double sigma_q);

// Unnormalized boundary restriction of the density model.
double log_p_boundary_unnorm(const VectorXd& gamma, const DensityModel& dm, const ProjectionBasis& basis);

enum class KlMode {
  Standard,       // mean of ln(q/p) over all L*N draws
  PaperAveraged,  // ln(q/p) evaluated at the mean of each step's N draws
};

struct KlEstimate {
  double kl = 0.0;
  double stderr_ = 0.0;
};

// Monte-Carlo KL between the mixture q (given by projected centers and
// sigma_q) and an arbitrary log-density handle. p may be unnormalized: the
// estimate then carries a constant offset that cancels in comparisons.
KlEstimate mc_kl_against(const MatrixXd& projected_centers, double sigma_q,
                         const std::function<double(const VectorXd&)>& log_p, int steps, int samples_per_step,
                         std::uint64_t seed, KlMode mode);

KlEstimate mc_kl(const MatrixXd& cf_latents, const DensityModel& dm, const ProjectionBasis& basis, double sigma_q,
                 int steps, int samples_per_step, std::uint64_t seed, KlMode mode);

struct BetaSelectConfig {
  std::vector<double> grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  int mc_steps = 200;           // L
  int mc_samples_per_step = 100;  // N
  int queries_per_beta = 200;   // N_q
  int min_converged = 10;
  double sigma_q_scale = 0.1;   // times median pairwise distance of projected centers
  KlMode mode = KlMode::Standard;
  std::uint64_t seed = 0;
};

struct BetaGridPoint {
  double beta = 0.0;
  double kl = 0.0;
  double stderr_ = 0.0;
  int n_converged = 0;
  double sigma_q = 0.0;
  bool usable = false;  // at least min_converged searches converged
};

struct BetaSelection {
  std::vector<BetaGridPoint> curve;
  double beta_star = 0.0;
  double sigma_q = 0.0;  // bandwidth at beta_star
};

// Runs boundary searches (no overshoot) for each grid beta on rejected-class
// queries and picks the KL argmin, ties toward the earlier grid entry.
BetaSelection select_beta(const GpaeModel& model, const DensityModel& dm, const Dataset& queries_from,
                          const VectorXd& mask, const SearchConfig& base, const BetaSelectConfig& config);

}  // namespace gpae
