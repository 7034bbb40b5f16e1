#pragma once

#include <string>

#include "gpae/common.hpp"
#include "gpae/dataio.hpp"
#include "gpae/density.hpp"
#include "gpae/model.hpp"

namespace gpae {

struct SearchConfig {
  double beta = 0.4;
  double step_delta = 0.05;
  double step_eta = 0.05;
  int max_iters = 2000;
  double tol_step = 1e-6;
  double tol_boundary = 1e-4;
  double overshoot_margin = 0.05;  // eps_m on the class probability
  int overshoot_max_steps = 100;

  void validate() const;
};

struct CfQuery {
  VectorXd x;     // standardized query
  VectorXd mask;  // 1 = mutable
  SearchConfig config;
};

struct CfResult {
  VectorXd x;          // query
  VectorXd x_cf;       // x + delta
  VectorXd delta;
  VectorXd latent_cf;
  double eta = 0.0;
  int iterations = 0;
  double boundary_residual = 0.0;   // theta . latent_cf + theta_0
  double log_density_at_cf = 0.0;
  bool converged = false;
  int target_label = 1;
  bool label_flipped = false;       // hard label equals target
  std::string diagnostic;
};

// dL/d delta of the Lagrangian
//   L = 0.5 |delta|^2 - beta log p~(f_e(x+delta)) + eta (theta . f_e(x+delta) + theta_0)
// = delta - beta J^T grad_log_density + eta J^T theta, J = encoder Jacobian at x+delta.
VectorXd grad_delta(const GpaeModel& model, const DensityModel& dm, const VectorXd& x, const VectorXd& delta,
                    double beta, double eta);

// dL/d eta = theta . f_e(x+delta) + theta_0, the boundary residual.
double grad_eta(const GpaeModel& model, const VectorXd& x, const VectorXd& delta);

// Lagrangian value, exposed for gradient checks.
double lagrangian(const GpaeModel& model, const DensityModel& dm, const VectorXd& x, const VectorXd& delta,
                  double beta, double eta);

// Primal-dual iteration from delta = 0, eta = 0. Masked coordinates of
// delta stay exactly 0 at every iterate.
CfResult search(const GpaeModel& model, const DensityModel& dm, const CfQuery& query);

// Pushes a converged boundary result into the target class until the
// classifier probability clears 0.5 by eps_m, along numerically the masked
// constraint gradient. Leaves the result untouched when already at margin.
CfResult overshoot(const GpaeModel& model, const CfResult& result, const VectorXd& mask, double eps_m,
                   int max_steps = 100);

// Rounds every mutable one-hot group of x_cf to its argmax level, then
// re-checks the label (re-running overshoot once if rounding broke it).
CfResult snap_onehot(const GpaeModel& model, const CfResult& result, const FeatureSchema& schema,
                     const EncodedLayout& layout, const VectorXd& mask, double eps_m);

}  // namespace gpae
