#pragma once

#include <cstdint>

#include "gpae/cfsearch.hpp"
#include "gpae/common.hpp"
#include "gpae/dataio.hpp"
#include "gpae/model.hpp"

namespace gpae {

struct LogRegModel {
  VectorXd weights;
  double bias = 0.0;

  double probability(const VectorXd& x) const { return sigmoid(weights.dot(x) + bias); }
  int predict(const VectorXd& x) const { return probability(x) >= 0.5 ? 1 : 0; }
};

struct LogRegConfig {
  double lr = 0.5;
  int max_steps = 10000;
  double grad_tol = 1e-6;
  std::uint64_t seed = 0;
};

LogRegModel logreg_train(const Dataset& train, const LogRegConfig& config);

// Projection along the weight vector: step 1 lands on the boundary,
// step > 1 crosses it.
VectorXd logreg_cf(const LogRegModel& model, const VectorXd& x, double step);

// Gradient ascent on the target-class probability of the GPAE classifier,
// mask applied to every update; stops once the hard label flips with margin.
CfResult wachter_cf(const GpaeModel& model, const VectorXd& x, const VectorXd& mask, int target_label, double step,
                    int max_iters, double eps_m);

}  // namespace gpae
