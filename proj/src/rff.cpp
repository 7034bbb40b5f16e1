#include "gpae/rff.hpp"

#include <cmath>
#include <numbers>

#include "gpae/rng.hpp"

namespace gpae {

double RffMap::scale() const { return std::sqrt(2.0 / feature_count); }

RffMap sample_rff_map(std::uint64_t seed, int feature_count, int input_dim, double bandwidth) {
  if (feature_count < 1 || input_dim < 1) throw Error("rff: feature_count and input_dim must be >= 1");
  if (!(bandwidth > 0.0)) throw Error("rff: bandwidth must be > 0");
  RffMap map;
  map.feature_count = feature_count;
  map.input_dim = input_dim;
  map.bandwidth = bandwidth;
  map.seed = seed;
  CounterRng rng(seed);
  map.frequencies = rng.normal_matrix(feature_count, input_dim);
  map.phases = VectorXd(feature_count);
  for (int s = 0; s < feature_count; ++s) map.phases[s] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  return map;
}

VectorXd RffMap::apply(const VectorXd& x) const {
  if (x.size() != input_dim) throw Error("rff: input dimension mismatch");
  VectorXd arg = frequencies * (x / bandwidth) + phases;
  return scale() * arg.array().cos().matrix();
}

MatrixXd RffMap::apply_rows(const MatrixXd& X) const {
  if (X.cols() != input_dim) throw Error("rff: input dimension mismatch");
  MatrixXd arg = (X / bandwidth) * frequencies.transpose();
  arg.rowwise() += phases.transpose();
  return scale() * arg.array().cos().matrix();
}

MatrixXd RffMap::jacobian(const VectorXd& x) const {
  if (x.size() != input_dim) throw Error("rff: input dimension mismatch");
  VectorXd arg = frequencies * (x / bandwidth) + phases;
  VectorXd factor = (-scale() / bandwidth) * arg.array().sin().matrix();
  return factor.asDiagonal() * frequencies;
}

}  // namespace gpae
