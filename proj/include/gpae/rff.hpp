#pragma once

#include <cstdint>

#include "gpae/common.hpp"

namespace gpae {

// Frozen random Fourier feature map. Inner products of mapped vectors
// approximate the RBF kernel with bandwidth `bandwidth`; the map itself is
// immutable once sampled and is fully determined by (seed, S, in_dim, b).
struct RffMap {
  int feature_count = 0;  // S
  int input_dim = 0;
  double bandwidth = 1.0;  // b > 0
  std::uint64_t seed = 0;
  MatrixXd frequencies;  // S x in_dim, i.i.d. standard normal
  VectorXd phases;       // S, i.i.d. uniform [0, 2*pi)

  // phi(x)_s = sqrt(2/S) * cos(z_s . x / b + c_s)
  VectorXd apply(const VectorXd& x) const;

  // Rows of X are inputs; returns n x S.
  MatrixXd apply_rows(const MatrixXd& X) const;

  // d phi / d x, S x in_dim; row s = -(sqrt(2/S)/b) * sin(z_s . x / b + c_s) * z_s
  MatrixXd jacobian(const VectorXd& x) const;

  double scale() const;  // sqrt(2/S)
};

RffMap sample_rff_map(std::uint64_t seed, int feature_count, int input_dim, double bandwidth);

}  // namespace gpae
