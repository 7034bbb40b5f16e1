#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gpae/cfsearch.hpp"
#include "gpae/common.hpp"
#include "gpae/dataio.hpp"
#include "gpae/model.hpp"

namespace gpae {

struct EvalConfig {
  int k_dispo = 5;
  double im_eps = 1e-8;
  std::vector<int> continuous_idx;  // encoded columns entering the L2 metric

  void validate() const;
};

using Classifier = std::function<int(const VectorXd&)>;
using Reconstructor = std::function<VectorXd(const VectorXd&)>;

// Mean squared Euclidean distance over the continuous columns.
double l2_mean(const MatrixXd& X, const MatrixXd& Xcf, const std::vector<int>& continuous_idx);
std::vector<double> l2_values(const MatrixXd& X, const MatrixXd& Xcf, const std::vector<int>& continuous_idx);

// sum_{i<j} d(cf_i, cf_j) / (N (N-1)); each unordered pair counted once.
double diversity(const MatrixXd& Xcf);

// (1/N) sum d(cf_i, cf_nbr(i)) / (1 + d(x_i, x_nbr(i))), where nbr(i) is the
// nearest point with the same predicted label. cf_of_row maps a row index of
// X to that row's counterfactual.
double instability(const MatrixXd& X, const std::vector<int>& y_pred,
                   const std::function<VectorXd(Eigen::Index)>& cf_of_row);
std::vector<double> instability_values(const MatrixXd& X, const std::vector<int>& y_pred,
                                       const std::function<VectorXd(Eigen::Index)>& cf_of_row);

// 1-NN accuracy anchored at (x, f(x)) and (x_cf, counter-label), evaluated on
// the k nearest same-label and k nearest counter-label pool points. Distance
// ties go to the original-class reference.
double discriminative_power(const VectorXd& x, const VectorXd& x_cf, const MatrixXd& X_pool, const Classifier& f,
                            int k);

// IM1 = mean |cf - AE_t(cf)|^2 / (|cf - AE_o(cf)|^2 + eps)
// IM2 = mean |AE_t(cf) - AE(cf)|^2 / (|cf|_1 + eps)
std::pair<double, double> im_scores(const MatrixXd& Xcf, const Reconstructor& ae_original,
                                    const Reconstructor& ae_target, const Reconstructor& ae_full, double eps);

// Fraction classified as the target label.
double validity(const MatrixXd& Xcf, const Classifier& f, int target_label);

struct MetricEntry {
  std::string name;
  double mean = 0.0;
  double stderr_ = 0.0;
  int n = 0;
};

struct MetricsReport {
  std::vector<MetricEntry> entries;
  int n_queries = 0;
  int n_converged = 0;

  const MetricEntry& at(const std::string& name) const;
};

struct ImAutoencoders {
  Reconstructor original, target, full;
};

// Three reconstruction-only models sharing the GPAE architecture: original
// class, target class, whole training split. Seeds derive from `seed`.
ImAutoencoders train_im_autoencoders(const Dataset& train, int target_label, TrainConfig config, std::uint64_t seed);

struct EvalInputs {
  const Dataset* eval = nullptr;        // queries and pools live here
  std::vector<Eigen::Index> query_idx;  // rows of eval that were queried
  std::vector<CfResult> results;        // aligned with query_idx
  std::function<VectorXd(Eigen::Index)> cf_of_row;  // generator over eval rows
  Classifier clf;                       // the classifier being explained
  ImAutoencoders im;
  int target_label = 1;
};

// All seven metrics with per-query standard errors. Non-converged results
// count against validity and are dropped from the distance-type metrics.
MetricsReport evaluate_all(const EvalInputs& inputs, const EvalConfig& config);

void write_report_csv(const MetricsReport& report, const std::string& path);

}  // namespace gpae
