#include "gpae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "gpae/rng.hpp"

namespace gpae {

void EvalConfig::validate() const {
  if (k_dispo < 1) throw Error("eval config: k_dispo must be >= 1");
  if (!(im_eps > 0.0)) throw Error("eval config: im_eps must be > 0");
}

namespace {

std::pair<double, double> mean_stderr(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return {mean, sd / std::sqrt(static_cast<double>(values.size()))};
}

}  // namespace

std::vector<double> l2_values(const MatrixXd& X, const MatrixXd& Xcf, const std::vector<int>& continuous_idx) {
  if (X.rows() != Xcf.rows()) throw Error("l2: row count mismatch");
  if (X.rows() == 0) throw Error("l2: empty input");
  std::vector<double> out(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double acc = 0.0;
    for (int j : continuous_idx) {
      double d = X(i, j) - Xcf(i, j);
      acc += d * d;
    }
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

double l2_mean(const MatrixXd& X, const MatrixXd& Xcf, const std::vector<int>& continuous_idx) {
  return mean_stderr(l2_values(X, Xcf, continuous_idx)).first;
}

double diversity(const MatrixXd& Xcf) {
  const Eigen::Index n = Xcf.rows();
  if (n < 2) throw Error("diversity: need at least 2 counterfactuals");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) acc += (Xcf.row(i) - Xcf.row(j)).norm();
  return acc / (static_cast<double>(n) * static_cast<double>(n - 1));
}

std::vector<double> instability_values(const MatrixXd& X, const std::vector<int>& y_pred,
                                       const std::function<VectorXd(Eigen::Index)>& cf_of_row) {
  const Eigen::Index n = X.rows();
  if (static_cast<Eigen::Index>(y_pred.size()) != n) throw Error("instability: label size mismatch");
  std::vector<double> out;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index nbr = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i || y_pred[static_cast<std::size_t>(j)] != y_pred[static_cast<std::size_t>(i)]) continue;
      double d = (X.row(i) - X.row(j)).norm();
      if (d < best) {
        best = d;
        nbr = j;
      }
    }
    if (nbr < 0) throw Error("instability: a predicted class has fewer than 2 members");
    double num = (cf_of_row(i) - cf_of_row(nbr)).norm();
    out.push_back(num / (1.0 + best));
  }
  return out;
}

double instability(const MatrixXd& X, const std::vector<int>& y_pred,
                   const std::function<VectorXd(Eigen::Index)>& cf_of_row) {
  return mean_stderr(instability_values(X, y_pred, cf_of_row)).first;
}

double discriminative_power(const VectorXd& x, const VectorXd& x_cf, const MatrixXd& X_pool, const Classifier& f,
                            int k) {
  const int label = f(x);
  const int counter = 1 - label;

  // (distance to x, row) per pool label
  std::vector<std::pair<double, Eigen::Index>> same, diff;
  for (Eigen::Index i = 0; i < X_pool.rows(); ++i) {
    double d = (X_pool.row(i).transpose() - x).norm();
    if (f(X_pool.row(i).transpose()) == label)
      same.emplace_back(d, i);
    else
      diff.emplace_back(d, i);
  }
  if (static_cast<int>(same.size()) < k || static_cast<int>(diff.size()) < k)
    throw Error("discriminative_power: pool has fewer than k points of a predicted label");
  std::sort(same.begin(), same.end());
  std::sort(diff.begin(), diff.end());

  int correct = 0;
  auto judge = [&](Eigen::Index row, int true_label) {
    double d_orig = (X_pool.row(row).transpose() - x).norm();
    double d_cf = (X_pool.row(row).transpose() - x_cf).norm();
    int assigned = d_cf < d_orig ? counter : label;  // ties keep the original reference
    if (assigned == true_label) ++correct;
  };
  for (int i = 0; i < k; ++i) judge(same[static_cast<std::size_t>(i)].second, label);
  for (int i = 0; i < k; ++i) judge(diff[static_cast<std::size_t>(i)].second, counter);
  return static_cast<double>(correct) / (2.0 * k);
}

std::pair<double, double> im_scores(const MatrixXd& Xcf, const Reconstructor& ae_original,
                                    const Reconstructor& ae_target, const Reconstructor& ae_full, double eps) {
  if (Xcf.rows() == 0) throw Error("im_scores: empty input");
  double im1 = 0.0, im2 = 0.0;
  for (Eigen::Index i = 0; i < Xcf.rows(); ++i) {
    VectorXd cf = Xcf.row(i).transpose();
    VectorXd rec_t = ae_target(cf);
    im1 += (cf - rec_t).squaredNorm() / ((cf - ae_original(cf)).squaredNorm() + eps);
    im2 += (rec_t - ae_full(cf)).squaredNorm() / (cf.lpNorm<1>() + eps);
  }
  double n = static_cast<double>(Xcf.rows());
  return {im1 / n, im2 / n};
}

double validity(const MatrixXd& Xcf, const Classifier& f, int target_label) {
  if (Xcf.rows() == 0) throw Error("validity: empty input");
  int hits = 0;
  for (Eigen::Index i = 0; i < Xcf.rows(); ++i)
    if (f(Xcf.row(i).transpose()) == target_label) ++hits;
  return static_cast<double>(hits) / static_cast<double>(Xcf.rows());
}

const MetricEntry& MetricsReport::at(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return e;
  throw Error("metrics report: no entry '" + name + "'");
}

ImAutoencoders train_im_autoencoders(const Dataset& train, int target_label, TrainConfig config,
                                     std::uint64_t seed) {
  config.class_weight = 0.0;

  auto subset = [&](int label) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < train.X.rows(); ++i)
      if (label < 0 || static_cast<int>(train.y[i]) == label) rows.push_back(i);
    Dataset d;
    d.schema = train.schema;
    d.scaler = train.scaler;
    d.layout = train.layout;
    d.X.resize(static_cast<Eigen::Index>(rows.size()), train.X.cols());
    d.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      d.X.row(static_cast<Eigen::Index>(i)) = train.X.row(rows[i]);
      d.y[static_cast<Eigen::Index>(i)] = train.y[rows[i]];
    }
    return d;
  };

  auto fit = [&](int label, const char* tag) {
    Dataset d = subset(label);
    if (d.X.rows() < 2) throw Error("im autoencoder: class with fewer than 2 training rows");
    TrainConfig cfg = config;
    cfg.seed = derive_seed(seed, tag);
    Eigen::Index n_val = std::max<Eigen::Index>(1, d.X.rows() / 10);
    Dataset tr = d, va = d;
    tr.X = d.X.topRows(d.X.rows() - n_val);
    tr.y = d.y.topRows(d.y.rows() - n_val);
    va.X = d.X.bottomRows(n_val);
    va.y = d.y.bottomRows(n_val);
    GpaeModel ae = train_gpae(tr, va, cfg);
    return Reconstructor([ae](const VectorXd& v) { return ae.decode(ae.encode(v)); });
  };

  ImAutoencoders im;
  im.original = fit(1 - target_label, "im_ae_original");
  im.target = fit(target_label, "im_ae_target");
  im.full = fit(-1, "im_ae_full");
  return im;
}

MetricsReport evaluate_all(const EvalInputs& inputs, const EvalConfig& config) {
  config.validate();
  if (!inputs.eval) throw Error("evaluate_all: missing evaluation dataset");
  if (inputs.results.empty()) throw Error("evaluate_all: no counterfactual results");
  if (inputs.results.size() != inputs.query_idx.size()) throw Error("evaluate_all: query/result size mismatch");
  if (!inputs.clf || !inputs.im.original || !inputs.im.target || !inputs.im.full)
    throw Error("evaluate_all: classifier and IM autoencoders required");

  MetricsReport report;
  report.n_queries = static_cast<int>(inputs.results.size());

  // Converged rows feed the distance-type metrics.
  std::vector<std::size_t> conv;
  for (std::size_t i = 0; i < inputs.results.size(); ++i)
    if (inputs.results[i].converged) conv.push_back(i);
  report.n_converged = static_cast<int>(conv.size());
  if (conv.empty()) throw Error("evaluate_all: no converged counterfactuals");

  MatrixXd Xq(conv.size(), inputs.eval->X.cols()), Xcf(conv.size(), inputs.eval->X.cols());
  for (std::size_t i = 0; i < conv.size(); ++i) {
    Xq.row(static_cast<Eigen::Index>(i)) = inputs.eval->X.row(inputs.query_idx[conv[i]]);
    Xcf.row(static_cast<Eigen::Index>(i)) = inputs.results[conv[i]].x_cf.transpose();
  }

  const Classifier& clf = inputs.clf;

  // L2
  {
    auto [m, s] = mean_stderr(l2_values(Xq, Xcf, config.continuous_idx));
    report.entries.push_back({"l2", m, s, static_cast<int>(conv.size())});
  }
  // Diversity: mean/stderr over unordered pairs of d_ij / 2, which matches
  // the 1/(N(N-1)) normalization of the summed form.
  {
    std::vector<double> pairs;
    for (Eigen::Index i = 0; i < Xcf.rows(); ++i)
      for (Eigen::Index j = i + 1; j < Xcf.rows(); ++j) pairs.push_back((Xcf.row(i) - Xcf.row(j)).norm() / 2.0);
    auto [m, s] = mean_stderr(pairs);
    report.entries.push_back({"diversity", m, s, static_cast<int>(pairs.size())});
  }
  // Instability over the converged query rows, neighbors drawn from the
  // whole evaluation split.
  {
    std::vector<int> pred(static_cast<std::size_t>(inputs.eval->X.rows()));
    for (Eigen::Index i = 0; i < inputs.eval->X.rows(); ++i)
      pred[static_cast<std::size_t>(i)] = clf(inputs.eval->X.row(i).transpose());
    std::vector<double> values;
    for (std::size_t i : conv) {
      Eigen::Index qi = inputs.query_idx[i];
      Eigen::Index nbr = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < inputs.eval->X.rows(); ++j) {
        if (j == qi || pred[static_cast<std::size_t>(j)] != pred[static_cast<std::size_t>(qi)]) continue;
        double d = (inputs.eval->X.row(j) - inputs.eval->X.row(qi)).norm();
        if (d < best) {
          best = d;
          nbr = j;
        }
      }
      if (nbr < 0) throw Error("evaluate_all: no same-label neighbor for instability");
      double num = (inputs.results[i].x_cf - inputs.cf_of_row(nbr)).norm();
      values.push_back(num / (1.0 + best));
    }
    auto [m, s] = mean_stderr(values);
    report.entries.push_back({"instability", m, s, static_cast<int>(values.size())});
  }
  // Discriminative power, pool = evaluation split minus the query row.
  {
    std::vector<double> values;
    for (std::size_t i : conv) {
      Eigen::Index qi = inputs.query_idx[i];
      MatrixXd pool(inputs.eval->X.rows() - 1, inputs.eval->X.cols());
      Eigen::Index at = 0;
      for (Eigen::Index j = 0; j < inputs.eval->X.rows(); ++j)
        if (j != qi) pool.row(at++) = inputs.eval->X.row(j);
      values.push_back(discriminative_power(inputs.eval->X.row(qi).transpose(), inputs.results[i].x_cf, pool, clf,
                                            config.k_dispo));
    }
    auto [m, s] = mean_stderr(values);
    report.entries.push_back({"dispo", m, s, static_cast<int>(values.size())});
  }
  // IM1/IM2 against the pre-trained class autoencoders.
  {
    std::vector<double> v1, v2;
    for (Eigen::Index i = 0; i < Xcf.rows(); ++i) {
      VectorXd cf = Xcf.row(i).transpose();
      VectorXd rec_t = inputs.im.target(cf);
      v1.push_back((cf - rec_t).squaredNorm() / ((cf - inputs.im.original(cf)).squaredNorm() + config.im_eps));
      v2.push_back((rec_t - inputs.im.full(cf)).squaredNorm() / (cf.lpNorm<1>() + config.im_eps));
    }
    auto [m1, s1] = mean_stderr(v1);
    auto [m2, s2] = mean_stderr(v2);
    report.entries.push_back({"im1", m1, s1, static_cast<int>(v1.size())});
    report.entries.push_back({"im2", m2, s2, static_cast<int>(v2.size())});
  }
  // Validity over all queries; non-converged rows are automatic failures.
  {
    std::vector<double> values;
    for (std::size_t i = 0; i < inputs.results.size(); ++i) {
      const CfResult& r = inputs.results[i];
      bool ok = r.converged && clf(r.x_cf) == inputs.target_label;
      values.push_back(ok ? 1.0 : 0.0);
    }
    auto [m, s] = mean_stderr(values);
    report.entries.push_back({"validity", m, s, static_cast<int>(values.size())});
  }
  return report;
}

void write_report_csv(const MetricsReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("write_report_csv: cannot open '" + path + "'");
  out << "metric,mean,stderr,n\n";
  for (const auto& e : report.entries)
    out << e.name << "," << format_double(e.mean) << "," << format_double(e.stderr_) << "," << e.n << "\n";
  out << "n_queries," << report.n_queries << ",,\n";
  out << "n_converged," << report.n_converged << ",,\n";
}

}  // namespace gpae
