#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gpae/metrics.hpp"
#include "gpae/rng.hpp"

using namespace gpae;

TEST_CASE("l2 over continuous columns only") {
  MatrixXd X(1, 3), Xcf(1, 3);
  X << 0.0, 0.0, 7.0;
  Xcf << 3.0, 4.0, -7.0;
  std::vector<int> cont = {0, 1};
  CHECK(l2_mean(X, Xcf, cont) == 25.0);  // squared norm, categorical column ignored
  CHECK(l2_mean(X, X, cont) == 0.0);

  CounterRng rng(1);
  MatrixXd A = rng.normal_matrix(6, 3), B = rng.normal_matrix(6, 3);
  double brute = 0.0;
  for (int i = 0; i < 6; ++i)
    for (int j : cont) brute += (A(i, j) - B(i, j)) * (A(i, j) - B(i, j));
  brute /= 6.0;
  CHECK(std::abs(l2_mean(A, B, cont) - brute) <= 1e-12);
  CHECK_THROWS_AS(l2_mean(MatrixXd(0, 3), MatrixXd(0, 3), cont), Error);
}

TEST_CASE("diversity formula and invariances") {
  MatrixXd same(4, 2);
  same << 1, 2, 1, 2, 1, 2, 1, 2;
  CHECK(diversity(same) == 0.0);

  MatrixXd pair(2, 2);
  pair << 0, 0, 2, 0;  // distance 2, divisor N(N-1) = 2
  CHECK(diversity(pair) == doctest::Approx(1.0).epsilon(1e-15));

  CounterRng rng(2);
  MatrixXd three = rng.normal_matrix(3, 4);
  double brute = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) brute += (three.row(i) - three.row(j)).norm();
  brute /= 3.0 * 2.0;
  CHECK(std::abs(diversity(three) - brute) <= 1e-12);

  MatrixXd permuted(3, 4);
  permuted << three.row(2), three.row(0), three.row(1);
  CHECK(diversity(permuted) == doctest::Approx(diversity(three)).epsilon(1e-14));

  CHECK_THROWS_AS(diversity(MatrixXd(1, 2)), Error);
}

TEST_CASE("instability") {
  // constant generator: numerator always 0
  MatrixXd X(4, 2);
  X << 0, 0, 1, 0, 5, 5, 6, 5;
  std::vector<int> y = {0, 0, 1, 1};
  VectorXd fixed(2);
  fixed << 9.0, 9.0;
  CHECK(instability(X, y, [&](Eigen::Index) { return fixed; }) == 0.0);

  // duplicated query points: x_hat = x and identical counterfactuals
  MatrixXd dup(2, 2);
  dup << 1, 1, 1, 1;
  std::vector<int> ydup = {0, 0};
  CHECK(instability(dup, ydup, [&](Eigen::Index i) { return dup.row(i).transpose() * 2.0; }) == 0.0);

  // 5-point scripted case against a manual computation
  MatrixXd H(5, 1);
  H << 0.0, 1.0, 3.0, 10.0, 10.5;
  std::vector<int> yh = {0, 0, 0, 1, 1};
  auto gen = [&](Eigen::Index i) {
    VectorXd v(1);
    v << 2.0 * H(i, 0) + 1.0;
    return v;
  };
  // nearest same-label: 0->1 (d=1), 1->0 (d=1), 2->1 (d=2), 3->4 (d=0.5), 4->3 (d=0.5)
  double manual = ((2.0) / (1 + 1) + (2.0) / (1 + 1) + (4.0) / (1 + 2) + (1.0) / (1 + 0.5) + (1.0) / (1 + 0.5)) / 5.0;
  CHECK(std::abs(instability(H, yh, gen) - manual) <= 1e-12);

  std::vector<int> lonely = {0, 1, 1, 1, 1};
  CHECK_THROWS_AS(instability(H, lonely, gen), Error);
}

TEST_CASE("discriminative power hand cases") {
  Classifier f = [](const VectorXd& v) { return v[0] > 5.0 ? 1 : 0; };

  VectorXd x(2), x_cf(2);
  x << 0.0, 0.0;
  x_cf << 10.0, 10.0;
  MatrixXd pool(2, 2);
  pool << 0.0, 1.0,   // label 0, near x
          10.0, 9.0;  // label 1, near x_cf
  CHECK(discriminative_power(x, x_cf, pool, f, 1) == 1.0);

  // degenerate counterfactual: ties go to the original reference
  CHECK(discriminative_power(x, x, pool, f, 1) == 0.5);

  CHECK_THROWS_AS(discriminative_power(x, x_cf, pool, f, 2), Error);

  // 8-point pool (4 per label) vs a brute-force 1-NN
  CounterRng rng(3);
  MatrixXd big(8, 2);
  for (int i = 0; i < 8; ++i) {
    big(i, 0) = (i % 2 == 0 ? 2.0 : 8.0) + rng.uniform(-1.5, 1.5);
    big(i, 1) = rng.normal();
  }
  VectorXd q(2), qcf(2);
  q << 2.0, 0.0;
  qcf << 8.0, 0.0;
  int k = 3;
  double got = discriminative_power(q, qcf, big, f, k);

  // oracle: pick k nearest of each label, classify by nearer reference
  std::vector<std::pair<double, int>> same, diff;
  for (int i = 0; i < 8; ++i) {
    double d = (big.row(i).transpose() - q).norm();
    (f(big.row(i).transpose()) == f(q) ? same : diff).emplace_back(d, i);
  }
  std::sort(same.begin(), same.end());
  std::sort(diff.begin(), diff.end());
  int correct = 0;
  auto check = [&](int row, int want) {
    double d0 = (big.row(row).transpose() - q).norm();
    double d1 = (big.row(row).transpose() - qcf).norm();
    int got_label = d1 < d0 ? 1 - f(q) : f(q);
    if (got_label == want) ++correct;
  };
  for (int i = 0; i < k; ++i) check(same[static_cast<std::size_t>(i)].second, f(q));
  for (int i = 0; i < k; ++i) check(diff[static_cast<std::size_t>(i)].second, 1 - f(q));
  CHECK(got == doctest::Approx(static_cast<double>(correct) / (2.0 * k)).epsilon(1e-12));
}

TEST_CASE("im scores") {
  Reconstructor identity = [](const VectorXd& v) { return v; };
  Reconstructor zero = [](const VectorXd& v) { return VectorXd::Zero(v.size()).eval(); };
  Reconstructor half = [](const VectorXd& v) { return (0.5 * v).eval(); };

  MatrixXd Xcf(1, 2);
  Xcf << 1.0, 0.0;
  const double eps = 1e-8;

  // AE_t reconstructs exactly: IM1 = 0
  auto [im1a, im2a] = im_scores(Xcf, zero, identity, half, eps);
  CHECK(im1a == 0.0);
  // AE_t == AE: IM2 = 0
  auto [im1b, im2b] = im_scores(Xcf, zero, identity, identity, eps);
  CHECK(im2b == 0.0);

  // scripted case: AE_t -> (1,0), AE_o -> (0,0), AE -> (0.5,0)
  auto [im1c, im2c] = im_scores(Xcf, zero, identity, half, eps);
  CHECK(im1c == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(im2c == doctest::Approx(0.25 / (1.0 + eps)).epsilon(1e-12));

  // order invariance
  CounterRng rng(4);
  MatrixXd many = rng.normal_matrix(6, 2);
  MatrixXd reversed(6, 2);
  for (int i = 0; i < 6; ++i) reversed.row(i) = many.row(5 - i);
  auto [p1, p2] = im_scores(many, zero, half, identity, eps);
  auto [r1, r2] = im_scores(reversed, zero, half, identity, eps);
  CHECK(p1 == doctest::Approx(r1).epsilon(1e-14));
  CHECK(p2 == doctest::Approx(r2).epsilon(1e-14));
}

TEST_CASE("validity") {
  Classifier f = [](const VectorXd& v) { return v[0] > 0.0 ? 1 : 0; };
  MatrixXd pos(3, 1), neg(3, 1), mixed(4, 1);
  pos << 1, 2, 3;
  neg << -1, -2, -3;
  mixed << 1, -1, 2, -2;
  CHECK(validity(pos, f, 1) == 1.0);
  CHECK(validity(neg, f, 1) == 0.0);
  CHECK(validity(mixed, f, 1) == 0.5);
}

TEST_CASE("evaluate_all equals scripted brute-force values") {
  // A fully scripted evaluation: linear classifier, hand counterfactuals,
  // scripted reconstructors. Every report entry is recomputed directly.
  Dataset eval;
  eval.schema.columns = {{"x1", ColumnKind::Continuous, {}, false}, {"x2", ColumnKind::Continuous, {}, false}};
  eval.schema.label_column = "label";
  eval.schema.positive_label = "pos";
  eval.layout = make_layout(eval.schema);
  eval.scaler = {{0.0, 0.0}, {1.0, 1.0}};
  const int n = 14;
  eval.X.resize(n, 2);
  eval.y.resize(n);
  CounterRng rng(9);
  for (int i = 0; i < n; ++i) {
    int label = i % 2;
    eval.X(i, 0) = (label == 1 ? 2.0 : -2.0) + 0.5 * rng.normal();
    eval.X(i, 1) = rng.normal();
    eval.y[i] = label;
  }

  Classifier clf = [](const VectorXd& v) { return v[0] > 0.0 ? 1 : 0; };
  auto cf_rule = [](const VectorXd& v) {
    VectorXd out = v;
    out[0] = -v[0] + 0.3;  // reflect across the boundary with a nudge
    return out;
  };

  EvalInputs in;
  in.eval = &eval;
  in.clf = clf;
  in.target_label = 1;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (clf(eval.X.row(i).transpose()) != 0) continue;
    CfResult r;
    r.x = eval.X.row(i).transpose();
    r.x_cf = cf_rule(r.x);
    r.delta = r.x_cf - r.x;
    r.converged = true;
    r.target_label = 1;
    r.label_flipped = clf(r.x_cf) == 1;
    in.query_idx.push_back(i);
    in.results.push_back(r);
  }
  REQUIRE(in.results.size() >= 5);
  in.cf_of_row = [&](Eigen::Index row) { return cf_rule(eval.X.row(row).transpose()); };
  in.im.original = [](const VectorXd& v) { return VectorXd::Zero(v.size()).eval(); };
  in.im.target = [](const VectorXd& v) { return (0.5 * v).eval(); };
  in.im.full = [](const VectorXd& v) { return v; };

  EvalConfig cfg;
  cfg.k_dispo = 2;
  cfg.continuous_idx = {0, 1};
  MetricsReport rep = evaluate_all(in, cfg);

  const std::size_t m = in.results.size();
  // brute-force l2
  double l2 = 0.0;
  for (std::size_t i = 0; i < m; ++i) l2 += (in.results[i].x_cf - in.results[i].x).squaredNorm();
  l2 /= static_cast<double>(m);
  CHECK(std::abs(rep.at("l2").mean - l2) <= 1e-10);

  // brute-force diversity
  double div = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) div += (in.results[i].x_cf - in.results[j].x_cf).norm();
  div /= static_cast<double>(m) * static_cast<double>(m - 1);
  CHECK(std::abs(rep.at("diversity").mean - div) <= 1e-10);

  // brute-force instability over the query rows with the full-split pool
  double instb = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    Eigen::Index qi = in.query_idx[i];
    double best = 1e300;
    Eigen::Index nbr = -1;
    for (Eigen::Index j = 0; j < eval.X.rows(); ++j) {
      if (j == qi || clf(eval.X.row(j).transpose()) != clf(eval.X.row(qi).transpose())) continue;
      double dist = (eval.X.row(j) - eval.X.row(qi)).norm();
      if (dist < best) {
        best = dist;
        nbr = j;
      }
    }
    instb += (in.results[i].x_cf - cf_rule(eval.X.row(nbr).transpose())).norm() / (1.0 + best);
  }
  instb /= static_cast<double>(m);
  CHECK(std::abs(rep.at("instability").mean - instb) <= 1e-10);

  // brute-force dispo
  double dispo = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    Eigen::Index qi = in.query_idx[i];
    MatrixXd pool(eval.X.rows() - 1, 2);
    Eigen::Index at = 0;
    for (Eigen::Index j = 0; j < eval.X.rows(); ++j)
      if (j != qi) pool.row(at++) = eval.X.row(j);
    dispo += discriminative_power(eval.X.row(qi).transpose(), in.results[i].x_cf, pool, clf, cfg.k_dispo);
  }
  dispo /= static_cast<double>(m);
  CHECK(std::abs(rep.at("dispo").mean - dispo) <= 1e-10);

  // brute-force IM
  MatrixXd Xcf(m, 2);
  for (std::size_t i = 0; i < m; ++i) Xcf.row(static_cast<Eigen::Index>(i)) = in.results[i].x_cf.transpose();
  auto [im1, im2] = im_scores(Xcf, in.im.original, in.im.target, in.im.full, cfg.im_eps);
  CHECK(std::abs(rep.at("im1").mean - im1) <= 1e-10);
  CHECK(std::abs(rep.at("im2").mean - im2) <= 1e-10);

  // validity: every scripted counterfactual flips
  CHECK(rep.at("validity").mean == 1.0);
  CHECK(rep.n_queries == static_cast<int>(m));
  CHECK(rep.n_converged == static_cast<int>(m));

  // determinism
  MetricsReport rep2 = evaluate_all(in, cfg);
  for (std::size_t i = 0; i < rep.entries.size(); ++i) {
    CHECK(rep.entries[i].mean == rep2.entries[i].mean);
    CHECK(rep.entries[i].stderr_ == rep2.entries[i].stderr_);
  }

  // empty result set: hard error
  EvalInputs empty = in;
  empty.query_idx.clear();
  empty.results.clear();
  CHECK_THROWS_AS(evaluate_all(empty, cfg), Error);

  // non-converged rows count against validity only
  EvalInputs partial = in;
  partial.results[0].converged = false;
  MetricsReport rep3 = evaluate_all(partial, cfg);
  CHECK(rep3.n_converged == static_cast<int>(m) - 1);
  CHECK(rep3.at("validity").mean == doctest::Approx(static_cast<double>(m - 1) / m).epsilon(1e-12));
  CHECK(rep3.at("l2").n == static_cast<int>(m) - 1);
}
