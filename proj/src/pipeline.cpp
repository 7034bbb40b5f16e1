#include "gpae/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <unordered_map>

#include "gpae/baselines.hpp"
#include "gpae/rng.hpp"
#include "gpae/serialize.hpp"

namespace gpae {

namespace {

double json_bandwidth(const nlohmann::json& v, bool& median_flag) {
  if (v.is_string() && v.get<std::string>() == "median") {
    median_flag = true;
    return 1.0;
  }
  median_flag = false;
  return v.get<double>();
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.enc_features = j.value("enc_features", c.enc_features);
  c.dec_features = j.value("dec_features", c.dec_features);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr_init = j.value("lr_init", c.lr_init);
  c.plateau_patience = j.value("plateau_patience", c.plateau_patience);
  c.stop_patience = j.value("stop_patience", c.stop_patience);
  c.lr_decay = j.value("lr_decay", c.lr_decay);
  c.class_weight = j.value("class_weight", c.class_weight);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.min_rel_improve = j.value("min_rel_improve", c.min_rel_improve);
  c.optimizer = j.value("optimizer", c.optimizer);
  if (j.contains("enc_bandwidth")) c.enc_bandwidth = json_bandwidth(j.at("enc_bandwidth"), c.enc_bandwidth_median);
  c.dec_bandwidth = j.value("dec_bandwidth", c.dec_bandwidth);
  return c;
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  c.csv_path = j.at("dataset").at("csv_path").get<std::string>();
  c.schema_path = j.at("dataset").at("schema_path").get<std::string>();
  if (j.contains("model")) c.model = train_config_from_json(j.at("model"));
  if (j.contains("im")) {
    c.im_train = train_config_from_json(j.at("im"));
  } else {
    c.im_train = c.model;
  }
  if (j.contains("density")) {
    const auto& d = j.at("density");
    c.density.feature_count = d.value("feature_count", c.density.feature_count);
    c.density.bandwidth = d.value("bandwidth", c.density.bandwidth);
    c.density.normalizer_samples = d.value("normalizer_samples", c.density.normalizer_samples);
    c.density.step_size = d.value("step_size", c.density.step_size);
    c.density.max_steps = d.value("max_steps", c.density.max_steps);
    c.density.grad_tol = d.value("grad_tol", c.density.grad_tol);
    c.density_fit_on = d.value("fit_on", c.density_fit_on);
    if (c.density_fit_on != "target" && c.density_fit_on != "all")
      throw Error("config: density.fit_on must be 'target' or 'all'");
  }
  if (j.contains("search")) {
    const auto& s = j.at("search");
    c.search.step_delta = s.value("step_delta", c.search.step_delta);
    c.search.step_eta = s.value("step_eta", c.search.step_eta);
    c.search.max_iters = s.value("max_iters", c.search.max_iters);
    c.search.tol_step = s.value("tol_step", c.search.tol_step);
    c.search.tol_boundary = s.value("tol_boundary", c.search.tol_boundary);
    c.search.overshoot_margin = s.value("overshoot_margin", c.search.overshoot_margin);
    c.wachter_step = s.value("wachter_step", c.wachter_step);
  }
  if (j.contains("beta")) {
    const auto& b = j.at("beta");
    std::string mode = b.value("mode", "select");
    if (mode == "fixed") {
      c.beta_fixed = true;
      c.beta_value = b.at("value").get<double>();
    } else if (mode != "select") {
      throw Error("config: beta.mode must be 'select' or 'fixed'");
    }
    if (b.contains("grid")) c.beta.grid = b.at("grid").get<std::vector<double>>();
    c.beta.mc_steps = b.value("mc_steps", c.beta.mc_steps);
    c.beta.mc_samples_per_step = b.value("mc_samples_per_step", c.beta.mc_samples_per_step);
    c.beta.queries_per_beta = b.value("queries_per_beta", c.beta.queries_per_beta);
    c.beta.min_converged = b.value("min_converged", c.beta.min_converged);
    c.beta.sigma_q_scale = b.value("sigma_q_scale", c.beta.sigma_q_scale);
    std::string km = b.value("kl_mode", "standard");
    if (km == "standard")
      c.beta.mode = KlMode::Standard;
    else if (km == "paper")
      c.beta.mode = KlMode::PaperAveraged;
    else
      throw Error("config: beta.kl_mode must be 'standard' or 'paper'");
  }
  if (j.contains("methods")) c.methods = j.at("methods").get<std::vector<std::string>>();
  if (c.methods.empty()) throw Error("config: methods must be nonempty");
  for (const auto& m : c.methods)
    if (m != "gpae" && m != "logreg" && m != "wachter") throw Error("config: unknown method '" + m + "'");
  c.mask_enabled = j.value("mask", false);
  c.eval_queries = j.value("eval_queries", c.eval_queries);
  c.output_dir = j.at("output_dir").get<std::string>();
  c.master_seed = j.value("master_seed", 0ull);
  return c;
}

namespace {

struct StageRecord {
  std::string name;
  std::string status;
  double seconds = 0.0;
};

struct ClassStats {
  double accuracy = 0.0, precision = 0.0, recall = 0.0, auc = 0.0;
};

ClassStats classification_stats(const std::vector<int>& pred, const std::vector<double>& score, const VectorXd& y) {
  ClassStats s;
  int tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    bool truth = y[static_cast<Eigen::Index>(i)] > 0.5;
    if (pred[i] == 1 && truth) ++tp;
    if (pred[i] == 1 && !truth) ++fp;
    if (pred[i] == 0 && !truth) ++tn;
    if (pred[i] == 0 && truth) ++fn;
  }
  double n = static_cast<double>(pred.size());
  s.accuracy = (tp + tn) / n;
  s.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  s.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;

  // Mann-Whitney AUC with midrank ties
  std::vector<std::pair<double, int>> ranked;
  for (std::size_t i = 0; i < score.size(); ++i)
    ranked.emplace_back(score[i], static_cast<int>(y[static_cast<Eigen::Index>(i)]));
  std::sort(ranked.begin(), ranked.end());
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0, n_neg = 0;
  std::size_t i = 0;
  while (i < ranked.size()) {
    std::size_t j = i;
    while (j < ranked.size() && ranked[j].first == ranked[i].first) ++j;
    double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k)
      if (ranked[k].second == 1) pos_rank_sum += midrank;
    i = j;
  }
  for (const auto& r : ranked) (r.second == 1 ? n_pos : n_neg) += 1;
  if (n_pos > 0 && n_neg > 0)
    s.auc = (pos_rank_sum - static_cast<double>(n_pos) * (n_pos + 1) / 2.0) /
            (static_cast<double>(n_pos) * static_cast<double>(n_neg));
  return s;
}

std::vector<std::string> encoded_column_names(const FeatureSchema& schema, const EncodedLayout& layout) {
  std::vector<std::string> names(static_cast<std::size_t>(layout.dim));
  for (std::size_t j = 0; j < schema.columns.size(); ++j) {
    auto [b, e] = layout.col_range[j];
    if (schema.columns[j].kind == ColumnKind::Continuous) {
      names[static_cast<std::size_t>(b)] = schema.columns[j].name;
    } else {
      for (int k = b; k < e; ++k)
        names[static_cast<std::size_t>(k)] =
            schema.columns[j].name + "=" + schema.columns[j].levels[static_cast<std::size_t>(k - b)];
    }
  }
  return names;
}

void write_cf_csv(const std::string& path, const Dataset& eval, const std::vector<Eigen::Index>& query_idx,
                  const std::vector<CfResult>& results) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "'");
  std::vector<std::string> enc_names = encoded_column_names(eval.schema, eval.layout);
  out << "query_id,converged,iterations,boundary_residual";
  for (const auto& n : enc_names) out << ",delta_" << n;
  for (const auto& col : eval.schema.columns) out << ",cf_" << col.name;
  out << "\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const CfResult& r = results[i];
    out << query_idx[i] << "," << (r.converged ? 1 : 0) << "," << r.iterations << ","
        << format_double(r.boundary_residual);
    for (Eigen::Index j = 0; j < r.delta.size(); ++j) out << "," << format_double(r.delta[j]);
    std::vector<double> raw = inverse_transform(r.x_cf, eval.schema, eval.scaler, eval.layout);
    for (const auto& cell : render_raw_row(raw, eval.schema)) out << "," << cell;
    out << "\n";
  }
}

struct MethodRun {
  std::vector<Eigen::Index> query_idx;
  std::vector<CfResult> results;
  Classifier clf;
  std::function<VectorXd(Eigen::Index)> cf_of_row;
};

}  // namespace

int run_pipeline(const std::string& config_path, std::ostream& log) {
  nlohmann::json config_json;
  RunConfig config;
  try {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw Error("cannot open config '" + config_path + "'");
    config_json = nlohmann::json::parse(in);
    config = RunConfig::from_json(config_json);
  } catch (const std::exception& e) {
    log << "config error: " << e.what() << "\n";
    return 1;
  }

  std::filesystem::create_directories(config.output_dir);
  auto out_path = [&](const std::string& name) { return config.output_dir + "/" + name; };

  nlohmann::json manifest;
  manifest["config_hash"] = fnv1a(config_json.dump());
  manifest["master_seed"] = config.master_seed;
  manifest["stage_seeds"] = {{"train", derive_seed(config.master_seed, "train")},
                             {"density", derive_seed(config.master_seed, "density")},
                             {"beta", derive_seed(config.master_seed, "beta")},
                             {"logreg", derive_seed(config.master_seed, "logreg")},
                             {"im", derive_seed(config.master_seed, "im")}};
  manifest["tool_version"] = "1.0.0";
  std::vector<StageRecord> stages;
  nlohmann::json artifacts = nlohmann::json::array();

  auto flush_manifest = [&]() {
    nlohmann::json js = nlohmann::json::array();
    for (const auto& s : stages) js.push_back({{"name", s.name}, {"status", s.status}, {"seconds", s.seconds}});
    manifest["stages"] = js;
    manifest["artifacts"] = artifacts;
    std::ofstream out(out_path("manifest.json"), std::ios::binary);
    out << manifest.dump(2) << "\n";
  };

  SplitResult splits;
  GpaeModel model;
  DensityModel dm;
  LogRegModel logreg;
  VectorXd mask;
  double beta_star = config.beta_value;
  std::map<std::string, MethodRun> runs;
  ImAutoencoders im;

  auto stage = [&](const std::string& name, auto&& fn) -> bool {
    auto t0 = std::chrono::steady_clock::now();
    try {
      fn();
      double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      stages.push_back({name, "ok", secs});
      log << "[stage] " << name << " ok (" << secs << "s)\n";
      return true;
    } catch (const std::exception& e) {
      double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      stages.push_back({name, std::string("FAILED: ") + e.what(), secs});
      log << "[stage] " << name << " FAILED: " << e.what() << "\n";
      flush_manifest();
      return false;
    }
  };

  // -------- data --------
  if (!stage("data", [&]() {
        std::ifstream sf(config.schema_path, std::ios::binary);
        if (!sf) throw Error("cannot open schema '" + config.schema_path + "'");
        nlohmann::json schema_json = nlohmann::json::parse(sf);
        FeatureSchema schema = FeatureSchema::from_json(schema_json);
        SplitSizes sizes;
        sizes.train = schema_json.at("splits").at("train").get<std::size_t>();
        sizes.val = schema_json.at("splits").at("val").get<std::size_t>();
        sizes.test = schema_json.at("splits").at("test").get<std::size_t>();
        std::uint64_t split_seed = schema_json.value("seed", config.master_seed);
        RawTable raw = load_dataset(config.csv_path, schema);
        splits = fit_transform(raw, schema, sizes, split_seed);
        for (const auto& w : splits.warnings) log << "[data] warning: " << w << "\n";
        mask = config.mask_enabled ? build_mask(schema) : VectorXd::Ones(splits.train.layout.dim);
      }))
    return 2;

  // -------- train --------
  if (!stage("train", [&]() {
        TrainConfig tc = config.model;
        tc.seed = derive_seed(config.master_seed, "train");
        TrainLog tlog;
        model = train_gpae(splits.train, splits.val, tc, &tlog);

        std::ofstream tl(out_path("train_log.csv"), std::ios::binary);
        tl << "epoch,train_recon,train_class,train_total,val_total,lr\n";
        for (const auto& e : tlog.epochs)
          tl << e.epoch << "," << format_double(e.train_recon) << "," << format_double(e.train_class) << ","
             << format_double(e.train_total) << "," << format_double(e.val_total) << "," << format_double(e.lr)
             << "\n";
        artifacts.push_back("train_log.csv");

        // test-split classification numbers
        std::vector<int> pred;
        std::vector<double> score;
        for (Eigen::Index i = 0; i < splits.test.X.rows(); ++i) {
          double p = model.classify(model.encode(splits.test.X.row(i).transpose()));
          score.push_back(p);
          pred.push_back(p >= 0.5 ? 1 : 0);
        }
        ClassStats st = classification_stats(pred, score, splits.test.y);
        std::ofstream cs(out_path("classification.csv"), std::ios::binary);
        cs << "model,accuracy,precision,recall,auc\n";
        cs << "gpae," << format_double(st.accuracy) << "," << format_double(st.precision) << ","
           << format_double(st.recall) << "," << format_double(st.auc) << "\n";
        artifacts.push_back("classification.csv");
        log << "[train] test accuracy " << st.accuracy << ", recall " << st.recall << "\n";
      }))
    return 2;

  // -------- density --------
  if (!stage("density", [&]() {
        MatrixXd latents = model.encode_rows(splits.train.X);
        if (config.density_fit_on == "target") {
          std::vector<Eigen::Index> rows;
          for (Eigen::Index i = 0; i < splits.train.X.rows(); ++i)
            if (splits.train.y[i] > 0.5) rows.push_back(i);
          if (rows.size() < 2) throw Error("density: fewer than 2 target-class training rows");
          MatrixXd sub(static_cast<Eigen::Index>(rows.size()), latents.cols());
          for (std::size_t i = 0; i < rows.size(); ++i) sub.row(static_cast<Eigen::Index>(i)) = latents.row(rows[i]);
          latents = sub;
        }
        DensityConfig dc = config.density;
        dc.seed = derive_seed(config.master_seed, "density");
        dm = fit_density(latents, dc);

        Bundle bundle{model, dm, splits.train.schema, splits.train.scaler, 0};
        nlohmann::json tc_json = config_json.contains("model") ? config_json["model"] : nlohmann::json::object();
        save_bundle(out_path("model.json"), bundle, tc_json);
        artifacts.push_back("model.json");
      }))
    return 2;

  // -------- beta --------
  if (!stage("beta", [&]() {
        if (config.beta_fixed) {
          beta_star = config.beta_value;
          log << "[beta] fixed at " << beta_star << "\n";
          return;
        }
        BetaSelectConfig bc = config.beta;
        bc.seed = derive_seed(config.master_seed, "beta");
        BetaSelection sel = select_beta(model, dm, splits.val, mask, config.search, bc);
        beta_star = sel.beta_star;
        std::ofstream out(out_path("beta_curve.csv"), std::ios::binary);
        out << "beta,kl,stderr,n_converged\n";
        for (const auto& p : sel.curve) {
          out << format_double(p.beta) << ",";
          if (p.usable)
            out << format_double(p.kl) << "," << format_double(p.stderr_);
          else
            out << "missing,missing";
          out << "," << p.n_converged << "\n";
        }
        artifacts.push_back("beta_curve.csv");
        log << "[beta] selected " << beta_star << "\n";
      }))
    return 2;

  // -------- generate --------
  // Generator closures outlive this stage (instability re-invokes them in
  // the evaluate stage), so they capture only run_pipeline-scope objects by
  // reference; everything stage-local goes in by value.
  if (!stage("generate", [&]() {
        SearchConfig scfg = config.search;
        scfg.beta = beta_star;
        const Dataset* ev = &splits.test;
        const double wstep = config.wachter_step;

        auto rejected_queries = [&](const Classifier& clf) {
          std::vector<Eigen::Index> q;
          for (Eigen::Index i = 0; i < ev->X.rows() && static_cast<int>(q.size()) < config.eval_queries; ++i)
            if (clf(ev->X.row(i).transpose()) == 0) q.push_back(i);
          if (q.empty()) throw Error("generate: no rejected-class queries in the test split");
          return q;
        };

        for (const auto& method : config.methods) {
          MethodRun run;
          std::function<CfResult(Eigen::Index)> generator;
          if (method == "gpae") {
            run.clf = [&model](const VectorXd& v) { return model.predict(v); };
            generator = [&model, &dm, &mask, ev, scfg](Eigen::Index row) {
              CfQuery q{ev->X.row(row).transpose(), mask, scfg};
              CfResult r = search(model, dm, q);
              r = overshoot(model, r, mask, scfg.overshoot_margin, scfg.overshoot_max_steps);
              r = snap_onehot(model, r, ev->schema, ev->layout, mask, scfg.overshoot_margin);
              return r;
            };
          } else if (method == "wachter") {
            run.clf = [&model](const VectorXd& v) { return model.predict(v); };
            generator = [&model, &mask, ev, scfg, wstep](Eigen::Index row) {
              int target = model.predict(ev->X.row(row).transpose()) == 1 ? 0 : 1;
              return wachter_cf(model, ev->X.row(row).transpose(), mask, target, wstep, scfg.max_iters,
                                scfg.overshoot_margin);
            };
          } else {  // logreg
            LogRegConfig lc;
            lc.seed = derive_seed(config.master_seed, "logreg");
            logreg = logreg_train(splits.train, lc);
            {
              std::vector<int> pred;
              std::vector<double> score;
              for (Eigen::Index i = 0; i < ev->X.rows(); ++i) {
                double p = logreg.probability(ev->X.row(i).transpose());
                score.push_back(p);
                pred.push_back(p >= 0.5 ? 1 : 0);
              }
              ClassStats lr_stats = classification_stats(pred, score, ev->y);
              std::ofstream cs(out_path("classification.csv"), std::ios::binary | std::ios::app);
              cs << "logreg," << format_double(lr_stats.accuracy) << "," << format_double(lr_stats.precision) << ","
                 << format_double(lr_stats.recall) << "," << format_double(lr_stats.auc) << "\n";
            }
            run.clf = [&logreg](const VectorXd& v) { return logreg.predict(v); };
            const double margin_logit = std::log((0.5 + scfg.overshoot_margin) / (0.5 - scfg.overshoot_margin));
            generator = [&logreg, &model, &mask, ev, margin_logit](Eigen::Index row) {
              VectorXd x = ev->X.row(row).transpose();
              VectorXd w_m = logreg.weights;
              for (Eigen::Index j = 0; j < w_m.size(); ++j)
                if (mask[j] == 0.0) w_m[j] = 0.0;
              double ww = w_m.squaredNorm();
              CfResult r;
              r.x = x;
              r.target_label = logreg.predict(x) == 1 ? 0 : 1;
              double m0 = logreg.weights.dot(x) + logreg.bias;
              if (ww < 1e-18) {
                r.x_cf = x;
                r.delta = VectorXd::Zero(x.size());
                r.converged = false;
                r.diagnostic = "mask removes every weighted coordinate";
              } else {
                // land margin_logit past the boundary on the target side
                double target_m = r.target_label == 1 ? margin_logit : -margin_logit;
                r.delta = ((target_m - m0) / ww) * w_m;
                for (Eigen::Index j = 0; j < r.delta.size(); ++j)
                  if (mask[j] == 0.0) r.delta[j] = 0.0;
                r.x_cf = x + r.delta;
                r.converged = true;
                r.iterations = 1;
              }
              r.latent_cf = model.encode(r.x_cf);
              r.boundary_residual = logreg.weights.dot(r.x_cf) + logreg.bias;
              r.label_flipped = logreg.predict(r.x_cf) == r.target_label;
              return r;
            };
          }

          run.query_idx = rejected_queries(run.clf);
          auto cache = std::make_shared<std::unordered_map<Eigen::Index, VectorXd>>();
          for (Eigen::Index row : run.query_idx) {
            CfResult r = generator(row);
            (*cache)[row] = r.x_cf;
            run.results.push_back(std::move(r));
          }
          run.cf_of_row = [generator, cache](Eigen::Index row) {
            auto it = cache->find(row);
            if (it != cache->end()) return it->second;
            VectorXd cf = generator(row).x_cf;
            (*cache)[row] = cf;
            return cf;
          };

          write_cf_csv(out_path("cf_" + method + ".csv"), *ev, run.query_idx, run.results);
          artifacts.push_back("cf_" + method + ".csv");
          runs[method] = std::move(run);
        }
      }))
    return 2;

  // -------- evaluate --------
  if (!stage("evaluate", [&]() {
        TrainConfig imc = config.im_train;
        im = train_im_autoencoders(splits.train, 1, imc, derive_seed(config.master_seed, "im"));

        EvalConfig ec;
        ec.continuous_idx = splits.test.layout.continuous_idx;

        for (const auto& method : config.methods) {
          MethodRun& run = runs.at(method);
          EvalInputs in;
          in.eval = &splits.test;
          in.query_idx = run.query_idx;
          in.results = run.results;
          in.cf_of_row = run.cf_of_row;
          in.clf = run.clf;
          in.im = im;
          in.target_label = 1;
          MetricsReport report = evaluate_all(in, ec);
          write_report_csv(report, out_path("metrics_" + method + ".csv"));
          artifacts.push_back("metrics_" + method + ".csv");
          log << "[evaluate] " << method << ": validity " << report.at("validity").mean << ", l2 "
              << report.at("l2").mean << "\n";
        }
      }))
    return 2;

  flush_manifest();
  return 0;
}

int print_report(const std::string& run_dir, std::ostream& out) {
  bool any = false;
  for (const auto& entry : std::filesystem::directory_iterator(run_dir)) {
    std::string name = entry.path().filename().string();
    if (name.rfind("metrics_", 0) != 0) continue;
    any = true;
    std::string method = name.substr(8, name.size() - 12);
    out << "== " << method << " ==\n";
    std::ifstream in(entry.path());
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      std::size_t c1 = line.find(',');
      std::size_t c2 = line.find(',', c1 + 1);
      std::size_t c3 = line.find(',', c2 + 1);
      if (c1 == std::string::npos) continue;
      std::string metric = line.substr(0, c1);
      std::string mean = line.substr(c1 + 1, (c2 == std::string::npos ? line.size() : c2) - c1 - 1);
      std::string se = c2 == std::string::npos ? "" : line.substr(c2 + 1, (c3 == std::string::npos ? line.size() : c3) - c2 - 1);
      out << "  " << metric;
      for (std::size_t pad = metric.size(); pad < 14; ++pad) out << ' ';
      out << mean;
      if (!se.empty()) out << " +/- " << se;
      out << "\n";
    }
  }
  if (!any) {
    out << "no metrics_*.csv under " << run_dir << "\n";
    return 1;
  }
  return 0;
}

}  // namespace gpae
