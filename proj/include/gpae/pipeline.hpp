#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gpae/betaselect.hpp"
#include "gpae/cfsearch.hpp"
#include "gpae/common.hpp"
#include "gpae/dataio.hpp"
#include "gpae/density.hpp"
#include "gpae/metrics.hpp"
#include "gpae/model.hpp"

namespace gpae {

struct RunConfig {
  std::string csv_path;
  std::string schema_path;
  TrainConfig model;
  DensityConfig density;
  std::string density_fit_on = "target";  // "target" | "all"
  SearchConfig search;
  bool beta_fixed = false;
  double beta_value = 0.4;
  BetaSelectConfig beta;
  double wachter_step = 0.05;
  std::vector<std::string> methods = {"gpae", "logreg", "wachter"};
  bool mask_enabled = false;
  int eval_queries = 200;
  TrainConfig im_train;  // IM autoencoder schedule (class head disabled)
  std::string output_dir;
  std::uint64_t master_seed = 0;

  static RunConfig from_json(const nlohmann::json& j);
};

// Exit codes: 0 success, 1 config error, 2 stage failure.
int run_pipeline(const std::string& config_path, std::ostream& log);

// Pretty-prints the metric tables found under a run directory.
int print_report(const std::string& run_dir, std::ostream& out);

}  // namespace gpae
