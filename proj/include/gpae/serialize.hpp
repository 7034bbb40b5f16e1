#pragma once

#include <string>

#include <json.hpp>

#include "gpae/dataio.hpp"
#include "gpae/density.hpp"
#include "gpae/model.hpp"

namespace gpae {

// RFF maps persist as {seed, feature_count, input_dim, bandwidth}; the
// frequencies and phases are regenerated from the seed on load.
nlohmann::json rff_to_json(const RffMap& map);
RffMap rff_from_json(const nlohmann::json& j);

nlohmann::json model_to_json(const GpaeModel& model);
GpaeModel model_from_json(const nlohmann::json& j);

nlohmann::json density_to_json(const DensityModel& dm);
DensityModel density_from_json(const nlohmann::json& j);

struct Bundle {
  GpaeModel model;
  DensityModel density;
  FeatureSchema schema;
  Scaler scaler;
  std::uint64_t schema_hash = 0;
};

void save_bundle(const std::string& path, const Bundle& bundle, const nlohmann::json& train_config);
Bundle load_bundle(const std::string& path);

std::uint64_t schema_hash(const FeatureSchema& schema);

}  // namespace gpae
