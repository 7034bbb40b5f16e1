#include "gpae/serialize.hpp"

#include <fstream>

namespace gpae {

namespace {

nlohmann::json matrix_to_json(const MatrixXd& m) {
  // row-major flat array
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) arr.push_back(m(r, c));
  return arr;
}

MatrixXd matrix_from_json(const nlohmann::json& arr, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(arr.size()) != rows * cols) throw Error("bundle: matrix size mismatch");
  MatrixXd m(rows, cols);
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = arr[static_cast<std::size_t>(k++)].get<double>();
  return m;
}

nlohmann::json vector_to_json(const VectorXd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

VectorXd vector_from_json(const nlohmann::json& arr) {
  VectorXd v(static_cast<Eigen::Index>(arr.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = arr[static_cast<std::size_t>(i)].get<double>();
  return v;
}

}  // namespace

nlohmann::json rff_to_json(const RffMap& map) {
  return {{"seed", map.seed},
          {"feature_count", map.feature_count},
          {"input_dim", map.input_dim},
          {"bandwidth", map.bandwidth}};
}

RffMap rff_from_json(const nlohmann::json& j) {
  return sample_rff_map(j.at("seed").get<std::uint64_t>(), j.at("feature_count").get<int>(),
                        j.at("input_dim").get<int>(), j.at("bandwidth").get<double>());
}

nlohmann::json model_to_json(const GpaeModel& model) {
  nlohmann::json j;
  j["rff_enc"] = rff_to_json(model.rff_enc);
  j["rff_dec"] = rff_to_json(model.rff_dec);
  j["enc_weights"] = matrix_to_json(model.enc_weights);
  j["dec_weights"] = matrix_to_json(model.dec_weights);
  j["clf_weights"] = vector_to_json(model.clf_weights);
  j["clf_bias"] = model.clf_bias;
  j["latent_dim"] = model.latent_dim();
  return j;
}

GpaeModel model_from_json(const nlohmann::json& j) {
  GpaeModel model;
  model.rff_enc = rff_from_json(j.at("rff_enc"));
  model.rff_dec = rff_from_json(j.at("rff_dec"));
  int d = j.at("latent_dim").get<int>();
  model.enc_weights = matrix_from_json(j.at("enc_weights"), model.rff_enc.feature_count, d);
  model.dec_weights = matrix_from_json(j.at("dec_weights"), model.rff_dec.feature_count, model.rff_enc.input_dim);
  model.clf_weights = vector_from_json(j.at("clf_weights"));
  model.clf_bias = j.at("clf_bias").get<double>();
  return model;
}

nlohmann::json density_to_json(const DensityModel& dm) {
  nlohmann::json j;
  j["rff"] = rff_to_json(dm.rff);
  j["weights"] = vector_to_json(dm.weights);
  j["mean"] = vector_to_json(dm.mean);
  j["var_diag"] = vector_to_json(dm.var);
  j["normalizer_samples"] = dm.normalizer_samples;
  j["seed"] = dm.seed;
  return j;
}

DensityModel density_from_json(const nlohmann::json& j) {
  DensityModel dm;
  dm.rff = rff_from_json(j.at("rff"));
  dm.weights = vector_from_json(j.at("weights"));
  dm.mean = vector_from_json(j.at("mean"));
  dm.var = vector_from_json(j.at("var_diag"));
  dm.normalizer_samples = j.at("normalizer_samples").get<int>();
  dm.seed = j.at("seed").get<std::uint64_t>();
  return dm;
}

std::uint64_t schema_hash(const FeatureSchema& schema) { return fnv1a(schema.to_json().dump()); }

void save_bundle(const std::string& path, const Bundle& bundle, const nlohmann::json& train_config) {
  nlohmann::json j;
  j["format"] = "gpae-bundle-v1";
  j["schema_hash"] = schema_hash(bundle.schema);
  j["schema"] = bundle.schema.to_json();
  j["scaler"] = {{"mean", bundle.scaler.mean}, {"stdev", bundle.scaler.stdev}};
  j["model"] = model_to_json(bundle.model);
  j["density"] = density_to_json(bundle.density);
  j["train_config"] = train_config;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("save_bundle: cannot open '" + path + "'");
  out << j.dump(2) << "\n";
}

Bundle load_bundle(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("load_bundle: cannot open '" + path + "'");
  nlohmann::json j = nlohmann::json::parse(in);
  if (j.value("format", "") != "gpae-bundle-v1") throw Error("load_bundle: unknown format");
  Bundle bundle;
  bundle.schema = FeatureSchema::from_json(j.at("schema"));
  bundle.scaler.mean = j.at("scaler").at("mean").get<std::vector<double>>();
  bundle.scaler.stdev = j.at("scaler").at("stdev").get<std::vector<double>>();
  bundle.model = model_from_json(j.at("model"));
  bundle.density = density_from_json(j.at("density"));
  bundle.schema_hash = j.at("schema_hash").get<std::uint64_t>();
  if (bundle.schema_hash != schema_hash(bundle.schema)) throw Error("load_bundle: schema hash mismatch");
  return bundle;
}

}  // namespace gpae
