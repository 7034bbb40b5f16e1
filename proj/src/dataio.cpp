#include "gpae/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "gpae/rng.hpp"

namespace gpae {

namespace {

constexpr double kStdFloor = 1e-12;

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace

void FeatureSchema::validate() const {
  if (columns.empty()) throw Error("schema: at least one feature column required");
  std::set<std::string> names;
  for (const auto& col : columns) {
    if (col.name.empty()) throw Error("schema: empty column name");
    if (!names.insert(col.name).second) throw Error("schema: duplicate column name '" + col.name + "'");
    if (col.name == label_column) throw Error("schema: label column '" + label_column + "' listed among features");
    if (col.kind == ColumnKind::Categorical) {
      if (col.levels.empty()) throw Error("schema: categorical column '" + col.name + "' has no levels");
      std::set<std::string> lv(col.levels.begin(), col.levels.end());
      if (lv.size() != col.levels.size()) throw Error("schema: duplicate level in column '" + col.name + "'");
    }
  }
  if (label_column.empty()) throw Error("schema: label_column missing");
}

FeatureSchema FeatureSchema::from_json(const nlohmann::json& j) {
  FeatureSchema schema;
  for (const auto& jc : j.at("columns")) {
    Column col;
    col.name = jc.at("name").get<std::string>();
    std::string kind = jc.at("kind").get<std::string>();
    if (kind == "continuous") {
      col.kind = ColumnKind::Continuous;
    } else if (kind == "categorical") {
      col.kind = ColumnKind::Categorical;
      col.levels = jc.at("levels").get<std::vector<std::string>>();
    } else {
      throw Error("schema: unknown column kind '" + kind + "'");
    }
    col.immutable = jc.value("immutable", false);
    schema.columns.push_back(std::move(col));
  }
  schema.label_column = j.at("label_column").get<std::string>();
  schema.positive_label = j.at("positive_label").get<std::string>();
  schema.validate();
  return schema;
}

nlohmann::json FeatureSchema::to_json() const {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& col : columns) {
    nlohmann::json jc;
    jc["name"] = col.name;
    jc["kind"] = col.kind == ColumnKind::Continuous ? "continuous" : "categorical";
    if (col.kind == ColumnKind::Categorical) jc["levels"] = col.levels;
    jc["immutable"] = col.immutable;
    cols.push_back(std::move(jc));
  }
  return nlohmann::json{{"columns", cols}, {"label_column", label_column}, {"positive_label", positive_label}};
}

EncodedLayout make_layout(const FeatureSchema& schema) {
  EncodedLayout layout;
  int at = 0;
  for (const auto& col : schema.columns) {
    int width = col.kind == ColumnKind::Continuous ? 1 : static_cast<int>(col.levels.size());
    layout.col_range.emplace_back(at, at + width);
    if (col.kind == ColumnKind::Continuous) layout.continuous_idx.push_back(at);
    at += width;
  }
  layout.dim = at;
  return layout;
}

VectorXd build_mask(const FeatureSchema& schema) {
  EncodedLayout layout = make_layout(schema);
  VectorXd mask = VectorXd::Ones(layout.dim);
  for (std::size_t j = 0; j < schema.columns.size(); ++j) {
    if (!schema.columns[j].immutable) continue;
    auto [b, e] = layout.col_range[j];
    for (int k = b; k < e; ++k) mask[k] = 0.0;
  }
  return mask;
}

RawTable parse_csv(const std::string& content, const FeatureSchema& schema, const std::string& origin) {
  schema.validate();
  std::stringstream in(content);
  std::string line;
  if (!std::getline(in, line)) throw Error(origin + ": empty file");
  std::vector<std::string> header = split_line(line);

  // Map each schema column (and the label) to its position in the header.
  std::vector<int> col_pos(schema.columns.size(), -1);
  int label_pos = -1;
  for (std::size_t h = 0; h < header.size(); ++h) {
    bool known = false;
    for (std::size_t j = 0; j < schema.columns.size(); ++j) {
      if (header[h] == schema.columns[j].name) {
        col_pos[j] = static_cast<int>(h);
        known = true;
      }
    }
    if (header[h] == schema.label_column) {
      label_pos = static_cast<int>(h);
      known = true;
    }
    if (!known) throw Error(origin + ": unknown column '" + header[h] + "' not in schema");
  }
  for (std::size_t j = 0; j < schema.columns.size(); ++j)
    if (col_pos[j] < 0) throw Error(origin + ": column '" + schema.columns[j].name + "' missing from header");
  if (label_pos < 0) throw Error(origin + ": label column '" + schema.label_column + "' missing from header");

  RawTable table;
  std::size_t row_no = 1;  // header is row 1
  while (std::getline(in, line)) {
    ++row_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split_line(line);
    if (fields.size() != header.size())
      throw Error(origin + ": row " + std::to_string(row_no) + " has " + std::to_string(fields.size()) +
                  " fields, expected " + std::to_string(header.size()));
    std::vector<double> cells(schema.columns.size());
    for (std::size_t j = 0; j < schema.columns.size(); ++j) {
      const std::string& text = fields[static_cast<std::size_t>(col_pos[j])];
      const Column& col = schema.columns[j];
      if (col.kind == ColumnKind::Continuous) {
        try {
          std::size_t used = 0;
          double v = std::stod(text, &used);
          if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument(text);
          cells[j] = v;
        } catch (const std::exception&) {
          throw Error(origin + ": row " + std::to_string(row_no) + ", column '" + col.name +
                      "': non-numeric value '" + text + "'");
        }
      } else {
        auto it = std::find(col.levels.begin(), col.levels.end(), text);
        if (it == col.levels.end())
          throw Error(origin + ": row " + std::to_string(row_no) + ", column '" + col.name + "': unseen level '" +
                      text + "'");
        cells[j] = static_cast<double>(it - col.levels.begin());
      }
    }
    table.cells.push_back(std::move(cells));
    table.labels.push_back(fields[static_cast<std::size_t>(label_pos)] == schema.positive_label ? 1 : 0);
  }
  return table;
}

RawTable load_dataset(const std::string& csv_path, const FeatureSchema& schema) {
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw Error("load_dataset: cannot open '" + csv_path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), schema, csv_path);
}

VectorXd transform_row(const std::vector<double>& cells, const FeatureSchema& schema, const Scaler& scaler,
                       const EncodedLayout& layout) {
  VectorXd x = VectorXd::Zero(layout.dim);
  std::size_t cont = 0;
  for (std::size_t j = 0; j < schema.columns.size(); ++j) {
    auto [b, e] = layout.col_range[j];
    if (schema.columns[j].kind == ColumnKind::Continuous) {
      x[b] = (cells[j] - scaler.mean[cont]) / scaler.stdev[cont];
      ++cont;
    } else {
      int level = static_cast<int>(cells[j]);
      if (level < 0 || b + level >= e) throw Error("transform_row: level index out of range");
      x[b + level] = 1.0;
    }
  }
  return x;
}

std::vector<double> inverse_transform(const VectorXd& x_encoded, const FeatureSchema& schema, const Scaler& scaler,
                                      const EncodedLayout& layout) {
  if (x_encoded.size() != layout.dim) throw Error("inverse_transform: dimension mismatch");
  if (!x_encoded.allFinite()) throw Error("inverse_transform: non-finite input");
  std::vector<double> cells(schema.columns.size());
  std::size_t cont = 0;
  for (std::size_t j = 0; j < schema.columns.size(); ++j) {
    auto [b, e] = layout.col_range[j];
    if (schema.columns[j].kind == ColumnKind::Continuous) {
      cells[j] = x_encoded[b] * scaler.stdev[cont] + scaler.mean[cont];
      ++cont;
    } else {
      int best = 0;
      for (int k = 1; k < e - b; ++k)
        if (x_encoded[b + k] > x_encoded[b + best]) best = k;  // ties keep the lowest index
      cells[j] = static_cast<double>(best);
    }
  }
  return cells;
}

std::vector<std::string> render_raw_row(const std::vector<double>& cells, const FeatureSchema& schema) {
  std::vector<std::string> out(cells.size());
  for (std::size_t j = 0; j < schema.columns.size(); ++j) {
    if (schema.columns[j].kind == ColumnKind::Continuous)
      out[j] = format_double(cells[j]);
    else
      out[j] = schema.columns[j].levels[static_cast<std::size_t>(cells[j])];
  }
  return out;
}

namespace {

Dataset encode_split(const RawTable& raw, const std::vector<std::size_t>& idx, const FeatureSchema& schema,
                     const Scaler& scaler, const EncodedLayout& layout) {
  Dataset ds;
  ds.schema = schema;
  ds.scaler = scaler;
  ds.layout = layout;
  ds.X.resize(static_cast<Eigen::Index>(idx.size()), layout.dim);
  ds.y.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    ds.X.row(static_cast<Eigen::Index>(i)) = transform_row(raw.cells[idx[i]], schema, scaler, layout).transpose();
    ds.y[static_cast<Eigen::Index>(i)] = raw.labels[idx[i]];
  }
  if (!ds.X.allFinite()) throw Error("fit_transform: non-finite encoded entry");
  return ds;
}

}  // namespace

SplitResult fit_transform(const RawTable& raw, const FeatureSchema& schema, SplitSizes sizes, std::uint64_t seed) {
  schema.validate();
  if (sizes.train == 0) throw Error("fit_transform: empty train split");
  if (sizes.train + sizes.val + sizes.test > raw.rows())
    throw Error("fit_transform: split sizes exceed row count (" + std::to_string(raw.rows()) + ")");

  std::vector<std::size_t> order(raw.rows());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  CounterRng rng(derive_seed(seed, "split_shuffle"));
  rng.shuffle(order);

  std::vector<std::size_t> tr(order.begin(), order.begin() + static_cast<long>(sizes.train));
  std::vector<std::size_t> va(order.begin() + static_cast<long>(sizes.train),
                              order.begin() + static_cast<long>(sizes.train + sizes.val));
  std::vector<std::size_t> te(order.begin() + static_cast<long>(sizes.train + sizes.val),
                              order.begin() + static_cast<long>(sizes.train + sizes.val + sizes.test));

  EncodedLayout layout = make_layout(schema);
  Scaler scaler;
  SplitResult result;
  for (std::size_t j = 0; j < schema.columns.size(); ++j) {
    if (schema.columns[j].kind != ColumnKind::Continuous) continue;
    double sum = 0.0;
    for (std::size_t i : tr) sum += raw.cells[i][j];
    double mean = sum / static_cast<double>(tr.size());
    double ss = 0.0;
    for (std::size_t i : tr) {
      double dcell = raw.cells[i][j] - mean;
      ss += dcell * dcell;
    }
    double stdev = tr.size() > 1 ? std::sqrt(ss / static_cast<double>(tr.size() - 1)) : 0.0;
    if (stdev < kStdFloor) {
      result.warnings.push_back("zero-variance column '" + schema.columns[j].name + "', std floored");
      stdev = kStdFloor;
    }
    scaler.mean.push_back(mean);
    scaler.stdev.push_back(stdev);
  }

  result.train = encode_split(raw, tr, schema, scaler, layout);
  result.val = encode_split(raw, va, schema, scaler, layout);
  result.test = encode_split(raw, te, schema, scaler, layout);
  return result;
}

}  // namespace gpae
