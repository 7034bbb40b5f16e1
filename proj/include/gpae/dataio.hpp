#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "gpae/common.hpp"

namespace gpae {

enum class ColumnKind { Continuous, Categorical };

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::Continuous;
  std::vector<std::string> levels;  // categorical only, ordered
  bool immutable = false;
};

struct FeatureSchema {
  std::vector<Column> columns;  // feature columns, in output order
  std::string label_column;
  std::string positive_label;

  void validate() const;  // throws Error on any violated invariant
  static FeatureSchema from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Typed rows in source units. Continuous cells hold the value; categorical
// cells hold the level index into schema.columns[j].levels.
struct RawTable {
  std::vector<std::vector<double>> cells;  // rows x columns, schema order
  std::vector<int> labels;                 // 0/1, positive_label -> 1
  std::size_t rows() const { return cells.size(); }
};

struct Scaler {
  // Aligned with the schema's continuous columns in order of appearance.
  std::vector<double> mean;
  std::vector<double> stdev;  // floored at 1e-12
};

// Where each source column lands in the encoded matrix.
struct EncodedLayout {
  int dim = 0;                                  // D
  std::vector<std::pair<int, int>> col_range;   // per source column, [begin, end)
  std::vector<int> continuous_idx;              // encoded indices of continuous columns
};

EncodedLayout make_layout(const FeatureSchema& schema);

struct Dataset {
  MatrixXd X;  // n x D, standardized + one-hot
  VectorXd y;  // n, entries in {0, 1}
  FeatureSchema schema;
  Scaler scaler;
  EncodedLayout layout;

  std::size_t size() const { return static_cast<std::size_t>(X.rows()); }
};

// 1 = mutable, 0 = frozen. All encoded columns of an immutable source
// column are 0.
VectorXd build_mask(const FeatureSchema& schema);

RawTable load_dataset(const std::string& csv_path, const FeatureSchema& schema);

// Parses an in-memory CSV body (header row + data rows).
RawTable parse_csv(const std::string& content, const FeatureSchema& schema, const std::string& origin);

struct SplitSizes {
  std::size_t train = 0, val = 0, test = 0;
};

struct SplitResult {
  Dataset train, val, test;
  std::vector<std::string> warnings;  // e.g. zero-variance columns
};

// Shuffles deterministically under `seed`, splits, fits the scaler on the
// train rows only, and encodes all three splits with it.
SplitResult fit_transform(const RawTable& raw, const FeatureSchema& schema, SplitSizes sizes, std::uint64_t seed);

// Encodes one raw row (source units / level indices) with a fitted scaler.
VectorXd transform_row(const std::vector<double>& cells, const FeatureSchema& schema, const Scaler& scaler,
                       const EncodedLayout& layout);

// Decodes an encoded vector back to source units; one-hot groups go to the
// argmax level (ties to the lowest index).
std::vector<double> inverse_transform(const VectorXd& x_encoded, const FeatureSchema& schema, const Scaler& scaler,
                                      const EncodedLayout& layout);

// Renders a decoded row with level names substituted, for CSV output.
std::vector<std::string> render_raw_row(const std::vector<double>& cells, const FeatureSchema& schema);

}  // namespace gpae
