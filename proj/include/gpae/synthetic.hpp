#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "gpae/common.hpp"

namespace gpae {

enum class SyntheticKind { TwoGaussians, TwoMoons, LcdLike };

SyntheticKind parse_synthetic_kind(const std::string& name);

struct SyntheticData {
  std::string csv;             // header + rows
  nlohmann::json schema_json;  // schema file body, splits and seed included
};

// Labeled datasets with a known boundary; n >= 100. Class balance is exact
// by construction (alternating labels before shuffle).
SyntheticData make_synthetic(SyntheticKind kind, int n, std::uint64_t seed);

// Writes data.csv and schema.json under out_dir.
void write_synthetic(SyntheticKind kind, int n, std::uint64_t seed, const std::string& out_dir);

}  // namespace gpae
