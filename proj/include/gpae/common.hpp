#pragma once

#include <charconv>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace gpae {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Thrown for all recoverable errors; the message carries the location
// (file/row/column or stage) when one is known.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

inline double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// Shortest round-trip decimal rendering, so artifacts diff cleanly
// across platforms.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// FNV-1a, used for config/schema fingerprints and seed derivation.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace gpae
