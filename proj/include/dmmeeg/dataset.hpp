#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "dmmeeg/numerics.hpp"

namespace dmmeeg {

enum class Label : int { normal = 0, abnormal = 1 };

inline const char* to_string(Label l) { return l == Label::abnormal ? "abnormal" : "normal"; }

inline Label label_from_string(const std::string& s) {
  if (s == "abnormal" || s == "1") return Label::abnormal;
  if (s == "normal" || s == "0") return Label::normal;
  throw DataError("unknown label '" + s + "' (expected normal/abnormal or 0/1)");
}

/// T x D observation sequence, one row per timestep.
struct FeatureSequence {
  std::string session_id;
  std::optional<Label> label;
  Matrix data;
  std::vector<std::string> feature_names;

  Eigen::Index steps() const { return data.rows(); }
  Eigen::Index dim() const { return data.cols(); }
};

/// Time-mean of the rows: the input-space baseline feature.
inline Vector time_mean(const FeatureSequence& fs) { return fs.data.colwise().mean().transpose(); }

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic child seed for a tuple such as (seed, size, run).
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = mix64(seed);
  for (auto p : parts) h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

}  // namespace dmmeeg
