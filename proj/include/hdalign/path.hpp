#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "hdalign/errors.hpp"
#include "hdalign/hypervector.hpp"

namespace hdalign {

enum class PathMode : std::uint8_t { Bypass, Delta, Full };

enum class Precision : std::uint8_t { Exact, Int8, Int4 };

inline std::string_view to_string(PathMode m) {
  switch (m) {
    case PathMode::Bypass: return "bypass";
    case PathMode::Delta: return "delta";
    case PathMode::Full: return "full";
  }
  return "?";
}

inline std::string_view to_string(Precision p) {
  switch (p) {
    case Precision::Exact: return "exact";
    case Precision::Int8: return "int8";
    case Precision::Int4: return "int4";
  }
  return "?";
}

inline PathMode parse_path_mode(std::string_view s) {
  if (s == "bypass") return PathMode::Bypass;
  if (s == "delta") return PathMode::Delta;
  if (s == "full") return PathMode::Full;
  throw FormatError("unknown path mode \"" + std::string(s) + "\"");
}

inline Precision parse_precision(std::string_view s) {
  if (s == "exact") return Precision::Exact;
  if (s == "int8") return Precision::Int8;
  if (s == "int4") return Precision::Int4;
  throw ConfigError("unknown precision \"" + std::string(s) + "\" (expected exact, int8 or int4)");
}

/// Total accumulator width; fractional bits are one less.
inline int precision_bits(Precision p) {
  switch (p) {
    case Precision::Int8: return 8;
    case Precision::Int4: return 4;
    case Precision::Exact: return 0;
  }
  return 0;
}

/// Window control registers, latched once per window.
struct PathDecision {
  PathMode mode = PathMode::Full;
  BankMask mask;
  Precision precision = Precision::Exact;
  std::optional<std::size_t> matched_line;
  bool budget_overrun = false;

  int normalization_shift() const noexcept { return mask.shift(); }
  std::size_t effective_dimension() const noexcept { return mask.effective_dimension(); }
};

}  // namespace hdalign
