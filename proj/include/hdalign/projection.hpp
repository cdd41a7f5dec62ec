#pragma once

#include <cstdint>
#include <span>
#include <vector>
#include <string>

#include "hdalign/detail/rng.hpp"
#include "hdalign/errors.hpp"
#include "hdalign/hypervector.hpp"

namespace hdalign {

/// Fixed random +-1 projection from R^d to {-1,+1}^D.
///
/// Entries are derived on demand from (seed, row, col), so the D x d matrix
/// is never stored and generation order does not matter.
class Projection {
 public:
  Projection(std::size_t input_width, std::size_t output_width, std::uint64_t seed)
      : input_width_(input_width), output_width_(output_width), seed_(seed) {
    if (input_width == 0) throw ValidationError("projection input width must be positive");
    Hypervector probe(output_width);  // validates D
    (void)probe;
  }

  std::size_t input_width() const noexcept { return input_width_; }
  std::size_t output_width() const noexcept { return output_width_; }
  std::uint64_t seed() const noexcept { return seed_; }

  int entry(std::size_t row, std::size_t col) const noexcept {
    const std::uint64_t h = detail::hash_combine(detail::hash_combine(seed_, row), col);
    return (h & 1U) ? 1 : -1;
  }

 private:
  std::size_t input_width_;
  std::size_t output_width_;
  std::uint64_t seed_;
};

/// sign(R * features) with sign(0) = +1. Accumulates in double, column order.
inline Hypervector project_and_sign(std::span<const double> features, const Projection& proj) {
  if (features.size() != proj.input_width()) {
    throw DimensionError("feature length " + std::to_string(features.size()) + " does not match projection width " +
                         std::to_string(proj.input_width()));
  }
  // Zero features add nothing to any row, so they are skipped.
  std::vector<std::size_t> live;
  for (std::size_t k = 0; k < features.size(); ++k) {
    if (features[k] != 0.0) live.push_back(k);
  }
  Hypervector out(proj.output_width());
  for (std::size_t i = 0; i < proj.output_width(); ++i) {
    double acc = 0.0;
    for (std::size_t k : live) acc += proj.entry(i, k) * features[k];
    out.set(i, acc >= 0.0);
  }
  return out;
}

/// Seeded atomic hypervector keyed by a name (relations, prompts).
inline Hypervector keyed_hypervector(std::size_t dimension, std::uint64_t seed, std::string_view key) {
  detail::Rng rng(detail::hash_combine(seed, detail::hash_string(key)));
  return Hypervector::random(dimension, rng);
}

}  // namespace hdalign
