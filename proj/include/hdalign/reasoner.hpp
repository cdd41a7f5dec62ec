#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hdalign/alignment.hpp"
#include "hdalign/errors.hpp"
#include "hdalign/hypervector.hpp"
#include "hdalign/item_memory.hpp"
#include "hdalign/projection.hpp"

namespace hdalign {

/// Named relation hypervectors (used-for, part-of, ...).
class RelationSet {
 public:
  explicit RelationSet(std::size_t dimension) : dimension_(dimension) {}

  /// Seeded atomic relation per name.
  static RelationSet seeded(std::size_t dimension, std::uint64_t seed, std::span<const std::string> names) {
    RelationSet set(dimension);
    for (const auto& n : names) set.add(n, keyed_hypervector(dimension, seed, "relation:" + n));
    return set;
  }

  void add(const std::string& name, Hypervector hv) {
    if (hv.dimension() != dimension_) throw DimensionError("relation \"" + name + "\" has the wrong dimension");
    if (!relations_.emplace(name, std::move(hv)).second) {
      throw ValidationError("duplicate relation name \"" + name + "\"");
    }
  }

  const Hypervector& at(const std::string& name) const {
    auto it = relations_.find(name);
    if (it == relations_.end()) throw ValidationError("unknown relation \"" + name + "\"");
    return it->second;
  }

  bool contains(const std::string& name) const { return relations_.count(name) != 0; }
  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return relations_.size(); }

 private:
  std::size_t dimension_;
  std::map<std::string, Hypervector> relations_;
};

/// g_P = t bound with every relation on the path, left to right. Empty path returns t.
inline Hypervector compose_path(const Hypervector& prompt, const RelationSet& relations,
                                std::span<const std::string> path) {
  Hypervector g = prompt;
  for (const auto& name : path) g = bind(g, relations.at(name));
  return g;
}

// Weights are stored on chip as signed 8-bit with 7 fractional bits.
inline constexpr FixedFormat kWeightFormat{7};

struct TaskWeights {
  std::string task;
  std::vector<std::string> path;
  Hypervector goal;
  BankMask mask;
  std::vector<double> weights;          // cosine(goal, h_j) under mask
  std::vector<std::int64_t> fixed;      // weights in kWeightFormat
};

/// Weights are the goal hypervector scored as a query by the shared kernel.
inline TaskWeights precompute_weights(std::string task, std::vector<std::string> path, const Hypervector& goal,
                                      const ItemMemory& mem, const BankMask& mask, TrafficMeter& meter) {
  const ScoreState s = full_scan(goal, mem, mask, Precision::Exact, meter);
  TaskWeights w{std::move(task), std::move(path), goal, mask, {}, {}};
  w.weights.resize(s.concepts());
  w.fixed.resize(s.concepts());
  for (std::size_t j = 0; j < s.concepts(); ++j) {
    w.weights[j] = s.exact_cosine(j);
    w.fixed[j] = kWeightFormat.from_raw(s.raw[j], mask.shift());
  }
  return w;
}

enum class ScoreSource : std::uint8_t { Reasoned, AlignerOnly, BypassedCache };

inline std::string_view to_string(ScoreSource s) {
  switch (s) {
    case ScoreSource::Reasoned: return "reasoned";
    case ScoreSource::AlignerOnly: return "aligner-only";
    case ScoreSource::BypassedCache: return "bypassed-cache";
  }
  return "?";
}

struct FinalScores {
  std::vector<double> values;
  ScoreSource source = ScoreSource::AlignerOnly;

  std::size_t argmax() const {
    std::size_t best = 0;
    for (std::size_t j = 1; j < values.size(); ++j) {
      if (values[j] > values[best]) best = j;
    }
    return best;
  }

  friend bool operator==(const FinalScores&, const FinalScores&) = default;
};

/// Output MUX. Reasoned scores are s_j * w_j: real products in exact mode,
/// an 8-bit MAC with rounding and saturation otherwise. Negative weights pass through.
inline FinalScores apply(const ScoreState& state, const TaskWeights& weights, ScoreSource gate) {
  FinalScores out;
  out.source = gate;
  switch (gate) {
    case ScoreSource::AlignerOnly:
      out.values = state.cosines();
      return out;
    case ScoreSource::BypassedCache:
      throw ValidationError("bypassed windows reuse the cached output; the reasoner is not invoked");
    case ScoreSource::Reasoned:
      break;
  }
  if (!(weights.mask == state.mask)) {
    throw StaleStateError("task weights were computed under D'=" + std::to_string(weights.mask.effective_dimension()) +
                          ", scores under D'=" + std::to_string(state.effective_dimension()));
  }
  if (weights.weights.size() != state.concepts()) throw DimensionError("weight count does not match concept count");
  out.values.resize(state.concepts());
  if (state.precision == Precision::Exact) {
    for (std::size_t j = 0; j < state.concepts(); ++j) out.values[j] = state.exact_cosine(j) * weights.weights[j];
    return out;
  }
  const FixedFormat sf = state.format();
  for (std::size_t j = 0; j < state.concepts(); ++j) {
    const std::int64_t product = state.quantized[j] * weights.fixed[j];  // Q(sf + 7)
    const std::int64_t q = detail::saturate(detail::shift_round_even(product, sf.frac_bits), kWeightFormat.limit());
    out.values[j] = kWeightFormat.to_real(q);
  }
  return out;
}

}  // namespace hdalign
