#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hdalign/errors.hpp"
#include "hdalign/hypervector.hpp"
#include "hdalign/item_memory.hpp"
#include "hdalign/path.hpp"

namespace hdalign {

namespace detail {

// x / 2^s rounded to nearest, ties to even. s may be negative (exact left shift).
inline std::int64_t shift_round_even(std::int64_t x, int s) {
  if (s <= 0) return x * (std::int64_t{1} << (-s));
  const std::int64_t q = x >> s;  // floor
  const std::int64_t r = x - (q << s);
  const std::int64_t half = std::int64_t{1} << (s - 1);
  if (r > half || (r == half && (q & 1))) return q + 1;
  return q;
}

inline std::int64_t saturate(std::int64_t v, std::int64_t limit) { return std::clamp(v, -limit, limit); }

}  // namespace detail

/// Fixed-point format of the quantized accumulators: cosine with (bits-1)
/// fractional bits, saturating one ulp short of +-1.
struct FixedFormat {
  int frac_bits = 0;

  static FixedFormat for_precision(Precision p) { return FixedFormat{std::max(precision_bits(p) - 1, 0)}; }

  std::int64_t limit() const noexcept { return (std::int64_t{1} << frac_bits) - 1; }
  double ulp() const noexcept { return 1.0 / static_cast<double>(std::int64_t{1} << frac_bits); }
  double to_real(std::int64_t v) const noexcept { return static_cast<double>(v) * ulp(); }

  /// Quantizes raw / 2^shift.
  std::int64_t from_raw(std::int64_t raw, int shift) const {
    return detail::saturate(detail::shift_round_even(raw, shift - frac_bits), limit());
  }
};

/// Per-concept accumulators tied to the query they were computed for.
///
/// `raw` is always maintained exactly; `quantized` mirrors it in the
/// selected fixed-point precision and drifts by at most half an ulp per update.
struct ScoreState {
  Hypervector baseline;
  BankMask mask;
  Precision precision = Precision::Exact;
  std::vector<std::int64_t> raw;
  std::vector<std::int64_t> quantized;

  std::size_t concepts() const noexcept { return raw.size(); }
  std::size_t effective_dimension() const noexcept { return mask.effective_dimension(); }
  FixedFormat format() const { return FixedFormat::for_precision(precision); }

  double exact_cosine(std::size_t j) const {
    return static_cast<double>(raw[j]) / static_cast<double>(effective_dimension());
  }

  /// Score as read out by the datapath (quantized when precision is not exact).
  double cosine(std::size_t j) const {
    return precision == Precision::Exact ? exact_cosine(j) : format().to_real(quantized[j]);
  }

  std::vector<double> cosines() const {
    std::vector<double> out(concepts());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = cosine(j);
    return out;
  }

  /// Integer used for ranking: raw in exact mode, fixed-point otherwise.
  std::int64_t rank_value(std::size_t j) const { return precision == Precision::Exact ? raw[j] : quantized[j]; }
  double rank_unit() const {
    return precision == Precision::Exact ? 1.0 / static_cast<double>(effective_dimension()) : format().ulp();
  }
};

/// Flipped positions between two queries over the active banks.
struct DeltaSet {
  std::vector<std::uint32_t> indices;
  std::size_t capacity = 0;
  bool overflowed = false;

  std::size_t size() const noexcept { return indices.size(); }
  bool empty() const noexcept { return indices.empty(); }
};

struct PsuResult {
  double rho = 1.0;
  DeltaSet delta;
};

/// Default Delta-FIFO depth: D/8.
inline std::size_t default_delta_capacity(std::size_t dimension) { return dimension / 8; }

/// Partial-similarity unit: XOR against the cached query, popcount, affine map.
inline PsuResult psu_compare(const Hypervector& current, const Hypervector& cached, const BankMask& mask,
                             std::size_t capacity) {
  detail::require_same_dimension(current, cached);
  detail::require_mask_for(current, mask);
  PsuResult out;
  out.delta.capacity = capacity;
  const auto wc = current.words();
  const auto wk = cached.words();
  mask.for_each_word_range([&](std::size_t, std::size_t lo, std::size_t hi) {
    for (std::size_t w = lo; w < hi; ++w) {
      std::uint64_t diff = wc[w] ^ wk[w];
      while (diff != 0) {
        const int bit = std::countr_zero(diff);
        out.delta.indices.push_back(static_cast<std::uint32_t>(w * kWordBits + static_cast<std::size_t>(bit)));
        diff &= diff - 1;
      }
    }
  });
  out.delta.overflowed = out.delta.size() > capacity;
  const auto d_eff = static_cast<double>(mask.effective_dimension());
  out.rho = 1.0 - 2.0 * static_cast<double>(out.delta.size()) / d_eff;
  return out;
}

inline PsuResult psu_compare(const Hypervector& current, const Hypervector& cached, const BankMask& mask) {
  return psu_compare(current, cached, mask, default_delta_capacity(current.dimension()));
}

namespace detail {

inline void require_legal(const BankMask& mask) {
  if (!mask.is_legal()) {
    throw ValidationError("bank mask with " + std::to_string(mask.active_banks()) +
                          " enabled banks is not controller-legal (power-of-two leading banks)");
  }
}

inline void requantize(ScoreState& s) {
  if (s.precision == Precision::Exact) {
    s.quantized.clear();
    return;
  }
  const FixedFormat f = s.format();
  s.quantized.resize(s.raw.size());
  for (std::size_t j = 0; j < s.raw.size(); ++j) s.quantized[j] = f.from_raw(s.raw[j], s.mask.shift());
}

}  // namespace detail

/// Streaming scan of every active column; charges M*D' bits.
inline ScoreState full_scan(const Hypervector& q, const ItemMemory& mem, const BankMask& mask, Precision precision,
                            TrafficMeter& meter) {
  if (q.dimension() != mem.dimension()) {
    throw DimensionError("query dimension " + std::to_string(q.dimension()) + " does not match item memory " +
                         std::to_string(mem.dimension()));
  }
  mem.require_mask(mask);
  detail::require_legal(mask);
  ScoreState s{q, mask, precision, std::vector<std::int64_t>(mem.concepts()), {}};
  for (std::size_t j = 0; j < mem.concepts(); ++j) s.raw[j] = dot(q, mem.row(j), mask).value;
  charge_stream(mem, mask, meter);
  detail::requantize(s);
  return s;
}

/// Test-only corruption of the delta path, used to show the exactness check bites.
struct DeltaFault {
  bool drop_last_correction = false;
};

/// Exact sparse correction: raw[j] += sum over flipped i of (q_new_i - baseline_i) * h_ji.
///
/// Throws StaleStateError when `mask` differs from the state's tag and
/// FallbackRequired when the flip set overflowed the index FIFO.
inline ScoreState delta_update(ScoreState state, const Hypervector& q_new, const DeltaSet& delta,
                               const ItemMemory& mem, const BankMask& mask, TrafficMeter& meter,
                               const DeltaFault* fault = nullptr) {
  if (!(state.mask == mask)) {
    throw StaleStateError("accumulators were built under D'=" + std::to_string(state.effective_dimension()) +
                          ", window runs D'=" + std::to_string(mask.effective_dimension()));
  }
  if (delta.overflowed) {
    throw FallbackRequired("flip set of " + std::to_string(delta.size()) + " exceeds FIFO depth " +
                           std::to_string(delta.capacity));
  }
  detail::require_same_dimension(state.baseline, q_new);
  if (hamming(state.baseline, q_new, mask) != delta.size()) {
    throw ValidationError("flip set does not match the baseline/query difference");
  }
  for (auto i : delta.indices) {
    if (state.baseline.bit(i) == q_new.bit(i)) {
      throw ValidationError("index " + std::to_string(i) + " in flip set is not flipped");
    }
  }

  const std::vector<std::int64_t> before = state.raw;
  std::size_t visited = 0;
  gather_columns(mem, mask, delta.indices, meter, [&](std::size_t i, const ColumnSlice& column) {
    ++visited;
    if (fault != nullptr && fault->drop_last_correction && visited == delta.size()) return;
    const std::int64_t step = q_new.bit(i) ? 2 : -2;
    for (std::size_t j = 0; j < state.raw.size(); ++j) state.raw[j] += column.bit(j) ? step : -step;
  });

  if (state.precision != Precision::Exact) {
    const FixedFormat f = state.format();
    for (std::size_t j = 0; j < state.raw.size(); ++j) {
      const std::int64_t correction = f.from_raw(state.raw[j] - before[j], mask.shift());
      state.quantized[j] = detail::saturate(state.quantized[j] + correction, f.limit());
    }
  }
  state.baseline = q_new;
  return state;
}

/// Largest scores first, ties to the lower concept index.
struct TopK {
  std::vector<std::size_t> key;
  double margin = 0.0;  // cosine units, rank k minus rank k+1

  friend bool operator==(const TopK&, const TopK&) = default;
};

inline std::vector<std::size_t> ranking(const ScoreState& state) {
  std::vector<std::size_t> order(state.concepts());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return state.rank_value(a) > state.rank_value(b); });
  return order;
}

inline TopK top_k(const ScoreState& state, std::size_t k) {
  if (k == 0 || k >= state.concepts()) {
    throw ValidationError("top-k needs 1 <= k < M (k=" + std::to_string(k) + ", M=" +
                          std::to_string(state.concepts()) + ")");
  }
  const auto order = ranking(state);
  TopK out;
  out.key.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  const std::int64_t gap = state.rank_value(order[k - 1]) - state.rank_value(order[k]);
  out.margin = static_cast<double>(gap) * state.rank_unit();
  return out;
}

inline std::size_t argmax(const ScoreState& state) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < state.concepts(); ++j) {
    if (state.rank_value(j) > state.rank_value(best)) best = j;
  }
  return best;
}

}  // namespace hdalign
