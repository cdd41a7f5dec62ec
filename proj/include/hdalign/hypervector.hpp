#pragma once

#include <bit>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "hdalign/detail/binary_io.hpp"
#include "hdalign/detail/rng.hpp"
#include "hdalign/errors.hpp"

namespace hdalign {

inline constexpr std::size_t kWordBits = 64;

/// Bipolar vector in {-1,+1}^D, bit-packed: bit 1 is +1, bit 0 is -1.
///
/// D is a positive multiple of 64, so the payload never carries padding bits.
class Hypervector {
 public:
  /// All -1 (every bit clear).
  explicit Hypervector(std::size_t dimension) : dimension_(dimension), words_(word_count(dimension), 0) {}

  Hypervector(std::size_t dimension, std::vector<std::uint64_t> words)
      : dimension_(dimension), words_(std::move(words)) {
    if (words_.size() != word_count(dimension)) {
      throw DimensionError("payload holds " + std::to_string(words_.size()) + " words, dimension " +
                           std::to_string(dimension) + " needs " + std::to_string(dimension / kWordBits));
    }
  }

  static Hypervector ones(std::size_t dimension) {
    Hypervector v(dimension);
    for (auto& w : v.words_) w = ~std::uint64_t{0};
    return v;
  }

  static Hypervector random(std::size_t dimension, detail::Rng& rng) {
    Hypervector v(dimension);
    for (auto& w : v.words_) w = rng.next();
    return v;
  }

  /// Elements must be -1 or +1.
  static Hypervector from_bipolar(std::span<const int> values) {
    Hypervector v(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i] == 1) {
        v.set(i, true);
      } else if (values[i] != -1) {
        throw ValidationError("bipolar element " + std::to_string(i) + " is " + std::to_string(values[i]));
      }
    }
    return v;
  }

  std::size_t dimension() const noexcept { return dimension_; }
  std::span<const std::uint64_t> words() const noexcept { return words_; }
  std::span<std::uint64_t> mutable_words() noexcept { return words_; }

  bool bit(std::size_t i) const { return (words_[i / kWordBits] >> (i % kWordBits)) & 1U; }
  int element(std::size_t i) const { return bit(i) ? 1 : -1; }

  void set(std::size_t i, bool value) {
    const std::uint64_t m = std::uint64_t{1} << (i % kWordBits);
    if (value) {
      words_[i / kWordBits] |= m;
    } else {
      words_[i / kWordBits] &= ~m;
    }
  }
  void flip(std::size_t i) { words_[i / kWordBits] ^= std::uint64_t{1} << (i % kWordBits); }

  Hypervector complement() const {
    Hypervector v(*this);
    for (auto& w : v.words_) w = ~w;
    return v;
  }

  std::vector<int> to_bipolar() const {
    std::vector<int> out(dimension_);
    for (std::size_t i = 0; i < dimension_; ++i) out[i] = element(i);
    return out;
  }

  friend bool operator==(const Hypervector&, const Hypervector&) = default;

 private:
  static std::size_t word_count(std::size_t dimension) {
    if (dimension == 0 || dimension % kWordBits != 0) {
      throw DimensionError("hypervector dimension must be a positive multiple of 64, got " +
                           std::to_string(dimension));
    }
    return dimension / kWordBits;
  }

  std::size_t dimension_;
  std::vector<std::uint64_t> words_;
};

/// Enabled subset of B equal-width banks over a D-dimensional space.
///
/// D' = popcount(enabled) * (D / B). Controller-legal masks enable banks
/// [0, 2^k), which keeps D' a power of two; `is_legal` checks that shape.
class BankMask {
 public:
  BankMask(std::size_t dimension, std::size_t banks, std::uint64_t enabled)
      : dimension_(dimension), banks_(banks), enabled_(enabled) {
    if (banks == 0 || banks > 64) throw ValidationError("bank count must be in [1, 64]");
    if (dimension == 0 || dimension % banks != 0 || (dimension / banks) % kWordBits != 0) {
      throw ValidationError("bank width D/B must be a positive multiple of 64 (D=" + std::to_string(dimension) +
                            ", B=" + std::to_string(banks) + ")");
    }
    if (enabled == 0) throw ValidationError("bank mask enables no banks");
    if (banks < 64 && (enabled >> banks) != 0) throw ValidationError("bank mask enables banks beyond B");
  }

  static BankMask full(std::size_t dimension, std::size_t banks) {
    return leading(dimension, banks, banks);
  }

  /// Banks [0, count) enabled.
  static BankMask leading(std::size_t dimension, std::size_t banks, std::size_t count) {
    if (count == 0 || count > banks) throw ValidationError("leading bank count out of range");
    const std::uint64_t bits = count == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << count) - 1;
    return BankMask(dimension, banks, bits);
  }

  /// Legal mask with the given effective dimension.
  static BankMask with_effective_dimension(std::size_t dimension, std::size_t banks, std::size_t d_eff) {
    const std::size_t width = dimension / banks;
    if (width == 0 || d_eff % width != 0) {
      throw ValidationError("effective dimension " + std::to_string(d_eff) + " is not a whole number of banks");
    }
    BankMask m = leading(dimension, banks, d_eff / width);
    if (!m.is_legal()) {
      throw ValidationError("effective dimension " + std::to_string(d_eff) + " is not a power of two");
    }
    return m;
  }

  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t banks() const noexcept { return banks_; }
  std::size_t bank_width() const noexcept { return dimension_ / banks_; }
  std::uint64_t enabled() const noexcept { return enabled_; }
  std::size_t active_banks() const noexcept { return static_cast<std::size_t>(std::popcount(enabled_)); }
  std::size_t effective_dimension() const noexcept { return active_banks() * bank_width(); }

  bool bank_enabled(std::size_t bank) const noexcept { return bank < banks_ && ((enabled_ >> bank) & 1U); }
  bool covers(std::size_t index) const noexcept {
    return index < dimension_ && bank_enabled(index / bank_width());
  }

  /// Contiguous-from-zero with a power-of-two bank count.
  bool is_legal() const noexcept {
    const std::size_t n = active_banks();
    const bool contiguous = (enabled_ & (enabled_ + 1)) == 0;
    return contiguous && std::has_single_bit(n) && std::has_single_bit(effective_dimension());
  }

  /// log2(D'); only meaningful for legal masks.
  int shift() const noexcept { return std::countr_zero(effective_dimension()); }

  template <typename Fn>
  void for_each_word_range(Fn&& fn) const {
    const std::size_t words_per_bank = bank_width() / kWordBits;
    for (std::size_t b = 0; b < banks_; ++b) {
      if (bank_enabled(b)) fn(b, b * words_per_bank, (b + 1) * words_per_bank);
    }
  }

  friend bool operator==(const BankMask&, const BankMask&) = default;

 private:
  std::size_t dimension_;
  std::size_t banks_;
  std::uint64_t enabled_;
};

/// Unnormalized bipolar dot product over the active dimensions.
struct RawScore {
  std::int64_t value = 0;
  friend auto operator<=>(const RawScore&, const RawScore&) = default;
};

// Fractional bits of the shift-normalized cosine. D' <= 2^16 keeps the shift exact.
inline constexpr int kCosineFracBits = 16;

namespace detail {

inline void require_same_dimension(const Hypervector& a, const Hypervector& b) {
  if (a.dimension() != b.dimension()) {
    throw DimensionError("dimension mismatch: " + std::to_string(a.dimension()) + " vs " +
                         std::to_string(b.dimension()));
  }
}

inline void require_mask_for(const Hypervector& a, const BankMask& mask) {
  if (mask.dimension() != a.dimension()) {
    throw ValidationError("bank mask covers " + std::to_string(mask.dimension()) + " dimensions, vector has " +
                          std::to_string(a.dimension()));
  }
}

}  // namespace detail

/// Mismatch count over the active banks.
inline std::size_t hamming(const Hypervector& a, const Hypervector& b, const BankMask& mask) {
  detail::require_same_dimension(a, b);
  detail::require_mask_for(a, mask);
  const auto wa = a.words();
  const auto wb = b.words();
  std::size_t mismatches = 0;
  mask.for_each_word_range([&](std::size_t, std::size_t lo, std::size_t hi) {
    for (std::size_t w = lo; w < hi; ++w) mismatches += static_cast<std::size_t>(std::popcount(wa[w] ^ wb[w]));
  });
  return mismatches;
}

/// popcount(XNOR) - popcount(XOR) over active positions.
inline RawScore dot(const Hypervector& a, const Hypervector& b, const BankMask& mask) {
  const auto mismatches = static_cast<std::int64_t>(hamming(a, b, mask));
  return RawScore{static_cast<std::int64_t>(mask.effective_dimension()) - 2 * mismatches};
}

/// Reference cosine: exact division by D'.
inline double cosine(const Hypervector& a, const Hypervector& b, const BankMask& mask) {
  return static_cast<double>(dot(a, b, mask).value) / static_cast<double>(mask.effective_dimension());
}

/// Hardware cosine in Q.16: the raw score is scaled and shifted right by log2(D').
inline std::int32_t cosine_fixed(const Hypervector& a, const Hypervector& b, const BankMask& mask) {
  if (!mask.is_legal()) throw ValidationError("shift normalization needs a power-of-two D'");
  const std::int64_t raw = dot(a, b, mask).value;
  return static_cast<std::int32_t>((raw * (std::int64_t{1} << kCosineFracBits)) >> mask.shift());
}

inline double fixed_to_real(std::int32_t q16) { return static_cast<double>(q16) / (1 << kCosineFracBits); }

/// Hadamard binding: elementwise product, XNOR on bits.
inline Hypervector bind(const Hypervector& a, const Hypervector& b) {
  detail::require_same_dimension(a, b);
  Hypervector out(a.dimension());
  auto wo = out.mutable_words();
  const auto wa = a.words();
  const auto wb = b.words();
  for (std::size_t w = 0; w < wo.size(); ++w) wo[w] = ~(wa[w] ^ wb[w]);
  return out;
}

/// Elementwise majority; ties resolve to +1.
inline Hypervector bundle(std::span<const Hypervector> parts) {
  if (parts.empty()) throw ValidationError("bundle of zero hypervectors");
  const std::size_t d = parts.front().dimension();
  for (const auto& p : parts) detail::require_same_dimension(parts.front(), p);
  Hypervector out(d);
  for (std::size_t i = 0; i < d; ++i) {
    long sum = 0;
    for (const auto& p : parts) sum += p.element(i);
    out.set(i, sum >= 0);
  }
  return out;
}

// Binary form: "HDCV", u16 version, u32 D, then D/64 little-endian u64 words.
inline constexpr std::uint16_t kHypervectorFormatVersion = 1;

inline void write_words(std::ostream& os, const Hypervector& v) {
  for (auto w : v.words()) detail::write_le<std::uint64_t>(os, w);
}

inline Hypervector read_words(std::istream& is, std::size_t dimension) {
  std::vector<std::uint64_t> words(dimension / kWordBits);
  for (auto& w : words) w = detail::read_le<std::uint64_t>(is, "hypervector payload");
  return Hypervector(dimension, std::move(words));
}

inline void write_hypervector(std::ostream& os, const Hypervector& v) {
  detail::write_magic(os, "HDCV");
  detail::write_le<std::uint16_t>(os, kHypervectorFormatVersion);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(v.dimension()));
  write_words(os, v);
}

inline Hypervector read_hypervector(std::istream& is) {
  detail::expect_magic(is, "HDCV");
  const auto version = detail::read_le<std::uint16_t>(is, "version");
  if (version != kHypervectorFormatVersion) {
    throw FormatError("unsupported hypervector format version " + std::to_string(version));
  }
  const auto d = detail::read_le<std::uint32_t>(is, "dimension");
  if (d == 0 || d % kWordBits != 0) throw FormatError("hypervector dimension must be a positive multiple of 64");
  return read_words(is, d);
}

}  // namespace hdalign
