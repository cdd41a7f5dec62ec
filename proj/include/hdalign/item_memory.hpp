#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "hdalign/detail/binary_io.hpp"
#include "hdalign/detail/rng.hpp"
#include "hdalign/errors.hpp"
#include "hdalign/hypervector.hpp"

namespace hdalign {

/// M concept hypervectors of dimension D spread over B banks.
///
/// Immutable once built. The bit-sliced layout of the hardware is exposed
/// through the column visitors below rather than stored transposed.
class ItemMemory {
 public:
  ItemMemory(std::size_t banks, std::vector<Hypervector> rows, std::vector<std::string> labels)
      : banks_(banks), rows_(std::move(rows)), labels_(std::move(labels)) {
    if (rows_.empty()) throw ValidationError("item memory needs at least one concept (M >= 1)");
    if (labels_.size() != rows_.size()) throw ValidationError("label count does not match concept count");
    const std::size_t d = rows_.front().dimension();
    for (const auto& r : rows_) {
      if (r.dimension() != d) throw ValidationError("item memory rows differ in dimension");
    }
    BankMask::full(d, banks);  // validates D/B
  }

  static ItemMemory random(std::size_t concepts, std::size_t dimension, std::size_t banks, std::uint64_t seed) {
    detail::Rng rng(seed);
    std::vector<Hypervector> rows;
    std::vector<std::string> labels;
    rows.reserve(concepts);
    labels.reserve(concepts);
    for (std::size_t j = 0; j < concepts; ++j) {
      rows.push_back(Hypervector::random(dimension, rng));
      labels.push_back(default_label(j));
    }
    return ItemMemory(banks, std::move(rows), std::move(labels));
  }

  static std::string default_label(std::size_t j) {
    std::string s = std::to_string(j);
    return "concept_" + std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
  }

  std::size_t concepts() const noexcept { return rows_.size(); }
  std::size_t dimension() const noexcept { return rows_.front().dimension(); }
  std::size_t banks() const noexcept { return banks_; }
  std::size_t bank_width() const noexcept { return dimension() / banks_; }
  const Hypervector& row(std::size_t j) const { return rows_.at(j); }
  std::span<const Hypervector> rows() const noexcept { return rows_; }
  const std::string& label(std::size_t j) const { return labels_.at(j); }
  std::span<const std::string> labels() const noexcept { return labels_; }

  BankMask full_mask() const { return BankMask::full(dimension(), banks_); }

  void require_mask(const BankMask& mask) const {
    if (mask.dimension() != dimension() || mask.banks() != banks_) {
      throw ValidationError("bank mask shape (D=" + std::to_string(mask.dimension()) + ", B=" +
                            std::to_string(mask.banks()) + ") does not match item memory (D=" +
                            std::to_string(dimension()) + ", B=" + std::to_string(banks_) + ")");
    }
  }

  friend bool operator==(const ItemMemory&, const ItemMemory&) = default;

 private:
  std::size_t banks_;
  std::vector<Hypervector> rows_;
  std::vector<std::string> labels_;
};

/// Cumulative item-memory read traffic. Counters only grow.
class TrafficMeter {
 public:
  explicit TrafficMeter(std::size_t banks = 1) : per_bank_bits_(banks, 0) {}

  std::uint64_t bits_read() const noexcept { return bits_read_; }
  std::uint64_t index_reads() const noexcept { return index_reads_; }
  std::span<const std::uint64_t> per_bank_bits() const noexcept { return per_bank_bits_; }

  void charge_bits(std::size_t bank, std::uint64_t bits) {
    if (bank >= per_bank_bits_.size()) per_bank_bits_.resize(bank + 1, 0);
    per_bank_bits_[bank] += bits;
    bits_read_ += bits;
  }
  void charge_index_reads(std::uint64_t n) { index_reads_ += n; }

 private:
  std::uint64_t bits_read_ = 0;
  std::uint64_t index_reads_ = 0;
  std::vector<std::uint64_t> per_bank_bits_;
};

/// Bit j of the slice is concept j's element at one column (1 = +1).
class ColumnSlice {
 public:
  explicit ColumnSlice(std::size_t concepts) : bits_((concepts + kWordBits - 1) / kWordBits, 0) {}

  bool bit(std::size_t concept_index) const {
    return (bits_[concept_index / kWordBits] >> (concept_index % kWordBits)) & 1U;
  }
  std::span<const std::uint64_t> words() const noexcept { return bits_; }

  void load(const ItemMemory& mem, std::size_t column) {
    std::fill(bits_.begin(), bits_.end(), 0);
    const auto rows = mem.rows();
    const std::size_t word = column / kWordBits;
    const std::size_t shift = column % kWordBits;
    for (std::size_t j = 0; j < rows.size(); ++j) {
      bits_[j / kWordBits] |= ((rows[j].words()[word] >> shift) & 1U) << (j % kWordBits);
    }
  }

 private:
  std::vector<std::uint64_t> bits_;
};

/// Charges one full streaming pass: M bits for every active column, split by bank.
inline void charge_stream(const ItemMemory& mem, const BankMask& mask, TrafficMeter& meter) {
  mem.require_mask(mask);
  for (std::size_t b = 0; b < mask.banks(); ++b) {
    if (mask.bank_enabled(b)) meter.charge_bits(b, static_cast<std::uint64_t>(mem.concepts()) * mask.bank_width());
  }
}

/// Visits every active column in ascending order with its M-bit slice.
template <typename Visitor>
void stream_columns(const ItemMemory& mem, const BankMask& mask, TrafficMeter& meter, Visitor&& visit) {
  mem.require_mask(mask);
  ColumnSlice slice(mem.concepts());
  for (std::size_t b = 0; b < mask.banks(); ++b) {
    if (!mask.bank_enabled(b)) continue;
    const std::size_t lo = b * mask.bank_width();
    for (std::size_t col = lo; col < lo + mask.bank_width(); ++col) {
      slice.load(mem, col);
      meter.charge_bits(b, mem.concepts());
      visit(col, static_cast<const ColumnSlice&>(slice));
    }
  }
}

/// Sparse access for delta mode: touches only the listed columns.
///
/// Every index is checked against the mask before any traffic is charged.
template <typename Visitor>
void gather_columns(const ItemMemory& mem, const BankMask& mask, std::span<const std::uint32_t> indices,
                    TrafficMeter& meter, Visitor&& visit) {
  mem.require_mask(mask);
  for (auto i : indices) {
    if (i >= mem.dimension()) {
      throw GatingError("column " + std::to_string(i) + " is outside dimension " + std::to_string(mem.dimension()));
    }
    if (!mask.covers(i)) {
      throw GatingError("column " + std::to_string(i) + " lies in disabled bank " +
                        std::to_string(i / mask.bank_width()));
    }
  }
  ColumnSlice slice(mem.concepts());
  for (auto i : indices) {
    slice.load(mem, i);
    meter.charge_bits(i / mask.bank_width(), mem.concepts());
    meter.charge_index_reads(1);
    visit(static_cast<std::size_t>(i), static_cast<const ColumnSlice&>(slice));
  }
}

// File layout: "TORM", u16 version, u32 M, u32 D, u16 B, M x (u16 len + UTF-8 label),
// then M rows of D/64 little-endian words.
inline constexpr std::uint16_t kItemMemoryFormatVersion = 1;

inline void write_item_memory(std::ostream& os, const ItemMemory& mem) {
  detail::write_magic(os, "TORM");
  detail::write_le<std::uint16_t>(os, kItemMemoryFormatVersion);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(mem.concepts()));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(mem.dimension()));
  detail::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(mem.banks()));
  for (const auto& l : mem.labels()) detail::write_string16(os, l);
  for (const auto& r : mem.rows()) write_words(os, r);
}

inline ItemMemory read_item_memory(std::istream& is) {
  detail::expect_magic(is, "TORM");
  const auto version = detail::read_le<std::uint16_t>(is, "version");
  if (version != kItemMemoryFormatVersion) {
    throw FormatError("unsupported item-memory format version " + std::to_string(version));
  }
  const auto m = detail::read_le<std::uint32_t>(is, "M");
  const auto d = detail::read_le<std::uint32_t>(is, "D");
  const auto b = detail::read_le<std::uint16_t>(is, "B");
  if (m == 0) throw ValidationError("item-memory header declares M = 0");
  if (b == 0 || b > 64 || d == 0 || d % (kWordBits * b) != 0) {
    throw ValidationError("item-memory header: D=" + std::to_string(d) + " is not a multiple of 64*B (B=" +
                          std::to_string(b) + ")");
  }
  std::vector<std::string> labels;
  labels.reserve(m);
  for (std::uint32_t j = 0; j < m; ++j) labels.push_back(detail::read_string16(is));
  std::vector<Hypervector> rows;
  rows.reserve(m);
  for (std::uint32_t j = 0; j < m; ++j) rows.push_back(read_words(is, d));
  return ItemMemory(b, std::move(rows), std::move(labels));
}

inline void store(const ItemMemory& mem, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  write_item_memory(os, mem);
}

inline ItemMemory load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open item memory " + path.string());
  return read_item_memory(is);
}

}  // namespace hdalign
