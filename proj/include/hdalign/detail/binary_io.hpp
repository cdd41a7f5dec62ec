#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "hdalign/errors.hpp"

namespace hdalign::detail {

// Fixed little-endian encoding independent of host byte order.
template <typename UInt>
void write_le(std::ostream& os, UInt value) {
  std::array<char, sizeof(UInt)> buf{};
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    buf[i] = static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xffU);
  }
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

template <typename UInt>
UInt read_le(std::istream& is, std::string_view what) {
  std::array<unsigned char, sizeof(UInt)> buf{};
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (is.gcount() != static_cast<std::streamsize>(buf.size())) {
    throw FormatError("truncated input while reading " + std::string(what));
  }
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return static_cast<UInt>(v);
}

inline void write_magic(std::ostream& os, std::string_view magic) {
  os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void expect_magic(std::istream& is, std::string_view magic) {
  std::array<char, 8> buf{};
  is.read(buf.data(), static_cast<std::streamsize>(magic.size()));
  if (is.gcount() != static_cast<std::streamsize>(magic.size())) {
    throw FormatError("truncated header: missing magic \"" + std::string(magic) + "\"");
  }
  if (std::string_view(buf.data(), magic.size()) != magic) {
    throw FormatError("bad magic: expected \"" + std::string(magic) + "\"");
  }
}

inline void write_string16(std::ostream& os, std::string_view s) {
  if (s.size() > 0xffffU) throw ValidationError("string longer than 65535 bytes");
  write_le<std::uint16_t>(os, static_cast<std::uint16_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string16(std::istream& is) {
  const auto len = read_le<std::uint16_t>(is, "string length");
  std::string s(len, '\0');
  is.read(s.data(), len);
  if (is.gcount() != len) throw FormatError("truncated string payload");
  return s;
}

}  // namespace hdalign::detail
