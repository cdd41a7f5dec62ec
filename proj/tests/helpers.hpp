#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <unistd.h>

#include "hdalign/detail/rng.hpp"
#include "hdalign/hypervector.hpp"

namespace hdalign::testing {

/// Plain +-1 elements, read bit by bit.
inline std::vector<int> elems(const Hypervector& v) {
  std::vector<int> out(v.dimension());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ((v.words()[i / 64] >> (i % 64)) & 1U) ? 1 : -1;
  return out;
}

/// Short patterns are repeated to fill 64 positions; cosine and Hamming ratio carry over unchanged.
inline Hypervector tiled(const std::vector<int>& pattern) {
  std::vector<int> full(64);
  for (std::size_t i = 0; i < full.size(); ++i) full[i] = pattern[i % pattern.size()];
  return Hypervector::from_bipolar(full);
}

inline Hypervector flipped(Hypervector v, detail::Rng& rng, std::size_t k, std::size_t limit = 0) {
  const std::size_t n = limit == 0 ? v.dimension() : limit;
  std::vector<bool> used(n, false);
  for (std::size_t f = 0; f < k; ++f) {
    std::size_t i;
    do {
      i = rng.below(n);
    } while (used[i]);
    used[i] = true;
    v.flip(i);
  }
  return v;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("hdalign_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream os(p, std::ios::binary);
  os << bytes;
}

}  // namespace hdalign::testing
