#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "hdalign/controller.hpp"
#include "hdalign/detail/binary_io.hpp"
#include "hdalign/detail/rng.hpp"
#include "hdalign/errors.hpp"
#include "hdalign/hypervector.hpp"
#include "hdalign/item_memory.hpp"

namespace hdalign {

// ---------------------------------------------------------------------------
// DVS event windows

struct Event {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::uint64_t t_us = 0;
  std::int8_t polarity = 1;  // -1 or +1
};

struct SensorBounds {
  std::size_t width = 128;
  std::size_t height = 128;
};

struct EventWindow {
  std::uint64_t t0_us = 0;
  std::uint64_t width_us = 0;
  SensorBounds bounds;
  std::vector<std::int32_t> accumulated;  // row-major, polarity sums
  std::vector<double> normalized;         // accumulated / (max |accumulated| + eps)

  std::int32_t at(std::size_t x, std::size_t y) const { return accumulated[y * bounds.width + x]; }
  double normalized_at(std::size_t x, std::size_t y) const { return normalized[y * bounds.width + x]; }
};

inline constexpr double kDefaultEventEpsilon = 1e-6;

/// Sums polarities per pixel over [t0, t0 + width) and normalizes by the peak magnitude.
inline EventWindow accumulate(std::span<const Event> events, std::uint64_t t0_us, std::uint64_t width_us,
                              SensorBounds bounds = {}, double epsilon = kDefaultEventEpsilon) {
  if (width_us == 0) throw ValidationError("event window width must be positive");
  EventWindow w{t0_us, width_us, bounds, std::vector<std::int32_t>(bounds.width * bounds.height, 0), {}};
  for (const Event& e : events) {
    if (e.t_us < t0_us || e.t_us >= t0_us + width_us) continue;
    if (e.x >= bounds.width || e.y >= bounds.height) {
      throw ValidationError("event at (" + std::to_string(e.x) + ", " + std::to_string(e.y) +
                            ") lies outside the sensor");
    }
    w.accumulated[static_cast<std::size_t>(e.y) * bounds.width + e.x] += e.polarity;
  }
  std::int32_t peak = 0;
  for (auto v : w.accumulated) peak = std::max(peak, std::abs(v));
  w.normalized.resize(w.accumulated.size());
  const double denom = static_cast<double>(peak) + epsilon;
  for (std::size_t i = 0; i < w.accumulated.size(); ++i) w.normalized[i] = w.accumulated[i] / denom;
  return w;
}

// ---------------------------------------------------------------------------
// Task profiles and HV-space query streams

/// Temporal-coherence model of one task prompt. Rates are per 60 FPS window.
struct TaskProfile {
  std::string name;
  double flip_rate = 0.01;          // mean fraction of D flipped between consecutive windows
  double flip_spread = 0.3;         // log-normal sigma of the per-window flip rate
  double base_perturbation = 0.03;  // fraction of D by which a query differs from its concept
  double dwell_windows = 200.0;     // mean windows before the scene moves to another concept
  std::vector<std::size_t> concepts;  // schedule pool; empty means every concept
  double objects_mean = 8.0;
  double objects_swing = 2.0;   // sinusoidal amplitude
  double objects_period = 240.0;
  double objects_noise = 1.0;
  std::size_t objects_min = 1;
  std::size_t objects_max = 16;
  double arrival_rate = 0.3;    // mean queued frames arriving per window
  std::size_t queue_max = 8;

  void validate() const {
    auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in01(flip_rate) || !in01(base_perturbation)) throw ConfigError(name + ": flip rates must lie in [0, 1]");
    if (flip_spread < 0.0) throw ConfigError(name + ": flip_spread must be non-negative");
    if (!(dwell_windows >= 1.0)) throw ConfigError(name + ": dwell_windows must be at least 1");
    if (objects_min > objects_max) throw ConfigError(name + ": objects_min exceeds objects_max");
    if (objects_max > 0xffff || queue_max > 0xffff) throw ConfigError(name + ": load values must fit in 16 bits");
    if (arrival_rate < 0.0 || arrival_rate > 2.0) throw ConfigError(name + ": arrival_rate must lie in [0, 2]");
  }

  /// Same scene sampled with windows `ratio` times longer.
  TaskProfile rescaled(double ratio) const {
    TaskProfile p = *this;
    p.flip_rate = std::min(0.5, flip_rate * ratio);
    p.dwell_windows = std::max(1.0, dwell_windows / ratio);
    return p;
  }
};

/// Window-length ratio of a target relative to the 60 FPS reference.
inline double window_scale(RtTarget t) { return frame_budget_ms(t) / frame_budget_ms(RtTarget::Rt60); }

/// The five shipped prompts, steadiest first.
inline std::vector<TaskProfile> default_profiles() {
  std::vector<TaskProfile> p(5);
  p[0] = {"have-breakfast", 0.005, 0.3, 0.03, 400.0, {}, 6.0, 2.0, 240.0, 1.0, 2, 10, 0.30, 8};
  p[1] = {"take-a-rest", 0.006, 0.3, 0.03, 350.0, {}, 7.0, 2.0, 260.0, 1.0, 3, 11, 0.30, 8};
  p[2] = {"cooking", 0.012, 0.5, 0.03, 150.0, {}, 12.0, 4.0, 200.0, 2.0, 4, 22, 0.50, 8};
  p[3] = {"pour-wine", 0.020, 0.6, 0.03, 60.0, {}, 16.0, 5.0, 180.0, 3.0, 5, 30, 0.60, 8};
  p[4] = {"sports", 0.025, 0.7, 0.03, 40.0, {}, 22.0, 8.0, 150.0, 4.0, 6, 40, 0.70, 8};
  return p;
}

struct StreamWindow {
  Hypervector query;
  LoadSample load;
  std::size_t concept_index = 0;
};

namespace detail {

// Positions where the query currently differs from its concept.
class NoiseSet {
 public:
  explicit NoiseSet(std::size_t dimension) : where_(dimension, -1) {}

  std::size_t size() const noexcept { return members_.size(); }

  void clear() {
    for (auto m : members_) where_[m] = -1;
    members_.clear();
  }

  void add_random(Rng& rng, Hypervector& q) {
    std::uint32_t pos;
    do {
      pos = static_cast<std::uint32_t>(rng.below(where_.size()));
    } while (where_[pos] >= 0);
    where_[pos] = static_cast<std::int32_t>(members_.size());
    members_.push_back(pos);
    q.flip(pos);
  }

  void remove_random(Rng& rng, Hypervector& q) {
    const std::size_t k = rng.below(members_.size());
    const std::uint32_t pos = members_[k];
    members_[k] = members_.back();
    where_[members_[k]] = static_cast<std::int32_t>(k);
    members_.pop_back();
    where_[pos] = -1;
    q.flip(pos);
  }

 private:
  std::vector<std::int32_t> where_;
  std::vector<std::uint32_t> members_;
};

}  // namespace detail

/// Deterministic HV-space query stream.
///
/// Each scene starts from its concept row with a fixed fraction of bits
/// flipped; every window then flips k fresh positions, split between healing
/// existing noise and adding new noise so the distance to the concept stays
/// near its base level. Consecutive queries therefore differ in exactly k bits.
inline std::vector<StreamWindow> generate_stream(const TaskProfile& profile, const ItemMemory& mem,
                                                 std::size_t windows, std::uint64_t seed) {
  profile.validate();
  detail::Rng rng(detail::hash_combine(seed, detail::hash_string(profile.name)));
  const std::size_t d = mem.dimension();
  std::vector<std::size_t> pool = profile.concepts;
  if (pool.empty()) {
    pool.resize(mem.concepts());
    for (std::size_t j = 0; j < pool.size(); ++j) pool[j] = j;
  }
  for (auto c : pool) {
    if (c >= mem.concepts()) throw ConfigError(profile.name + ": concept " + std::to_string(c) + " out of range");
  }
  const auto base_noise = static_cast<std::size_t>(std::llround(profile.base_perturbation * static_cast<double>(d)));
  const double switch_prob = 1.0 / profile.dwell_windows;
  const double phase = rng.uniform() * 2.0 * std::numbers::pi;
  const double sigma = profile.flip_spread;

  std::vector<StreamWindow> out;
  out.reserve(windows);
  detail::NoiseSet noise(d);
  Hypervector q(d);
  std::size_t concept_index = pool[rng.below(pool.size())];
  std::size_t queue = 0;

  auto start_scene = [&](std::size_t c) {
    concept_index = c;
    q = mem.row(c);
    noise.clear();
    for (std::size_t i = 0; i < base_noise; ++i) noise.add_random(rng, q);
  };
  start_scene(concept_index);

  for (std::size_t t = 0; t < windows; ++t) {
    if (t > 0) {
      if (pool.size() > 1 && rng.bernoulli(switch_prob)) {
        std::size_t next = concept_index;
        while (next == concept_index) next = pool[rng.below(pool.size())];
        start_scene(next);
      } else {
        const double rate = profile.flip_rate * std::exp(sigma * rng.normal() - 0.5 * sigma * sigma);
        auto k = static_cast<std::int64_t>(std::llround(std::min(rate, 0.5) * static_cast<double>(d)));
        const auto noisy = static_cast<std::int64_t>(noise.size());
        const auto excess = noisy - static_cast<std::int64_t>(base_noise);
        std::int64_t heal = std::clamp<std::int64_t>((k + excess) / 2, 0, std::min(k, noisy));
        std::int64_t grow = k - heal;
        grow = std::min<std::int64_t>(grow, static_cast<std::int64_t>(d) - noisy);
        for (std::int64_t i = 0; i < heal; ++i) noise.remove_random(rng, q);
        for (std::int64_t i = 0; i < grow; ++i) noise.add_random(rng, q);
      }
    }
    const double swing = profile.objects_swing *
                         std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / profile.objects_period + phase);
    const double n_real = profile.objects_mean + swing + profile.objects_noise * rng.normal();
    const auto n = static_cast<std::size_t>(std::clamp<double>(std::round(n_real),
                                                               static_cast<double>(profile.objects_min),
                                                               static_cast<double>(profile.objects_max)));
    const std::size_t arrivals = static_cast<std::size_t>(rng.bernoulli(profile.arrival_rate / 2.0)) +
                                 static_cast<std::size_t>(rng.bernoulli(profile.arrival_rate / 2.0));
    queue = std::min(profile.queue_max, (queue + arrivals > 0) ? queue + arrivals - 1 : 0);
    out.push_back(StreamWindow{q, LoadSample{n, queue}, concept_index});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trace files: "TORT", u16 version, u32 D, u32 windows, then per window the
// query words (headerless), N u16, q u16, ground-truth concept u16.

inline constexpr std::uint16_t kTraceFormatVersion = 1;

struct Trace {
  std::size_t dimension = 0;
  std::vector<StreamWindow> windows;
};

inline void write_trace(std::ostream& os, std::size_t dimension, std::span<const StreamWindow> windows) {
  detail::write_magic(os, "TORT");
  detail::write_le<std::uint16_t>(os, kTraceFormatVersion);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(dimension));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(windows.size()));
  for (const auto& w : windows) {
    if (w.query.dimension() != dimension) throw DimensionError("trace window has the wrong query dimension");
    if (w.load.objects > 0xffff || w.load.queue_depth > 0xffff || w.concept_index > 0xffff) {
      throw ValidationError("trace fields must fit in 16 bits");
    }
    write_words(os, w.query);
    detail::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(w.load.objects));
    detail::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(w.load.queue_depth));
    detail::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(w.concept_index));
  }
}

inline Trace read_trace(std::istream& is) {
  detail::expect_magic(is, "TORT");
  const auto version = detail::read_le<std::uint16_t>(is, "version");
  if (version != kTraceFormatVersion) throw FormatError("unsupported trace format version " + std::to_string(version));
  Trace t;
  t.dimension = detail::read_le<std::uint32_t>(is, "D");
  if (t.dimension == 0 || t.dimension % kWordBits != 0) throw FormatError("trace dimension must be a multiple of 64");
  const auto count = detail::read_le<std::uint32_t>(is, "window count");
  t.windows.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Hypervector q = read_words(is, t.dimension);
    const auto n = detail::read_le<std::uint16_t>(is, "N");
    const auto qd = detail::read_le<std::uint16_t>(is, "q");
    const auto c = detail::read_le<std::uint16_t>(is, "concept");
    t.windows.push_back(StreamWindow{std::move(q), LoadSample{n, qd}, c});
  }
  return t;
}

inline void save_trace(const std::filesystem::path& path, std::size_t dimension,
                       std::span<const StreamWindow> windows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  write_trace(os, dimension, windows);
}

inline Trace load_trace(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open trace " + path.string());
  return read_trace(is);
}

}  // namespace hdalign
