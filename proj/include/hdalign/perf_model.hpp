#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hdalign/errors.hpp"
#include "hdalign/path.hpp"

namespace hdalign {

enum class RtTarget : std::uint8_t { Rt30, Rt60 };

inline std::string_view to_string(RtTarget t) { return t == RtTarget::Rt30 ? "RT-30" : "RT-60"; }

inline RtTarget parse_rt_target(std::string_view s) {
  if (s == "RT-30" || s == "rt30" || s == "30") return RtTarget::Rt30;
  if (s == "RT-60" || s == "rt60" || s == "60") return RtTarget::Rt60;
  throw ConfigError("unknown RT target \"" + std::string(s) + "\" (expected RT-30 or RT-60)");
}

/// Per-frame budget; also the frame period used for energy accounting.
inline double frame_budget_ms(RtTarget t) { return t == RtTarget::Rt30 ? 33.33 : 16.67; }

struct CycleModel {
  double clock_hz = 1.0e9;
  std::size_t lanes = 8;
  std::uint64_t overhead_cycles = 2000;  // control latch, DMA, FSM
  std::size_t psu_word_bits = 64;

  void validate() const {
    if (!(clock_hz > 0.0) || lanes == 0 || psu_word_bits == 0) {
      throw ConfigError("cycle model parameters must be positive");
    }
  }

  std::uint64_t lane_passes(std::size_t concepts) const { return (concepts + lanes - 1) / lanes; }
  double cycles_to_ms(std::uint64_t cycles) const { return static_cast<double>(cycles) / clock_hz * 1.0e3; }
};

/// Critical-path stages of one window; they execute back to back.
struct WindowCycles {
  std::uint64_t psu = 0;
  std::uint64_t aligner = 0;
  std::uint64_t reasoner = 0;
  std::uint64_t overhead = 0;

  std::uint64_t total() const noexcept { return psu + aligner + reasoner + overhead; }
  friend bool operator==(const WindowCycles&, const WindowCycles&) = default;
};

struct WindowWork {
  PathMode mode = PathMode::Full;
  std::size_t effective_dimension = 0;
  std::size_t delta_count = 0;
  std::size_t proposals = 1;   // N
  std::size_t concepts = 0;    // M
  bool reasoner_runs = true;
  std::size_t psu_compares = 1;  // cached lines each proposal is compared against
};

/// Full: N*D'*ceil(M/W); delta: N*|Delta|*ceil(M/W); bypass skips the aligner and reasoner.
/// The PSU runs once per proposal and cached line, the reasoner once per
/// proposal; proposals are serialized on one engine.
inline WindowCycles window_cycles(const WindowWork& w, const CycleModel& cfg) {
  const std::uint64_t passes = cfg.lane_passes(w.concepts);
  const std::uint64_t n = w.proposals;
  WindowCycles c;
  c.overhead = cfg.overhead_cycles;
  c.psu = n * w.psu_compares * ((w.effective_dimension + cfg.psu_word_bits - 1) / cfg.psu_word_bits);
  switch (w.mode) {
    case PathMode::Full: c.aligner = n * w.effective_dimension * passes; break;
    case PathMode::Delta: c.aligner = n * w.delta_count * passes; break;
    case PathMode::Bypass: c.aligner = 0; break;
  }
  c.reasoner = (w.mode != PathMode::Bypass && w.reasoner_runs) ? n * passes : 0;
  return c;
}

inline WindowCycles window_cycles(const PathDecision& d, std::size_t delta_count, std::size_t proposals,
                                  std::size_t concepts, bool reasoner_runs, const CycleModel& cfg) {
  return window_cycles(WindowWork{d.mode, d.effective_dimension(), delta_count, proposals, concepts, reasoner_runs},
                       cfg);
}

enum class Block : std::uint8_t {
  Aligner,
  Reasoner,
  PartialUpdate,
  ScoreBuffer,
  Sorter,
  Controller,
  HostInterface,
  FifoMisc,
  ItemMemory,
  Caches,
};

inline constexpr std::size_t kBlockCount = 10;

inline constexpr std::array<std::string_view, kBlockCount> kBlockNames = {
    "aligner", "reasoner", "partial_update", "score_buffer", "sorter",
    "controller", "host_if", "fifo_misc", "item_memory", "caches"};

inline constexpr std::size_t index_of(Block b) { return static_cast<std::size_t>(b); }

/// Synthesized 28 nm block powers (mW, peak) and areas (mm^2, metadata only).
struct PowerTable {
  std::array<double, kBlockCount> active_mw = {3522.56, 504.32, 220.16, 110.08, 110.08,
                                               55.04,   82.56,  55.04,  120.0,  15.0};
  std::array<double, kBlockCount> area_mm2 = {4.488, 0.642, 0.280, 0.140, 0.140,
                                              0.070, 0.105, 0.070, 0.50,  0.03};
  // Fraction of peak drawn while idle (leakage plus ungated clocking).
  std::array<double, kBlockCount> idle_fraction{};

  static PowerTable with_idle_fraction(double f) {
    PowerTable t;
    t.idle_fraction.fill(f);
    return t;
  }

  double total_mw() const {
    double s = 0.0;
    for (double p : active_mw) s += p;
    return s;
  }

  void validate() const {
    for (std::size_t b = 0; b < kBlockCount; ++b) {
      if (active_mw[b] < 0.0 || area_mm2[b] < 0.0) throw ConfigError("power table entries must be non-negative");
      if (idle_fraction[b] < 0.0 || idle_fraction[b] > 1.0) throw ConfigError("idle fractions must lie in [0, 1]");
    }
  }
};

/// Busy time and switching activity of each block in one window.
struct BlockActivity {
  std::array<std::uint64_t, kBlockCount> active_cycles{};
  std::array<double, kBlockCount> activity{};
};

/// Maps a window's work onto the power blocks. Activity of the aligner and
/// item memory follows the gated width: D'/D in full mode, |Delta|/D in delta mode.
inline BlockActivity block_activity(const WindowWork& w, const WindowCycles& c, std::size_t full_dimension,
                                    const CycleModel& cfg) {
  BlockActivity a;
  const double d = static_cast<double>(full_dimension);
  double width_factor = 0.0;
  if (w.mode == PathMode::Full) width_factor = static_cast<double>(w.effective_dimension) / d;
  if (w.mode == PathMode::Delta) width_factor = static_cast<double>(w.delta_count) / d;
  auto set = [&](Block b, std::uint64_t cycles, double act) {
    a.active_cycles[index_of(b)] = cycles;
    a.activity[index_of(b)] = cycles == 0 ? 0.0 : act;
  };
  set(Block::Aligner, c.aligner, width_factor);
  set(Block::ItemMemory, c.aligner, width_factor);
  set(Block::Reasoner, c.reasoner, 1.0);
  const std::uint64_t pooling = w.mode == PathMode::Bypass ? 0 : w.proposals * cfg.lane_passes(w.concepts);
  set(Block::ScoreBuffer, pooling, 1.0);
  set(Block::Sorter, pooling, 1.0);
  set(Block::PartialUpdate, c.psu, 1.0);
  set(Block::Caches, c.psu, 1.0);
  set(Block::Controller, c.overhead, 1.0);
  set(Block::HostInterface, c.overhead, 1.0);
  set(Block::FifoMisc, w.mode == PathMode::Delta ? c.aligner : 0, 1.0);
  return a;
}

struct WindowEnergy {
  std::array<double, kBlockCount> block_mj{};
  double total_mj = 0.0;
  double mean_power_w = 0.0;
};

/// E_b = P_b * (idle_b * T + (1 - idle_b) * activity_b * t_b).
///
/// The idle share is drawn for the whole frame; switching energy scales with
/// busy time and activity, so energy never decreases with more work.
inline WindowEnergy window_energy(const BlockActivity& act, const PowerTable& table, double frame_period_ms,
                                  const CycleModel& cfg) {
  WindowEnergy e;
  const double period_s = frame_period_ms * 1.0e-3;
  for (std::size_t b = 0; b < kBlockCount; ++b) {
    const double busy_s = static_cast<double>(act.active_cycles[b]) / cfg.clock_hz;
    const double f = table.idle_fraction[b];
    e.block_mj[b] = table.active_mw[b] * (f * period_s + (1.0 - f) * act.activity[b] * busy_s);
    e.total_mj += e.block_mj[b];
  }
  e.mean_power_w = e.total_mj / frame_period_ms;
  return e;
}

/// Single idle fraction for every block such that the windows' mean power hits `target_w`.
/// Energy is affine in the idle fraction, so the fit is closed form.
inline double fit_idle_fraction(std::span<const BlockActivity> windows, std::span<const double> frame_periods_ms,
                                const PowerTable& table, const CycleModel& cfg, double target_w) {
  if (windows.empty() || windows.size() != frame_periods_ms.size()) {
    throw ValidationError("idle-fraction fit needs one frame period per window");
  }
  double dynamic_mj = 0.0;  // sum P a t
  double slope_mj = 0.0;    // sum P (T - a t)
  double period_ms = 0.0;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const double period_s = frame_periods_ms[w] * 1.0e-3;
    period_ms += frame_periods_ms[w];
    for (std::size_t b = 0; b < kBlockCount; ++b) {
      const double at = windows[w].activity[b] * static_cast<double>(windows[w].active_cycles[b]) / cfg.clock_hz;
      dynamic_mj += table.active_mw[b] * at;
      slope_mj += table.active_mw[b] * (period_s - at);
    }
  }
  const double f = (target_w * period_ms - dynamic_mj) / slope_mj;
  return std::clamp(f, 0.0, 1.0);
}

struct LatencyStats {
  double median_ms = 0.0;
  double p95_ms = 0.0;
  double jitter_ms = 0.0;    // p95 - median
  double headroom_ms = 0.0;  // budget - p95
  double min_ms = 0.0;
  double max_ms = 0.0;
  double mean_power_w = 0.0;
  double energy_mj = 0.0;    // mean per frame
  std::size_t windows = 0;
};

/// Nearest-rank percentile, pct in (0, 100].
inline double nearest_rank(std::span<const double> sorted, unsigned pct) {
  const std::size_t n = sorted.size();
  std::size_t rank = (pct * n + 99) / 100;
  rank = std::clamp<std::size_t>(rank, 1, n);
  return sorted[rank - 1];
}

inline LatencyStats summarize(std::span<const double> latencies_ms, std::span<const double> energies_mj,
                              double budget_ms, double frame_period_ms) {
  if (latencies_ms.empty()) throw ValidationError("cannot summarize an empty window sequence");
  if (energies_mj.size() != latencies_ms.size()) throw ValidationError("latency and energy counts differ");
  std::vector<double> sorted(latencies_ms.begin(), latencies_ms.end());
  std::sort(sorted.begin(), sorted.end());
  LatencyStats s;
  s.windows = sorted.size();
  s.median_ms = nearest_rank(sorted, 50);
  s.p95_ms = nearest_rank(sorted, 95);
  s.jitter_ms = s.p95_ms - s.median_ms;
  s.headroom_ms = budget_ms - s.p95_ms;
  s.min_ms = sorted.front();
  s.max_ms = sorted.back();
  double e = 0.0;
  for (double v : energies_mj) e += v;
  s.energy_mj = e / static_cast<double>(energies_mj.size());
  s.mean_power_w = s.energy_mj / frame_period_ms;
  return s;
}

}  // namespace hdalign
