#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hdalign/alignment.hpp"
#include "hdalign/controller.hpp"
#include "hdalign/detail/rng.hpp"
#include "hdalign/hypervector.hpp"
#include "hdalign/item_memory.hpp"
#include "hdalign/perf_model.hpp"
#include "hdalign/workload.hpp"

// Self-checks against independent reference computations. The oracles here
// work on plain int vectors and element loops and never call the kernels they check.
namespace hdalign::verify {

struct CheckResult {
  explicit CheckResult(std::string check = {}) : name(std::move(check)) {}

  std::string name;
  bool passed = true;
  std::uint64_t cases = 0;
  double worst = 0.0;  // largest observed error, check-specific unit
  std::string detail;

  void fail(const std::string& why) {
    if (passed) detail = why;
    passed = false;
  }
};

namespace oracle {

inline std::vector<int> elements(const Hypervector& v) {
  std::vector<int> out(v.dimension());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v.bit(i) ? 1 : -1;
  return out;
}

inline std::vector<bool> coverage(const BankMask& m) {
  std::vector<bool> on(m.dimension(), false);
  for (std::size_t i = 0; i < on.size(); ++i) on[i] = m.bank_enabled(i / m.bank_width());
  return on;
}

inline std::int64_t dot(const std::vector<int>& a, const std::vector<int>& b, const std::vector<bool>& on) {
  std::int64_t s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (on[i]) s += a[i] * b[i];
  }
  return s;
}

inline std::vector<std::int64_t> scores(const Hypervector& q, const ItemMemory& mem, const BankMask& mask) {
  const auto qe = elements(q);
  const auto on = coverage(mask);
  std::vector<std::int64_t> out(mem.concepts());
  for (std::size_t j = 0; j < mem.concepts(); ++j) out[j] = dot(qe, elements(mem.row(j)), on);
  return out;
}

// Controller rules written out independently of controller.hpp.
struct Decision {
  PathMode mode;
  std::size_t d_eff;
  bool overrun;
};

inline Decision decide(double rho, std::size_t n, std::size_t q, const PolicyConfig& p, const CycleModel& c,
                       std::size_t dimension, std::size_t banks, std::size_t concepts) {
  PathMode mode = PathMode::Full;
  const bool busy = n >= p.high_objects || q >= p.high_queue;
  if (p.bypass_enabled && busy && rho >= p.bypass_threshold) {
    mode = PathMode::Bypass;
  } else if (rho >= p.delta_threshold) {
    mode = PathMode::Delta;
  }
  std::vector<std::size_t> ladder = p.ladder;
  if (ladder.empty()) {
    for (std::size_t k = banks; k >= 1; k /= 2) {
      if (std::has_single_bit(k)) ladder.push_back(k * (dimension / banks));
    }
  }
  const std::uint64_t passes = (concepts + c.lanes - 1) / c.lanes;
  const double budget = p.rt_target == RtTarget::Rt30 ? 33.33 : 16.67;
  for (std::size_t d : ladder) {
    const std::uint64_t psu = n * p.cache_depth * ((d + c.psu_word_bits - 1) / c.psu_word_bits);
    const std::uint64_t one = n * d * passes + n * passes + psu + c.overhead_cycles;
    const double ms = static_cast<double>((1 + q) * one) * 1000.0 / c.clock_hz;
    if (ms <= budget) return {mode, d, false};
  }
  return {mode, ladder.back(), true};
}

}  // namespace oracle

namespace detail {

// A 16-element pattern repeated four times fills one 64-bit word. Cosine,
// Hamming fraction and binding of the tiled vectors equal those of the patterns.
inline Hypervector tile16(std::uint16_t pattern) {
  const std::uint64_t p = pattern;
  return Hypervector(64, {p | (p << 16) | (p << 32) | (p << 48)});
}

inline std::vector<int> elements16(std::uint16_t pattern) {
  std::vector<int> out(16);
  for (int i = 0; i < 16; ++i) out[i] = ((pattern >> i) & 1U) ? 1 : -1;
  return out;
}

inline double cosine16(std::uint16_t a, std::uint16_t b) {
  const auto ea = elements16(a);
  const auto eb = elements16(b);
  int s = 0;
  for (int i = 0; i < 16; ++i) s += ea[i] * eb[i];
  return s / 16.0;
}

inline std::vector<BankMask> legal_masks(std::size_t dimension, std::size_t banks) {
  std::vector<BankMask> out;
  for (std::size_t k = banks; k >= 1; k /= 2) {
    out.push_back(BankMask::leading(dimension, banks, k));
    if (k == 1) break;
  }
  return out;
}

// Distinct positions inside a leading mask, drawn by partial Fisher-Yates
// over a reused permutation of [0, D').
class PositionSampler {
 public:
  std::vector<std::uint32_t> draw(hdalign::detail::Rng& rng, const BankMask& mask, std::size_t k) {
    const std::size_t d_eff = mask.effective_dimension();
    if (pool_.size() != d_eff) {
      pool_.resize(d_eff);
      for (std::size_t i = 0; i < d_eff; ++i) pool_[i] = static_cast<std::uint32_t>(i);
    }
    k = std::min(k, d_eff);
    for (std::size_t i = 0; i < k; ++i) std::swap(pool_[i], pool_[i + rng.below(d_eff - i)]);
    return {pool_.begin(), pool_.begin() + static_cast<std::ptrdiff_t>(k)};
  }

 private:
  std::vector<std::uint32_t> pool_;
};

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace detail

struct DeltaSweep {
  std::size_t streams = 100;
  std::size_t windows = 1000;
  double max_flip_rate = 0.10;
  std::uint64_t seed = 1;
};

/// Iterated delta updates against a fresh full scan of the final query.
inline CheckResult delta_exactness(const DeltaSweep& opt = {}, const DeltaFault* fault = nullptr) {
  CheckResult r{"delta-exactness"};
  const std::array<std::size_t, 2> dims = {256, 8192};
  const std::array<std::size_t, 2> concepts = {8, 80};
  for (std::size_t s = 0; s < opt.streams; ++s) {
    const std::size_t d = dims[s % 2];
    const std::size_t m = concepts[(s / 2) % 2];
    const std::size_t banks = std::min<std::size_t>(16, d / 64);
    const double rate = opt.streams > 1 ? opt.max_flip_rate * static_cast<double>(s) / (opt.streams - 1) : 0.0;
    hdalign::detail::Rng rng(hdalign::detail::hash_combine(opt.seed, s));
    const ItemMemory mem = ItemMemory::random(m, d, banks, rng.next());
    const BankMask mask = mem.full_mask();
    TrafficMeter meter(banks);
    detail::PositionSampler sampler;
    const auto k = static_cast<std::size_t>(std::llround(rate * static_cast<double>(d)));
    Hypervector q = Hypervector::random(d, rng);
    ScoreState state = full_scan(q, mem, mask, Precision::Exact, meter);
    for (std::size_t t = 1; t < opt.windows; ++t) {
      Hypervector next = q;
      for (auto i : sampler.draw(rng, mask, k)) next.flip(i);
      const PsuResult psu = psu_compare(next, q, mask, d);
      state = delta_update(std::move(state), next, psu.delta, mem, mask, meter, fault);
      q = std::move(next);
    }
    const ScoreState fresh = full_scan(q, mem, mask, Precision::Exact, meter);
    const auto reference = oracle::scores(q, mem, mask);
    for (std::size_t j = 0; j < m; ++j) {
      const auto err = static_cast<double>(std::llabs(state.raw[j] - fresh.raw[j]));
      r.worst = std::max(r.worst, err);
      if (err != 0.0) r.fail("stream " + std::to_string(s) + " concept " + std::to_string(j) + " drifted by " +
                             detail::fmt(err));
      if (fresh.raw[j] != reference[j]) r.fail("full scan disagrees with the element-loop reference");
    }
    if (!(state.baseline == q)) r.fail("accumulator baseline is not the last query");
    r.cases += opt.windows;
  }
  return r;
}

/// rho from the PSU against 1 - 2|Delta|/D' and an element-loop cosine.
inline CheckResult similarity_gate(std::size_t random_cases = 10000, std::size_t tiled_bases = 16,
                                   std::uint64_t seed = 2) {
  CheckResult r{"similarity-gate"};
  hdalign::detail::Rng rng(seed);
  detail::PositionSampler sampler;
  const BankMask m64 = BankMask::full(64, 1);
  for (std::size_t b = 0; b < tiled_bases; ++b) {
    std::uint16_t base = 0;
    if (b == 1) base = 0xffff;
    if (b > 1) base = static_cast<std::uint16_t>(rng.below(1U << 16));
    const Hypervector cached = detail::tile16(base);
    for (std::uint32_t p = 0; p < (1U << 16); ++p) {
      const auto cur16 = static_cast<std::uint16_t>(base ^ p);
      const PsuResult psu = psu_compare(detail::tile16(cur16), cached, m64, 64);
      const double expected = 1.0 - 2.0 * std::popcount(p) / 16.0;
      const double reference = detail::cosine16(cur16, base);
      r.worst = std::max({r.worst, std::abs(psu.rho - expected), std::abs(psu.rho - reference)});
      if (psu.rho != expected || psu.rho != reference || psu.delta.size() != 4U * std::popcount(p)) {
        r.fail("D'=16 pattern " + std::to_string(p) + " on base " + std::to_string(base));
      }
      ++r.cases;
    }
  }
  const auto masks = detail::legal_masks(8192, 16);
  for (std::size_t c = 0; c < random_cases; ++c) {
    const BankMask& mask = masks[rng.below(masks.size())];
    const Hypervector cached = Hypervector::random(8192, rng);
    Hypervector cur = cached;
    const std::size_t k = rng.below(mask.effective_dimension() + 1);
    for (auto i : sampler.draw(rng, mask, k)) cur.flip(i);
    const PsuResult psu = psu_compare(cur, cached, mask, 8192);
    const double d_eff = static_cast<double>(mask.effective_dimension());
    const double expected = 1.0 - 2.0 * static_cast<double>(k) / d_eff;
    const double reference =
        static_cast<double>(oracle::dot(oracle::elements(cur), oracle::elements(cached), oracle::coverage(mask))) /
        d_eff;
    r.worst = std::max({r.worst, std::abs(psu.rho - expected), std::abs(psu.rho - reference)});
    if (psu.rho != expected || psu.rho != reference || psu.delta.size() != k) {
      r.fail("D'=" + std::to_string(mask.effective_dimension()) + " with " + std::to_string(k) + " flips");
    }
    ++r.cases;
  }
  return r;
}

/// select_path/decide against the transcribed rules on the threshold-boundary grid.
inline CheckResult policy_table(const PolicyConfig& base = {}, const CycleModel& perf = {},
                                MemoryShape shape = {80, 8192, 16}) {
  CheckResult r{"policy-truth-table"};
  const double eps = 1.0 / 1024.0;
  for (RtTarget rt : {RtTarget::Rt60, RtTarget::Rt30}) {
    for (bool bypass : {true, false}) {
      PolicyConfig p = base;
      p.rt_target = rt;
      p.bypass_enabled = bypass;
      const std::vector<double> rhos = {-1.0, p.delta_threshold - eps, p.delta_threshold,
                                        p.bypass_threshold - eps, p.bypass_threshold, 1.0};
      const std::vector<std::size_t> ns = {0, 1, p.high_objects - 1, p.high_objects, p.high_objects + 1, 64};
      const std::vector<std::size_t> qs = {0, p.high_queue - 1, p.high_queue, p.high_queue + 1, 8, 32};
      for (double rho : rhos) {
        for (std::size_t n : ns) {
          for (std::size_t q : qs) {
            const LoadSample load{n, q};
            const PathDecision got = decide(rho, load, p, perf, shape);
            const auto want = oracle::decide(rho, n, q, p, perf, shape.dimension, shape.banks, shape.concepts);
            ++r.cases;
            if (got.mode != want.mode || got.effective_dimension() != want.d_eff ||
                got.budget_overrun != want.overrun) {
              r.worst += 1.0;
              r.fail("rho=" + detail::fmt(rho) + " N=" + std::to_string(n) + " q=" + std::to_string(q) + " " +
                     std::string(to_string(rt)) + ": got " + std::string(to_string(got.mode)) + "/D'=" +
                     std::to_string(got.effective_dimension()) + ", want " + std::string(to_string(want.mode)) +
                     "/D'=" + std::to_string(want.d_eff));
            }
          }
        }
      }
    }
  }
  return r;
}

/// Drives the functional aligner column by column and clocks one cycle per
/// lane group per column, then compares with the closed-form cycle model.
inline CheckResult cycle_conformance(std::uint64_t seed = 4) {
  CheckResult r{"cycle-model"};
  hdalign::detail::Rng rng(seed);
  detail::PositionSampler sampler;
  const std::size_t d = 8192;
  const std::size_t banks = 16;
  for (std::size_t m = 8; m <= 80; m += 8) {
    const ItemMemory mem = ItemMemory::random(m, d, banks, rng.next());
    for (std::size_t d_eff = 512; d_eff <= d; d_eff *= 2) {
      const BankMask mask = BankMask::with_effective_dimension(d, banks, d_eff);
      for (std::size_t lanes : {4, 8, 16}) {
        CycleModel cfg;
        cfg.lanes = lanes;
        auto clock_column = [&](std::uint64_t& cycles) {
          for (std::size_t lane0 = 0; lane0 < m; lane0 += lanes) ++cycles;
        };
        TrafficMeter meter(banks);
        std::uint64_t full = 0;
        stream_columns(mem, mask, meter, [&](std::size_t, const ColumnSlice&) { clock_column(full); });
        const auto model_full = window_cycles(WindowWork{PathMode::Full, d_eff, 0, 1, m, true}, cfg).aligner;
        ++r.cases;
        if (full != model_full) {
          r.worst = std::max(r.worst, std::abs(static_cast<double>(full) - static_cast<double>(model_full)));
          r.fail("full D'=" + std::to_string(d_eff) + " M=" + std::to_string(m) + " W=" + std::to_string(lanes));
        }
        for (std::size_t k : {std::size_t{0}, std::size_t{1}, std::size_t{2}, d_eff / 64, d_eff / 8, d_eff / 4,
                              d_eff / 2, d_eff - 1, d_eff}) {
          const auto idx = sampler.draw(rng, mask, k);
          std::uint64_t delta = 0;
          gather_columns(mem, mask, idx, meter, [&](std::size_t, const ColumnSlice&) { clock_column(delta); });
          const auto model = window_cycles(WindowWork{PathMode::Delta, d_eff, k, 1, m, true}, cfg).aligner;
          ++r.cases;
          if (delta != model) {
            r.worst = std::max(r.worst, std::abs(static_cast<double>(delta) - static_cast<double>(model)));
            r.fail("delta |D|=" + std::to_string(k) + " D'=" + std::to_string(d_eff) + " M=" + std::to_string(m) +
                   " W=" + std::to_string(lanes));
          }
        }
      }
    }
  }
  return r;
}

/// Item-memory bits and index reads per path.
inline CheckResult traffic_conformance(std::uint64_t seed = 5) {
  CheckResult r{"traffic"};
  hdalign::detail::Rng rng(seed);
  detail::PositionSampler sampler;
  auto expect = [&](std::uint64_t got, std::uint64_t want, const std::string& what) {
    ++r.cases;
    if (got != want) {
      r.worst = std::max(r.worst, std::abs(static_cast<double>(got) - static_cast<double>(want)));
      r.fail(what + ": " + std::to_string(got) + " != " + std::to_string(want));
    }
  };
  for (std::size_t d : {256, 8192}) {
    const std::size_t banks = std::min<std::size_t>(16, d / 64);
    for (std::size_t m : {8, 80}) {
      const ItemMemory mem = ItemMemory::random(m, d, banks, rng.next());
      for (const auto& mask : detail::legal_masks(d, banks)) {
        const std::size_t d_eff = mask.effective_dimension();
        TrafficMeter meter(banks);
        const Hypervector q = Hypervector::random(d, rng);
        const ScoreState s = full_scan(q, mem, mask, Precision::Exact, meter);
        expect(meter.bits_read(), m * d_eff, "full bits");
        expect(meter.index_reads(), 0, "full index reads");
        for (std::size_t k : {std::size_t{0}, std::size_t{1}, d_eff / 16, d_eff / 8}) {
          Hypervector next = q;
          for (auto i : sampler.draw(rng, mask, k)) next.flip(i);
          TrafficMeter dm(banks);
          delta_update(s, next, psu_compare(next, q, mask, d).delta, mem, mask, dm);
          expect(dm.bits_read(), m * k, "delta bits");
          expect(dm.index_reads(), k, "delta index reads");
        }
      }
    }
  }
  // A bypassed window touches no item-memory rows.
  const ItemMemory mem = ItemMemory::random(80, 8192, 16, rng.next());
  TaskContext task("probe", {}, Hypervector::random(8192, rng));
  Engine engine(mem, task, PolicyConfig{}, CycleModel{}, PowerTable::with_idle_fraction(0.5));
  const Hypervector q = Hypervector::random(8192, rng);
  engine.step_window(q, LoadSample{2, 0});
  const WindowReport byp = engine.step_window(q, LoadSample{64, 0});
  if (byp.mode != PathMode::Bypass) r.fail("repeat query under high load did not bypass");
  expect(byp.bits_read, 0, "bypass bits");
  expect(byp.index_reads, 0, "bypass index reads");
  return r;
}

/// |cos(q,h) - cos(q',h)| <= 2|Delta|/D'.
///
/// The D'=16 sweep fixes q = +1 and covers every (q', h) pair; binding all
/// three by a common vector maps any triple onto one of these without
/// changing either cosine.
inline CheckResult bypass_bound(std::size_t random_cases = 100000, std::uint64_t seed = 6) {
  CheckResult r{"bypass-error-bound"};
  const BankMask m64 = BankMask::full(64, 1);
  const Hypervector q = detail::tile16(0xffff);
  // Cosines at D'=16 are multiples of 1/16; the table holds them scaled to integers.
  std::vector<std::int8_t> cos_q(1U << 16);
  for (std::uint32_t h = 0; h < (1U << 16); ++h) {
    const double c = cosine(q, detail::tile16(static_cast<std::uint16_t>(h)), m64);
    cos_q[h] = static_cast<std::int8_t>(std::lround(c * 16.0));
    if (cos_q[h] / 16.0 != c) r.fail("cosine at D'=16 is not a multiple of 1/16");
  }
  double worst = 0.0;
  std::uint64_t violations = 0;
  for (std::uint32_t qp = 0; qp < (1U << 16); ++qp) {
    const int bound = 2 * (16 - std::popcount(qp));  // 2|Delta|/D', scaled by 16
    int local = -bound;
    std::uint32_t over = 0;
    for (std::uint32_t h = 0; h < (1U << 16); ++h) {
      // cos(q', h) = cos(+1, q' (.) h)
      const int diff = std::abs(cos_q[h] - cos_q[(~(qp ^ h)) & 0xffffU]);
      local = std::max(local, diff - bound);
      over += diff > bound ? 1U : 0U;
    }
    worst = std::max(worst, local / 16.0);
    violations += over;
  }
  r.cases += std::uint64_t{1} << 32;
  hdalign::detail::Rng rng(seed);
  detail::PositionSampler sampler;
  const auto masks = detail::legal_masks(8192, 16);
  for (std::size_t c = 0; c < random_cases; ++c) {
    const BankMask& mask = masks[rng.below(masks.size())];
    const Hypervector a = Hypervector::random(8192, rng);
    const Hypervector h = Hypervector::random(8192, rng);
    Hypervector b = a;
    const std::size_t k = rng.below(mask.effective_dimension() / 4 + 1);
    for (auto i : sampler.draw(rng, mask, k)) b.flip(i);
    const double bound = 2.0 * static_cast<double>(k) / static_cast<double>(mask.effective_dimension());
    const double diff = std::abs(cosine(a, h, mask) - cosine(b, h, mask));
    worst = std::max(worst, diff - bound);
    violations += diff > bound ? 1 : 0;
    ++r.cases;
  }
  r.worst = std::max(0.0, worst);
  if (violations != 0) r.fail(std::to_string(violations) + " triples exceed the bound");
  return r;
}

/// Self-inverse, commutativity and cosine preservation of binding.
///
/// At D=16 every pair (a, r) is covered: word w of a chunk vector holds one r
/// tiled four times, and each probe vector packs four consecutive values of a
/// into every word, so one bind checks four a against a whole chunk of r.
inline CheckResult binding_algebra(std::size_t random_cases = 10000, std::uint64_t seed = 7) {
  CheckResult r{"binding-algebra"};
  constexpr std::size_t kPatterns = 1U << 16;
  constexpr std::size_t kChunk = 4096;  // patterns r per vector
  constexpr std::size_t kWide = kChunk * 64;
  std::vector<Hypervector> chunks;
  for (std::size_t c = 0; c < kPatterns; c += kChunk) {
    std::vector<std::uint64_t> words(kChunk);
    for (std::size_t i = 0; i < kChunk; ++i) words[i] = detail::tile16(static_cast<std::uint16_t>(c + i)).words()[0];
    chunks.emplace_back(kWide, std::move(words));
  }
  auto packed = [](std::size_t a0, auto&& f) {
    std::uint64_t w = 0;
    for (std::size_t i = 0; i < 4; ++i) w |= static_cast<std::uint64_t>(f(static_cast<std::uint16_t>(a0 + i))) << (16 * i);
    return w;
  };
  auto rotate = [](std::uint16_t a) { return static_cast<std::uint16_t>((a << 1) | (a >> 15)); };
  auto identity = [](std::uint16_t a) { return a; };
  // Element-level reference for the 4 sign combinations.
  for (int x : {-1, 1}) {
    for (int y : {-1, 1}) {
      const std::vector<int> vx(64, x);
      const std::vector<int> vy(64, y);
      if (bind(Hypervector::from_bipolar(vx), Hypervector::from_bipolar(vy)).element(0) != x * y) {
        r.fail("bind is not the elementwise product");
      }
    }
  }
  for (std::size_t a0 = 0; a0 < kPatterns; a0 += 4) {
    const std::uint64_t wa = packed(a0, identity);
    const std::uint64_t wb = packed(a0, rotate);
    const Hypervector ta(kWide, std::vector<std::uint64_t>(kChunk, wa));
    const Hypervector tb(kWide, std::vector<std::uint64_t>(kChunk, wb));
    for (const Hypervector& every : chunks) {
      const Hypervector ar = bind(ta, every);
      if (!(bind(ar, every) == ta)) r.fail("self-inverse fails for a=" + std::to_string(a0) + "..+3");
      if (!(bind(every, ta) == ar)) r.fail("commutativity fails for a=" + std::to_string(a0) + "..+3");
      // Isometry: the mismatch pattern between a (.) r and b (.) r equals that of a and b.
      const Hypervector br = bind(tb, every);
      const auto xa = ar.words();
      const auto xb = br.words();
      for (std::size_t w = 0; w < xa.size(); ++w) {
        if ((xa[w] ^ xb[w]) != (wa ^ wb)) {
          r.fail("isometry fails for a=" + std::to_string(a0) + "..+3");
          break;
        }
      }
    }
    r.cases += 4 * kPatterns;
  }
  hdalign::detail::Rng rng(seed);
  const BankMask full = BankMask::full(8192, 16);
  for (std::size_t c = 0; c < random_cases; ++c) {
    const Hypervector a = Hypervector::random(8192, rng);
    const Hypervector b = Hypervector::random(8192, rng);
    const Hypervector k = Hypervector::random(8192, rng);
    const Hypervector ak = bind(a, k);
    if (!(bind(ak, k) == a)) r.fail("self-inverse fails at D=8192");
    if (!(bind(k, a) == ak)) r.fail("commutativity fails at D=8192");
    const double before = cosine(a, b, full);
    const double after = cosine(ak, bind(b, k), full);
    r.worst = std::max(r.worst, std::abs(before - after));
    if (before != after) r.fail("isometry fails at D=8192");
    ++r.cases;
  }
  return r;
}

struct FidelityResult {
  CheckResult delta;   // delta-path argmax equals full-path argmax
  CheckResult bypass;  // cached answer agrees when the margin clears the bound
  std::uint64_t bypass_eligible = 0;
  std::uint64_t bypass_agree = 0;
  double delta_accuracy = 0.0;
  double full_accuracy = 0.0;
};

/// Ground-truth streams from the shipped profiles, run through a delta chain
/// and a forced-bypass replay alongside fresh full scans.
inline FidelityResult retrieval_fidelity(const ItemMemory& mem, std::span<const TaskProfile> profiles,
                                         std::size_t windows, std::uint64_t seed, double bypass_threshold = 0.95) {
  FidelityResult out;
  out.delta.name = "delta-fidelity";
  out.bypass.name = "bypass-fidelity";
  const BankMask mask = mem.full_mask();
  std::uint64_t total = 0;
  std::uint64_t delta_hits = 0;
  std::uint64_t full_hits = 0;
  for (const auto& profile : profiles) {
    const auto stream = generate_stream(profile, mem, windows, seed);
    TrafficMeter meter(mem.banks());
    ScoreState chain = full_scan(stream.front().query, mem, mask, Precision::Exact, meter);
    ScoreState previous = chain;
    for (std::size_t t = 0; t < stream.size(); ++t) {
      const Hypervector& q = stream[t].query;
      const ScoreState fresh = full_scan(q, mem, mask, Precision::Exact, meter);
      if (t > 0) {
        const PsuResult psu = psu_compare(q, chain.baseline, mask, mem.dimension());
        chain = delta_update(std::move(chain), q, psu.delta, mem, mask, meter);

        const PsuResult gap = psu_compare(q, previous.baseline, mask, mem.dimension());
        const TopK cached = top_k(previous, 1);
        const double bound = 2.0 * static_cast<double>(gap.delta.size()) / static_cast<double>(mem.dimension());
        if (gap.rho >= bypass_threshold && cached.margin > bound) {
          ++out.bypass_eligible;
          out.bypass_agree += cached.key.front() == argmax(fresh) ? 1 : 0;
        }
      }
      ++total;
      ++out.delta.cases;
      if (argmax(chain) != argmax(fresh)) out.delta.fail("argmax differs at window " + std::to_string(t));
      delta_hits += argmax(chain) == stream[t].concept_index ? 1 : 0;
      full_hits += argmax(fresh) == stream[t].concept_index ? 1 : 0;
      previous = fresh;
    }
  }
  out.delta_accuracy = static_cast<double>(delta_hits) / static_cast<double>(total);
  out.full_accuracy = static_cast<double>(full_hits) / static_cast<double>(total);
  if (delta_hits != full_hits) out.delta.fail("delta and full accuracy differ");
  out.delta.worst = std::abs(out.delta_accuracy - out.full_accuracy);
  out.bypass.cases = out.bypass_eligible;
  const double agree = out.bypass_eligible == 0 ? 0.0
                                                : static_cast<double>(out.bypass_agree) /
                                                      static_cast<double>(out.bypass_eligible);
  out.bypass.worst = 1.0 - agree;
  if (out.bypass_eligible == 0) out.bypass.fail("no eligible bypass windows");
  if (agree < 0.99) out.bypass.fail("agreement " + detail::fmt(agree) + " below 0.99");
  return out;
}

}  // namespace hdalign::verify
