#include <gtest/gtest.h>

#include <cmath>

#include "hdalign/alignment.hpp"
#include "helpers.hpp"

namespace hdalign {
namespace {

using testing::elems;
using testing::flipped;

std::vector<std::int64_t> naive_scores(const Hypervector& q, const ItemMemory& mem, std::size_t d_eff) {
  const auto eq = elems(q);
  std::vector<std::int64_t> out;
  for (const auto& h : mem.rows()) {
    const auto eh = elems(h);
    std::int64_t s = 0;
    for (std::size_t i = 0; i < d_eff; ++i) s += eq[i] * eh[i];
    out.push_back(s);
  }
  return out;
}

ScoreState state_from_raw(std::vector<std::int64_t> raw, std::size_t d_eff) {
  return ScoreState{Hypervector(d_eff), BankMask::full(d_eff, 1), Precision::Exact, std::move(raw), {}};
}

TEST(ShiftRoundEven, TiesGoToEven) {
  EXPECT_EQ(detail::shift_round_even(5, 1), 2);
  EXPECT_EQ(detail::shift_round_even(3, 1), 2);
  EXPECT_EQ(detail::shift_round_even(7, 1), 4);
  EXPECT_EQ(detail::shift_round_even(-3, 1), -2);
  EXPECT_EQ(detail::shift_round_even(-5, 1), -2);
  EXPECT_EQ(detail::shift_round_even(6, 2), 2);   // 1.5
  EXPECT_EQ(detail::shift_round_even(10, 2), 2);  // 2.5
  EXPECT_EQ(detail::shift_round_even(11, 2), 3);
  EXPECT_EQ(detail::shift_round_even(3, -2), 12);
}

TEST(PsuCompare, IdenticalQueries) {
  detail::Rng rng(1);
  const Hypervector q = Hypervector::random(8192, rng);
  const PsuResult r = psu_compare(q, q, BankMask::full(8192, 16));
  EXPECT_EQ(r.rho, 1.0);
  EXPECT_TRUE(r.delta.empty());
  EXPECT_FALSE(r.delta.overflowed);
}

TEST(PsuCompare, QuarterFlippedAtFiveTwelve) {
  detail::Rng rng(2);
  const BankMask mask = BankMask::leading(8192, 16, 1);
  ASSERT_EQ(mask.effective_dimension(), 512U);
  const Hypervector a = Hypervector::random(8192, rng);
  Hypervector b = flipped(a, rng, 128, 512);
  for (std::size_t i = 512; i < 8192; i += 7) b.flip(i);  // gated banks do not count
  const PsuResult r = psu_compare(b, a, mask);
  EXPECT_EQ(r.rho, 0.5);
  EXPECT_EQ(r.delta.size(), 128U);
  EXPECT_EQ(r.rho, cosine(b, a, mask));
  for (auto i : r.delta.indices) {
    EXPECT_LT(i, 512U);
    EXPECT_NE(a.bit(i), b.bit(i));
  }
}

TEST(PsuCompare, Complement) {
  detail::Rng rng(3);
  const Hypervector a = Hypervector::random(1024, rng);
  const BankMask mask = BankMask::full(1024, 2);
  const PsuResult r = psu_compare(a.complement(), a, mask, 2048);
  EXPECT_EQ(r.rho, -1.0);
  EXPECT_EQ(r.delta.size(), 1024U);
  EXPECT_FALSE(r.delta.overflowed);
  EXPECT_TRUE(psu_compare(a.complement(), a, mask).delta.overflowed);  // default depth D/8
}

TEST(PsuCompare, RhoEqualsCosine) {
  detail::Rng rng(4);
  for (std::size_t banks_on : {1, 2, 4, 8, 16}) {
    const BankMask mask = BankMask::leading(8192, 16, banks_on);
    for (int t = 0; t < 20; ++t) {
      const Hypervector a = Hypervector::random(8192, rng);
      const Hypervector b = flipped(a, rng, rng.below(mask.effective_dimension() + 1), 8192);
      const PsuResult r = psu_compare(a, b, mask);
      EXPECT_EQ(r.rho, cosine(a, b, mask));
      EXPECT_EQ(r.rho, 1.0 - 2.0 * static_cast<double>(r.delta.size()) / mask.effective_dimension());
    }
  }
}

TEST(PsuCompare, DimensionMismatch) {
  EXPECT_THROW(psu_compare(Hypervector(64), Hypervector(128), BankMask::full(64, 1)), DimensionError);
}

TEST(FullScan, StoredVectorAsQuery) {
  const ItemMemory mem = ItemMemory::random(8, 2048, 4, 5);
  TrafficMeter meter(4);
  const BankMask mask = mem.full_mask();
  const ScoreState s = full_scan(mem.row(5), mem, mask, Precision::Exact, meter);
  EXPECT_EQ(s.raw[5], 2048);
  EXPECT_EQ(s.cosine(5), 1.0);
  EXPECT_EQ(argmax(s), 5U);
  EXPECT_EQ(s.baseline, mem.row(5));
  EXPECT_EQ(s.mask, mask);
  EXPECT_EQ(meter.bits_read(), 8U * 2048U);
}

TEST(FullScan, ComplementQuery) {
  const ItemMemory mem = ItemMemory::random(2, 1024, 4, 6);
  TrafficMeter meter;
  const ScoreState s = full_scan(mem.row(1).complement(), mem, mem.full_mask(), Precision::Exact, meter);
  EXPECT_EQ(s.raw[1], -1024);
}

TEST(FullScan, MatchesNaiveDotOracle) {
  const ItemMemory mem = ItemMemory::random(16, 1024, 4, 7);
  const BankMask mask = BankMask::leading(1024, 4, 1);
  ASSERT_EQ(mask.effective_dimension(), 256U);
  detail::Rng rng(7);
  for (int t = 0; t < 25; ++t) {
    const Hypervector q = Hypervector::random(1024, rng);
    TrafficMeter meter;
    const ScoreState s = full_scan(q, mem, mask, Precision::Exact, meter);
    EXPECT_EQ(s.raw, naive_scores(q, mem, 256));
    EXPECT_EQ(meter.bits_read(), 16U * 256U);
  }
}

TEST(FullScan, RejectsIllegalMaskAndWrongDimension) {
  const ItemMemory mem = ItemMemory::random(4, 1024, 4, 8);
  TrafficMeter meter;
  EXPECT_THROW(full_scan(Hypervector(1024), mem, BankMask::leading(1024, 4, 3), Precision::Exact, meter),
               ValidationError);
  EXPECT_THROW(full_scan(Hypervector(512), mem, mem.full_mask(), Precision::Exact, meter), DimensionError);
  EXPECT_EQ(meter.bits_read(), 0U);
}

TEST(DeltaUpdate, EmptyFlipSetLeavesScores) {
  const ItemMemory mem = ItemMemory::random(8, 1024, 4, 9);
  detail::Rng rng(9);
  const Hypervector q = Hypervector::random(1024, rng);
  TrafficMeter meter;
  const ScoreState s = full_scan(q, mem, mem.full_mask(), Precision::Int8, meter);
  const std::uint64_t bits = meter.bits_read();
  const PsuResult psu = psu_compare(q, s.baseline, mem.full_mask());
  const ScoreState u = delta_update(s, q, psu.delta, mem, mem.full_mask(), meter);
  EXPECT_EQ(u.raw, s.raw);
  EXPECT_EQ(u.quantized, s.quantized);
  EXPECT_EQ(u.baseline, q);
  EXPECT_EQ(meter.bits_read(), bits);
}

TEST(DeltaUpdate, SingleFlipAddsTwo) {
  const ItemMemory mem = ItemMemory::random(8, 1024, 4, 10);
  const BankMask mask = mem.full_mask();
  Hypervector q = mem.row(6).complement();
  TrafficMeter meter;
  const ScoreState s = full_scan(q, mem, mask, Precision::Exact, meter);
  // q_i = -1 and h_{3,i} = +1, flipped to +1
  std::size_t i = 0;
  while (!(mem.row(3).bit(i) && !q.bit(i))) ++i;
  q.flip(i);
  const PsuResult psu = psu_compare(q, s.baseline, mask);
  ASSERT_EQ(psu.delta.size(), 1U);
  const ScoreState u = delta_update(s, q, psu.delta, mem, mask, meter);
  EXPECT_EQ(u.raw[3], s.raw[3] + 2);
  EXPECT_DOUBLE_EQ(u.cosine(3) - s.cosine(3), 2.0 / 1024.0);
  for (std::size_t j = 0; j < mem.concepts(); ++j) EXPECT_EQ(std::abs(u.raw[j] - s.raw[j]), 2);
  EXPECT_EQ(meter.index_reads(), 1U);
}

TEST(DeltaUpdate, LongDriftStaysExact) {
  const ItemMemory mem = ItemMemory::random(32, 1024, 16, 11);
  const BankMask mask = mem.full_mask();
  detail::Rng rng(11);
  Hypervector q = Hypervector::random(1024, rng);
  TrafficMeter meter(16);
  ScoreState s = full_scan(q, mem, mask, Precision::Exact, meter);
  for (int step = 0; step < 1000; ++step) {
    const Hypervector next = flipped(q, rng, 20);  // round(0.02 * 1024)
    const PsuResult psu = psu_compare(next, s.baseline, mask);
    s = delta_update(std::move(s), next, psu.delta, mem, mask, meter);
    q = next;
    TrafficMeter scratch;
    const ScoreState oracle = full_scan(q, mem, mask, Precision::Exact, scratch);
    ASSERT_EQ(s.raw, oracle.raw) << "step " << step;
    ASSERT_EQ(s.raw, naive_scores(q, mem, 1024)) << "step " << step;
  }
}

TEST(DeltaUpdate, TrafficRatioIsFlipFraction) {
  const ItemMemory mem = ItemMemory::random(80, 8192, 16, 12);
  const BankMask mask = BankMask::leading(8192, 16, 8);
  detail::Rng rng(12);
  const Hypervector q = Hypervector::random(8192, rng);
  TrafficMeter full_meter(16);
  const ScoreState s = full_scan(q, mem, mask, Precision::Exact, full_meter);
  for (std::size_t k : {1, 37, 410, 1024}) {
    const Hypervector next = flipped(q, rng, k, 4096);
    const PsuResult psu = psu_compare(next, q, mask);
    TrafficMeter delta_meter(16);
    delta_update(s, next, psu.delta, mem, mask, delta_meter);
    EXPECT_EQ(delta_meter.bits_read() * 4096, full_meter.bits_read() * k);
    EXPECT_EQ(delta_meter.index_reads(), k);
  }
}

TEST(DeltaUpdate, OverflowRequiresFallback) {
  const ItemMemory mem = ItemMemory::random(8, 1024, 4, 13);
  const BankMask mask = mem.full_mask();
  detail::Rng rng(13);
  const Hypervector q = Hypervector::random(1024, rng);
  TrafficMeter meter;
  const ScoreState s = full_scan(q, mem, mask, Precision::Exact, meter);
  const Hypervector next = flipped(q, rng, 129);
  const PsuResult psu = psu_compare(next, q, mask);  // depth 128
  ASSERT_TRUE(psu.delta.overflowed);
  const std::uint64_t bits = meter.bits_read();
  EXPECT_THROW(delta_update(s, next, psu.delta, mem, mask, meter), FallbackRequired);
  EXPECT_EQ(meter.bits_read(), bits);
}

TEST(DeltaUpdate, MaskMismatchIsStale) {
  const ItemMemory mem = ItemMemory::random(8, 1024, 4, 14);
  detail::Rng rng(14);
  const Hypervector q = Hypervector::random(1024, rng);
  TrafficMeter meter;
  const ScoreState s = full_scan(q, mem, mem.full_mask(), Precision::Exact, meter);
  const BankMask half = BankMask::leading(1024, 4, 2);
  const PsuResult psu = psu_compare(q, q, half);
  EXPECT_THROW(delta_update(s, q, psu.delta, mem, half, meter), StaleStateError);
}

TEST(DeltaUpdate, RejectsInconsistentFlipSet) {
  const ItemMemory mem = ItemMemory::random(8, 1024, 4, 15);
  detail::Rng rng(15);
  const Hypervector q = Hypervector::random(1024, rng);
  TrafficMeter meter;
  const ScoreState s = full_scan(q, mem, mem.full_mask(), Precision::Exact, meter);
  const Hypervector next = flipped(q, rng, 4);
  DeltaSet wrong;
  wrong.capacity = 128;
  wrong.indices = {1, 2, 3, 4};
  EXPECT_THROW(delta_update(s, next, wrong, mem, mem.full_mask(), meter), ValidationError);
}

TEST(DeltaUpdate, FaultHookBreaksExactness) {
  const ItemMemory mem = ItemMemory::random(8, 1024, 4, 16);
  detail::Rng rng(16);
  const Hypervector q = Hypervector::random(1024, rng);
  TrafficMeter meter;
  const ScoreState s = full_scan(q, mem, mem.full_mask(), Precision::Exact, meter);
  const Hypervector next = flipped(q, rng, 5);
  const PsuResult psu = psu_compare(next, q, mem.full_mask());
  const DeltaFault fault{true};
  const ScoreState bad = delta_update(s, next, psu.delta, mem, mem.full_mask(), meter, &fault);
  EXPECT_NE(bad.raw, full_scan(next, mem, mem.full_mask(), Precision::Exact, meter).raw);
}

TEST(TopK, HandSortedExample) {
  const ScoreState s = state_from_raw({10, 50, 30, 40}, 64);
  const TopK t = top_k(s, 2);
  EXPECT_EQ(t.key, (std::vector<std::size_t>{1, 3}));
  EXPECT_DOUBLE_EQ(t.margin, 10.0 / 64.0);
  EXPECT_EQ(argmax(s), 1U);
}

TEST(TopK, TiesBreakToLowerIndex) {
  const ScoreState s = state_from_raw({8, 8, 8, 8}, 64);
  const TopK t = top_k(s, 2);
  EXPECT_EQ(t.key, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(t.margin, 0.0);
  EXPECT_EQ(argmax(s), 0U);
  EXPECT_EQ(ranking(state_from_raw({2, 6, 6, 2}, 64)), (std::vector<std::size_t>{1, 2, 0, 3}));
}

TEST(TopK, KMustBeBelowM) {
  const ScoreState s = state_from_raw({1, 2, 3}, 64);
  EXPECT_THROW(top_k(s, 3), ValidationError);
  EXPECT_THROW(top_k(s, 0), ValidationError);
}

TEST(TopK, StoredQueryWinsAtFourK) {
  int hits = 0;
  constexpr int kSeeds = 200;
  for (int seed = 0; seed < kSeeds; ++seed) {
    const ItemMemory mem = ItemMemory::random(80, 4096, 16, 1000 + seed);
    TrafficMeter meter;
    const ScoreState s = full_scan(mem.row(7), mem, mem.full_mask(), Precision::Exact, meter);
    hits += top_k(s, 1).key == std::vector<std::size_t>{7} ? 1 : 0;
  }
  EXPECT_GE(hits, kSeeds * 999 / 1000);
}

TEST(Quantized, FullScanErrorWithinOneUlp) {
  const ItemMemory mem = ItemMemory::random(80, 8192, 16, 17);
  detail::Rng rng(17);
  for (Precision p : {Precision::Int8, Precision::Int4}) {
    const double ulp = std::ldexp(1.0, -(precision_bits(p) - 1));
    for (std::size_t banks_on : {1, 4, 16}) {
      const BankMask mask = BankMask::leading(8192, 16, banks_on);
      for (const Hypervector& q : {Hypervector::random(8192, rng), mem.row(2), mem.row(2).complement()}) {
        TrafficMeter meter;
        const ScoreState s = full_scan(q, mem, mask, p, meter);
        for (std::size_t j = 0; j < mem.concepts(); ++j) {
          ASSERT_LE(std::abs(s.cosine(j) - s.exact_cosine(j)), ulp);
          ASSERT_LE(std::abs(s.cosine(j)), 1.0 - ulp);
        }
      }
    }
  }
}

TEST(Quantized, DeltaDriftBound) {
  const ItemMemory mem = ItemMemory::random(40, 2048, 4, 18);
  const BankMask mask = mem.full_mask();
  detail::Rng rng(18);
  for (Precision p : {Precision::Int8, Precision::Int4}) {
    const double ulp = std::ldexp(1.0, -(precision_bits(p) - 1));
    Hypervector q = mem.row(0);
    TrafficMeter meter;
    ScoreState s = full_scan(q, mem, mask, p, meter);
    double worst = 0.0;
    for (int n = 1; n <= 200; ++n) {
      q = flipped(q, rng, 1 + rng.below(40));
      const PsuResult psu = psu_compare(q, s.baseline, mask);
      s = delta_update(std::move(s), q, psu.delta, mem, mask, meter);
      for (std::size_t j = 0; j < mem.concepts(); ++j) {
        const double err = std::abs(s.cosine(j) - s.exact_cosine(j));
        worst = std::max(worst, err);
        ASSERT_LE(err, (n + 1) * ulp) << to_string(p) << " step " << n;
      }
      TrafficMeter scratch;
      ASSERT_EQ(s.raw, full_scan(q, mem, mask, p, scratch).raw);
    }
    EXPECT_GT(worst, 0.0);
  }
}

TEST(BypassBound, RandomTriplesAtSmallDimension) {
  detail::Rng rng(19);
  const BankMask mask = BankMask::full(256, 4);
  for (int t = 0; t < 5000; ++t) {
    const Hypervector q = Hypervector::random(256, rng);
    const Hypervector qp = flipped(q, rng, rng.below(257));
    const Hypervector h = Hypervector::random(256, rng);
    const double bound = 2.0 * static_cast<double>(hamming(q, qp, mask)) / 256.0;
    ASSERT_LE(std::abs(cosine(q, h, mask) - cosine(qp, h, mask)), bound);
  }
}

}  // namespace
}  // namespace hdalign
