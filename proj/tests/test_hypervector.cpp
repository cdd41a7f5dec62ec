#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "hdalign/hypervector.hpp"
#include "hdalign/projection.hpp"
#include "helpers.hpp"

namespace hdalign {
namespace {

using testing::elems;
using testing::tiled;

TEST(ProjectAndSign, ZeroFeaturesGiveAllPlusOne) {
  const Projection proj(12, 512, 3);
  const std::vector<double> zeros(12, 0.0);
  EXPECT_EQ(project_and_sign(zeros, proj), Hypervector::ones(512));
}

TEST(ProjectAndSign, SingleFeatureFollowsItsColumn) {
  const Projection proj(1, 256, 9);
  const std::vector<double> plus{3.0};
  const std::vector<double> minus{-3.0};
  const Hypervector hp = project_and_sign(plus, proj);
  for (std::size_t i = 0; i < 256; ++i) EXPECT_EQ(hp.element(i), proj.entry(i, 0)) << i;
  EXPECT_EQ(project_and_sign(minus, proj), hp.complement());
}

TEST(ProjectAndSign, MatchesDenseMatrixOracle) {
  constexpr std::size_t d = 16;
  constexpr std::size_t D = 256;
  const Projection proj(d, D, 21);
  std::vector<std::vector<double>> R(D, std::vector<double>(d));
  for (std::size_t i = 0; i < D; ++i) {
    for (std::size_t k = 0; k < d; ++k) R[i][k] = proj.entry(i, k);
  }
  detail::Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(d);
    for (auto& v : x) v = rng.normal();
    const Hypervector got = project_and_sign(x, proj);
    for (std::size_t i = 0; i < D; ++i) {
      double y = 0.0;
      for (std::size_t k = 0; k < d; ++k) y += R[i][k] * x[k];
      ASSERT_EQ(got.element(i), y >= 0.0 ? 1 : -1) << "trial " << trial << " row " << i;
    }
  }
}

TEST(ProjectAndSign, RejectsLengthMismatch) {
  const Projection proj(4, 64, 1);
  const std::vector<double> x(5, 1.0);
  EXPECT_THROW(project_and_sign(x, proj), DimensionError);
}

TEST(ProjectAndSign, DeterministicUnderSeed) {
  const Projection a(8, 1024, 77);
  const Projection b(8, 1024, 77);
  const Projection c(8, 1024, 78);
  const std::vector<double> x{0.5, -1.0, 2.0, 0.25, -0.75, 1.5, -2.5, 0.1};
  EXPECT_EQ(project_and_sign(x, a), project_and_sign(x, b));
  EXPECT_NE(project_and_sign(x, a), project_and_sign(x, c));
}

TEST(ProjectAndSign, EntriesAreBalanced) {
  const Projection proj(64, 1024, 4);
  long sum = 0;
  for (std::size_t i = 0; i < 1024; ++i) {
    for (std::size_t k = 0; k < 64; ++k) sum += proj.entry(i, k);
  }
  // 65536 fair signs: sd 256
  EXPECT_LT(std::abs(sum), 4 * 256);
}

TEST(Hypervector, RejectsBadDimension) {
  EXPECT_THROW(Hypervector(0), DimensionError);
  EXPECT_THROW(Hypervector(100), DimensionError);
  EXPECT_THROW(Hypervector(128, std::vector<std::uint64_t>(3)), DimensionError);
}

TEST(Hypervector, BipolarRoundTrip) {
  detail::Rng rng(2);
  const Hypervector v = Hypervector::random(192, rng);
  const auto e = v.to_bipolar();
  EXPECT_EQ(Hypervector::from_bipolar(e), v);
  std::vector<int> bad(64, 1);
  bad[7] = 0;
  EXPECT_THROW(Hypervector::from_bipolar(bad), ValidationError);
}

TEST(Bind, AllPlusOneIsIdentity) {
  detail::Rng rng(1);
  const Hypervector a = Hypervector::random(1024, rng);
  EXPECT_EQ(bind(a, Hypervector::ones(1024)), a);
}

TEST(Bind, SelfInverse) {
  detail::Rng rng(2);
  const Hypervector a = Hypervector::random(1024, rng);
  const Hypervector r = Hypervector::random(1024, rng);
  EXPECT_EQ(bind(bind(a, r), r), a);
}

TEST(Bind, MatchesElementwiseProduct) {
  detail::Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Hypervector a = Hypervector::random(128, rng);
    const Hypervector b = Hypervector::random(128, rng);
    const auto ea = elems(a);
    const auto eb = elems(b);
    const auto got = elems(bind(a, b));
    for (std::size_t i = 0; i < 128; ++i) ASSERT_EQ(got[i], ea[i] * eb[i]);
  }
}

TEST(Bind, CommutativeAssociativeIsometric) {
  detail::Rng rng(4);
  const BankMask mask = BankMask::full(2048, 4);
  for (int trial = 0; trial < 100; ++trial) {
    const Hypervector a = Hypervector::random(2048, rng);
    const Hypervector b = Hypervector::random(2048, rng);
    const Hypervector c = Hypervector::random(2048, rng);
    EXPECT_EQ(bind(a, b), bind(b, a));
    EXPECT_EQ(bind(bind(a, b), c), bind(a, bind(b, c)));
    EXPECT_EQ(dot(bind(a, c), bind(b, c), mask), dot(a, b, mask));
  }
}

TEST(Bind, RejectsDimensionMismatch) {
  EXPECT_THROW(bind(Hypervector(64), Hypervector(128)), DimensionError);
}

TEST(Dot, IdenticalAndAntipodal) {
  detail::Rng rng(5);
  const Hypervector b = Hypervector::random(1024, rng);
  const BankMask mask = BankMask::full(1024, 16);
  EXPECT_EQ(dot(b, b, mask).value, 1024);
  EXPECT_EQ(dot(b.complement(), b, mask).value, -1024);
  EXPECT_DOUBLE_EQ(cosine(b, b, mask), 1.0);
}

// D' = 8 is below one 64-bit bank, so the 8-element vectors are tiled 8 times:
// every count scales by 8 and the cosine is unchanged.
TEST(Dot, EightElementsTwoDifferences) {
  const std::vector<int> a{1, -1, 1, 1, -1, -1, 1, -1};
  std::vector<int> b = a;
  b[2] = -b[2];
  b[6] = -b[6];
  int by_hand = 0;
  for (std::size_t i = 0; i < 8; ++i) by_hand += a[i] * b[i];
  ASSERT_EQ(by_hand, 4);

  const BankMask mask = BankMask::full(64, 1);
  EXPECT_EQ(dot(tiled(a), tiled(b), mask).value, 8 * by_hand);
  EXPECT_DOUBLE_EQ(cosine(tiled(a), tiled(b), mask), 0.5);
  EXPECT_EQ(fixed_to_real(cosine_fixed(tiled(a), tiled(b), mask)), 0.5);
}

TEST(Dot, OnlyActiveBanksCount) {
  detail::Rng rng(6);
  const Hypervector a = Hypervector::random(512, rng);
  Hypervector b = a;
  for (std::size_t i = 256; i < 512; ++i) b.flip(i);  // upper half differs completely
  EXPECT_EQ(dot(a, b, BankMask::leading(512, 4, 2)).value, 256);
  EXPECT_EQ(dot(a, b, BankMask::full(512, 4)).value, 0);
  EXPECT_EQ(dot(a, b, BankMask(512, 4, 0b1000)).value, -128);
}

TEST(Cosine, RandomPairsConcentrate) {
  detail::Rng rng(7);
  const BankMask mask = BankMask::full(4096, 16);
  int inside = 0;
  constexpr int kPairs = 2000;
  for (int p = 0; p < kPairs; ++p) {
    const Hypervector a = Hypervector::random(4096, rng);
    const Hypervector b = Hypervector::random(4096, rng);
    inside += std::abs(cosine(a, b, mask)) < 0.1 ? 1 : 0;
  }
  EXPECT_GT(static_cast<double>(inside) / kPairs, 0.99);
}

TEST(Cosine, HammingIdentityExhaustiveAtSixteen) {
  // Every 16-element b against a spread of a patterns, tiled into one bank.
  const BankMask mask = BankMask::full(64, 1);
  for (std::uint32_t pa : {0x0000U, 0xffffU, 0x5a5aU, 0x1234U, 0x8001U, 0x7ffeU, 0x0f0fU, 0xc3a5U}) {
    std::vector<int> a(16);
    for (int i = 0; i < 16; ++i) a[i] = (pa >> i) & 1U ? 1 : -1;
    const Hypervector ha = tiled(a);
    for (std::uint32_t pb = 0; pb < (1U << 16); ++pb) {
      std::vector<int> b(16);
      int ham = 0;
      int prod = 0;
      for (int i = 0; i < 16; ++i) {
        b[i] = (pb >> i) & 1U ? 1 : -1;
        ham += a[i] != b[i] ? 1 : 0;
        prod += a[i] * b[i];
      }
      const Hypervector hb = tiled(b);
      const double c = cosine(ha, hb, mask);
      ASSERT_DOUBLE_EQ(c, 1.0 - 2.0 * ham / 16.0);
      ASSERT_DOUBLE_EQ(c, prod / 16.0);
    }
  }
}

TEST(Cosine, HammingIdentityRandomized) {
  detail::Rng rng(8);
  for (std::size_t banks_on : {1, 2, 4, 8, 16}) {
    const BankMask mask = BankMask::leading(8192, 16, banks_on);
    for (int trial = 0; trial < 50; ++trial) {
      const Hypervector a = Hypervector::random(8192, rng);
      const Hypervector b = testing::flipped(a, rng, rng.below(mask.effective_dimension()),
                                             mask.effective_dimension());
      const double d = static_cast<double>(mask.effective_dimension());
      EXPECT_DOUBLE_EQ(cosine(a, b, mask), 1.0 - 2.0 * static_cast<double>(hamming(a, b, mask)) / d);
      EXPECT_EQ(fixed_to_real(cosine_fixed(a, b, mask)), cosine(a, b, mask));
    }
  }
}

TEST(Dot, SymmetricBoundedAndParity) {
  detail::Rng rng(9);
  for (std::size_t banks_on : {1, 2, 3, 4, 7, 8}) {
    const BankMask mask = BankMask::leading(512, 8, banks_on);
    const auto d_eff = static_cast<std::int64_t>(mask.effective_dimension());
    for (int trial = 0; trial < 100; ++trial) {
      const Hypervector a = Hypervector::random(512, rng);
      const Hypervector b = Hypervector::random(512, rng);
      const auto ab = dot(a, b, mask).value;
      EXPECT_EQ(ab, dot(b, a, mask).value);
      EXPECT_LE(std::abs(ab), d_eff);
      EXPECT_EQ((ab - d_eff) % 2, 0);
    }
  }
}

TEST(Cosine, FixedPointNeedsLegalMask) {
  const Hypervector a(512);
  EXPECT_THROW(cosine_fixed(a, a, BankMask::leading(512, 8, 3)), ValidationError);
  EXPECT_NO_THROW(cosine_fixed(a, a, BankMask::leading(512, 8, 4)));
}

TEST(BankMask, ShapeRules) {
  EXPECT_THROW(BankMask(512, 8, 0), ValidationError);
  EXPECT_THROW(BankMask(512, 8, 0x100), ValidationError);
  EXPECT_THROW(BankMask(512, 16, 1), ValidationError);  // bank width 32
  EXPECT_THROW(BankMask(512, 0, 1), ValidationError);
  EXPECT_TRUE(BankMask::leading(8192, 16, 4).is_legal());
  EXPECT_FALSE(BankMask::leading(8192, 16, 3).is_legal());
  EXPECT_FALSE(BankMask(8192, 16, 0b1010).is_legal());
  EXPECT_EQ(BankMask::with_effective_dimension(8192, 16, 2048).active_banks(), 4U);
  EXPECT_EQ(BankMask::with_effective_dimension(8192, 16, 2048).shift(), 11);
  EXPECT_THROW(BankMask::with_effective_dimension(8192, 16, 1536), ValidationError);
  EXPECT_THROW(BankMask::with_effective_dimension(8192, 16, 100), ValidationError);
}

TEST(Bundle, MajorityWithPositiveTies) {
  const Hypervector a = Hypervector::from_bipolar(std::vector<int>(64, 1));
  const Hypervector b = Hypervector::from_bipolar(std::vector<int>(64, -1));
  const std::vector<Hypervector> two{a, b};
  EXPECT_EQ(bundle(two), Hypervector::ones(64));
  const std::vector<Hypervector> three{a, b, b};
  EXPECT_EQ(bundle(three), b);
  EXPECT_THROW(bundle(std::span<const Hypervector>{}), ValidationError);
}

TEST(HypervectorFormat, RoundTrip) {
  detail::Rng rng(10);
  const Hypervector v = Hypervector::random(8192, rng);
  std::stringstream ss;
  write_hypervector(ss, v);
  EXPECT_EQ(ss.str().size(), 4U + 2U + 4U + 8192U / 8U);
  EXPECT_EQ(ss.str().substr(0, 4), "HDCV");
  EXPECT_EQ(read_hypervector(ss), v);
}

TEST(HypervectorFormat, LittleEndianWords) {
  Hypervector v(64);
  v.set(0, true);
  v.set(9, true);
  std::stringstream ss;
  write_hypervector(ss, v);
  const std::string bytes = ss.str();
  EXPECT_EQ(static_cast<unsigned char>(bytes[10]), 0x01);
  EXPECT_EQ(static_cast<unsigned char>(bytes[11]), 0x02);
}

TEST(HypervectorFormat, RejectsBadInput) {
  std::stringstream wrong("HDCX\x01\x00");
  EXPECT_THROW(read_hypervector(wrong), FormatError);
  std::stringstream ss;
  write_hypervector(ss, Hypervector(128));
  const std::string bytes = ss.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_hypervector(truncated), FormatError);
}

}  // namespace
}  // namespace hdalign
