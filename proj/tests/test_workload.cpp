#include <gtest/gtest.h>

#include <sstream>

#include "hdalign/workload.hpp"
#include "helpers.hpp"

namespace hdalign {
namespace {

TEST(Accumulate, NoEvents) {
  const EventWindow w = accumulate({}, 0, 1000);
  for (auto v : w.accumulated) ASSERT_EQ(v, 0);
  for (auto v : w.normalized) ASSERT_EQ(v, 0.0);
  EXPECT_EQ(w.accumulated.size(), 128U * 128U);
}

TEST(Accumulate, SingleEvent) {
  const std::vector<Event> ev{{3, 4, 10, 1}};
  const EventWindow w = accumulate(ev, 0, 1000);
  EXPECT_EQ(w.at(3, 4), 1);
  EXPECT_DOUBLE_EQ(w.normalized_at(3, 4), 1.0 / (1.0 + 1e-6));
  EXPECT_EQ(w.normalized_at(4, 3), 0.0);
  std::int64_t sum = 0;
  for (auto v : w.accumulated) sum += v;
  EXPECT_EQ(sum, 1);
}

TEST(Accumulate, PolarityCancels) {
  const std::vector<Event> ev{{7, 7, 1, 1}, {7, 7, 2, -1}, {1, 2, 3, -1}};
  const EventWindow w = accumulate(ev, 0, 1000);
  EXPECT_EQ(w.at(7, 7), 0);
  EXPECT_EQ(w.normalized_at(7, 7), 0.0);
  EXPECT_DOUBLE_EQ(w.normalized_at(1, 2), -1.0 / (1.0 + 1e-6));
}

TEST(Accumulate, WindowIsHalfOpen) {
  const std::vector<Event> ev{{0, 0, 99, 1}, {0, 0, 100, 1}, {0, 0, 199, 1}, {0, 0, 200, 1}};
  EXPECT_EQ(accumulate(ev, 100, 100).at(0, 0), 2);
}

TEST(Accumulate, PartitionIsLinear) {
  detail::Rng rng(1);
  std::vector<Event> ev;
  for (std::uint64_t t = 0; t < 5000; ++t) {
    ev.push_back(Event{static_cast<std::uint16_t>(rng.below(32)), static_cast<std::uint16_t>(rng.below(32)), t,
                       static_cast<std::int8_t>(rng.bernoulli(0.5) ? 1 : -1)});
  }
  const SensorBounds b{32, 32};
  const EventWindow whole = accumulate(ev, 0, 5000, b);
  std::vector<std::int32_t> parts(32 * 32, 0);
  for (std::uint64_t t0 : {0, 700, 2000, 4999}) {
    const std::uint64_t t1 = t0 == 0 ? 700 : t0 == 700 ? 2000 : t0 == 2000 ? 4999 : 5000;
    const EventWindow w = accumulate(ev, t0, t1 - t0, b);
    for (std::size_t i = 0; i < parts.size(); ++i) parts[i] += w.accumulated[i];
  }
  EXPECT_EQ(parts, whole.accumulated);
  for (double v : whole.normalized) {
    ASSERT_LE(v, 1.0);
    ASSERT_GE(v, -1.0);
  }
}

TEST(Accumulate, Rejections) {
  EXPECT_THROW(accumulate({}, 0, 0), ValidationError);
  const std::vector<Event> ev{{128, 0, 1, 1}};
  EXPECT_THROW(accumulate(ev, 0, 10), ValidationError);
}

TEST(Profiles, DefaultFlipRatesOrdered) {
  const auto p = default_profiles();
  ASSERT_EQ(p.size(), 5U);
  EXPECT_EQ(p[0].name, "have-breakfast");
  EXPECT_EQ(p[4].name, "sports");
  for (std::size_t i = 1; i < p.size(); ++i) EXPECT_LT(p[i - 1].flip_rate, p[i].flip_rate);
  for (const auto& x : p) EXPECT_NO_THROW(x.validate());
}

TEST(Profiles, Rescaling) {
  const TaskProfile p = default_profiles()[2];
  const TaskProfile r = p.rescaled(window_scale(RtTarget::Rt30));
  EXPECT_NEAR(r.flip_rate, p.flip_rate * 33.33 / 16.67, 1e-15);
  EXPECT_NEAR(r.dwell_windows, p.dwell_windows * 16.67 / 33.33, 1e-9);
  TaskProfile bad = p;
  bad.flip_rate = 1.5;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TaskProfile steady(double rate, double spread) {
  TaskProfile p;
  p.name = "steady";
  p.flip_rate = rate;
  p.flip_spread = spread;
  p.concepts = {3};
  return p;
}

TEST(GenerateStream, ZeroFlipRateIsConstant) {
  const ItemMemory mem = ItemMemory::random(8, 1024, 4, 2);
  const auto s = generate_stream(steady(0.0, 0.3), mem, 300, 2);
  ASSERT_EQ(s.size(), 300U);
  for (const auto& w : s) {
    ASSERT_EQ(w.query, s.front().query);
    ASSERT_EQ(w.concept_index, 3U);
    ASSERT_EQ(psu_compare(w.query, s.front().query, mem.full_mask()).rho, 1.0);
  }
}

TEST(GenerateStream, MeanSimilarityMatchesFlipRate) {
  const ItemMemory mem = ItemMemory::random(4, 2048, 4, 3);
  for (double r : {0.01, 0.03}) {
    const auto s = generate_stream(steady(r, 0.5), mem, 10000, 3);
    double sum = 0.0;
    for (std::size_t t = 1; t < s.size(); ++t) sum += psu_compare(s[t].query, s[t - 1].query, mem.full_mask(), 2048).rho;
    EXPECT_NEAR(sum / static_cast<double>(s.size() - 1), 1.0 - 2.0 * r, 0.02) << r;
  }
}

TEST(GenerateStream, GroundTruthRecoverable) {
  const ItemMemory mem = ItemMemory::random(80, 8192, 16, 4);
  TaskProfile p = default_profiles()[4];
  p.base_perturbation = 0.05;
  const auto s = generate_stream(p, mem, 1000, 4);
  std::size_t hits = 0;
  for (const auto& w : s) {
    TrafficMeter meter;
    hits += argmax(full_scan(w.query, mem, mem.full_mask(), Precision::Exact, meter)) == w.concept_index ? 1 : 0;
  }
  EXPECT_GT(static_cast<double>(hits) / static_cast<double>(s.size()), 0.99);
}

TEST(GenerateStream, Deterministic) {
  const ItemMemory mem = ItemMemory::random(16, 1024, 4, 5);
  const TaskProfile p = default_profiles()[3];
  const auto a = generate_stream(p, mem, 200, 9);
  const auto b = generate_stream(p, mem, 200, 9);
  const auto c = generate_stream(p, mem, 200, 10);
  ASSERT_EQ(a.size(), b.size());
  bool differs = false;
  for (std::size_t t = 0; t < a.size(); ++t) {
    ASSERT_EQ(a[t].query, b[t].query);
    ASSERT_EQ(a[t].load.objects, b[t].load.objects);
    ASSERT_EQ(a[t].load.queue_depth, b[t].load.queue_depth);
    ASSERT_EQ(a[t].concept_index, b[t].concept_index);
    differs = differs || !(a[t].query == c[t].query);
  }
  EXPECT_TRUE(differs);
}

TEST(GenerateStream, LoadStaysInRange) {
  const ItemMemory mem = ItemMemory::random(16, 1024, 4, 6);
  for (const auto& p : default_profiles()) {
    for (const auto& w : generate_stream(p, mem, 500, 6)) {
      ASSERT_GE(w.load.objects, p.objects_min);
      ASSERT_LE(w.load.objects, p.objects_max);
      ASSERT_LE(w.load.queue_depth, p.queue_max);
    }
  }
}

TEST(GenerateStream, SteadierProfilesAreMoreCoherent) {
  const ItemMemory mem = ItemMemory::random(80, 8192, 16, 7);
  std::vector<double> mean_rho;
  for (const auto& p : default_profiles()) {
    const auto s = generate_stream(p, mem, 4000, 7);
    double sum = 0.0;
    for (std::size_t t = 1; t < s.size(); ++t) sum += psu_compare(s[t].query, s[t - 1].query, mem.full_mask(), 8192).rho;
    mean_rho.push_back(sum / static_cast<double>(s.size() - 1));
  }
  for (std::size_t i = 1; i < mean_rho.size(); ++i) EXPECT_GT(mean_rho[i - 1], mean_rho[i]) << i;
}

TEST(GenerateStream, RejectsConceptOutOfRange) {
  const ItemMemory mem = ItemMemory::random(4, 1024, 4, 8);
  TaskProfile p = steady(0.01, 0.0);
  p.concepts = {9};
  EXPECT_THROW(generate_stream(p, mem, 10, 1), ConfigError);
}

TEST(Trace, RoundTrip) {
  const ItemMemory mem = ItemMemory::random(16, 1024, 4, 9);
  const auto s = generate_stream(default_profiles()[1], mem, 50, 9);
  testing::TempDir dir("trace");
  save_trace(dir / "t.tort", 1024, s);
  const Trace t = load_trace(dir / "t.tort");
  EXPECT_EQ(t.dimension, 1024U);
  ASSERT_EQ(t.windows.size(), s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(t.windows[i].query, s[i].query);
    EXPECT_EQ(t.windows[i].load.objects, s[i].load.objects);
    EXPECT_EQ(t.windows[i].load.queue_depth, s[i].load.queue_depth);
    EXPECT_EQ(t.windows[i].concept_index, s[i].concept_index);
  }
  EXPECT_EQ(std::filesystem::file_size(dir / "t.tort"), 14U + 50U * (128U + 6U));
}

TEST(Trace, RejectsBadInput) {
  std::stringstream wrong("TORM\x01\x00");
  EXPECT_THROW(read_trace(wrong), FormatError);
  std::stringstream ss;
  const ItemMemory mem = ItemMemory::random(4, 512, 4, 1);
  write_trace(ss, 512, generate_stream(steady(0.01, 0.0), mem, 3, 1));
  const std::string bytes = ss.str();
  std::stringstream cut(bytes.substr(0, bytes.size() - 1));
  EXPECT_THROW(read_trace(cut), FormatError);
}

}  // namespace
}  // namespace hdalign
