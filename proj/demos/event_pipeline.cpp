// Event camera front end feeding the alignment engine.
//
// Synthetic DVS events on a 32x32 sensor are binned into 16.67 ms windows,
// projected to 8192-bit hypervectors and scored against eight scene prototypes.
//
//   ./event_pipeline [windows]
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "hdalign/controller.hpp"
#include "hdalign/experiment.hpp"
#include "hdalign/projection.hpp"
#include "hdalign/workload.hpp"

using namespace hdalign;

namespace {

constexpr std::size_t kSide = 32;
constexpr std::size_t kDim = 8192;
constexpr std::size_t kBanks = 16;
constexpr std::size_t kScenes = 8;
constexpr std::uint64_t kWindowUs = 16'670;

struct Pixel {
  std::uint16_t x;
  std::uint16_t y;
  std::int8_t polarity;
};

// Each scene is a fixed set of active pixels.
std::vector<std::vector<Pixel>> make_scenes(detail::Rng& rng) {
  std::vector<std::vector<Pixel>> scenes(kScenes);
  for (auto& s : scenes) {
    for (int i = 0; i < 120; ++i) {
      s.push_back(Pixel{static_cast<std::uint16_t>(rng.below(kSide)), static_cast<std::uint16_t>(rng.below(kSide)),
                        static_cast<std::int8_t>(rng.bernoulli(0.5) ? 1 : -1)});
    }
  }
  return scenes;
}

std::vector<Event> emit(const std::vector<Pixel>& scene, std::uint64_t t0, std::size_t count, double noise,
                        detail::Rng& rng) {
  std::vector<Event> ev;
  ev.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t t = t0 + rng.below(kWindowUs);
    if (rng.bernoulli(noise)) {
      ev.push_back(Event{static_cast<std::uint16_t>(rng.below(kSide)), static_cast<std::uint16_t>(rng.below(kSide)), t,
                         static_cast<std::int8_t>(rng.bernoulli(0.5) ? 1 : -1)});
    } else {
      const Pixel& p = scene[rng.below(scene.size())];
      ev.push_back(Event{p.x, p.y, t, p.polarity});
    }
  }
  return ev;
}

// Ternary frame: pixels above a quarter of the peak keep their sign, the rest drop out.
Hypervector encode(std::span<const Event> events, std::uint64_t t0, const Projection& proj) {
  const EventWindow w = accumulate(events, t0, kWindowUs, SensorBounds{kSide, kSide});
  std::vector<double> frame(w.normalized.size(), 0.0);
  for (std::size_t i = 0; i < frame.size(); ++i) {
    if (w.normalized[i] > 0.25) frame[i] = 1.0;
    if (w.normalized[i] < -0.25) frame[i] = -1.0;
  }
  return project_and_sign(frame, proj);
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t windows = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 120;
  detail::Rng rng(2024);
  const Projection proj(kSide * kSide, kDim, 17);
  auto scenes = make_scenes(rng);

  std::vector<Hypervector> rows;
  std::vector<std::string> labels;
  for (std::size_t s = 0; s < kScenes; ++s) {
    rows.push_back(encode(emit(scenes[s], 0, 4000, 0.0, rng), 0, proj));
    labels.push_back("scene-" + std::to_string(s));
  }
  const ItemMemory mem(kBanks, std::move(rows), std::move(labels));

  const Hypervector goal = bundle(std::vector<Hypervector>{mem.row(0), mem.row(3), mem.row(5)});
  Engine engine(mem, TaskContext("demo", {}, goal), PolicyConfig{}, CycleModel{}, 
                PowerTable::with_idle_fraction(kDefaultIdleFraction));

  std::size_t hits = 0;
  std::size_t counts[3] = {};
  double energy = 0.0;
  PathMode last = PathMode::Full;
  std::printf("%6s %-7s %6s %6s %-8s %6s %9s %8s\n", "window", "scene", "mode", "rho", "D'", "top", "lat_ms", "mJ");
  for (std::size_t t = 0; t < windows; ++t) {
    const std::size_t scene = (t / 30) % kScenes;
    const std::uint64_t t0 = t * kWindowUs;
    // Busy stretches raise the event rate and the proposal count.
    const bool busy = (t / 15) % 2 == 1;
    // Slow drift: now and then one pixel of the scene moves.
    if (rng.bernoulli(0.3)) {
      Pixel& p = scenes[scene][rng.below(scenes[scene].size())];
      p.x = static_cast<std::uint16_t>(rng.below(kSide));
      p.y = static_cast<std::uint16_t>(rng.below(kSide));
    }
    const auto events = emit(scenes[scene], t0, busy ? 4000 : 3000, 0.05, rng);
    const LoadSample load{busy ? 10U : 3U, busy ? 4U : 1U};
    const WindowReport r = engine.step_window(encode(events, t0, proj), load, static_cast<std::int64_t>(scene));
    hits += r.argmax == scene ? 1 : 0;
    ++counts[static_cast<int>(r.mode)];
    const PathMode previous = last;
    last = r.mode;
    energy += r.energy.total_mj;
    if (t % 10 == 0 || r.mode != previous) {
      std::printf("%6zu %-7s %6s %6.3f %-8zu %6s %9.4f %8.3f\n", t, mem.label(scene).c_str() + 6,
                  std::string(to_string(r.mode)).c_str(), r.rho, r.effective_dimension,
                  mem.label(r.final_argmax).c_str() + 6, r.latency_ms, r.energy.total_mj);
    }
  }
  std::printf("\naligner accuracy %.3f  full %zu  delta %zu  bypass %zu  mean energy %.2f mJ/frame\n",
              static_cast<double>(hits) / static_cast<double>(windows), counts[static_cast<int>(PathMode::Full)],
              counts[static_cast<int>(PathMode::Delta)], counts[static_cast<int>(PathMode::Bypass)],
              energy / static_cast<double>(windows));
}
