#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hdalign/alignment.hpp"
#include "hdalign/errors.hpp"
#include "hdalign/item_memory.hpp"
#include "hdalign/path.hpp"
#include "hdalign/perf_model.hpp"
#include "hdalign/reasoner.hpp"
#include "hdalign/telemetry.hpp"

namespace hdalign {

struct LoadSample {
  std::size_t objects = 0;      // N
  std::size_t queue_depth = 0;  // q
};

struct PolicyConfig {
  double bypass_threshold = 0.95;  // tau_byp
  double delta_threshold = 0.80;   // tau_g
  double margin_threshold = 0.02;  // tau_m, cosine units
  std::size_t high_objects = 8;    // N_hi
  std::size_t high_queue = 4;      // q_hi
  std::size_t cache_depth = 4;     // K
  RtTarget rt_target = RtTarget::Rt60;
  std::vector<std::size_t> ladder;  // effective dimensions, descending; empty means every legal D'
  Precision precision = Precision::Exact;
  std::size_t top_k = 1;
  std::size_t delta_capacity = 0;  // 0 means D/8
  bool bypass_enabled = true;
  bool reasoner_gating = true;

  double budget_ms() const { return frame_budget_ms(rt_target); }

  /// Ladder of legal masks for a D x B memory, largest D' first.
  std::vector<BankMask> masks(std::size_t dimension, std::size_t banks) const {
    std::vector<BankMask> out;
    if (ladder.empty()) {
      for (std::size_t n = banks; n >= 1; n /= 2) {
        if (std::has_single_bit(n)) out.push_back(BankMask::leading(dimension, banks, n));
        if (n == 1) break;
      }
      return out;
    }
    for (auto d_eff : ladder) out.push_back(BankMask::with_effective_dimension(dimension, banks, d_eff));
    return out;
  }

  std::size_t capacity_for(std::size_t dimension) const {
    return delta_capacity == 0 ? default_delta_capacity(dimension) : delta_capacity;
  }

  void validate(std::size_t dimension, std::size_t banks, std::size_t concepts) const {
    if (!(delta_threshold >= -1.0 && delta_threshold <= bypass_threshold && bypass_threshold <= 1.0)) {
      throw ConfigError("thresholds must satisfy -1 <= tau_g <= tau_byp <= 1");
    }
    if (margin_threshold < 0.0) throw ConfigError("margin threshold must be non-negative");
    if (cache_depth == 0) throw ConfigError("query cache depth K must be at least 1");
    if (top_k == 0 || top_k >= concepts) throw ConfigError("top_k must satisfy 1 <= k < M");
    for (std::size_t i = 0; i < ladder.size(); ++i) {
      const std::size_t d_eff = ladder[i];
      if (d_eff == 0 || !std::has_single_bit(d_eff)) {
        throw ConfigError("D' ladder entry " + std::to_string(d_eff) + " is not a power of two");
      }
      if (d_eff > dimension || d_eff % (dimension / banks) != 0) {
        throw ConfigError("D' ladder entry " + std::to_string(d_eff) + " is not a whole number of banks of width " +
                          std::to_string(dimension / banks));
      }
      if (i > 0 && d_eff >= ladder[i - 1]) throw ConfigError("D' ladder must be strictly descending");
    }
  }
};

/// Path policy without the dimension step: bypass needs high similarity and high load.
inline PathMode select_path(double rho_best, LoadSample load, const PolicyConfig& cfg) {
  const bool high_load = load.objects >= cfg.high_objects || load.queue_depth >= cfg.high_queue;
  if (cfg.bypass_enabled && rho_best >= cfg.bypass_threshold && high_load) return PathMode::Bypass;
  if (rho_best >= cfg.delta_threshold) return PathMode::Delta;
  return PathMode::Full;
}

struct MemoryShape {
  std::size_t concepts = 0;
  std::size_t dimension = 0;
  std::size_t banks = 0;

  static MemoryShape of(const ItemMemory& mem) { return {mem.concepts(), mem.dimension(), mem.banks()}; }
};

struct DimensionChoice {
  BankMask mask;
  bool overrun = false;
  std::uint64_t predicted_cycles = 0;
};

/// Predicted cycles for the window plus its queued backlog, assuming the
/// worst case (full path, every cache line compared) so a delta window that escalates still fits.
inline std::uint64_t predicted_window_cycles(std::size_t d_eff, LoadSample load, std::size_t concepts,
                                             std::size_t cache_depth, const CycleModel& perf) {
  const WindowCycles c =
      window_cycles(WindowWork{PathMode::Full, d_eff, 0, load.objects, concepts, true, cache_depth}, perf);
  return (1 + load.queue_depth) * c.total();
}

/// Largest ladder D' whose predicted latency fits the frame budget; the
/// smallest mask with `overrun` set when nothing fits.
inline DimensionChoice choose_dimension(LoadSample load, const PolicyConfig& cfg, const CycleModel& perf,
                                        const MemoryShape& shape) {
  const auto masks = cfg.masks(shape.dimension, shape.banks);
  if (masks.empty()) throw ConfigError("D' ladder is empty");
  for (const auto& m : masks) {
    const std::uint64_t cycles = predicted_window_cycles(m.effective_dimension(), load, shape.concepts, cfg.cache_depth, perf);
    if (perf.cycles_to_ms(cycles) <= cfg.budget_ms()) return DimensionChoice{m, false, cycles};
  }
  const BankMask& smallest = masks.back();
  return DimensionChoice{smallest, true,
                         predicted_window_cycles(smallest.effective_dimension(), load, shape.concepts, cfg.cache_depth,
                                                 perf)};
}

/// Full policy: path selection followed by the dimension step.
inline PathDecision decide(double rho_best, LoadSample load, const PolicyConfig& cfg, const CycleModel& perf,
                           const MemoryShape& shape) {
  const DimensionChoice dim = choose_dimension(load, cfg, perf, shape);
  PathDecision d{select_path(rho_best, load, cfg), dim.mask, cfg.precision, std::nullopt, dim.overrun};
  return d;
}

struct CacheLine {
  std::uint64_t id = 0;
  ScoreState state;  // state.baseline is the cached query, state.mask the tag
  FinalScores output;
  TopK topk;
  std::uint64_t stamp = 0;

  const Hypervector& query() const noexcept { return state.baseline; }
  const BankMask& mask() const noexcept { return state.mask; }
};

struct LookupResult {
  std::optional<std::size_t> slot;  // index into QueryCache::lines()
  double rho = -1.0;
  DeltaSet delta;
  std::size_t compared = 0;  // lines tagged with the window's mask
};

/// The last K queries with their accumulators and outputs; LRU replacement.
class QueryCache {
 public:
  explicit QueryCache(std::size_t depth) : depth_(depth) {
    if (depth == 0) throw ConfigError("query cache depth must be at least 1");
  }

  std::size_t depth() const noexcept { return depth_; }
  std::size_t size() const noexcept { return lines_.size(); }
  std::span<const CacheLine> lines() const noexcept { return lines_; }
  CacheLine& at(std::size_t slot) { return lines_.at(slot); }
  const CacheLine& at(std::size_t slot) const { return lines_.at(slot); }

  /// Nearest line under `mask`; lines tagged with another mask are skipped.
  /// Equal similarity prefers the most recently used line.
  LookupResult lookup(const Hypervector& q, const BankMask& mask, std::size_t capacity) const {
    LookupResult best;
    for (std::size_t s = 0; s < lines_.size(); ++s) {
      const CacheLine& line = lines_[s];
      if (!(line.mask() == mask)) continue;
      ++best.compared;
      PsuResult psu = psu_compare(q, line.query(), mask, capacity);
      const bool better = !best.slot || psu.rho > best.rho ||
                          (psu.rho == best.rho && line.stamp > lines_[*best.slot].stamp);
      if (better) {
        best.slot = s;
        best.rho = psu.rho;
        best.delta = std::move(psu.delta);
      }
    }
    return best;
  }

  void touch(std::size_t slot) { lines_.at(slot).stamp = ++clock_; }

  /// Inserts as most recent, evicting the least recent line when full.
  std::uint64_t insert(ScoreState state, FinalScores output, TopK topk) {
    if (lines_.size() == depth_) {
      auto lru = std::min_element(lines_.begin(), lines_.end(),
                                  [](const CacheLine& a, const CacheLine& b) { return a.stamp < b.stamp; });
      lines_.erase(lru);
    }
    const std::uint64_t id = ++next_id_;
    lines_.push_back(CacheLine{id, std::move(state), std::move(output), std::move(topk), ++clock_});
    return id;
  }

  void clear() { lines_.clear(); }

 private:
  std::size_t depth_;
  std::vector<CacheLine> lines_;
  std::uint64_t clock_ = 0;
  std::uint64_t next_id_ = 0;
};

/// A task goal hypervector with its weights precomputed for every ladder mask.
class TaskContext {
 public:
  TaskContext(std::string task, std::vector<std::string> path, Hypervector goal)
      : task_(std::move(task)), path_(std::move(path)), goal_(std::move(goal)) {}

  const std::string& task() const noexcept { return task_; }
  const Hypervector& goal() const noexcept { return goal_; }

  void precompute(const ItemMemory& mem, std::span<const BankMask> masks) {
    TrafficMeter offline(mem.banks());
    for (const auto& m : masks) {
      weights_.insert_or_assign(m.effective_dimension(), precompute_weights(task_, path_, goal_, mem, m, offline));
    }
  }

  const TaskWeights& weights_for(const BankMask& mask) const {
    auto it = weights_.find(mask.effective_dimension());
    if (it == weights_.end() || !(it->second.mask == mask)) {
      throw StaleStateError("no task weights precomputed for D'=" + std::to_string(mask.effective_dimension()));
    }
    return it->second;
  }

 private:
  std::string task_;
  std::vector<std::string> path_;
  Hypervector goal_;
  std::map<std::size_t, TaskWeights> weights_;
};

/// One aligner/reasoner pipeline with its window-level state: query cache,
/// accumulators, output cache and traffic counters. Windows run strictly in order.
class Engine {
 public:
  Engine(const ItemMemory& memory, TaskContext task, PolicyConfig policy, CycleModel perf, PowerTable power)
      : memory_(&memory),
        task_(std::move(task)),
        policy_(std::move(policy)),
        perf_(perf),
        power_(power),
        cache_(policy_.cache_depth),
        meter_(memory.banks()) {
    policy_.validate(memory.dimension(), memory.banks(), memory.concepts());
    perf_.validate();
    power_.validate();
    const auto masks = policy_.masks(memory.dimension(), memory.banks());
    task_.precompute(memory, masks);
  }

  const QueryCache& cache() const noexcept { return cache_; }
  const TrafficMeter& traffic() const noexcept { return meter_; }
  const PolicyConfig& policy() const noexcept { return policy_; }
  const ItemMemory& memory() const noexcept { return *memory_; }

  /// Online prompt change: new weights, cached outputs dropped.
  void set_task(TaskContext task) {
    task_ = std::move(task);
    task_.precompute(*memory_, policy_.masks(memory_->dimension(), memory_->banks()));
    cache_.clear();
    last_.reset();
  }

  /// Test hook for the delta path; null in normal operation.
  void inject_delta_fault(const DeltaFault* fault) { fault_ = fault; }

  /// latch controls -> PSU lookup -> path -> aligner -> top-k -> reasoner gate -> cache commit -> report.
  WindowReport step_window(const Hypervector& q, LoadSample load, std::int64_t ground_truth = -1) {
    const ItemMemory& mem = *memory_;
    const MemoryShape shape = MemoryShape::of(mem);
    const std::size_t capacity = policy_.capacity_for(mem.dimension());

    const DimensionChoice dim = choose_dimension(load, policy_, perf_, shape);
    LookupResult hit = cache_.lookup(q, dim.mask, capacity);
    PathDecision decision{select_path(hit.rho, load, policy_), dim.mask, policy_.precision, hit.slot, dim.overrun};

    WindowReport r;
    r.window = window_++;
    r.task = task_.task();
    r.rt = policy_.rt_target;
    r.rho = hit.rho;
    r.delta_count = hit.slot ? hit.delta.size() : 0;
    r.effective_dimension = dim.mask.effective_dimension();
    r.precision = policy_.precision;
    r.ground_truth = ground_truth;
    r.proposals = load.objects;
    r.queue_depth = load.queue_depth;

    const std::uint64_t bits_before = meter_.bits_read();
    const std::uint64_t index_before = meter_.index_reads();

    if (decision.mode == PathMode::Delta && hit.delta.overflowed) {
      decision.mode = PathMode::Full;
      r.delta_overflow = true;
    }

    bool reasoner_ran = false;
    if (decision.mode == PathMode::Bypass) {
      const std::size_t slot = *hit.slot;
      cache_.touch(slot);
      const CacheLine& line = cache_.at(slot);
      r.output = line.output;
      r.output.source = ScoreSource::BypassedCache;
      r.topk_key = line.topk.key;
      r.margin = line.topk.margin;
      r.argmax = argmax(line.state);
      r.reasoner_gated = true;
      last_ = Previous{line.topk, r.output};
    } else {
      ScoreState state = decision.mode == PathMode::Delta
                             ? delta_update(cache_.at(*hit.slot).state, q, hit.delta, mem, dim.mask, meter_, fault_)
                             : full_scan(q, mem, dim.mask, policy_.precision, meter_);
      TopK topk = top_k(state, policy_.top_k);
      const bool gate = policy_.reasoner_gating && last_ && last_->topk.key == topk.key &&
                        topk.margin >= policy_.margin_threshold;
      FinalScores output = gate ? last_->output : apply(state, task_.weights_for(dim.mask), ScoreSource::Reasoned);
      reasoner_ran = !gate;
      r.reasoner_gated = gate;
      r.topk_key = topk.key;
      r.margin = topk.margin;
      r.argmax = argmax(state);
      r.output = output;
      last_ = Previous{topk, output};

      if (decision.mode == PathMode::Delta) {
        CacheLine& line = cache_.at(*hit.slot);
        line.state = std::move(state);
        line.output = std::move(output);
        line.topk = std::move(topk);
        cache_.touch(*hit.slot);
      } else {
        cache_.insert(std::move(state), std::move(output), std::move(topk));
      }
    }
    r.mode = decision.mode;
    r.final_argmax = r.output.argmax();
    r.bits_read = meter_.bits_read() - bits_before;
    r.index_reads = meter_.index_reads() - index_before;

    const WindowWork work{decision.mode, dim.mask.effective_dimension(),
                          decision.mode == PathMode::Delta ? hit.delta.size() : 0, load.objects, mem.concepts(),
                          reasoner_ran, hit.compared};
    r.cycles = window_cycles(work, perf_);
    r.latency_ms = perf_.cycles_to_ms(r.cycles.total());
    const double period = policy_.budget_ms();
    r.activity = block_activity(work, r.cycles, mem.dimension(), perf_);
    r.energy = window_energy(r.activity, power_, period, perf_);
    r.budget_overrun = dim.overrun || r.latency_ms > period;
    return r;
  }

 private:
  struct Previous {
    TopK topk;
    FinalScores output;
  };

  const ItemMemory* memory_;
  TaskContext task_;
  PolicyConfig policy_;
  CycleModel perf_;
  PowerTable power_;
  QueryCache cache_;
  TrafficMeter meter_;
  std::optional<Previous> last_;
  const DeltaFault* fault_ = nullptr;
  std::size_t window_ = 0;
};

}  // namespace hdalign
