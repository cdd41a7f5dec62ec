#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hdalign/controller.hpp"
#include "hdalign/errors.hpp"
#include "hdalign/item_memory.hpp"
#include "hdalign/perf_model.hpp"
#include "hdalign/reasoner.hpp"
#include "hdalign/telemetry.hpp"
#include "hdalign/workload.hpp"

namespace hdalign {

using Json = nlohmann::ordered_json;

enum class OutputFormat : std::uint8_t { Csv, Json };

inline OutputFormat parse_output_format(std::string_view s) {
  if (s == "csv") return OutputFormat::Csv;
  if (s == "json") return OutputFormat::Json;
  throw ConfigError("unknown output format \"" + std::string(s) + "\" (expected csv or json)");
}

inline std::string_view to_string(OutputFormat f) { return f == OutputFormat::Csv ? "csv" : "json"; }

struct MemorySource {
  std::optional<std::filesystem::path> file;
  std::size_t concepts = 80;
  std::size_t dimension = 8192;
  std::size_t banks = 16;
  std::uint64_t seed = 7;

  ItemMemory materialize() const {
    if (file) return load(*file);
    return ItemMemory::random(concepts, dimension, banks, seed);
  }
};

struct TaskSpec {
  std::string name;  // also selects the workload profile
  std::vector<std::string> path;
  std::uint64_t prompt_seed = 0;
  std::vector<std::size_t> prompt_concepts;  // when set, the goal is their bundle
};

// Fitted with `hdalign calibrate --target-w 3.27` on the default workload.
inline constexpr double kDefaultIdleFraction = 0.681584;

/// The five shipped tasks: relation path and the concepts their goal bundles.
inline std::vector<TaskSpec> default_tasks() {
  return {{"have-breakfast", {"used-for"}, 0, {0, 1, 2}},
          {"take-a-rest", {"located-at"}, 0, {3, 4, 5}},
          {"cooking", {"used-for", "part-of"}, 0, {6, 7, 8}},
          {"pour-wine", {"used-for"}, 0, {9, 10, 11}},
          {"sports", {"located-at"}, 0, {12, 13, 14}}};
}

struct ExperimentConfig {
  MemorySource memory;
  PolicyConfig policy;
  CycleModel cycles;
  PowerTable power = PowerTable::with_idle_fraction(kDefaultIdleFraction);
  std::uint64_t relation_seed = 11;
  std::vector<std::string> relations = {"used-for", "part-of", "located-at"};
  std::vector<TaskProfile> profiles = default_profiles();
  std::vector<TaskSpec> tasks;
  std::vector<RtTarget> targets = {RtTarget::Rt60, RtTarget::Rt30};
  std::size_t windows = 2000;
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "results";
  OutputFormat format = OutputFormat::Csv;
  bool strict = false;

  const TaskProfile& profile(const std::string& name) const {
    for (const auto& p : profiles) {
      if (p.name == name) return p;
    }
    throw ConfigError("task \"" + name + "\" has no workload profile");
  }

  /// Checks everything that does not need the item memory contents.
  void validate(const MemoryShape& shape) const {
    if (windows == 0) throw ConfigError("windows must be at least 1");
    if (targets.empty()) throw ConfigError("rt_targets must list at least one target");
    if (tasks.empty()) throw ConfigError("tasks must list at least one task");
    cycles.validate();
    power.validate();
    policy.validate(shape.dimension, shape.banks, shape.concepts);
    std::set<std::string> names;
    for (const auto& p : profiles) {
      p.validate();
      if (!names.insert(p.name).second) throw ConfigError("duplicate profile \"" + p.name + "\"");
      for (auto c : p.concepts) {
        if (c >= shape.concepts) throw ConfigError(p.name + ": concept " + std::to_string(c) + " out of range");
      }
    }
    std::set<std::string> task_names;
    for (const auto& t : tasks) {
      profile(t.name);
      if (!task_names.insert(t.name).second) throw ConfigError("duplicate task \"" + t.name + "\"");
      for (const auto& r : t.path) {
        if (std::find(relations.begin(), relations.end(), r) == relations.end()) {
          throw ConfigError("task \"" + t.name + "\" uses undeclared relation \"" + r + "\"");
        }
      }
      for (auto c : t.prompt_concepts) {
        if (c >= shape.concepts) {
          throw ConfigError("task \"" + t.name + "\" prompt concept " + std::to_string(c) + " out of range");
        }
      }
    }
  }
};

namespace detail {

// Walks a JSON object, rejecting keys nobody asked for.
class ConfigReader {
 public:
  ConfigReader(const Json& node, std::string where) : node_(node), where_(std::move(where)) {
    if (!node_.is_object()) throw ConfigError(where_ + " must be an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return node_.contains(key) && !node_.at(key).is_null();
  }

  const Json& at(const std::string& key) {
    seen_.insert(key);
    return node_.at(key);
  }

  std::string path(const std::string& key) const { return where_ + "." + key; }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = node_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(path(key) + " has the wrong type");
    }
  }

  void finish() const {
    for (const auto& item : node_.items()) {
      if (!seen_.count(item.key())) throw ConfigError("unknown key " + where_ + "." + item.key());
    }
  }

 private:
  const Json& node_;
  std::string where_;
  std::set<std::string> seen_;
};

inline void read_policy(const Json& j, PolicyConfig& p) {
  ConfigReader r(j, "policy");
  r.read("bypass_threshold", p.bypass_threshold);
  r.read("delta_threshold", p.delta_threshold);
  r.read("margin_threshold", p.margin_threshold);
  r.read("high_objects", p.high_objects);
  r.read("high_queue", p.high_queue);
  r.read("cache_depth", p.cache_depth);
  r.read("ladder", p.ladder);
  r.read("top_k", p.top_k);
  r.read("delta_capacity", p.delta_capacity);
  r.read("bypass", p.bypass_enabled);
  r.read("reasoner_gating", p.reasoner_gating);
  if (r.has("precision")) p.precision = parse_precision(r.at("precision").get<std::string>());
  r.finish();
}

inline void read_cycles(const Json& j, CycleModel& c) {
  ConfigReader r(j, "cycle_model");
  r.read("clock_hz", c.clock_hz);
  r.read("lanes", c.lanes);
  r.read("overhead_cycles", c.overhead_cycles);
  r.read("psu_word_bits", c.psu_word_bits);
  r.finish();
}

inline void read_power(const Json& j, PowerTable& t) {
  ConfigReader r(j, "power");
  if (r.has("idle_fraction")) t.idle_fraction.fill(r.at("idle_fraction").get<double>());
  if (r.has("blocks_mw")) {
    ConfigReader blocks(r.at("blocks_mw"), "power.blocks_mw");
    for (std::size_t b = 0; b < kBlockCount; ++b) blocks.read(std::string(kBlockNames[b]), t.active_mw[b]);
    blocks.finish();
  }
  r.finish();
}

inline void read_profile(const Json& j, TaskProfile& p, const std::string& where) {
  ConfigReader r(j, where);
  r.read("name", p.name);
  r.read("flip_rate", p.flip_rate);
  r.read("flip_spread", p.flip_spread);
  r.read("base_perturbation", p.base_perturbation);
  r.read("dwell_windows", p.dwell_windows);
  r.read("concepts", p.concepts);
  r.read("objects_mean", p.objects_mean);
  r.read("objects_swing", p.objects_swing);
  r.read("objects_period", p.objects_period);
  r.read("objects_noise", p.objects_noise);
  r.read("objects_min", p.objects_min);
  r.read("objects_max", p.objects_max);
  r.read("arrival_rate", p.arrival_rate);
  r.read("queue_max", p.queue_max);
  r.finish();
}

}  // namespace detail

/// Config from a JSON document (comments allowed). Relative file paths resolve against `base_dir`.
inline ExperimentConfig parse_config(const Json& j, const std::filesystem::path& base_dir = {}) {
  using detail::ConfigReader;
  ExperimentConfig cfg;
  try {
    ConfigReader r(j, "config");
    r.read("seed", cfg.seed);
    r.read("windows", cfg.windows);
    r.read("strict", cfg.strict);
    if (r.has("rt_targets")) {
      cfg.targets.clear();
      for (const auto& t : r.at("rt_targets")) cfg.targets.push_back(parse_rt_target(t.get<std::string>()));
    }
    if (r.has("output")) {
      ConfigReader o(r.at("output"), "output");
      if (o.has("dir")) cfg.out_dir = o.at("dir").get<std::string>();
      if (o.has("format")) cfg.format = parse_output_format(o.at("format").get<std::string>());
      o.finish();
    }
    if (r.has("memory")) {
      ConfigReader m(r.at("memory"), "memory");
      if (m.has("file")) {
        std::filesystem::path f = m.at("file").get<std::string>();
        if (f.is_relative()) f = base_dir / f;
        if (!std::filesystem::exists(f)) throw ConfigError("memory.file " + f.string() + " does not exist");
        cfg.memory.file = f;
      }
      m.read("concepts", cfg.memory.concepts);
      m.read("dimension", cfg.memory.dimension);
      m.read("banks", cfg.memory.banks);
      m.read("seed", cfg.memory.seed);
      m.finish();
    }
    if (r.has("policy")) detail::read_policy(r.at("policy"), cfg.policy);
    if (r.has("cycle_model")) detail::read_cycles(r.at("cycle_model"), cfg.cycles);
    if (r.has("power")) detail::read_power(r.at("power"), cfg.power);
    if (r.has("relations")) {
      ConfigReader rel(r.at("relations"), "relations");
      rel.read("seed", cfg.relation_seed);
      rel.read("names", cfg.relations);
      rel.finish();
    }
    if (r.has("profiles")) {
      for (const auto& pj : r.at("profiles")) {
        if (!pj.contains("name")) throw ConfigError("every profiles entry needs a name");
        const auto name = pj.at("name").get<std::string>();
        auto it = std::find_if(cfg.profiles.begin(), cfg.profiles.end(),
                               [&](const TaskProfile& p) { return p.name == name; });
        if (it == cfg.profiles.end()) {
          cfg.profiles.push_back(TaskProfile{});
          it = std::prev(cfg.profiles.end());
        }
        detail::read_profile(pj, *it, "profiles[" + name + "]");
      }
    }
    if (r.has("tasks")) {
      for (const auto& tj : r.at("tasks")) {
        TaskSpec t;
        ConfigReader tr(tj, "tasks[]");
        tr.read("name", t.name);
        tr.read("path", t.path);
        tr.read("prompt_seed", t.prompt_seed);
        tr.read("prompt_concepts", t.prompt_concepts);
        tr.finish();
        if (t.name.empty()) throw ConfigError("every task needs a name");
        cfg.tasks.push_back(std::move(t));
      }
    }
    r.finish();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (cfg.tasks.empty()) {
    const auto shipped = default_tasks();
    for (const auto& p : cfg.profiles) {
      auto it = std::find_if(shipped.begin(), shipped.end(), [&](const TaskSpec& t) { return t.name == p.name; });
      TaskSpec t = it != shipped.end() ? *it : TaskSpec{p.name, {"used-for"}, 101, {}};
      // Small seeded memories fall back to a seeded prompt.
      const bool fits = std::all_of(t.prompt_concepts.begin(), t.prompt_concepts.end(),
                                    [&](std::size_t c) { return cfg.memory.file || c < cfg.memory.concepts; });
      if (!fits) t.prompt_concepts.clear();
      cfg.tasks.push_back(std::move(t));
    }
  }
  if (!cfg.memory.file) {
    const std::size_t d = cfg.memory.dimension;
    const std::size_t b = cfg.memory.banks;
    if (cfg.memory.concepts == 0) throw ConfigError("memory.concepts must be at least 1");
    if (b == 0 || b > 64 || d == 0 || d % b != 0 || (d / b) % kWordBits != 0) {
      throw ConfigError("memory.dimension must split into memory.banks banks of whole 64-bit words");
    }
    cfg.validate(MemoryShape{cfg.memory.concepts, d, b});
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(is, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

/// Prompt hypervector t for a task. With prompt concepts, t is chosen so that
/// binding it with the path relations yields the bundle of those concepts.
inline Hypervector task_goal(const TaskSpec& task, const ItemMemory& mem, const RelationSet& relations) {
  if (task.prompt_concepts.empty()) {
    return compose_path(keyed_hypervector(mem.dimension(), task.prompt_seed, "prompt:" + task.name), relations,
                        task.path);
  }
  std::vector<Hypervector> parts;
  for (auto c : task.prompt_concepts) parts.push_back(mem.row(c));
  // Relations are self-inverse, so binding the bundle with the path twice returns it.
  const Hypervector target = bundle(parts);
  return compose_path(compose_path(target, relations, task.path), relations, task.path);
}

struct ModeCounts {
  std::size_t bypass = 0;
  std::size_t delta = 0;
  std::size_t full = 0;
  std::size_t gated = 0;
  std::size_t overruns = 0;
  std::size_t overflows = 0;
};

struct RunResult {
  std::string task;
  RtTarget rt = RtTarget::Rt60;
  std::vector<WindowReport> reports;
  LatencyStats stats;
  ModeCounts counts;
  double mean_rho = 0.0;  // over windows that found a cached query
  double accuracy = 0.0;  // aligner argmax against ground truth
};

struct ExperimentResult {
  std::vector<RunResult> runs;

  bool any_overrun() const {
    for (const auto& r : runs) {
      if (r.counts.overruns != 0) return true;
    }
    return false;
  }
};

inline std::string rt_slug(RtTarget t) { return t == RtTarget::Rt30 ? "rt30" : "rt60"; }

/// One task at one target: stream generation, window loop, summary.
inline RunResult run_one(const ExperimentConfig& cfg, const ItemMemory& mem, const RelationSet& relations,
                         const TaskSpec& task, RtTarget rt) {
  const TaskProfile profile = cfg.profile(task.name).rescaled(window_scale(rt));
  const std::uint64_t stream_seed =
      detail::hash_combine(cfg.seed, detail::hash_string(task.name + "/" + std::string(to_string(rt))));
  const auto stream = generate_stream(profile, mem, cfg.windows, stream_seed);

  PolicyConfig policy = cfg.policy;
  policy.rt_target = rt;
  Engine engine(mem, TaskContext(task.name, task.path, task_goal(task, mem, relations)), policy, cfg.cycles,
                cfg.power);

  RunResult out;
  out.task = task.name;
  out.rt = rt;
  out.reports.reserve(stream.size());
  std::vector<double> latency;
  std::vector<double> energy;
  double rho_sum = 0.0;
  std::size_t rho_count = 0;
  std::size_t hits = 0;
  for (const auto& w : stream) {
    WindowReport r = engine.step_window(w.query, w.load, static_cast<std::int64_t>(w.concept_index));
    latency.push_back(r.latency_ms);
    energy.push_back(r.energy.total_mj);
    switch (r.mode) {
      case PathMode::Bypass: ++out.counts.bypass; break;
      case PathMode::Delta: ++out.counts.delta; break;
      case PathMode::Full: ++out.counts.full; break;
    }
    out.counts.gated += r.reasoner_gated ? 1 : 0;
    out.counts.overruns += r.budget_overrun ? 1 : 0;
    out.counts.overflows += r.delta_overflow ? 1 : 0;
    if (r.rho > -1.0) {
      rho_sum += r.rho;
      ++rho_count;
    }
    hits += static_cast<std::int64_t>(r.argmax) == r.ground_truth ? 1 : 0;
    r.output.values.clear();  // keep memory bounded; reports carry the argmax
    out.reports.push_back(std::move(r));
  }
  out.stats = summarize(latency, energy, policy.budget_ms(), policy.budget_ms());
  out.mean_rho = rho_count == 0 ? 0.0 : rho_sum / static_cast<double>(rho_count);
  out.accuracy = static_cast<double>(hits) / static_cast<double>(stream.size());
  return out;
}

/// Every task at every target, in config order (targets outer).
inline ExperimentResult run(const ExperimentConfig& cfg, const ItemMemory& mem) {
  cfg.validate(MemoryShape::of(mem));
  const RelationSet relations = RelationSet::seeded(mem.dimension(), cfg.relation_seed, cfg.relations);
  ExperimentResult result;
  for (RtTarget rt : cfg.targets) {
    for (const auto& task : cfg.tasks) result.runs.push_back(run_one(cfg, mem, relations, task, rt));
  }
  return result;
}

/// Idle fraction that puts the mean power of every window of `result` at `target_w`.
inline double fit_idle_fraction(const ExperimentResult& result, const ExperimentConfig& cfg, double target_w) {
  std::vector<BlockActivity> activity;
  std::vector<double> periods;
  for (const auto& run : result.runs) {
    for (const auto& r : run.reports) {
      activity.push_back(r.activity);
      periods.push_back(frame_budget_ms(run.rt));
    }
  }
  return fit_idle_fraction(activity, periods, cfg.power, cfg.cycles, target_w);
}

// ---------------------------------------------------------------------------
// Report tables. Column order is frozen per version; JSON mirrors CSV.

inline constexpr int kReportVersion = 1;

namespace detail {

inline std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct Table {
  std::string kind;  // window-report, runtime-table, envelope-table
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::vector<bool>> numeric;  // per cell: emit as a JSON number
};

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline void write_table(const Table& t, const std::filesystem::path& path, OutputFormat format) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  if (format == OutputFormat::Csv) {
    os << "# " << t.kind << " v" << kReportVersion << "\n";
    for (std::size_t c = 0; c < t.columns.size(); ++c) os << (c ? "," : "") << t.columns[c];
    os << "\n";
    for (const auto& row : t.rows) {
      for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << csv_escape(row[c]);
      os << "\n";
    }
    return;
  }
  Json j;
  j["format"] = t.kind;
  j["version"] = kReportVersion;
  j["columns"] = t.columns;
  Json rows = Json::array();
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    Json row = Json::array();
    for (std::size_t c = 0; c < t.rows[r].size(); ++c) {
      if (t.numeric[r][c]) {
        row.push_back(Json::parse(t.rows[r][c]));
      } else {
        row.push_back(t.rows[r][c]);
      }
    }
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  os << j.dump(1) << "\n";
}

class RowBuilder {
 public:
  RowBuilder& text(std::string s) {
    cells_.push_back(std::move(s));
    numeric_.push_back(false);
    return *this;
  }
  RowBuilder& number(double v) {
    cells_.push_back(num(v));
    numeric_.push_back(true);
    return *this;
  }
  RowBuilder& integer(std::uint64_t v) {
    cells_.push_back(std::to_string(v));
    numeric_.push_back(true);
    return *this;
  }
  RowBuilder& signed_integer(std::int64_t v) {
    cells_.push_back(std::to_string(v));
    numeric_.push_back(true);
    return *this;
  }
  RowBuilder& flag(bool v) { return integer(v ? 1 : 0); }

  void commit(Table& t) {
    t.rows.push_back(std::move(cells_));
    t.numeric.push_back(std::move(numeric_));
  }

 private:
  std::vector<std::string> cells_;
  std::vector<bool> numeric_;
};

}  // namespace detail

inline std::vector<std::string> window_columns() {
  std::vector<std::string> c = {"window", "task", "rt", "mode", "rho", "delta_count", "d_eff", "precision",
                                "cycles_psu", "cycles_aligner", "cycles_reasoner", "cycles_overhead",
                                "cycles_total", "bits_read", "index_reads", "latency_ms", "energy_mj"};
  for (auto name : kBlockNames) c.push_back("e_" + std::string(name));
  for (const char* s : {"topk_key", "margin", "reasoner_gated", "argmax", "final_argmax", "ground_truth",
                        "objects", "queue_depth", "budget_overrun", "delta_overflow"}) {
    c.emplace_back(s);
  }
  return c;
}

inline detail::Table window_table(const RunResult& run) {
  detail::Table t{"window-report", window_columns(), {}, {}};
  for (const auto& r : run.reports) {
    detail::RowBuilder b;
    b.integer(r.window).text(r.task).text(std::string(to_string(r.rt))).text(std::string(to_string(r.mode)));
    b.number(r.rho).integer(r.delta_count).integer(r.effective_dimension).text(std::string(to_string(r.precision)));
    b.integer(r.cycles.psu).integer(r.cycles.aligner).integer(r.cycles.reasoner).integer(r.cycles.overhead);
    b.integer(r.cycles.total()).integer(r.bits_read).integer(r.index_reads);
    b.number(r.latency_ms).number(r.energy.total_mj);
    for (double e : r.energy.block_mj) b.number(e);
    std::string key;
    for (std::size_t i = 0; i < r.topk_key.size(); ++i) key += (i ? "|" : "") + std::to_string(r.topk_key[i]);
    b.text(key).number(r.margin).flag(r.reasoner_gated).integer(r.argmax).integer(r.final_argmax);
    b.signed_integer(r.ground_truth).integer(r.proposals).integer(r.queue_depth);
    b.flag(r.budget_overrun).flag(r.delta_overflow);
    b.commit(t);
  }
  return t;
}

inline detail::Table runtime_table(const ExperimentResult& result) {
  detail::Table t{"runtime-table",
                  {"task", "rt", "windows", "median_ms", "p95_ms", "jitter_ms", "headroom_ms", "min_ms", "max_ms",
                   "power_w", "energy_mj", "bypass", "delta", "full", "reasoner_gated", "overruns",
                   "delta_overflows", "mean_rho", "accuracy"},
                  {},
                  {}};
  for (const auto& run : result.runs) {
    const auto& s = run.stats;
    detail::RowBuilder b;
    b.text(run.task).text(std::string(to_string(run.rt))).integer(s.windows);
    b.number(s.median_ms).number(s.p95_ms).number(s.jitter_ms).number(s.headroom_ms).number(s.min_ms).number(s.max_ms);
    b.number(s.mean_power_w).number(s.energy_mj);
    b.integer(run.counts.bypass).integer(run.counts.delta).integer(run.counts.full).integer(run.counts.gated);
    b.integer(run.counts.overruns).integer(run.counts.overflows).number(run.mean_rho).number(run.accuracy);
    b.commit(t);
  }
  return t;
}

struct EnvelopeRow {
  RtTarget rt = RtTarget::Rt60;
  double min_ms = 0.0;
  std::string min_task;
  double max_ms = 0.0;
  std::string max_task;
};

/// Global latency extremes per target and the task that produced each; ties keep the earlier task.
inline std::vector<EnvelopeRow> envelope(const ExperimentResult& result) {
  std::vector<EnvelopeRow> rows;
  for (const auto& run : result.runs) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const EnvelopeRow& e) { return e.rt == run.rt; });
    if (it == rows.end()) {
      rows.push_back(EnvelopeRow{run.rt, run.stats.min_ms, run.task, run.stats.max_ms, run.task});
      continue;
    }
    if (run.stats.min_ms < it->min_ms) {
      it->min_ms = run.stats.min_ms;
      it->min_task = run.task;
    }
    if (run.stats.max_ms > it->max_ms) {
      it->max_ms = run.stats.max_ms;
      it->max_task = run.task;
    }
  }
  return rows;
}

inline detail::Table envelope_table(const ExperimentResult& result) {
  detail::Table t{"envelope-table", {"rt", "global_min_ms", "task_min", "global_max_ms", "task_max"}, {}, {}};
  for (const auto& e : envelope(result)) {
    detail::RowBuilder b;
    b.text(std::string(to_string(e.rt))).number(e.min_ms).text(e.min_task).number(e.max_ms).text(e.max_task);
    b.commit(t);
  }
  return t;
}

/// Writes every table under `dir`; returns the paths in write order.
inline std::vector<std::filesystem::path> write_reports(const ExperimentResult& result,
                                                        const std::filesystem::path& dir, OutputFormat format) {
  namespace fs = std::filesystem;
  const std::string ext = format == OutputFormat::Csv ? ".csv" : ".json";
  fs::create_directories(dir / "windows");
  std::vector<fs::path> written;
  for (const auto& run : result.runs) {
    const fs::path p = dir / "windows" / (run.task + "_" + rt_slug(run.rt) + ext);
    detail::write_table(window_table(run), p, format);
    written.push_back(p);
  }
  written.push_back(dir / ("runtime" + ext));
  detail::write_table(runtime_table(result), written.back(), format);
  written.push_back(dir / ("envelope" + ext));
  detail::write_table(envelope_table(result), written.back(), format);
  return written;
}

// ---------------------------------------------------------------------------
// inspect

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline Table read_table(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  Table t;
  const int first = is.peek();
  if (first == std::char_traits<char>::eof()) throw FormatError(path.string() + " is empty");
  if (first == '{') {
    Json j;
    try {
      j = Json::parse(is);
      t.kind = j.at("format").get<std::string>();
      if (j.at("version").get<int>() != kReportVersion) throw FormatError("unsupported report version");
      t.columns = j.at("columns").get<std::vector<std::string>>();
      for (const auto& row : j.at("rows")) {
        std::vector<std::string> cells;
        for (const auto& cell : row) cells.push_back(cell.is_string() ? cell.get<std::string>() : cell.dump());
        t.rows.push_back(std::move(cells));
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ": not a report (" + e.what() + ")");
    }
    return t;
  }
  std::string line;
  std::getline(is, line);
  const std::string prefix = "# ";
  const auto v = line.rfind(" v");
  if (line.rfind(prefix, 0) != 0 || v == std::string::npos) throw FormatError(path.string() + ": missing report header");
  t.kind = line.substr(2, v - 2);
  if (line.substr(v + 2) != std::to_string(kReportVersion)) throw FormatError("unsupported report version");
  if (!std::getline(is, line)) throw FormatError(path.string() + ": missing column header");
  t.columns = split_csv_line(line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != t.columns.size()) throw FormatError(path.string() + ": ragged row");
    t.rows.push_back(std::move(cells));
  }
  return t;
}

inline std::size_t column(const Table& t, const std::string& name) {
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    if (t.columns[c] == name) return c;
  }
  throw FormatError(t.kind + " has no column " + name);
}

inline void inspect_trace(std::istream& is, std::ostream& os, std::size_t limit) {
  const Trace trace = read_trace(is);
  os << "trace v" << kTraceFormatVersion << "  D=" << trace.dimension << "  windows=" << trace.windows.size() << "\n";
  if (trace.windows.empty()) return;
  const BankMask full = BankMask::full(trace.dimension, 1);
  double rho_sum = 0.0;
  std::size_t switches = 0;
  double n_sum = 0.0;
  double q_sum = 0.0;
  for (std::size_t t = 0; t < trace.windows.size(); ++t) {
    const auto& w = trace.windows[t];
    double rho = 1.0;
    if (t > 0) {
      rho = psu_compare(w.query, trace.windows[t - 1].query, full, trace.dimension).rho;
      rho_sum += rho;
      switches += w.concept_index != trace.windows[t - 1].concept_index ? 1 : 0;
    }
    n_sum += static_cast<double>(w.load.objects);
    q_sum += static_cast<double>(w.load.queue_depth);
    if (t < limit) {
      os << "  window " << t << "  concept=" << w.concept_index << "  N=" << w.load.objects
         << "  q=" << w.load.queue_depth << "  rho_prev=" << num(rho) << "\n";
    }
  }
  const auto n = static_cast<double>(trace.windows.size());
  os << "mean rho(consecutive)=" << num(trace.windows.size() > 1 ? rho_sum / (n - 1) : 1.0)
     << "  scene switches=" << switches << "  mean N=" << num(n_sum / n) << "  mean q=" << num(q_sum / n) << "\n";
}

inline void inspect_memory(std::istream& is, std::ostream& os) {
  const ItemMemory mem = read_item_memory(is);
  os << "item memory v" << kItemMemoryFormatVersion << "  M=" << mem.concepts() << "  D=" << mem.dimension()
     << "  B=" << mem.banks() << "\n";
  for (std::size_t j = 0; j < mem.concepts(); ++j) os << "  " << j << "  " << mem.label(j) << "\n";
}

inline void inspect_window_report(const Table& t, std::ostream& os, std::size_t limit) {
  const auto c_task = column(t, "task");
  const auto c_mode = column(t, "mode");
  const auto c_rho = column(t, "rho");
  const auto c_lat = column(t, "latency_ms");
  const auto c_rt = column(t, "rt");
  os << "window report v" << kReportVersion << "  windows=" << t.rows.size() << "\n";
  std::map<std::string, std::size_t> modes;
  std::map<std::string, std::pair<double, std::size_t>> rho;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    ++modes[row[c_mode]];
    const double v = std::stod(row[c_rho]);
    if (v > -1.0) {
      auto& acc = rho[row[c_task] + " " + row[c_rt]];
      acc.first += v;
      ++acc.second;
    }
    if (r < limit) {
      os << "  window " << row[0] << "  " << row[c_mode] << "  rho=" << row[c_rho] << "  latency_ms=" << row[c_lat]
         << "\n";
    }
  }
  os << "mode histogram:\n";
  for (const char* m : {"bypass", "delta", "full"}) {
    const std::size_t n = modes.count(m) ? modes.at(m) : 0;
    os << "  " << m << "  " << n << "  (" << num(100.0 * static_cast<double>(n) / static_cast<double>(t.rows.size()))
       << "%)\n";
  }
  os << "mean rho per task:\n";
  for (const auto& [task, acc] : rho) os << "  " << task << "  " << num(acc.first / static_cast<double>(acc.second)) << "\n";
}

inline void inspect_table(const Table& t, std::ostream& os) {
  os << t.kind << " v" << kReportVersion << "  rows=" << t.rows.size() << "\n";
  std::vector<std::size_t> width(t.columns.size());
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    width[c] = t.columns[c].size();
    for (const auto& row : t.rows) width[c] = std::max(width[c], row[c].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      os << (c ? "  " : "") << cells[c] << std::string(width[c] - cells[c].size(), ' ');
    }
    os << "\n";
  };
  line(t.columns);
  for (const auto& row : t.rows) line(row);
}

}  // namespace detail

/// Human-readable dump of a trace, item memory, hypervector or report file.
inline void inspect(const std::filesystem::path& path, std::ostream& os, std::size_t limit = 20) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  char magic[4] = {};
  is.read(magic, 4);
  if (is.gcount() == 0) throw FormatError(path.string() + " is empty");
  const std::string m(magic, static_cast<std::size_t>(is.gcount()));
  is.clear();
  is.seekg(0);
  if (m == "TORT") return detail::inspect_trace(is, os, limit);
  if (m == "TORM") return detail::inspect_memory(is, os);
  if (m == "HDCV") {
    const Hypervector v = read_hypervector(is);
    std::size_t ones = 0;
    for (std::size_t i = 0; i < v.dimension(); ++i) ones += v.bit(i) ? 1 : 0;
    os << "hypervector v" << kHypervectorFormatVersion << "  D=" << v.dimension() << "  +1 count=" << ones << "\n";
    return;
  }
  const detail::Table t = detail::read_table(path);
  if (t.kind == "window-report") return detail::inspect_window_report(t, os, limit);
  if (t.kind == "runtime-table" || t.kind == "envelope-table") return detail::inspect_table(t, os);
  throw FormatError(path.string() + ": unknown report kind \"" + t.kind + "\"");
}

}  // namespace hdalign
