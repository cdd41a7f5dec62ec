#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "hdalign/experiment.hpp"
#include "hdalign/verify.hpp"

namespace {

using namespace hdalign;

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kConfigError = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> format;
  bool strict = false;
};

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? parse_config(Json::object()) : load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.out) cfg.out_dir = *c.out;
  if (c.format) cfg.format = parse_output_format(*c.format);
  if (c.strict) cfg.strict = true;
  return cfg;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "Experiment config (JSON with comments)");
  app->add_option("--seed", c.seed, "Override the experiment seed");
}

int cmd_run(const Common& c) {
  const ExperimentConfig cfg = load(c);
  const ItemMemory mem = cfg.memory.materialize();
  const ExperimentResult result = run(cfg, mem);
  const auto files = write_reports(result, cfg.out_dir, cfg.format);
  for (const auto& run : result.runs) {
    const auto& s = run.stats;
    std::printf("%-16s %s  median %.4f ms  p95 %.4f ms  jitter %.4f ms  %.3f W  %.2f mJ  overruns %zu\n",
                run.task.c_str(), std::string(to_string(run.rt)).c_str(), s.median_ms, s.p95_ms, s.jitter_ms,
                s.mean_power_w, s.energy_mj, run.counts.overruns);
  }
  std::printf("wrote %zu files under %s\n", files.size(), cfg.out_dir.string().c_str());
  if (cfg.strict && result.any_overrun()) {
    std::fprintf(stderr, "strict mode: budget overruns recorded\n");
    return kFailure;
  }
  return kOk;
}

void print_check(const verify::CheckResult& r) {
  std::printf("%s  %-20s cases=%llu  worst=%.6g%s%s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
              static_cast<unsigned long long>(r.cases), r.worst, r.detail.empty() ? "" : "  ", r.detail.c_str());
}

int cmd_verify(const Common& c, const std::string& mutate) {
  const ExperimentConfig cfg = load(c);
  const ItemMemory mem = cfg.memory.materialize();
  cfg.validate(MemoryShape::of(mem));
  std::optional<DeltaFault> fault;
  if (mutate == "delta-drop") fault = DeltaFault{true};
  bool ok = true;
  auto report = [&](const verify::CheckResult& r) {
    print_check(r);
    ok = ok && r.passed;
  };
  verify::DeltaSweep sweep;
  sweep.seed = cfg.seed;
  report(verify::delta_exactness(sweep, fault ? &*fault : nullptr));
  report(verify::similarity_gate());
  report(verify::policy_table(cfg.policy, cfg.cycles, MemoryShape::of(mem)));
  report(verify::cycle_conformance());
  report(verify::traffic_conformance());
  report(verify::bypass_bound());
  report(verify::binding_algebra());
  const auto fid = verify::retrieval_fidelity(mem, cfg.profiles, cfg.windows, cfg.seed, cfg.policy.bypass_threshold);
  report(fid.delta);
  report(fid.bypass);
  std::printf("%s\n", ok ? "all checks passed" : "checks failed");
  return ok ? kOk : kFailure;
}

int cmd_gen_memory(const Common& c, std::optional<std::size_t> m, std::optional<std::size_t> d,
                   std::optional<std::size_t> b, const std::string& out) {
  ExperimentConfig cfg = load(c);
  if (m) cfg.memory.concepts = *m;
  if (d) cfg.memory.dimension = *d;
  if (b) cfg.memory.banks = *b;
  if (c.seed) cfg.memory.seed = *c.seed;
  cfg.memory.file.reset();
  const ItemMemory mem = ItemMemory::random(cfg.memory.concepts, cfg.memory.dimension, cfg.memory.banks,
                                            cfg.memory.seed);
  store(mem, out);
  std::printf("wrote %s  M=%zu D=%zu B=%zu\n", out.c_str(), mem.concepts(), mem.dimension(), mem.banks());
  return kOk;
}

int cmd_gen_trace(const Common& c, const std::string& profile, const std::string& rt,
                  std::optional<std::size_t> windows, const std::string& out) {
  const ExperimentConfig cfg = load(c);
  const ItemMemory mem = cfg.memory.materialize();
  const RtTarget target = parse_rt_target(rt);
  const TaskProfile p = cfg.profile(profile).rescaled(window_scale(target));
  const auto stream = generate_stream(p, mem, windows.value_or(cfg.windows), cfg.seed);
  save_trace(out, mem.dimension(), stream);
  std::printf("wrote %s  %zu windows of %s at %s\n", out.c_str(), stream.size(), profile.c_str(), rt.c_str());
  return kOk;
}

int cmd_calibrate(const Common& c, double target_w) {
  const ExperimentConfig cfg = load(c);
  const ItemMemory mem = cfg.memory.materialize();
  const ExperimentResult result = run(cfg, mem);
  std::printf("idle_fraction %.6f\n", fit_idle_fraction(result, cfg, target_w));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cache-gated hyperdimensional alignment simulator"};
  app.require_subcommand(1);
  Common common;

  auto* run_cmd = app.add_subcommand("run", "Replay every task at every RT target and write reports");
  add_common(run_cmd, common);
  run_cmd->add_flag("--strict", common.strict, "Exit 1 when any window overruns its frame budget");
  run_cmd->add_option("--out", common.out, "Output directory");
  run_cmd->add_option("--format", common.format, "Report format")->check(CLI::IsMember({"csv", "json"}));

  auto* verify_cmd = app.add_subcommand("verify", "Run the self-checks against reference computations");
  add_common(verify_cmd, common);
  std::string mutate = "none";
  verify_cmd->add_option("--mutate", mutate, "Corrupt a datapath to test the checks")
      ->check(CLI::IsMember({"none", "delta-drop"}));

  auto* inspect_cmd = app.add_subcommand("inspect", "Dump a trace, item memory or report file");
  std::string inspect_path;
  std::size_t limit = 20;
  inspect_cmd->add_option("file", inspect_path, "File to inspect")->required();
  inspect_cmd->add_option("--limit", limit, "Per-window lines to print");

  auto* mem_cmd = app.add_subcommand("gen-memory", "Write a seeded item-memory file");
  add_common(mem_cmd, common);
  std::optional<std::size_t> concepts, dimension, banks;
  std::string out_file;
  mem_cmd->add_option("--concepts", concepts, "M");
  mem_cmd->add_option("--dimension", dimension, "D");
  mem_cmd->add_option("--banks", banks, "B");
  mem_cmd->add_option("--out", out_file, "Output file")->required();

  auto* trace_cmd = app.add_subcommand("gen-trace", "Write a query trace for one workload profile");
  add_common(trace_cmd, common);
  std::string profile;
  std::string rt = "RT-60";
  std::optional<std::size_t> windows;
  trace_cmd->add_option("--profile", profile, "Profile name")->required();
  trace_cmd->add_option("--rt", rt, "RT-30 or RT-60");
  trace_cmd->add_option("--windows", windows, "Window count");
  trace_cmd->add_option("--out", out_file, "Output file")->required();

  auto* cal_cmd = app.add_subcommand("calibrate", "Fit the idle fraction to a mean power target");
  add_common(cal_cmd, common);
  double target_w = 3.27;
  cal_cmd->add_option("--target-w", target_w, "Mean power target in watts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run_cmd) return cmd_run(common);
    if (*verify_cmd) return cmd_verify(common, mutate);
    if (*inspect_cmd) {
      inspect(inspect_path, std::cout, limit);
      return kOk;
    }
    if (*mem_cmd) return cmd_gen_memory(common, concepts, dimension, banks, out_file);
    if (*trace_cmd) return cmd_gen_trace(common, profile, rt, windows, out_file);
    if (*cal_cmd) return cmd_calibrate(common, target_w);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "format error: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kOk;
}
