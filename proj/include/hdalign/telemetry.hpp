#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hdalign/path.hpp"
#include "hdalign/perf_model.hpp"
#include "hdalign/reasoner.hpp"

namespace hdalign {

/// Per-window telemetry. Field order matches the frozen CSV column order.
struct WindowReport {
  std::size_t window = 0;
  std::string task;
  RtTarget rt = RtTarget::Rt60;
  PathMode mode = PathMode::Full;
  double rho = -1.0;
  std::size_t delta_count = 0;
  std::size_t effective_dimension = 0;
  Precision precision = Precision::Exact;
  WindowCycles cycles;
  std::uint64_t bits_read = 0;
  std::uint64_t index_reads = 0;
  double latency_ms = 0.0;
  WindowEnergy energy;
  std::vector<std::size_t> topk_key;
  double margin = 0.0;
  bool reasoner_gated = false;
  std::size_t argmax = 0;        // aligner winner
  std::size_t final_argmax = 0;  // winner after the output MUX
  std::int64_t ground_truth = -1;
  std::size_t proposals = 0;
  std::size_t queue_depth = 0;
  bool budget_overrun = false;
  bool delta_overflow = false;

  // Not serialized; available to in-process callers.
  FinalScores output;
  BlockActivity activity;
};

}  // namespace hdalign
