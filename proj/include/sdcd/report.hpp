// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sdcd/config_io.hpp"
#include "sdcd/decoder.hpp"
#include "sdcd/scenario.hpp"

namespace sdcd {

inline constexpr int kTraceVersion = 1;
inline constexpr int kReportVersion = 1;

// ---------------------------------------------------------------------------
// Traces

json trace_record_to_json(const TraceRecord& rec);

/// One JSON object per line, each carrying "trace_version": 1.
void write_trace_jsonl(std::ostream& out, const std::vector<TraceRecord>& trace);

/// Header row then one row per record. Missing values are empty cells; reals use
/// 17 significant digits.
void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace);

// ---------------------------------------------------------------------------
// Comparison

struct ModeSpec {
  DecodeMode mode = DecodeMode::season;
  AblationKind ablation = AblationKind::average;

  std::string name() const { return mode_name(mode, ablation); }
  friend bool operator==(const ModeSpec&, const ModeSpec&) = default;
};

std::optional<ModeSpec> parse_mode_spec(std::string_view text);

/// baseline, spatial_only, temporal_only, season, tcd, and the three ablations.
std::vector<ModeSpec> all_modes();

struct ModeRun {
  ModeSpec mode;
  DecodeResult result;
  /// First emitted token equals the expected correct token; empty without ground truth.
  std::optional<bool> correct;
};

struct ComparisonReport {
  std::string scenario;
  DecodeConfig config;
  std::vector<ModeRun> runs;

  json to_json() const;
};

/// Decodes the scenario once per mode with `cfg` (mode replaced each time).
ComparisonReport run_comparison(const Scenario& scenario, const DecodeConfig& cfg,
                                const std::vector<ModeSpec>& modes);

// ---------------------------------------------------------------------------
// Sweep

struct SweepCell {
  double alpha = 1.0;
  double beta = 0.33;
  friend bool operator==(const SweepCell&, const SweepCell&) = default;
};

/// The (alpha, beta) grid searched for the method: {(1.0, 0.33), (0.5, 0.25)}.
std::vector<SweepCell> default_sweep_grid();

struct SweepSpec {
  std::vector<SweepCell> grid;
  std::vector<ModeSpec> modes;
  std::vector<Scenario> scenarios;
  /// Partial decode-config JSON laid over each scenario's own config before the
  /// cell's alpha and beta are applied.
  json overrides = json::object();
  /// Worker threads; 0 picks the hardware concurrency.
  std::size_t threads = 0;

  void validate() const;
};

/// Runs every (cell, scenario) comparison. A failing comparison is recorded in its
/// cell and does not stop the sweep. The aggregate table lists, per (mode, cell),
/// the number of scenarios with ground truth answered correctly.
json run_sweep(const SweepSpec& spec);

/// Rebuilds the aggregate table from the per-cell reports of a sweep report.
json recompute_sweep_aggregate(const json& sweep_report);

}  // namespace sdcd
