// SPDX-License-Identifier: Apache-2.0
#include "sdcd/report.hpp"

#include <algorithm>
#include <cstdio>
#include <future>
#include <ostream>
#include <thread>

namespace sdcd {

namespace {

template <class T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

json trace_record_to_json(const TraceRecord& rec) {
  json j{{"trace_version", kTraceVersion},
         {"step", rec.step},
         {"token", rec.token},
         {"text", rec.text},
         {"w_spatial", optional_json(rec.w_spatial)},
         {"w_temporal", optional_json(rec.w_temporal)},
         {"d_spatial", optional_json(rec.d_spatial)},
         {"d_temporal", optional_json(rec.d_temporal)},
         {"top1_prob", rec.top1_prob},
         {"baseline_top1", rec.baseline_top1},
         {"mode", rec.mode},
         {"config_digest", rec.config_digest}};
  if (rec.a_original) j["a_original"] = *rec.a_original;
  if (rec.a_spatial) j["a_spatial"] = *rec.a_spatial;
  if (rec.a_temporal) j["a_temporal"] = *rec.a_temporal;
  return j;
}

void write_trace_jsonl(std::ostream& out, const std::vector<TraceRecord>& trace) {
  for (const auto& rec : trace) out << trace_record_to_json(rec).dump() << "\n";
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace) {
  out << "trace_version,step,token,text,w_spatial,w_temporal,d_spatial,d_temporal,top1_prob,baseline_top1,mode,"
         "config_digest\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string(); };
  for (const auto& r : trace) {
    out << kTraceVersion << ',' << r.step << ',' << r.token << ',' << csv_escape(r.text) << ',' << opt(r.w_spatial)
        << ',' << opt(r.w_temporal) << ',' << opt(r.d_spatial) << ',' << opt(r.d_temporal) << ','
        << format_real(r.top1_prob) << ',' << r.baseline_top1 << ',' << csv_escape(r.mode) << ','
        << r.config_digest << "\n";
  }
}

std::optional<ModeSpec> parse_mode_spec(std::string_view text) {
  const auto m = parse_mode(text);
  if (!m) return std::nullopt;
  return ModeSpec{m->first, m->second};
}

std::vector<ModeSpec> all_modes() {
  return {{DecodeMode::baseline},
          {DecodeMode::spatial_only},
          {DecodeMode::temporal_only},
          {DecodeMode::season},
          {DecodeMode::tcd},
          {DecodeMode::ablation, AblationKind::average},
          {DecodeMode::ablation, AblationKind::shuffled},
          {DecodeMode::ablation, AblationKind::reverse}};
}

json ComparisonReport::to_json() const {
  json entries = json::array();
  for (const auto& run : runs) {
    json trace = json::array();
    std::vector<std::string> text;
    for (const auto& rec : run.result.trace) {
      trace.push_back(trace_record_to_json(rec));
      text.push_back(rec.text);
    }
    entries.push_back(json{{"mode", run.mode.name()},
                           {"tokens", run.result.tokens},
                           {"text", text},
                           {"correct", optional_json(run.correct)},
                           {"sigma_used", optional_json(run.result.sigma_used)},
                           {"frame_order", run.result.frame_order},
                           {"trace", trace}});
  }
  return json{{"report_version", kReportVersion},
              {"scenario", scenario},
              {"config", sdcd::to_json(config)},
              {"config_digest", config_digest(config)},
              {"entries", entries}};
}

ComparisonReport run_comparison(const Scenario& scenario, const DecodeConfig& cfg,
                                const std::vector<ModeSpec>& modes) {
  if (modes.empty()) throw InvalidArgument("comparison: at least one mode is required");
  const auto model = build_model(scenario.model);
  const VideoInput video = build_video(scenario);
  ComparisonReport report;
  report.scenario = scenario.name;
  report.config = cfg;
  for (const auto& mode : modes) {
    DecodeConfig c = cfg;
    c.mode = mode.mode;
    c.ablation = mode.ablation;
    ModeRun run;
    run.mode = mode;
    run.result = decode_loop(*model, video, scenario.query, c, scenario.vocab_names);
    if (scenario.expected) {
      run.correct = !run.result.tokens.empty() && run.result.tokens.front() == scenario.expected->correct_token;
    }
    report.runs.push_back(std::move(run));
  }
  return report;
}

std::vector<SweepCell> default_sweep_grid() { return {{1.0, 0.33}, {0.5, 0.25}}; }

void SweepSpec::validate() const {
  if (grid.empty()) throw InvalidArgument("sweep: grid must not be empty");
  if (modes.empty()) throw InvalidArgument("sweep: at least one mode is required");
  if (scenarios.empty()) throw InvalidArgument("sweep: at least one scenario is required");
  for (const auto& c : grid) {
    if (!(c.alpha >= 0.0) || !(c.beta >= 0.0 && c.beta <= 1.0)) {
      throw InvalidArgument("sweep: grid cell outside alpha >= 0, beta in [0, 1]");
    }
  }
}

namespace {

struct CellOutcome {
  std::optional<ComparisonReport> report;
  std::string error;
};

CellOutcome run_cell(const SweepSpec& spec, const SweepCell& cell, const Scenario& scenario) {
  CellOutcome out;
  try {
    DecodeConfig cfg = decode_config_from_json(spec.overrides, "overrides", scenario.decode);
    cfg.alpha = cell.alpha;
    cfg.homogenization.beta = cell.beta;
    out.report = run_comparison(scenario, cfg, spec.modes);
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

json aggregate_row(const std::string& mode, const SweepCell& cell, std::size_t correct, std::size_t total) {
  return json{{"mode", mode},
              {"alpha", cell.alpha},
              {"beta", cell.beta},
              {"correct", correct},
              {"total", total},
              {"rate", total == 0 ? json(nullptr) : json(static_cast<double>(correct) / static_cast<double>(total))}};
}

}  // namespace

json run_sweep(const SweepSpec& spec) {
  spec.validate();
  const std::size_t n_cells = spec.grid.size();
  const std::size_t n_scen = spec.scenarios.size();
  std::vector<CellOutcome> outcomes(n_cells * n_scen);

  std::size_t threads = spec.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : spec.threads;
  threads = std::min(threads, outcomes.size());
  for (std::size_t start = 0; start < outcomes.size(); start += threads) {
    std::vector<std::future<CellOutcome>> batch;
    const std::size_t stop = std::min(outcomes.size(), start + threads);
    for (std::size_t i = start; i < stop; ++i) {
      const SweepCell& cell = spec.grid[i / n_scen];
      const Scenario& scenario = spec.scenarios[i % n_scen];
      batch.push_back(std::async(std::launch::async, [&spec, &cell, &scenario] { return run_cell(spec, cell, scenario); }));
    }
    for (std::size_t i = start; i < stop; ++i) outcomes[i] = batch[i - start].get();
  }

  json cells = json::array();
  json aggregate = json::array();
  for (std::size_t c = 0; c < n_cells; ++c) {
    const SweepCell& cell = spec.grid[c];
    json reports = json::array();
    bool ok = true;
    for (std::size_t s = 0; s < n_scen; ++s) {
      const auto& o = outcomes[c * n_scen + s];
      if (o.report) {
        reports.push_back(o.report->to_json());
      } else {
        ok = false;
        reports.push_back(json{{"scenario", spec.scenarios[s].name}, {"error", o.error}});
      }
    }
    cells.push_back(json{{"alpha", cell.alpha}, {"beta", cell.beta}, {"status", ok ? "ok" : "error"}, {"reports", reports}});
    for (std::size_t m = 0; m < spec.modes.size(); ++m) {
      std::size_t correct = 0;
      std::size_t total = 0;
      for (std::size_t s = 0; s < n_scen; ++s) {
        const auto& o = outcomes[c * n_scen + s];
        if (!o.report) continue;
        const auto& run = o.report->runs[m];
        if (!run.correct) continue;
        ++total;
        if (*run.correct) ++correct;
      }
      aggregate.push_back(aggregate_row(spec.modes[m].name(), cell, correct, total));
    }
  }

  json grid = json::array();
  for (const auto& c : spec.grid) grid.push_back(json{{"alpha", c.alpha}, {"beta", c.beta}});
  json modes = json::array();
  for (const auto& m : spec.modes) modes.push_back(m.name());
  json scenarios = json::array();
  for (const auto& s : spec.scenarios) scenarios.push_back(s.name);
  return json{{"report_version", kReportVersion},
              {"kind", "sweep"},
              {"grid", grid},
              {"modes", modes},
              {"scenarios", scenarios},
              {"overrides", spec.overrides},
              {"overrides_digest", stable_digest(spec.overrides)},
              {"cells", cells},
              {"aggregate", aggregate}};
}

json recompute_sweep_aggregate(const json& report) {
  json aggregate = json::array();
  for (const auto& cell : report.at("cells")) {
    const SweepCell c{cell.at("alpha").get<double>(), cell.at("beta").get<double>()};
    for (const auto& mode : report.at("modes")) {
      std::size_t correct = 0;
      std::size_t total = 0;
      for (const auto& r : cell.at("reports")) {
        if (!r.contains("entries")) continue;
        for (const auto& e : r.at("entries")) {
          if (e.at("mode") != mode || e.at("correct").is_null()) continue;
          ++total;
          if (e.at("correct").get<bool>()) ++correct;
        }
      }
      aggregate.push_back(aggregate_row(mode.get<std::string>(), c, correct, total));
    }
  }
  return aggregate;
}

}  // namespace sdcd
