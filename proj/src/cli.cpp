// SPDX-License-Identifier: Apache-2.0
#include "sdcd/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "sdcd/report.hpp"
#include "sdcd/scenario.hpp"
#include "sdcd/selfcheck.hpp"

namespace sdcd {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flags shared by decode, compare and sweep. Unset flags leave the scenario's
/// embedded value in place.
struct OverrideFlags {
  std::optional<double> alpha;
  std::optional<double> beta;
  std::string sigma;
  std::string layers;
  std::optional<std::size_t> max_tokens;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App& app) {
    app.add_option("--alpha", alpha, "Contrast strength (>= 0)");
    app.add_option("--beta", beta, "Homogenization degree in [0, 1]");
    app.add_option("--sigma", sigma, "Spatial noise level, or 'auto'");
    app.add_option("--layers", layers, "Decoder layers for frame attention: 'late4' or e.g. 2,3,4");
    app.add_option("--max-tokens", max_tokens, "Maximum generated tokens");
    app.add_option("--seed", seed, "Seed for spatial noise, frame shuffling and sampling");
  }

  json to_json() const {
    json j = json::object();
    if (alpha) j["alpha"] = *alpha;
    if (beta) j["beta"] = *beta;
    if (!sigma.empty()) {
      if (sigma == "auto") {
        j["sigma"] = "auto";
      } else {
        j["sigma"] = parse_number(sigma, "--sigma");
      }
    }
    if (!layers.empty()) {
      if (layers == "late4") {
        j["layers"] = "late4";
      } else {
        json list = json::array();
        std::stringstream ss(layers);
        std::string item;
        while (std::getline(ss, item, ',')) {
          const double v = parse_number(item, "--layers");
          if (v < 0 || v != static_cast<double>(static_cast<std::uint64_t>(v))) {
            throw UsageError("--layers: expected 'late4' or comma-separated layer indices");
          }
          list.push_back(static_cast<std::uint64_t>(v));
        }
        j["layers"] = list;
      }
    }
    if (max_tokens) j["max_tokens"] = *max_tokens;
    if (seed) {
      j["noise_seed"] = *seed;
      j["selection"] = json{{"seed", *seed}};
    }
    return j;
  }

  static double parse_number(const std::string& text, const std::string& flag) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != text.size()) throw UsageError(flag + ": not a number: '" + text + "'");
    return v;
  }
};

std::vector<ModeSpec> parse_modes(const std::vector<std::string>& names) {
  if (names.empty()) return all_modes();
  std::vector<ModeSpec> modes;
  for (const auto& n : names) {
    const auto m = parse_mode_spec(n);
    if (!m) throw UsageError("unknown mode '" + n + "'");
    modes.push_back(*m);
  }
  return modes;
}

Scenario load_scenario(const std::string& ref) {
  constexpr std::string_view builtin = "probe:";
  if (std::string_view(ref).starts_with(builtin)) {
    const std::string name = ref.substr(builtin.size());
    for (auto& s : probe_suite()) {
      if (s.name == name) return s;
    }
    throw UsageError("no built-in probe named '" + name + "'");
  }
  return scenario_load(ref);
}

DecodeConfig effective_config(const Scenario& s, const OverrideFlags& flags) {
  return decode_config_from_json(flags.to_json(), "cli", s.decode);
}

std::vector<SweepCell> parse_grid(const std::string& text) {
  if (text.empty() || text == "default") return default_sweep_grid();
  std::vector<SweepCell> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw UsageError("--grid: expected 'default' or alpha:beta pairs, e.g. 1.0:0.33,0.5:0.25");
    grid.push_back({OverrideFlags::parse_number(item.substr(0, colon), "--grid"),
                    OverrideFlags::parse_number(item.substr(colon + 1), "--grid")});
  }
  return grid;
}

/// Writes to `path`, or to `out` when path is empty or "-".
void emit(const std::string& path, std::ostream& out, const std::string& text) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw UsageError("failed writing '" + path + "'");
}

json result_json(const Scenario& s, const DecodeConfig& cfg, const DecodeResult& r) {
  std::vector<std::string> text;
  for (const auto& rec : r.trace) text.push_back(rec.text);
  json j{{"report_version", kReportVersion},
         {"scenario", s.name},
         {"mode", mode_name(cfg.mode, cfg.ablation)},
         {"config", to_json(cfg)},
         {"config_digest", config_digest(cfg)},
         {"tokens", r.tokens},
         {"text", text},
         {"sigma_used", r.sigma_used ? json(*r.sigma_used) : json(nullptr)},
         {"frame_order", r.frame_order}};
  if (s.expected) j["correct"] = !r.tokens.empty() && r.tokens.front() == s.expected->correct_token;
  return j;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Contrastive decoding engine for video-language models"};
  app.name("sdcd");
  app.require_subcommand(1);

  // decode
  auto* decode = app.add_subcommand("decode", "Decode one scenario and print the answer");
  std::string d_scenario;
  std::string d_mode;
  std::string d_trace;
  std::string d_format = "jsonl";
  std::string d_out;
  OverrideFlags d_flags;
  decode->add_option("--scenario", d_scenario, "Scenario file, or probe:<name> for a built-in probe")->required();
  decode->add_option("--mode", d_mode, "baseline, temporal_only, spatial_only, season, tcd, ablation:<kind>");
  d_flags.attach(*decode);
  decode->add_option("--trace", d_trace, "Write the per-token trace to this file ('-' for stdout)");
  decode->add_option("--format", d_format, "Trace format")->check(CLI::IsMember({"jsonl", "csv"}));
  decode->add_option("--out", d_out, "Write the result JSON to this file");

  // compare
  auto* compare = app.add_subcommand("compare", "Decode one scenario under several modes");
  std::string c_scenario;
  std::vector<std::string> c_modes;
  std::string c_out;
  OverrideFlags c_flags;
  compare->add_option("--scenario", c_scenario, "Scenario file, or probe:<name>")->required();
  compare->add_option("--mode", c_modes, "Modes to run (repeatable); default: all")->delimiter(',');
  c_flags.attach(*compare);
  compare->add_option("--out", c_out, "Write the report to this file");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run comparisons over an (alpha, beta) grid");
  std::vector<std::string> s_scenarios;
  std::string s_suite;
  std::string s_grid = "default";
  std::vector<std::string> s_modes;
  std::size_t s_threads = 0;
  std::string s_out;
  OverrideFlags s_flags;
  sweep->add_option("--scenario", s_scenarios, "Scenario files or probe:<name> (repeatable)");
  sweep->add_option("--suite", s_suite, "Built-in scenario suite")->check(CLI::IsMember({"probe"}));
  sweep->add_option("--grid", s_grid, "'default' or alpha:beta pairs, e.g. 1.0:0.33,0.5:0.25");
  sweep->add_option("--mode", s_modes, "Modes to run (repeatable); default: all")->delimiter(',');
  sweep->add_option("--threads", s_threads, "Worker threads (0: hardware concurrency)");
  s_flags.attach(*sweep);
  sweep->add_option("--out", s_out, "Write the sweep report to this file");

  // selfcheck
  auto* selfcheck = app.add_subcommand("selfcheck", "Run the invariant and oracle suite");
  std::string k_out;
  selfcheck->add_option("--out", k_out, "Write the JSON report to this file");

  // suite
  auto* suite = app.add_subcommand("suite", "Write the built-in probe scenarios as JSON files");
  std::string u_dir;
  suite->add_option("--out-dir", u_dir, "Destination directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*decode) {
      const Scenario s = load_scenario(d_scenario);
      json flags = d_flags.to_json();
      if (!d_mode.empty()) flags["mode"] = d_mode;
      const DecodeConfig cfg = decode_config_from_json(flags, "cli", s.decode);
      const auto model = build_model(s.model);
      const auto result = decode_loop(*model, build_video(s), s.query, cfg, s.vocab_names);
      if (!d_trace.empty()) {
        std::ostringstream os;
        if (d_format == "csv") {
          write_trace_csv(os, result.trace);
        } else {
          write_trace_jsonl(os, result.trace);
        }
        emit(d_trace, out, os.str());
      }
      const json j = result_json(s, cfg, result);
      if (!d_out.empty()) emit(d_out, out, j.dump(2) + "\n");
      if (d_out == "-") return kExitOk;
      std::string text;
      for (const auto& t : j["text"]) text += (text.empty() ? "" : " ") + t.get<std::string>();
      out << j["mode"].get<std::string>() << ": " << text << "\n";
      return kExitOk;
    }
    if (*compare) {
      const Scenario s = load_scenario(c_scenario);
      const auto report = run_comparison(s, effective_config(s, c_flags), parse_modes(c_modes));
      emit(c_out, out, report.to_json().dump(2) + "\n");
      return kExitOk;
    }
    if (*sweep) {
      SweepSpec spec;
      spec.grid = parse_grid(s_grid);
      spec.modes = parse_modes(s_modes);
      spec.threads = s_threads;
      spec.overrides = s_flags.to_json();
      if (s_suite == "probe") spec.scenarios = probe_suite();
      for (const auto& ref : s_scenarios) spec.scenarios.push_back(load_scenario(ref));
      if (spec.scenarios.empty()) throw UsageError("sweep: give --scenario and/or --suite probe");
      emit(s_out, out, run_sweep(spec).dump(2) + "\n");
      return kExitOk;
    }
    if (*selfcheck) {
      const auto report = self_check();
      emit(k_out, out, report.to_json().dump(2) + "\n");
      for (const auto& c : report.checks) {
        if (!c.passed) err << "FAILED " << c.name << ": residual " << c.residual << " > " << c.tolerance << " (" << c.detail << ")\n";
      }
      err << report.checks.size() - report.failed_count() << "/" << report.checks.size() << " checks passed\n";
      return report.all_passed() ? kExitOk : kExitInvariant;
    }
    if (*suite) {
      std::filesystem::create_directories(u_dir);
      for (const auto& s : probe_suite()) {
        const auto path = std::filesystem::path(u_dir) / (s.name + ".json");
        scenario_save(s, path);
        out << path.string() << "\n";
      }
      return kExitOk;
    }
  } catch (const SchemaError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::logic_error& e) {
    err << "invariant violation: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace sdcd
