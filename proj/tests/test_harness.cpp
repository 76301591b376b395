// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "sdcd/report.hpp"
#include "sdcd/scenario.hpp"
#include "support/fixtures.hpp"

using namespace sdcd;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "sdcd_harness_tests";
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const std::string& name, const std::string& text) {
  const fs::path p = scratch_dir() / name;
  std::ofstream(p) << text;
  return p;
}

const char* kMinimal = R"({
  "scenario_version": 1,
  "name": "minimal",
  "model": {"kind": "toy", "encoder_layers": 2, "decoder_layers": 4, "heads": 2, "patches": 1, "dim": 4, "vocab": 8},
  "video": {"kind": "explicit", "frames": [[[0.5, -0.25, 1.0, 0.0]]]},
  "query": [3]
})";

Scenario toy_scenario(std::size_t frames) {
  Scenario s;
  s.name = "toy";
  s.model = ToyModelConfig{};
  sdcd::SeededRng rng(5);
  s.video = sdcd::testing::random_video(rng, frames, 4, 16).frames;
  s.query = {5, 6};
  s.decode.max_tokens = 3;
  return s;
}

std::string error_field(const std::string& text) {
  try {
    scenario_from_json(json::parse(text));
  } catch (const SchemaError& e) {
    return e.field();
  }
  return "<accepted>";
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("minimal scenario file loads") {
  const auto s = scenario_load(write_file("minimal.json", kMinimal));
  CHECK(s.name == "minimal");
  CHECK(s.query == std::vector<TokenId>{3});
  CHECK(build_video(s).frame_count() == 1);
  CHECK(s.decode == DecodeConfig{});
}

TEST_CASE("schema errors name the offending field") {
  json j = json::parse(kMinimal);
  j["decode"] = json{{"beta", 1.5}};
  CHECK(error_field(j.dump()) == "decode.beta");

  j = json::parse(kMinimal);
  j["decode"] = json{{"alpha", -1.0}};
  CHECK(error_field(j.dump()) == "decode.alpha");

  j = json::parse(kMinimal);
  j["decode"] = json{{"bogus", 1}};
  CHECK(error_field(j.dump()).find("decode") == 0);

  j = json::parse(kMinimal);
  j["scenario_version"] = 2;
  CHECK(error_field(j.dump()) == "scenario_version");

  j = json::parse(kMinimal);
  j["query"] = json::array({3, 99});
  CHECK(error_field(j.dump()).find("query") == 0);

  j = json::parse(kMinimal);
  j["video"]["frames"] = json::array();
  CHECK(error_field(j.dump()).find("video.frames") == 0);

  j = json::parse(kMinimal);
  j["model"]["dim"] = 3;
  CHECK(error_field(j.dump()).find("model") == 0);

  CHECK_THROWS(scenario_load(scratch_dir() / "does_not_exist.json"));
  CHECK_THROWS(scenario_load(write_file("broken.json", "{ not json")));
}

TEST_CASE("beta = 1.5 in a scenario file is rejected at load") {
  json j = json::parse(kMinimal);
  j["decode"] = json{{"beta", 1.5}};
  const auto path = write_file("beta.json", j.dump());
  try {
    scenario_load(path);
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(e.field() == "decode.beta");
    CHECK(std::string(e.what()).find("decode.beta") != std::string::npos);
  }
}

TEST_CASE("scenario round trip is lossless") {
  auto scenarios = probe_suite();
  auto toy = toy_scenario(3);
  toy.decode.sigma = 0.5;
  toy.decode.layers = LayerSet::of({2, 3});
  toy.decode.homogenization.layer_range = LayerRange::of(LayerBand::middle);
  toy.decode.homogenization.d_source = MeanSource::progressive;
  toy.decode.mode = DecodeMode::ablation;
  toy.decode.ablation = AblationKind::reverse;
  toy.decode.plausibility_cutoff = 0.1;
  toy.vocab_names = {"a", "b"};
  scenarios.push_back(toy);
  for (const auto& s : scenarios) {
    const auto path = scratch_dir() / (s.name + ".json");
    scenario_save(s, path);
    const Scenario back = scenario_load(path);
    CHECK(back == s);
    CHECK(scenario_to_json(back) == scenario_to_json(s));
  }
}

TEST_CASE("probe suite scenarios are valid and carry ground truth") {
  const auto suite = probe_suite();
  CHECK(suite.size() == 6);
  for (const auto& s : suite) {
    CHECK_NOTHROW(validate_scenario(s));
    REQUIRE(s.expected.has_value());
    CHECK(s.expected->correct_token != s.expected->incorrect_prior_token);
  }
}

TEST_CASE("comparison with only the baseline mode has one entry") {
  const auto s = toy_scenario(2);
  const auto report = run_comparison(s, s.decode, {{DecodeMode::baseline}});
  const json j = report.to_json();
  CHECK(j["entries"].size() == 1);
  CHECK(j["entries"][0]["mode"] == "baseline");
  CHECK(j["entries"][0]["correct"].is_null());
  CHECK(j["report_version"] == 1);
  CHECK(j["config_digest"] == config_digest(s.decode));
}

TEST_CASE("regression fixture: contrast recovers the visual order") {
  const Scenario s = reference_probe(kProbeFixture.prior_bias);
  DecodeConfig cfg = s.decode;
  cfg.alpha = kProbeFixture.alpha;
  cfg.homogenization.beta = kProbeFixture.beta;
  const auto report =
      run_comparison(s, cfg, {{DecodeMode::baseline}, {DecodeMode::temporal_only}, {DecodeMode::season}});
  CHECK(report.runs[0].correct == std::optional<bool>(false));
  CHECK(report.runs[0].result.tokens.front() == s.expected->incorrect_prior_token);
  CHECK(report.runs[1].correct == std::optional<bool>(true));
  CHECK(report.runs[2].correct == std::optional<bool>(true));
}

TEST_CASE("season at alpha = 0 matches baseline in a comparison") {
  auto s = toy_scenario(3);
  DecodeConfig cfg = s.decode;
  cfg.alpha = 0.0;
  const auto report = run_comparison(s, cfg, {{DecodeMode::baseline}, {DecodeMode::season}});
  CHECK(report.runs[0].result.tokens == report.runs[1].result.tokens);
}

TEST_CASE("single-cell sweep wraps the comparison report") {
  const auto s = reference_probe(1.0);
  SweepSpec spec;
  spec.grid = {{0.7, 0.4}};
  spec.modes = {{DecodeMode::baseline}, {DecodeMode::season}};
  spec.scenarios = {s};
  const json sweep = run_sweep(spec);
  DecodeConfig cfg = s.decode;
  cfg.alpha = 0.7;
  cfg.homogenization.beta = 0.4;
  const json direct = run_comparison(s, cfg, spec.modes).to_json();
  REQUIRE(sweep["cells"].size() == 1);
  CHECK(sweep["cells"][0]["status"] == "ok");
  CHECK(sweep["cells"][0]["reports"][0] == direct);
}

TEST_CASE("default grid over the probe suite") {
  SweepSpec spec;
  spec.grid = default_sweep_grid();
  REQUIRE(spec.grid.size() == 2);
  CHECK(spec.grid[0] == SweepCell{1.0, 0.33});
  CHECK(spec.grid[1] == SweepCell{0.5, 0.25});
  spec.modes = all_modes();
  spec.scenarios = probe_suite();
  const json a = run_sweep(spec);
  for (const auto& cell : a["cells"]) CHECK(cell["status"] == "ok");
  CHECK(a["aggregate"].size() == 2 * all_modes().size());
  CHECK(a["aggregate"] == recompute_sweep_aggregate(a));
  spec.threads = 1;
  CHECK(run_sweep(spec).dump() == a.dump());
}

TEST_CASE("a failing cell is recorded without stopping the sweep") {
  SweepSpec spec;
  spec.grid = {{1.0, 0.33}};
  spec.modes = {{DecodeMode::baseline}, {DecodeMode::ablation, AblationKind::shuffled}};
  spec.scenarios = {toy_scenario(1), reference_probe(1.0)};
  const json r = run_sweep(spec);
  CHECK(r["cells"][0]["status"] == "error");
  CHECK(r["cells"][0]["reports"][0].contains("error"));
  CHECK(r["cells"][0]["reports"][1].contains("entries"));
  CHECK(r["aggregate"] == recompute_sweep_aggregate(r));
}

TEST_CASE("sweep overrides and validation") {
  SweepSpec spec;
  CHECK_THROWS_AS(spec.validate(), InvalidArgument);
  spec.grid = {{1.0, 2.0}};
  spec.modes = {{DecodeMode::baseline}};
  spec.scenarios = {toy_scenario(2)};
  CHECK_THROWS_AS(spec.validate(), InvalidArgument);
  spec.grid = {{1.0, 0.5}};
  spec.overrides = json{{"max_tokens", 1}};
  const json r = run_sweep(spec);
  CHECK(r["cells"][0]["reports"][0]["entries"][0]["tokens"].size() == 1);
  CHECK(r["overrides_digest"] == stable_digest(spec.overrides));
}

TEST_CASE("trace writers") {
  const auto s = reference_probe(1.0);
  const auto model = build_model(s.model);
  DecodeConfig cfg = s.decode;
  cfg.verbose_trace = true;
  const auto r = decode_loop(*model, build_video(s), s.query, cfg, s.vocab_names);
  std::ostringstream jl;
  write_trace_jsonl(jl, r.trace);
  std::istringstream lines(jl.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    const json j = json::parse(line);
    CHECK(j["trace_version"] == 1);
    CHECK(j["step"] == n);
    CHECK(j["mode"] == "season");
    CHECK(j.contains("a_original"));
    CHECK(j["w_spatial"].get<double>() + j["w_temporal"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
    ++n;
  }
  CHECK(n == r.trace.size());

  std::ostringstream csv;
  write_trace_csv(csv, r.trace);
  const std::string text = csv.str();
  CHECK(text.rfind("trace_version,step,token,text,", 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == r.trace.size() + 1);
}

TEST_CASE("config digest is stable and sensitive") {
  DecodeConfig a;
  DecodeConfig b;
  CHECK(config_digest(a) == config_digest(b));
  CHECK(config_digest(a).size() == 16);
  b.alpha = 0.5;
  CHECK(config_digest(a) != config_digest(b));
  CHECK(stable_digest(json{{"x", 1}, {"y", 2}}) == stable_digest(json::parse(R"({"y":2,"x":1})")));
}

TEST_CASE("mode specs") {
  CHECK(all_modes().size() == 8);
  CHECK(parse_mode_spec("ablation:average")->name() == "ablation:average");
  CHECK_FALSE(parse_mode_spec("nope").has_value());
}

}  // TEST_SUITE
