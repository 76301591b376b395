// SPDX-License-Identifier: Apache-2.0
#include "sdcd/scenario.hpp"

#include <fstream>
#include <sstream>

namespace sdcd {

std::unique_ptr<VideoLanguageModel> build_model(const ModelSpec& spec) {
  return std::visit(
      [](const auto& s) -> std::unique_ptr<VideoLanguageModel> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ToyModelConfig>) {
          return toy_model_build(s);
        } else {
          return scripted_probe_build(s);
        }
      },
      spec);
}

std::size_t model_input_dim(const ModelSpec& spec) {
  if (auto* toy = std::get_if<ToyModelConfig>(&spec)) return toy->effective_input_dim();
  return std::get<ProbeSpec>(spec).effective_feature_dim();
}

std::size_t model_patches(const ModelSpec& spec) {
  if (auto* toy = std::get_if<ToyModelConfig>(&spec)) return toy->patches;
  return std::get<ProbeSpec>(spec).patches;
}

std::size_t model_vocab(const ModelSpec& spec) {
  if (auto* toy = std::get_if<ToyModelConfig>(&spec)) return toy->vocab;
  return std::get<ProbeSpec>(spec).vocab;
}

VideoInput build_video(const VideoSpec& spec, std::size_t patches, std::size_t input_dim) {
  if (auto* frames = std::get_if<FrameFeatures>(&spec)) {
    if (frames->patches() != patches || frames->dim() != input_dim) {
      throw InvalidArgument("video: explicit frame shape does not match the model");
    }
    return VideoInput::from_frames(*frames);
  }
  const auto& syn = std::get<SyntheticVideo>(spec);
  if (syn.frames < 1) throw InvalidArgument("video: at least one frame is required");
  FrameFeatures f(syn.frames, patches, input_dim);
  SeededRng rng(syn.seed);
  const auto noise = gaussian_noise(rng, f.size(), syn.background);
  std::copy(noise.begin(), noise.end(), f.data().begin());
  for (const auto& ev : syn.events) {
    if (ev.channel >= input_dim) throw InvalidArgument("video: event channel outside the feature width");
    for (std::size_t t : ev.frames) {
      if (t >= syn.frames) throw InvalidArgument("video: event frame outside the video");
      for (std::size_t k = 0; k < patches; ++k) f.at(t, k, ev.channel) += ev.amplitude;
    }
  }
  return VideoInput::from_frames(std::move(f));
}

VideoInput build_video(const Scenario& scenario) {
  return build_video(scenario.video, model_patches(scenario.model), model_input_dim(scenario.model));
}

namespace {

json frames_to_json(const FrameFeatures& f) {
  json frames = json::array();
  for (std::size_t t = 0; t < f.frames(); ++t) {
    json patches = json::array();
    for (std::size_t k = 0; k < f.patches(); ++k) {
      auto tok = f.token(t, k);
      patches.push_back(std::vector<double>(tok.begin(), tok.end()));
    }
    frames.push_back(std::move(patches));
  }
  return frames;
}

FrameFeatures frames_from_json(const json& j, const std::string& path) {
  const auto& frames = json_array(j, path);
  if (frames.empty()) throw SchemaError(path, "at least one frame is required");
  std::size_t patches = 0;
  std::size_t dim = 0;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto fp = join_path(path, t);
    const auto& pk = json_array(frames[t], fp);
    if (pk.empty()) throw SchemaError(fp, "frame has no patches");
    if (t == 0) patches = pk.size();
    if (pk.size() != patches) throw SchemaError(fp, "all frames must have the same patch count");
    for (std::size_t k = 0; k < pk.size(); ++k) {
      const auto& row = json_array(pk[k], join_path(fp, k));
      if (t == 0 && k == 0) dim = row.size();
      if (row.empty() || row.size() != dim) throw SchemaError(join_path(fp, k), "inconsistent patch width");
    }
  }
  FrameFeatures f(frames.size(), patches, dim);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    for (std::size_t k = 0; k < patches; ++k) {
      for (std::size_t d = 0; d < dim; ++d) {
        f.at(t, k, d) = json_number(frames[t][k][d], join_path(join_path(join_path(path, t), k), d));
      }
    }
  }
  return f;
}

json video_to_json(const VideoSpec& spec) {
  if (auto* f = std::get_if<FrameFeatures>(&spec)) return json{{"kind", "explicit"}, {"frames", frames_to_json(*f)}};
  const auto& s = std::get<SyntheticVideo>(spec);
  json events = json::array();
  for (const auto& ev : s.events) {
    events.push_back(json{{"channel", ev.channel}, {"frames", ev.frames}, {"amplitude", ev.amplitude}});
  }
  return json{{"kind", "synthetic"},
              {"frames", s.frames},
              {"seed", s.seed},
              {"background", s.background},
              {"events", events}};
}

VideoSpec video_from_json(const json& j, const std::string& path) {
  json_object(j, path);
  if (!j.contains("kind")) throw SchemaError(join_path(path, "kind"), "required field missing");
  const auto kind = json_string(j["kind"], join_path(path, "kind"));
  if (kind == "explicit") {
    json_require_keys(j, {"kind", "frames"}, path);
    if (!j.contains("frames")) throw SchemaError(join_path(path, "frames"), "required field missing");
    return frames_from_json(j["frames"], join_path(path, "frames"));
  }
  if (kind != "synthetic") throw SchemaError(join_path(path, "kind"), "expected explicit or synthetic");
  json_require_keys(j, {"kind", "frames", "seed", "background", "events"}, path);
  SyntheticVideo s;
  if (j.contains("frames")) {
    s.frames = static_cast<std::size_t>(json_uint(j["frames"], join_path(path, "frames")));
    if (s.frames < 1) throw SchemaError(join_path(path, "frames"), "must be >= 1");
  }
  if (j.contains("seed")) s.seed = json_uint(j["seed"], join_path(path, "seed"));
  if (j.contains("background")) {
    s.background = json_number(j["background"], join_path(path, "background"));
    if (s.background < 0.0) throw SchemaError(join_path(path, "background"), "must be >= 0");
  }
  if (j.contains("events")) {
    const auto ep = join_path(path, "events");
    const auto& arr = json_array(j["events"], ep);
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const auto p = join_path(ep, i);
      const auto& e = json_object(arr[i], p);
      json_require_keys(e, {"channel", "frames", "amplitude"}, p);
      EventPlacement ev;
      if (!e.contains("channel")) throw SchemaError(join_path(p, "channel"), "required field missing");
      ev.channel = static_cast<std::size_t>(json_uint(e["channel"], join_path(p, "channel")));
      if (e.contains("frames")) {
        const auto fp = join_path(p, "frames");
        const auto& fr = json_array(e["frames"], fp);
        for (std::size_t k = 0; k < fr.size(); ++k) {
          const auto t = static_cast<std::size_t>(json_uint(fr[k], join_path(fp, k)));
          if (t >= s.frames) throw SchemaError(join_path(fp, k), "frame index outside the video");
          ev.frames.push_back(t);
        }
      }
      if (e.contains("amplitude")) ev.amplitude = json_number(e["amplitude"], join_path(p, "amplitude"));
      s.events.push_back(std::move(ev));
    }
  }
  return s;
}

ModelSpec model_from_json(const json& j, const std::string& path) {
  json_object(j, path);
  if (!j.contains("kind")) throw SchemaError(join_path(path, "kind"), "required field missing");
  const auto kind = json_string(j["kind"], join_path(path, "kind"));
  if (kind == "toy") return toy_config_from_json(j, path);
  if (kind == "probe") return probe_spec_from_json(j, path);
  throw SchemaError(join_path(path, "kind"), "expected toy or probe");
}

}  // namespace

void validate_scenario(const Scenario& s) {
  const std::size_t vocab = model_vocab(s.model);
  const std::size_t patches = model_patches(s.model);
  const std::size_t input_dim = model_input_dim(s.model);
  if (s.query.empty()) throw SchemaError("query", "at least one query token is required");
  for (std::size_t i = 0; i < s.query.size(); ++i) {
    if (s.query[i] >= vocab) throw SchemaError(join_path("query", i), "token outside the model vocabulary");
  }
  if (s.expected) {
    if (s.expected->correct_token >= vocab) {
      throw SchemaError("expected.correct_token", "token outside the model vocabulary");
    }
    if (s.expected->incorrect_prior_token >= vocab) {
      throw SchemaError("expected.incorrect_prior_token", "token outside the model vocabulary");
    }
  }
  VideoInput video;
  try {
    video = build_video(s.video, patches, input_dim);
  } catch (const SchemaError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw SchemaError("video", e.what());
  }
  try {
    const auto model = build_model(s.model);
    s.decode.validate(*model, video);
  } catch (const InvalidArgument& e) {
    throw SchemaError("decode", e.what());
  }
}

Scenario scenario_from_json(const json& j) {
  json_object(j, "");
  json_require_keys(j, {"scenario_version", "name", "model", "video", "query", "expected", "vocab_names", "decode"}, "");
  if (!j.contains("scenario_version")) throw SchemaError("scenario_version", "required field missing");
  if (json_uint(j["scenario_version"], "scenario_version") != kScenarioVersion) {
    throw SchemaError("scenario_version", "unsupported version (expected 1)");
  }
  for (const char* key : {"name", "model", "video", "query"}) {
    if (!j.contains(key)) throw SchemaError(key, "required field missing");
  }
  Scenario s;
  s.name = json_string(j["name"], "name");
  s.model = model_from_json(j["model"], "model");
  s.video = video_from_json(j["video"], "video");
  const auto& q = json_array(j["query"], "query");
  for (std::size_t i = 0; i < q.size(); ++i) {
    const auto id = json_uint(q[i], join_path("query", i));
    s.query.push_back(static_cast<TokenId>(id));
  }
  if (j.contains("expected") && !j["expected"].is_null()) {
    const auto& e = json_object(j["expected"], "expected");
    json_require_keys(e, {"correct_token", "incorrect_prior_token"}, "expected");
    for (const char* key : {"correct_token", "incorrect_prior_token"}) {
      if (!e.contains(key)) throw SchemaError(join_path("expected", key), "required field missing");
    }
    s.expected = ExpectedAnswer{
        static_cast<TokenId>(json_uint(e["correct_token"], "expected.correct_token")),
        static_cast<TokenId>(json_uint(e["incorrect_prior_token"], "expected.incorrect_prior_token"))};
  }
  if (j.contains("vocab_names")) {
    const auto& names = json_array(j["vocab_names"], "vocab_names");
    for (std::size_t i = 0; i < names.size(); ++i) s.vocab_names.push_back(json_string(names[i], join_path("vocab_names", i)));
  }
  if (j.contains("decode")) s.decode = decode_config_from_json(j["decode"], "decode");
  validate_scenario(s);
  return s;
}

json scenario_to_json(const Scenario& s) {
  json j{{"scenario_version", kScenarioVersion},
         {"name", s.name},
         {"model", std::visit([](const auto& m) { return to_json(m); }, s.model)},
         {"video", video_to_json(s.video)},
         {"query", s.query},
         {"vocab_names", s.vocab_names},
         {"decode", to_json(s.decode)}};
  if (s.expected) {
    j["expected"] = json{{"correct_token", s.expected->correct_token},
                         {"incorrect_prior_token", s.expected->incorrect_prior_token}};
  }
  return j;
}

Scenario scenario_load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open scenario file '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("", std::string("JSON parse error: ") + e.what());
  }
  return scenario_from_json(j);
}

void scenario_save(const Scenario& scenario, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write scenario file '" + path.string() + "'");
  out << scenario_to_json(scenario).dump(2) << "\n";
}

namespace {

const std::vector<std::string> kProbeVocab = {"<eos>", "A", "B", "C", "which", "event", "happens", "first", "?"};

ProbeSpec probe_spec(std::vector<TokenId> events, std::vector<double> bias) {
  ProbeSpec spec;
  spec.event_tokens = std::move(events);
  spec.prior_bias = std::move(bias);
  spec.vocab = kProbeVocab.size();
  spec.patches = 2;
  spec.encoder_layers = 2;
  spec.decoder_layers = 4;
  return spec;
}

Scenario probe_scenario(std::string name, ProbeSpec spec, std::vector<EventPlacement> events,
                        std::uint64_t seed, ExpectedAnswer expected) {
  Scenario s;
  s.name = std::move(name);
  s.model = std::move(spec);
  SyntheticVideo video;
  video.frames = kDefaultFrameCount;
  video.seed = seed;
  video.background = 0.05;
  video.events = std::move(events);
  s.video = std::move(video);
  s.query = {4, 5, 6, 7, 8};
  s.expected = expected;
  s.vocab_names = kProbeVocab;
  s.decode.alpha = kProbeFixture.alpha;
  s.decode.homogenization.beta = kProbeFixture.beta;
  s.decode.max_tokens = 4;
  return s;
}

}  // namespace

Scenario reference_probe(double prior_bias) {
  return probe_scenario("probe_a0_b5", probe_spec({1, 2}, {0.0, prior_bias}),
                        {{0, {0}, 1.0}, {1, {5}, 1.0}}, 11, ExpectedAnswer{1, 2});
}

std::vector<Scenario> probe_suite() {
  std::vector<Scenario> suite;
  suite.push_back(reference_probe(kProbeFixture.prior_bias));
  suite.push_back(probe_scenario("probe_b1_a6", probe_spec({1, 2}, {3.5, 0.0}),
                                 {{0, {6}, 1.0}, {1, {1}, 1.0}}, 12, ExpectedAnswer{2, 1}));
  suite.push_back(probe_scenario("probe_a2_b4_close", probe_spec({1, 2}, {0.0, 1.4}),
                                 {{0, {2}, 1.0}, {1, {4}, 1.0}}, 13, ExpectedAnswer{1, 2}));
  suite.push_back(probe_scenario("probe_spans_a0to2_b4to7", probe_spec({1, 2}, {0.0, 3.0}),
                                 {{0, {0, 1, 2}, 1.0}, {1, {4, 5, 6, 7}, 1.0}}, 14, ExpectedAnswer{1, 2}));
  suite.push_back(probe_scenario("probe_three_events", probe_spec({1, 2, 3}, {0.0, 1.0, 4.0}),
                                 {{0, {1}, 1.0}, {1, {3}, 1.0}, {2, {7}, 1.0}}, 15, ExpectedAnswer{1, 3}));
  suite.push_back(probe_scenario("probe_unbiased", probe_spec({1, 2}, {0.0, 0.0}),
                                 {{0, {0}, 1.0}, {1, {5}, 1.0}}, 16, ExpectedAnswer{1, 2}));
  return suite;
}

}  // namespace sdcd
