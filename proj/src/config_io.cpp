// SPDX-License-Identifier: Apache-2.0
#include "sdcd/config_io.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace sdcd {

std::string join_path(const std::string& parent, std::string_view child) {
  if (parent.empty()) return std::string(child);
  return parent + "." + std::string(child);
}

std::string join_path(const std::string& parent, std::size_t index) {
  return parent + "[" + std::to_string(index) + "]";
}

double json_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw SchemaError(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw SchemaError(path, "number must be finite");
  return d;
}

std::uint64_t json_uint(const json& v, const std::string& path) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    throw SchemaError(path, "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::string json_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw SchemaError(path, "expected a string");
  return v.get<std::string>();
}

bool json_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) throw SchemaError(path, "expected a boolean");
  return v.get<bool>();
}

const json& json_object(const json& v, const std::string& path) {
  if (!v.is_object()) throw SchemaError(path, "expected an object");
  return v;
}

const json& json_array(const json& v, const std::string& path) {
  if (!v.is_array()) throw SchemaError(path, "expected an array");
  return v;
}

void json_require_keys(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& path) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || a == key;
    if (!ok) throw SchemaError(join_path(path, key), "unknown field");
  }
}

namespace {

std::size_t json_size(const json& v, const std::string& path) {
  return static_cast<std::size_t>(json_uint(v, path));
}

std::vector<std::size_t> json_index_list(const json& v, const std::string& path) {
  std::vector<std::size_t> out;
  const auto& arr = json_array(v, path);
  for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(json_size(arr[i], join_path(path, i)));
  return out;
}

TokenId json_token(const json& v, const std::string& path) {
  const auto id = json_uint(v, path);
  if (id > std::numeric_limits<TokenId>::max()) throw SchemaError(path, "token id too large");
  return static_cast<TokenId>(id);
}

json layer_range_json(const LayerRange& r) {
  if (r.band == LayerBand::explicit_set) return json(r.layers);
  return std::string(to_string(r.band));
}

LayerRange layer_range_from_json(const json& v, const std::string& path) {
  if (v.is_string()) {
    const auto band = parse_layer_band(v.get<std::string>());
    if (!band) throw SchemaError(path, "expected all, early, middle, late or a list of layers");
    return LayerRange::of(*band);
  }
  auto layers = json_index_list(v, path);
  if (layers.empty()) throw SchemaError(path, "layer list must not be empty");
  for (std::size_t l : layers) {
    if (l < 1) throw SchemaError(path, "layer indices are 1-based");
  }
  return LayerRange::explicit_layers(std::move(layers));
}

double json_beta(const json& v, const std::string& path) {
  const double beta = json_number(v, path);
  if (beta < 0.0 || beta > 1.0) throw SchemaError(path, "must lie in [0, 1]");
  return beta;
}

template <class T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

json to_json(const ToyModelConfig& cfg) {
  return json{{"kind", "toy"},
              {"encoder_layers", cfg.encoder_layers},
              {"decoder_layers", cfg.decoder_layers},
              {"heads", cfg.heads},
              {"patches", cfg.patches},
              {"dim", cfg.dim},
              {"input_dim", cfg.effective_input_dim()},
              {"vocab", cfg.vocab},
              {"seed", cfg.seed},
              {"encoder_kind", cfg.encoder_kind == EncoderKind::linear ? "linear" : "transformer"},
              {"eos", cfg.eos}};
}

ToyModelConfig toy_config_from_json(const json& j, const std::string& path) {
  json_object(j, path);
  json_require_keys(j, {"kind", "encoder_layers", "decoder_layers", "heads", "patches", "dim", "input_dim", "vocab",
                        "seed", "encoder_kind", "eos"},
                    path);
  ToyModelConfig cfg;
  auto size_field = [&](const char* key, std::size_t& out) {
    if (j.contains(key)) out = json_size(j[key], join_path(path, key));
  };
  size_field("encoder_layers", cfg.encoder_layers);
  size_field("decoder_layers", cfg.decoder_layers);
  size_field("heads", cfg.heads);
  size_field("patches", cfg.patches);
  size_field("dim", cfg.dim);
  size_field("input_dim", cfg.input_dim);
  size_field("vocab", cfg.vocab);
  if (j.contains("seed")) cfg.seed = json_uint(j["seed"], join_path(path, "seed"));
  if (j.contains("eos")) cfg.eos = json_token(j["eos"], join_path(path, "eos"));
  if (j.contains("encoder_kind")) {
    const auto kind = json_string(j["encoder_kind"], join_path(path, "encoder_kind"));
    if (kind == "transformer") {
      cfg.encoder_kind = EncoderKind::transformer;
    } else if (kind == "linear") {
      cfg.encoder_kind = EncoderKind::linear;
    } else {
      throw SchemaError(join_path(path, "encoder_kind"), "expected transformer or linear");
    }
  }
  if (cfg.input_dim == cfg.dim) cfg.input_dim = 0;
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw SchemaError(path, e.what());
  }
  return cfg;
}

json to_json(const ProbeSpec& spec) {
  return json{{"kind", "probe"},
              {"event_tokens", spec.event_tokens},
              {"order_rule", "centroid"},
              {"prior_bias", spec.prior_bias},
              {"visual_gain", spec.visual_gain},
              {"vocab", spec.vocab},
              {"patches", spec.patches},
              {"feature_dim", spec.effective_feature_dim()},
              {"encoder_layers", spec.encoder_layers},
              {"decoder_layers", spec.decoder_layers},
              {"heads", spec.heads},
              {"attention_focus", spec.attention_focus},
              {"eos", spec.eos},
              {"stop_logit", spec.stop_logit},
              {"inactive_logit", spec.inactive_logit}};
}

ProbeSpec probe_spec_from_json(const json& j, const std::string& path) {
  json_object(j, path);
  json_require_keys(j, {"kind", "event_tokens", "order_rule", "prior_bias", "visual_gain", "vocab", "patches",
                        "feature_dim", "encoder_layers", "decoder_layers", "heads", "attention_focus", "eos",
                        "stop_logit", "inactive_logit"},
                    path);
  ProbeSpec spec;
  if (!j.contains("event_tokens")) throw SchemaError(join_path(path, "event_tokens"), "required field missing");
  {
    const auto p = join_path(path, "event_tokens");
    const auto& arr = json_array(j["event_tokens"], p);
    for (std::size_t i = 0; i < arr.size(); ++i) spec.event_tokens.push_back(json_token(arr[i], join_path(p, i)));
  }
  if (j.contains("order_rule")) {
    const auto rule = json_string(j["order_rule"], join_path(path, "order_rule"));
    if (rule != "centroid") throw SchemaError(join_path(path, "order_rule"), "unsupported order rule '" + rule + "'");
  }
  if (j.contains("prior_bias")) {
    const auto p = join_path(path, "prior_bias");
    const auto& arr = json_array(j["prior_bias"], p);
    for (std::size_t i = 0; i < arr.size(); ++i) spec.prior_bias.push_back(json_number(arr[i], join_path(p, i)));
  } else {
    spec.prior_bias.assign(spec.event_tokens.size(), 0.0);
  }
  auto size_field = [&](const char* key, std::size_t& out) {
    if (j.contains(key)) out = json_size(j[key], join_path(path, key));
  };
  auto number_field = [&](const char* key, double& out) {
    if (j.contains(key)) out = json_number(j[key], join_path(path, key));
  };
  number_field("visual_gain", spec.visual_gain);
  size_field("vocab", spec.vocab);
  size_field("patches", spec.patches);
  size_field("feature_dim", spec.feature_dim);
  size_field("encoder_layers", spec.encoder_layers);
  size_field("decoder_layers", spec.decoder_layers);
  size_field("heads", spec.heads);
  number_field("attention_focus", spec.attention_focus);
  if (j.contains("eos")) spec.eos = json_token(j["eos"], join_path(path, "eos"));
  number_field("stop_logit", spec.stop_logit);
  number_field("inactive_logit", spec.inactive_logit);
  if (spec.feature_dim == spec.event_tokens.size()) spec.feature_dim = 0;
  try {
    spec.validate();
  } catch (const InvalidArgument& e) {
    throw SchemaError(path, e.what());
  }
  return spec;
}

json to_json(const HomogenizationConfig& cfg) {
  return json{{"beta", cfg.beta},
              {"layer_range", layer_range_json(cfg.layer_range)},
              {"d_source", std::string(to_string(cfg.d_source))}};
}

json to_json(const NegativeStrategy& s) {
  json params;
  using K = NegativeStrategy::Kind;
  switch (s.kind) {
    case K::temporal_homogenized: params = to_json(s.homogenization); break;
    case K::spatial_gaussian:
      params = json{{"sigma", optional_json(s.sigma)}, {"stage", std::string(to_string(s.stage))}, {"seed", s.seed}};
      break;
    case K::shuffled: params = json{{"seed", s.seed}}; break;
    case K::tcd_framedrop: params = json{{"rate", s.rate}}; break;
    case K::average:
    case K::reverse: params = json::object(); break;
  }
  return json{{"kind", std::string(to_string(s.kind))}, {"params", params}};
}

NegativeStrategy negative_strategy_from_json(const json& j, const std::string& path) {
  json_object(j, path);
  json_require_keys(j, {"kind", "params"}, path);
  if (!j.contains("kind")) throw SchemaError(join_path(path, "kind"), "required field missing");
  NegativeStrategy s;
  const auto kind_path = join_path(path, "kind");
  const auto kind = parse_negative_kind(json_string(j["kind"], kind_path));
  if (!kind) throw SchemaError(kind_path, "unknown negative kind");
  s.kind = *kind;
  const json params = j.contains("params") ? j["params"] : json::object();
  const auto pp = join_path(path, "params");
  json_object(params, pp);
  using K = NegativeStrategy::Kind;
  switch (s.kind) {
    case K::temporal_homogenized:
      json_require_keys(params, {"beta", "layer_range", "d_source"}, pp);
      if (params.contains("beta")) s.homogenization.beta = json_beta(params["beta"], join_path(pp, "beta"));
      if (params.contains("layer_range")) {
        s.homogenization.layer_range = layer_range_from_json(params["layer_range"], join_path(pp, "layer_range"));
      }
      if (params.contains("d_source")) {
        const auto src = parse_mean_source(json_string(params["d_source"], join_path(pp, "d_source")));
        if (!src) throw SchemaError(join_path(pp, "d_source"), "expected clean or progressive");
        s.homogenization.d_source = *src;
      }
      break;
    case K::spatial_gaussian:
      json_require_keys(params, {"sigma", "stage", "seed"}, pp);
      if (params.contains("sigma") && !params["sigma"].is_null()) {
        const double sigma = json_number(params["sigma"], join_path(pp, "sigma"));
        if (sigma < 0.0) throw SchemaError(join_path(pp, "sigma"), "must be >= 0");
        s.sigma = sigma;
      }
      if (params.contains("stage")) {
        const auto stage = parse_noise_stage(json_string(params["stage"], join_path(pp, "stage")));
        if (!stage) throw SchemaError(join_path(pp, "stage"), "expected pixel or feature");
        s.stage = *stage;
      }
      if (params.contains("seed")) s.seed = json_uint(params["seed"], join_path(pp, "seed"));
      break;
    case K::shuffled:
      json_require_keys(params, {"seed"}, pp);
      if (params.contains("seed")) s.seed = json_uint(params["seed"], join_path(pp, "seed"));
      break;
    case K::tcd_framedrop:
      json_require_keys(params, {"rate"}, pp);
      if (params.contains("rate")) {
        s.rate = json_size(params["rate"], join_path(pp, "rate"));
        if (s.rate < 1) throw SchemaError(join_path(pp, "rate"), "must be >= 1");
      }
      break;
    case K::average:
    case K::reverse: json_require_keys(params, {}, pp); break;
  }
  return s;
}

json to_json(const DecodeConfig& cfg) {
  json selection{{"kind", cfg.selection.kind == Selection::Kind::greedy ? "greedy" : "sample"}};
  if (cfg.selection.kind == Selection::Kind::sample) {
    selection["temperature"] = cfg.selection.temperature;
    selection["seed"] = cfg.selection.seed;
  }
  json j{{"alpha", cfg.alpha},
         {"beta", cfg.homogenization.beta},
         {"layer_range", layer_range_json(cfg.homogenization.layer_range)},
         {"d_source", std::string(to_string(cfg.homogenization.d_source))},
         {"sigma", optional_json(cfg.sigma)},
         {"spatial_stage", std::string(to_string(cfg.spatial_stage))},
         {"noise_seed", cfg.noise_seed},
         {"layers", cfg.layers.is_late4() ? json("late4") : json(cfg.layers.indices)},
         {"mode", mode_name(cfg.mode, cfg.ablation)},
         {"tcd_rate", cfg.tcd_rate},
         {"selection", selection},
         {"max_tokens", cfg.max_tokens},
         {"plausibility_cutoff", optional_json(cfg.plausibility_cutoff)},
         {"verbose_trace", cfg.verbose_trace}};
  if (cfg.forced_weights) j["forced_weights"] = json{cfg.forced_weights->first, cfg.forced_weights->second};
  return j;
}

DecodeConfig decode_config_from_json(const json& j, const std::string& path, DecodeConfig base) {
  json_object(j, path);
  json_require_keys(j, {"alpha", "beta", "layer_range", "d_source", "sigma", "spatial_stage", "noise_seed", "layers",
                        "mode", "tcd_rate", "selection", "max_tokens", "plausibility_cutoff", "verbose_trace",
                        "forced_weights"},
                    path);
  DecodeConfig cfg = std::move(base);
  auto field = [&](const char* key) { return join_path(path, key); };
  if (j.contains("alpha")) {
    cfg.alpha = json_number(j["alpha"], field("alpha"));
    if (cfg.alpha < 0.0) throw SchemaError(field("alpha"), "must be >= 0");
  }
  if (j.contains("beta")) cfg.homogenization.beta = json_beta(j["beta"], field("beta"));
  if (j.contains("layer_range")) cfg.homogenization.layer_range = layer_range_from_json(j["layer_range"], field("layer_range"));
  if (j.contains("d_source")) {
    const auto src = parse_mean_source(json_string(j["d_source"], field("d_source")));
    if (!src) throw SchemaError(field("d_source"), "expected clean or progressive");
    cfg.homogenization.d_source = *src;
  }
  if (j.contains("sigma")) {
    if (j["sigma"].is_null() || (j["sigma"].is_string() && j["sigma"] == "auto")) {
      cfg.sigma.reset();
    } else {
      const double sigma = json_number(j["sigma"], field("sigma"));
      if (sigma < 0.0) throw SchemaError(field("sigma"), "must be >= 0");
      cfg.sigma = sigma;
    }
  }
  if (j.contains("spatial_stage")) {
    const auto stage = parse_noise_stage(json_string(j["spatial_stage"], field("spatial_stage")));
    if (!stage) throw SchemaError(field("spatial_stage"), "expected pixel or feature");
    cfg.spatial_stage = *stage;
  }
  if (j.contains("noise_seed")) cfg.noise_seed = json_uint(j["noise_seed"], field("noise_seed"));
  if (j.contains("layers")) {
    const auto& v = j["layers"];
    if (v.is_string()) {
      if (v != "late4") throw SchemaError(field("layers"), "expected \"late4\" or a list of layer indices");
      cfg.layers = LayerSet::late4();
    } else {
      auto layers = json_index_list(v, field("layers"));
      if (layers.empty()) throw SchemaError(field("layers"), "layer list must not be empty");
      for (std::size_t l : layers) {
        if (l < 1) throw SchemaError(field("layers"), "layer indices are 1-based");
      }
      cfg.layers = LayerSet::of(std::move(layers));
    }
  }
  if (j.contains("mode")) {
    const auto mode = parse_mode(json_string(j["mode"], field("mode")));
    if (!mode) throw SchemaError(field("mode"), "unknown decode mode");
    cfg.mode = mode->first;
    cfg.ablation = mode->second;
  }
  if (j.contains("tcd_rate")) {
    cfg.tcd_rate = json_size(j["tcd_rate"], field("tcd_rate"));
    if (cfg.tcd_rate < 1) throw SchemaError(field("tcd_rate"), "must be >= 1");
  }
  if (j.contains("selection")) {
    const auto sp = field("selection");
    const auto& s = json_object(j["selection"], sp);
    json_require_keys(s, {"kind", "temperature", "seed"}, sp);
    if (s.contains("kind")) {
      const auto kind = json_string(s["kind"], join_path(sp, "kind"));
      if (kind == "greedy") {
        cfg.selection.kind = Selection::Kind::greedy;
      } else if (kind == "sample") {
        cfg.selection.kind = Selection::Kind::sample;
      } else {
        throw SchemaError(join_path(sp, "kind"), "expected greedy or sample");
      }
    }
    if (s.contains("temperature")) {
      cfg.selection.temperature = json_number(s["temperature"], join_path(sp, "temperature"));
      if (cfg.selection.temperature <= 0.0) throw SchemaError(join_path(sp, "temperature"), "must be > 0");
    }
    if (s.contains("seed")) cfg.selection.seed = json_uint(s["seed"], join_path(sp, "seed"));
  }
  if (j.contains("max_tokens")) {
    cfg.max_tokens = json_size(j["max_tokens"], field("max_tokens"));
    if (cfg.max_tokens < 1) throw SchemaError(field("max_tokens"), "must be >= 1");
  }
  if (j.contains("plausibility_cutoff")) {
    if (j["plausibility_cutoff"].is_null()) {
      cfg.plausibility_cutoff.reset();
    } else {
      const double c = json_number(j["plausibility_cutoff"], field("plausibility_cutoff"));
      if (!(c > 0.0 && c <= 1.0)) throw SchemaError(field("plausibility_cutoff"), "must lie in (0, 1]");
      cfg.plausibility_cutoff = c;
    }
  }
  if (j.contains("verbose_trace")) cfg.verbose_trace = json_bool(j["verbose_trace"], field("verbose_trace"));
  if (j.contains("forced_weights")) {
    const auto fp = field("forced_weights");
    const auto& arr = json_array(j["forced_weights"], fp);
    if (arr.size() != 2) throw SchemaError(fp, "expected [w_S, w_T]");
    cfg.forced_weights = std::pair{json_number(arr[0], join_path(fp, 0)), json_number(arr[1], join_path(fp, 1))};
  }
  return cfg;
}

std::string stable_digest(const json& j) {
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_digest(const DecodeConfig& cfg) { return stable_digest(to_json(cfg)); }

}  // namespace sdcd
