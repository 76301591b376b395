// SPDX-License-Identifier: Apache-2.0
#include "sdcd/decoder.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "sdcd/config_io.hpp"

namespace sdcd {

std::string_view to_string(DecodeMode mode) {
  switch (mode) {
    case DecodeMode::baseline: return "baseline";
    case DecodeMode::temporal_only: return "temporal_only";
    case DecodeMode::spatial_only: return "spatial_only";
    case DecodeMode::season: return "season";
    case DecodeMode::tcd: return "tcd";
    case DecodeMode::ablation: return "ablation";
  }
  return "unknown";
}

std::string mode_name(DecodeMode mode, AblationKind ablation) {
  std::string name(to_string(mode));
  if (mode == DecodeMode::ablation) name += ":" + std::string(to_string(ablation));
  return name;
}

std::optional<std::pair<DecodeMode, AblationKind>> parse_mode(std::string_view text) {
  constexpr std::string_view prefix = "ablation:";
  if (text.starts_with(prefix)) {
    auto kind = parse_ablation_kind(text.substr(prefix.size()));
    if (!kind) return std::nullopt;
    return std::pair{DecodeMode::ablation, *kind};
  }
  for (DecodeMode m : {DecodeMode::baseline, DecodeMode::temporal_only, DecodeMode::spatial_only,
                       DecodeMode::season, DecodeMode::tcd}) {
    if (to_string(m) == text) return std::pair{m, AblationKind::average};
  }
  return std::nullopt;
}

void DecodeConfig::validate(const VideoLanguageModel& model, const VideoInput& video) const {
  auto fail = [](const std::string& msg) { throw InvalidArgument("decode config: " + msg); };
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) fail("alpha must be finite and >= 0");
  if (max_tokens < 1) fail("max_tokens must be >= 1");
  if (plausibility_cutoff && !(*plausibility_cutoff > 0.0 && *plausibility_cutoff <= 1.0)) {
    fail("plausibility_cutoff must be in (0, 1]");
  }
  if (selection.kind == Selection::Kind::sample &&
      (!(selection.temperature > 0.0) || !std::isfinite(selection.temperature))) {
    fail("sampling temperature must be positive");
  }
  if (sigma && (!(*sigma >= 0.0) || !std::isfinite(*sigma))) fail("sigma must be finite and >= 0");
  if (forced_weights) {
    const auto [ws, wt] = *forced_weights;
    if (!(ws >= 0.0 && wt >= 0.0 && std::abs(ws + wt - 1.0) <= 1e-12)) {
      fail("forced weights must be non-negative and sum to 1");
    }
  }
  homogenization.validate(model.encoder_layer_count());
  (void)layers.resolve(model.decoder_layer_count());
  if (mode == DecodeMode::tcd) (void)tcd_kept_frames(video.frame_count(), tcd_rate);
  if (mode == DecodeMode::ablation && ablation == AblationKind::shuffled && video.frame_count() < 2) {
    fail("shuffled ablation needs at least two frames");
  }
}

void StepLogits::validate() const {
  if (original.size() != spatial.size() || original.size() != temporal.size()) {
    throw InvalidArgument("step logits: length mismatch");
  }
  if (original.empty()) throw InvalidArgument("step logits: empty vocabulary");
  require_finite(original, "logits(original)");
  require_finite(spatial, "logits(spatial)");
  require_finite(temporal, "logits(temporal)");
}

std::vector<double> contrast_logits(std::span<const double> original, std::span<const double> negative,
                                    double alpha) {
  if (original.size() != negative.size()) {
    std::ostringstream os;
    os << "contrast: length mismatch (" << original.size() << " vs " << negative.size() << ")";
    throw InvalidArgument(os.str());
  }
  std::vector<double> out(original.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 + alpha) * original[i] - alpha * negative[i];
  return out;
}

ProbVec contrast_temporal(std::span<const double> original, std::span<const double> temporal, double alpha) {
  return softmax(contrast_logits(original, temporal, alpha));
}

std::vector<double> season_logits(const StepLogits& step, const DiagnosticWeights& w, double alpha) {
  step.validate();
  std::vector<double> out(step.original.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double negative = w.w_spatial * step.spatial[i] + w.w_temporal * step.temporal[i];
    out[i] = (1.0 + alpha) * step.original[i] - alpha * negative;
  }
  return out;
}

ProbVec contrast_season(const StepLogits& step, const DiagnosticWeights& w, double alpha) {
  return softmax(season_logits(step, w, alpha));
}

std::vector<double> plausibility_filter(const ProbVec& p_base, std::span<const double> contrast,
                                        double cutoff) {
  if (!(cutoff > 0.0 && cutoff <= 1.0)) throw InvalidArgument("plausibility filter: cutoff must be in (0, 1]");
  if (p_base.size() != contrast.size()) throw InvalidArgument("plausibility filter: length mismatch");
  double max_p = 0.0;
  for (double p : p_base) max_p = std::max(max_p, p);
  const double threshold = cutoff * max_p;
  std::vector<double> out(contrast.begin(), contrast.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (p_base[i] < threshold) out[i] = -std::numeric_limits<double>::infinity();
  }
  return out;
}

std::string token_text(std::span<const std::string> vocab_names, TokenId id) {
  if (id < vocab_names.size()) return vocab_names[id];
  return "tok" + std::to_string(id);
}

namespace {

struct Branch {
  VideoTensor visual;
  std::vector<TokenId> context;
  bool active = false;
};

TokenId sample_token(const ProbVec& p, SeededRng& rng) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  std::size_t last_nonzero = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    last_nonzero = i;
    cumulative += p[i];
    if (u < cumulative) return static_cast<TokenId>(i);
  }
  return static_cast<TokenId>(last_nonzero);
}

}  // namespace

DecodeResult decode_loop(const VideoLanguageModel& model, const VideoInput& video,
                         std::span<const TokenId> query, const DecodeConfig& cfg,
                         std::span<const std::string> vocab_names) {
  validate_video(model, video);
  cfg.validate(model, video);
  if (query.empty()) throw InvalidArgument("decode: query must contain at least one token");
  validate_tokens(model, query, "query");

  DecodeResult result;
  const std::string digest = config_digest(cfg);
  const std::string mode_label = mode_name(cfg.mode, cfg.ablation);

  Branch original{encode(model, video), {}, true};
  Branch spatial;
  Branch temporal;
  Branch contrast;  // tcd or ablation negative

  const bool need_spatial = cfg.mode == DecodeMode::spatial_only || cfg.mode == DecodeMode::season;
  const bool need_temporal = cfg.mode == DecodeMode::temporal_only || cfg.mode == DecodeMode::season;
  if (need_spatial) {
    NegativeStrategy s;
    s.kind = NegativeStrategy::Kind::spatial_gaussian;
    s.sigma = cfg.sigma;
    s.stage = cfg.spatial_stage;
    s.seed = cfg.noise_seed;
    auto built = build_negative(model, video, s);
    result.sigma_used = built.sigma;
    spatial = Branch{std::move(built.visual), {}, true};
  }
  if (need_temporal) {
    temporal = Branch{temporal_homogenize(model, video, cfg.homogenization), {}, true};
  }
  if (cfg.mode == DecodeMode::tcd || cfg.mode == DecodeMode::ablation) {
    NegativeStrategy s;
    s.seed = cfg.noise_seed;
    s.rate = cfg.tcd_rate;
    if (cfg.mode == DecodeMode::tcd) {
      s.kind = NegativeStrategy::Kind::tcd_framedrop;
    } else {
      s.kind = cfg.ablation == AblationKind::average    ? NegativeStrategy::Kind::average
               : cfg.ablation == AblationKind::shuffled ? NegativeStrategy::Kind::shuffled
                                                        : NegativeStrategy::Kind::reverse;
    }
    auto built = build_negative(model, video, s);
    result.frame_order = std::move(built.frame_order);
    contrast = Branch{std::move(built.visual), {}, true};
  }

  const auto eos = model.eos_token();
  SeededRng sampler(cfg.selection.seed);

  auto distribution_of = [&](const Branch& b, const DecoderOutput& out) {
    const TokenLayout layout = model.token_layout(b.visual.frame_count());
    return frame_attention(out, layout, cfg.layers, out.sequence_length() - 1, b.visual.tag);
  };

  for (std::size_t step = 0; step < cfg.max_tokens; ++step) {
    for (const Branch* b : {&spatial, &temporal, &contrast}) {
      if (b->active && b->context != original.context) {
        throw std::logic_error("decode: textual contexts diverged across branches");
      }
    }

    TraceRecord rec;
    rec.step = step;
    rec.mode = mode_label;
    rec.config_digest = digest;

    const DecoderOutput out_o = model.decode_step(original.visual, query, original.context);
    require_finite(out_o.logits, "logits(original)");
    rec.baseline_top1 = static_cast<TokenId>(argmax_stable(out_o.logits));

    std::optional<FrameAttentionDist> a_o;
    std::optional<FrameAttentionDist> a_s;
    std::optional<FrameAttentionDist> a_t;
    std::optional<DecoderOutput> out_s;
    std::optional<DecoderOutput> out_t;
    if (spatial.active || temporal.active) a_o = distribution_of(original, out_o);
    if (spatial.active) {
      out_s = model.decode_step(spatial.visual, query, spatial.context);
      a_s = distribution_of(spatial, *out_s);
      rec.d_spatial = jsd(a_o->dist, a_s->dist);
    }
    if (temporal.active) {
      out_t = model.decode_step(temporal.visual, query, temporal.context);
      a_t = distribution_of(temporal, *out_t);
      rec.d_temporal = jsd(a_o->dist, a_t->dist);
    }

    std::vector<double> logits;
    switch (cfg.mode) {
      case DecodeMode::baseline: logits = out_o.logits; break;
      case DecodeMode::temporal_only: logits = contrast_logits(out_o.logits, out_t->logits, cfg.alpha); break;
      case DecodeMode::spatial_only: logits = contrast_logits(out_o.logits, out_s->logits, cfg.alpha); break;
      case DecodeMode::season: {
        DiagnosticWeights w = diagnose(*a_o, *a_s, *a_t);
        if (cfg.forced_weights) {
          w.w_spatial = cfg.forced_weights->first;
          w.w_temporal = cfg.forced_weights->second;
        }
        rec.w_spatial = w.w_spatial;
        rec.w_temporal = w.w_temporal;
        const StepLogits step_logits{out_o.logits, out_s->logits, out_t->logits};
        logits = season_logits(step_logits, w, cfg.alpha);
        break;
      }
      case DecodeMode::tcd:
      case DecodeMode::ablation: {
        const DecoderOutput out_c = model.decode_step(contrast.visual, query, contrast.context);
        logits = contrast_logits(out_o.logits, out_c.logits, cfg.alpha);
        break;
      }
    }
    require_finite(logits, "combined logits");
    if (cfg.plausibility_cutoff && cfg.mode != DecodeMode::baseline) {
      logits = plausibility_filter(softmax(out_o.logits), logits, *cfg.plausibility_cutoff);
    }

    const ProbVec p = masked_softmax(logits);
    TokenId token;
    if (cfg.selection.kind == Selection::Kind::greedy) {
      token = static_cast<TokenId>(argmax_stable(logits));
    } else {
      token = sample_token(masked_softmax(logits, cfg.selection.temperature), sampler);
    }
    rec.token = token;
    rec.text = token_text(vocab_names, token);
    rec.top1_prob = p[argmax_stable(p.values())];
    if (cfg.verbose_trace) {
      if (a_o) rec.a_original = a_o->dist.vec();
      if (a_s) rec.a_spatial = a_s->dist.vec();
      if (a_t) rec.a_temporal = a_t->dist.vec();
    }

    result.tokens.push_back(token);
    result.trace.push_back(std::move(rec));
    for (Branch* b : {&original, &spatial, &temporal, &contrast}) {
      if (b->active) b->context.push_back(token);
    }
    if (eos && token == *eos) break;
  }
  return result;
}

}  // namespace sdcd
