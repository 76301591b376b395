// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "sdcd/model.hpp"
#include "sdcd/numerics.hpp"

namespace sdcd {

namespace {

// Floor added to every visual token's attention weight so that rows stay strictly
// positive over visual positions even for blank frames.
constexpr double kAttentionFloor = 1e-3;
constexpr double kEmptyMass = 1e-12;

}  // namespace

void ProbeSpec::validate() const {
  auto fail = [](const std::string& msg) { throw InvalidArgument("probe spec: " + msg); };
  if (event_tokens.size() < 2) fail("at least two event tokens are required");
  std::set<TokenId> distinct(event_tokens.begin(), event_tokens.end());
  if (distinct.size() != event_tokens.size()) fail("event tokens must be distinct");
  for (TokenId t : event_tokens) {
    if (t >= vocab) fail("event token outside vocabulary");
    if (t == eos) fail("event token collides with the EOS token");
  }
  if (eos >= vocab) fail("EOS token outside vocabulary");
  if (prior_bias.size() != event_tokens.size()) {
    fail("prior_bias must have one entry per event token");
  }
  for (double b : prior_bias) {
    if (!std::isfinite(b)) fail("prior_bias entries must be finite");
  }
  if (feature_dim != 0 && feature_dim < event_tokens.size()) {
    fail("feature_dim must provide one channel per event");
  }
  if (!std::isfinite(visual_gain)) fail("visual_gain must be finite");
  if (patches < 1) fail("patches must be >= 1");
  if (encoder_layers < 1) fail("encoder_layers must be >= 1");
  if (decoder_layers < 1) fail("decoder_layers must be >= 1");
  if (heads < 1) fail("heads must be >= 1");
  if (!(attention_focus > 0.0 && attention_focus < 1.0)) fail("attention_focus must be in (0, 1)");
  if (!std::isfinite(stop_logit) || !std::isfinite(inactive_logit)) fail("logits must be finite");
}

ScriptedProbeModel::ScriptedProbeModel(ProbeSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

FrameFeatures ScriptedProbeModel::embed_patches(const FrameFeatures& raw) const {
  if (raw.patches() != spec_.patches || raw.dim() != input_dim()) {
    throw InvalidArgument("probe model: raw frame shape does not match spec");
  }
  return raw;
}

// The probe's encoder is the identity on each frame, so every change to the visual
// tokens comes from the negative construction alone.
FrameFeatures ScriptedProbeModel::encoder_layer(std::size_t layer, const FrameFeatures& h) const {
  if (layer < 1 || layer > spec_.encoder_layers) {
    throw InvalidArgument("probe model: encoder layer index out of range");
  }
  return h;
}

FrameFeatures ScriptedProbeModel::project(const FrameFeatures& final_layer) const { return final_layer; }

std::vector<double> ScriptedProbeModel::event_positions(const FrameFeatures& visual) const {
  const std::size_t frames = visual.frames();
  std::vector<double> positions(spec_.event_tokens.size(), 0.5);
  for (std::size_t e = 0; e < spec_.event_tokens.size(); ++e) {
    double mass = 0.0;
    double moment = 0.0;
    for (std::size_t t = 0; t < frames; ++t) {
      double s = 0.0;
      for (std::size_t k = 0; k < visual.patches(); ++k) s += std::max(0.0, visual.at(t, k, e));
      s /= static_cast<double>(visual.patches());
      mass += s;
      moment += s * static_cast<double>(t);
    }
    if (mass > kEmptyMass && frames > 1) {
      positions[e] = (moment / mass) / static_cast<double>(frames - 1);
    }
  }
  return positions;
}

DecoderOutput ScriptedProbeModel::decode_step(const VideoTensor& visual, std::span<const TokenId> query,
                                              std::span<const TokenId> generated) const {
  const auto& v = visual.features;
  if (v.frames() == 0 || v.patches() != spec_.patches || v.dim() != visual_dim()) {
    throw InvalidArgument("probe model: visual tensor shape does not match spec");
  }
  validate_tokens(*this, query, "query");
  validate_tokens(*this, generated, "generated");
  if (query.empty() && generated.empty()) {
    throw InvalidArgument("probe model: at least one text token is required");
  }
  require_finite(v.data(), "probe visual tokens");

  DecoderOutput out;
  out.logits.assign(spec_.vocab, spec_.inactive_logit);
  if (generated.empty()) {
    const auto positions = event_positions(v);
    for (std::size_t e = 0; e < spec_.event_tokens.size(); ++e) {
      out.logits[spec_.event_tokens[e]] = -spec_.visual_gain * positions[e] + spec_.prior_bias[e];
    }
  } else {
    out.logits[spec_.eos] = spec_.stop_logit;
  }

  const TokenLayout layout = token_layout(v.frames());
  const std::size_t n_visual = layout.visual_count();
  const std::size_t n = n_visual + query.size() + generated.size();
  const double heads = static_cast<double>(spec_.heads);

  // Event saliency of each visual token; the final row spreads its visual share
  // proportionally, every other row is uniform over its causal prefix.
  std::vector<double> saliency(n_visual, kAttentionFloor);
  double saliency_total = 0.0;
  for (std::size_t t = 0; t < v.frames(); ++t) {
    for (std::size_t k = 0; k < v.patches(); ++k) {
      double s = kAttentionFloor;
      for (std::size_t e = 0; e < spec_.event_tokens.size(); ++e) s += std::max(0.0, v.at(t, k, e));
      saliency[layout.position(t, k) - layout.visual_offset()] = s;
      saliency_total += s;
    }
  }

  Matrix attn(n, n);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double share = heads / static_cast<double>(i + 1);
    for (std::size_t j = 0; j <= i; ++j) attn.at(i, j) = share;
  }
  const std::size_t last = n - 1;
  const std::size_t text_allowed = n - n_visual;
  for (std::size_t j = 0; j < n_visual; ++j) {
    attn.at(last, layout.visual_offset() + j) = heads * spec_.attention_focus * saliency[j] / saliency_total;
  }
  for (std::size_t j = n_visual; j < n; ++j) {
    attn.at(last, j) = heads * (1.0 - spec_.attention_focus) / static_cast<double>(text_allowed);
  }
  out.attentions.assign(spec_.decoder_layers, attn);
  return out;
}

std::unique_ptr<ScriptedProbeModel> scripted_probe_build(const ProbeSpec& spec) {
  return std::make_unique<ScriptedProbeModel>(spec);
}

}  // namespace sdcd
