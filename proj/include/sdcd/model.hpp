// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sdcd/tensor.hpp"

namespace sdcd {

using TokenId = std::uint32_t;

/// Default number of sampled frames per video.
inline constexpr std::size_t kDefaultFrameCount = 8;

enum class VisualTag { original, spatial_negative, temporal_negative, ablation_variant };

std::string_view to_string(VisualTag tag);

/// Raw per-frame patch blocks [T x K x D0] handed to the vision encoder.
struct VideoInput {
  FrameFeatures frames;

  std::size_t frame_count() const { return frames.frames(); }

  /// Validates T >= 1 and finiteness.
  static VideoInput from_frames(FrameFeatures frames);

  friend bool operator==(const VideoInput&, const VideoInput&) = default;
};

/// Visual tokens fed to the decoder. The tag is metadata only and never affects
/// any computation.
struct VideoTensor {
  FrameFeatures features;
  VisualTag tag = VisualTag::original;

  std::size_t frame_count() const { return features.frames(); }
};

/// Per-layer record of a standard encoder pass.
struct LayerCache {
  /// layers[l - 1] holds the features after encoder layer l.
  std::vector<FrameFeatures> layers;
  /// frame_means[l - 1] is d_l, the mean of layers[l - 1] over frames ([1 x K x D]).
  std::vector<FrameFeatures> frame_means;
  /// Final layer projected into the decoder's visual token space.
  VideoTensor visual;
};

struct FramePatch {
  std::size_t frame;
  std::size_t patch;
  friend bool operator==(const FramePatch&, const FramePatch&) = default;
};

/// Maps decoder sequence positions to (frame, patch) for the visual tokens.
/// Visual tokens occupy a contiguous block in frame-major order.
class TokenLayout {
 public:
  TokenLayout(std::size_t visual_offset, std::size_t frames, std::size_t patches)
      : offset_(visual_offset), frames_(frames), patches_(patches) {}

  std::size_t frames() const { return frames_; }
  std::size_t patches() const { return patches_; }
  std::size_t visual_offset() const { return offset_; }
  std::size_t visual_count() const { return frames_ * patches_; }

  std::size_t position(std::size_t frame, std::size_t patch) const {
    return offset_ + frame * patches_ + patch;
  }
  std::optional<FramePatch> locate(std::size_t position) const;

 private:
  std::size_t offset_;
  std::size_t frames_;
  std::size_t patches_;
};

struct DecoderOutput {
  std::vector<double> logits;
  /// One [n x n] matrix per decoder layer, already summed over heads.
  std::vector<Matrix> attentions;

  std::size_t sequence_length() const { return attentions.empty() ? 0 : attentions.front().rows(); }
};

/// Contract the decoding engine runs against: a layer-hookable per-frame vision
/// encoder plus a causal decoder that exposes its attention maps. Implementations
/// are immutable after construction and safe for concurrent const use.
class VideoLanguageModel {
 public:
  virtual ~VideoLanguageModel() = default;

  virtual std::size_t encoder_layer_count() const = 0;
  virtual std::size_t decoder_layer_count() const = 0;
  virtual std::size_t attention_heads() const = 0;
  virtual std::size_t vocab_size() const = 0;
  virtual std::size_t patch_count() const = 0;
  virtual std::size_t input_dim() const = 0;
  /// Width of the projected visual tokens.
  virtual std::size_t visual_dim() const = 0;
  virtual std::optional<TokenId> eos_token() const = 0;

  /// h_0: patch embeddings of every frame.
  virtual FrameFeatures embed_patches(const FrameFeatures& raw) const = 0;
  /// E^(layer) for 1-based `layer`. Must process each frame independently.
  virtual FrameFeatures encoder_layer(std::size_t layer, const FrameFeatures& h) const = 0;
  /// Maps final-layer encoder features to decoder visual tokens.
  virtual FrameFeatures project(const FrameFeatures& final_layer) const = 0;

  virtual DecoderOutput decode_step(const VideoTensor& visual, std::span<const TokenId> query,
                                    std::span<const TokenId> generated) const = 0;

  /// Sequence layout used by decode_step for a video of `frames` frames.
  virtual TokenLayout token_layout(std::size_t frames) const {
    return TokenLayout(0, frames, patch_count());
  }
};

/// Called after each encoder layer with the freshly computed features; may modify them.
using LayerHook = std::function<void(std::size_t layer, FrameFeatures& features)>;

void validate_video(const VideoLanguageModel& model, const VideoInput& video);

/// Runs embed + all encoder layers, invoking `hook` after every layer. Returns the
/// final-layer (unprojected) features.
FrameFeatures run_encoder(const VideoLanguageModel& model, const VideoInput& video,
                          const LayerHook& hook = {});

/// Standard forward pass recording every layer and its frame mean d_l.
LayerCache encode_layerwise(const VideoLanguageModel& model, const VideoInput& video);

/// Standard forward pass returning only the projected visual tokens (v^O).
VideoTensor encode(const VideoLanguageModel& model, const VideoInput& video,
                   VisualTag tag = VisualTag::original);

void validate_tokens(const VideoLanguageModel& model, std::span<const TokenId> tokens,
                     std::string_view what);

// ---------------------------------------------------------------------------
// Toy transformer

enum class EncoderKind { transformer, linear };

struct ToyModelConfig {
  std::size_t encoder_layers = 3;
  std::size_t decoder_layers = 4;
  std::size_t heads = 2;
  std::size_t patches = 4;
  std::size_t dim = 16;
  /// Raw patch width; 0 means "same as dim".
  std::size_t input_dim = 0;
  std::size_t vocab = 64;
  std::uint64_t seed = 7;
  /// `linear` replaces each encoder block with an affine map (used by the
  /// monotone-homogenization check).
  EncoderKind encoder_kind = EncoderKind::transformer;
  TokenId eos = 0;

  std::size_t effective_input_dim() const { return input_dim == 0 ? dim : input_dim; }
  void validate() const;
  friend bool operator==(const ToyModelConfig&, const ToyModelConfig&) = default;
};

/// Seeded random-weight video-language transformer at desk scale. The encoder
/// runs patch self-attention within each frame only, so frames never mix.
class ToyModel final : public VideoLanguageModel {
 public:
  explicit ToyModel(const ToyModelConfig& config);
  ~ToyModel() override;

  const ToyModelConfig& config() const { return config_; }

  std::size_t encoder_layer_count() const override { return config_.encoder_layers; }
  std::size_t decoder_layer_count() const override { return config_.decoder_layers; }
  std::size_t attention_heads() const override { return config_.heads; }
  std::size_t vocab_size() const override { return config_.vocab; }
  std::size_t patch_count() const override { return config_.patches; }
  std::size_t input_dim() const override { return config_.effective_input_dim(); }
  std::size_t visual_dim() const override { return config_.dim; }
  std::optional<TokenId> eos_token() const override { return config_.eos; }

  FrameFeatures embed_patches(const FrameFeatures& raw) const override;
  FrameFeatures encoder_layer(std::size_t layer, const FrameFeatures& h) const override;
  FrameFeatures project(const FrameFeatures& final_layer) const override;
  DecoderOutput decode_step(const VideoTensor& visual, std::span<const TokenId> query,
                            std::span<const TokenId> generated) const override;

  /// Same forward pass with the per-head attention kept: result[layer][head] is the
  /// post-softmax [n x n] map of that head.
  std::vector<std::vector<Matrix>> decode_step_per_head(const VideoTensor& visual,
                                                        std::span<const TokenId> query,
                                                        std::span<const TokenId> generated) const;

 private:
  struct Weights;
  DecoderOutput forward(const VideoTensor& visual, std::span<const TokenId> query,
                        std::span<const TokenId> generated,
                        std::vector<std::vector<Matrix>>* per_head) const;

  ToyModelConfig config_;
  std::unique_ptr<Weights> weights_;
};

std::unique_ptr<ToyModel> toy_model_build(const ToyModelConfig& config);

// ---------------------------------------------------------------------------
// Scripted order probe

enum class OrderRule {
  /// Event position = signature-mass-weighted mean frame index (the onset frame for
  /// an event confined to one frame).
  centroid,
};

struct ProbeSpec {
  /// Answer token for each event, in event-channel order: channel i carries event i.
  std::vector<TokenId> event_tokens;
  OrderRule order_rule = OrderRule::centroid;
  /// Language-prior bias added to each event's answer logit, independent of the video.
  std::vector<double> prior_bias;
  /// Logit scale applied to the normalized event position.
  double visual_gain = 4.0;
  std::size_t vocab = 8;
  std::size_t patches = 2;
  /// Raw feature width; 0 means "number of events".
  std::size_t feature_dim = 0;
  std::size_t encoder_layers = 2;
  std::size_t decoder_layers = 4;
  std::size_t heads = 1;
  /// Share of the last position's attention that lands on visual tokens.
  double attention_focus = 0.9;
  TokenId eos = 0;
  double stop_logit = 10.0;
  double inactive_logit = -10.0;

  std::size_t effective_feature_dim() const {
    return feature_dim == 0 ? event_tokens.size() : feature_dim;
  }
  void validate() const;
  friend bool operator==(const ProbeSpec&, const ProbeSpec&) = default;
};

/// Model whose logits are an analytic function of where each event's feature
/// signature sits in time, plus a video-independent prior. It answers in one token
/// (the event it judges to come first) and then emits EOS. The last position's
/// attention concentrates on the visual tokens carrying event signatures.
class ScriptedProbeModel final : public VideoLanguageModel {
 public:
  explicit ScriptedProbeModel(ProbeSpec spec);

  const ProbeSpec& spec() const { return spec_; }

  std::size_t encoder_layer_count() const override { return spec_.encoder_layers; }
  std::size_t decoder_layer_count() const override { return spec_.decoder_layers; }
  std::size_t attention_heads() const override { return spec_.heads; }
  std::size_t vocab_size() const override { return spec_.vocab; }
  std::size_t patch_count() const override { return spec_.patches; }
  std::size_t input_dim() const override { return spec_.effective_feature_dim(); }
  std::size_t visual_dim() const override { return spec_.effective_feature_dim(); }
  std::optional<TokenId> eos_token() const override { return spec_.eos; }

  FrameFeatures embed_patches(const FrameFeatures& raw) const override;
  FrameFeatures encoder_layer(std::size_t layer, const FrameFeatures& h) const override;
  FrameFeatures project(const FrameFeatures& final_layer) const override;
  DecoderOutput decode_step(const VideoTensor& visual, std::span<const TokenId> query,
                            std::span<const TokenId> generated) const override;

  /// Normalized position in [0, 1] of each event under the order rule.
  std::vector<double> event_positions(const FrameFeatures& visual) const;

 private:
  ProbeSpec spec_;
};

std::unique_ptr<ScriptedProbeModel> scripted_probe_build(const ProbeSpec& spec);

}  // namespace sdcd
