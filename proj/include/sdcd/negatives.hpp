// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sdcd/model.hpp"
#include "sdcd/numerics.hpp"

namespace sdcd {

/// Named encoder-layer bands. Bands are contiguous and ceil(L / 3) layers wide:
/// early starts at layer 1, late ends at layer L, middle is centered.
enum class LayerBand { all, early, middle, late, explicit_set };

struct LayerRange {
  LayerBand band = LayerBand::all;
  /// 1-based layer indices, used only when band == explicit_set.
  std::vector<std::size_t> layers;

  static LayerRange all() { return {}; }
  static LayerRange of(LayerBand band) { return {band, {}}; }
  static LayerRange explicit_layers(std::vector<std::size_t> layers) {
    return {LayerBand::explicit_set, std::move(layers)};
  }

  /// Sorted, de-duplicated 1-based layer indices for an encoder of `layer_count`
  /// layers. Rejects empty sets and out-of-range indices.
  std::vector<std::size_t> resolve(std::size_t layer_count) const;

  friend bool operator==(const LayerRange&, const LayerRange&) = default;
};

std::string_view to_string(LayerBand band);
std::optional<LayerBand> parse_layer_band(std::string_view text);

/// Where the per-layer frame mean d_l comes from during the blended pass.
enum class MeanSource {
  /// d_l recorded from the standard (unblended) forward pass.
  clean,
  /// d_l recomputed at each layer from the blended pass's own pre-blend features.
  progressive,
};

std::string_view to_string(MeanSource source);
std::optional<MeanSource> parse_mean_source(std::string_view text);

struct HomogenizationConfig {
  double beta = 0.33;
  LayerRange layer_range;
  MeanSource d_source = MeanSource::clean;

  void validate(std::size_t encoder_layers) const;
  friend bool operator==(const HomogenizationConfig&, const HomogenizationConfig&) = default;
};

/// Builds the temporal negative: a second encoder pass where each selected layer's
/// output is blended toward that layer's frame mean,
///   h_l,t = (1 - beta) * E_l(h_{l-1},t) + beta * d_l.
/// Layers outside the range pass through unchanged.
VideoTensor temporal_homogenize(const VideoLanguageModel& model, const VideoInput& video,
                                const HomogenizationConfig& cfg);

enum class NoiseStage { pixel, feature };

std::string_view to_string(NoiseStage stage);
std::optional<NoiseStage> parse_noise_stage(std::string_view text);

/// Raw frames plus N(0, sigma^2) noise, drawn in storage order.
VideoInput add_pixel_noise(const VideoInput& video, double sigma, SeededRng& rng);

/// Visual tokens plus N(0, sigma^2) noise, drawn in storage order.
VideoTensor add_feature_noise(const VideoTensor& visual, double sigma, SeededRng& rng);

/// Spatial negative. `pixel` perturbs the raw frames and re-encodes; `feature`
/// perturbs the encoded visual tokens of the clean video.
VideoTensor spatial_negative(const VideoLanguageModel& model, const VideoInput& video, double sigma,
                             SeededRng& rng, NoiseStage stage = NoiseStage::pixel);

/// Standard deviation of all raw frame entries (pixel stage) or of the clean visual
/// tokens (feature stage); used when no explicit sigma is configured.
double auto_noise_sigma(const VideoLanguageModel& model, const VideoInput& video, NoiseStage stage);

enum class AblationKind { average, shuffled, reverse };

std::string_view to_string(AblationKind kind);
std::optional<AblationKind> parse_ablation_kind(std::string_view text);

/// Uniform random permutation of [0, n) that is not the identity (n > 1).
std::vector<std::size_t> random_nonidentity_permutation(std::size_t n, SeededRng& rng);

struct AblationResult {
  VideoTensor visual;
  /// Frame order that was encoded (output frame i came from input frame order[i]).
  std::vector<std::size_t> frame_order;
};

/// Alternative temporal negatives:
///   shuffled: encode a seeded non-identity frame permutation of the video;
///   reverse:  encode the frames in reverse order;
///   average:  encode normally, then replace every frame's final-layer features with
///             their temporal mean (single-shot, final layer only).
AblationResult ablation_negative(const VideoLanguageModel& model, const VideoInput& video,
                                 AblationKind kind, SeededRng& rng);

/// Keeps every r-th frame starting at frame 0; the result has ceil(T / r) frames.
VideoInput tcd_framedrop(const VideoInput& video, std::size_t rate);

/// Frame indices kept by tcd_framedrop.
std::vector<std::size_t> tcd_kept_frames(std::size_t frames, std::size_t rate);

/// Serializable description of one negative.
struct NegativeStrategy {
  enum class Kind { temporal_homogenized, spatial_gaussian, average, shuffled, reverse, tcd_framedrop };

  Kind kind = Kind::temporal_homogenized;
  HomogenizationConfig homogenization;
  /// Spatial noise level; nullopt means auto_noise_sigma.
  std::optional<double> sigma;
  NoiseStage stage = NoiseStage::pixel;
  std::uint64_t seed = 0;
  std::size_t rate = 2;

  void validate(const VideoLanguageModel& model, const VideoInput& video) const;
  friend bool operator==(const NegativeStrategy&, const NegativeStrategy&) = default;
};

std::string_view to_string(NegativeStrategy::Kind kind);
std::optional<NegativeStrategy::Kind> parse_negative_kind(std::string_view text);

struct BuiltNegative {
  VideoTensor visual;
  /// Frame permutation applied (shuffled / reverse), empty otherwise.
  std::vector<std::size_t> frame_order;
  /// Sigma actually used (spatial only).
  std::optional<double> sigma;
};

BuiltNegative build_negative(const VideoLanguageModel& model, const VideoInput& video,
                             const NegativeStrategy& strategy);

}  // namespace sdcd
