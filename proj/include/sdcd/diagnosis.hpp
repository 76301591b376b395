// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "sdcd/model.hpp"
#include "sdcd/numerics.hpp"

namespace sdcd {

/// Decoder layers whose attention feeds the frame distribution (1-based indices).
struct LayerSet {
  /// Empty means "late4": the last four decoder layers, or all of them if fewer.
  std::vector<std::size_t> indices;

  static LayerSet late4() { return {}; }
  static LayerSet of(std::vector<std::size_t> layers) { return {std::move(layers)}; }

  bool is_late4() const { return indices.empty(); }
  /// Concrete sorted, de-duplicated indices. Rejects out-of-range layers.
  std::vector<std::size_t> resolve(std::size_t decoder_layers) const;

  friend bool operator==(const LayerSet&, const LayerSet&) = default;
};

struct FrameAttentionDist {
  ProbVec dist;
  VisualTag source = VisualTag::original;

  std::size_t frames() const { return dist.size(); }
};

/// Tolerance on D_S + D_T below which both divergences count as zero.
inline constexpr double kDegenerateDivergence = 1e-12;

struct DiagnosticWeights {
  double w_spatial = 0.5;
  double w_temporal = 0.5;
  double d_spatial = 0.0;
  double d_temporal = 0.0;
};

/// Frame distribution seen from `preceding_position`: for every frame, the attention
/// mass that row assigns to the frame's visual tokens, summed over the chosen layers
/// (each already summed over heads), then softmax over frames.
FrameAttentionDist frame_attention(const DecoderOutput& output, const TokenLayout& layout,
                                   const LayerSet& layers, std::size_t preceding_position,
                                   VisualTag source = VisualTag::original);

/// Normalizes the two divergences into weights: (D_S, D_T) / (D_S + D_T), or
/// (0.5, 0.5) when the sum is at most kDegenerateDivergence.
DiagnosticWeights weights_from_divergences(double d_spatial, double d_temporal);

/// D_S = JSD(a_O, a_S), D_T = JSD(a_O, a_T), normalized.
DiagnosticWeights diagnose(const FrameAttentionDist& original, const FrameAttentionDist& spatial,
                           const FrameAttentionDist& temporal);

}  // namespace sdcd
