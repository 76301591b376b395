// SPDX-License-Identifier: Apache-2.0
#include "sdcd/diagnosis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sdcd {

std::vector<std::size_t> LayerSet::resolve(std::size_t decoder_layers) const {
  if (decoder_layers == 0) throw InvalidArgument("layer set: decoder has no layers");
  std::vector<std::size_t> out;
  if (is_late4()) {
    const std::size_t first = decoder_layers > 4 ? decoder_layers - 3 : 1;
    for (std::size_t l = first; l <= decoder_layers; ++l) out.push_back(l);
    return out;
  }
  for (std::size_t l : indices) {
    if (l < 1 || l > decoder_layers) {
      std::ostringstream os;
      os << "layer set: layer " << l << " outside [1, " << decoder_layers << "]";
      throw InvalidArgument(os.str());
    }
  }
  out = indices;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

FrameAttentionDist frame_attention(const DecoderOutput& output, const TokenLayout& layout,
                                   const LayerSet& layers, std::size_t preceding_position,
                                   VisualTag source) {
  const auto resolved = layers.resolve(output.attentions.size());
  const std::size_t n = output.sequence_length();
  if (layout.visual_count() == 0) throw InvalidArgument("frame attention: layout has no visual positions");
  if (layout.visual_offset() + layout.visual_count() > n) {
    throw InvalidArgument("frame attention: layout visual positions exceed the sequence length");
  }
  if (preceding_position >= n) throw InvalidArgument("frame attention: preceding position out of range");

  std::vector<double> per_frame(layout.frames(), 0.0);
  for (std::size_t l : resolved) {
    const Matrix& a = output.attentions[l - 1];
    for (std::size_t t = 0; t < layout.frames(); ++t) {
      for (std::size_t k = 0; k < layout.patches(); ++k) {
        per_frame[t] += a.at(preceding_position, layout.position(t, k));
      }
    }
  }
  return FrameAttentionDist{softmax(per_frame), source};
}

DiagnosticWeights weights_from_divergences(double d_spatial, double d_temporal) {
  if (!(d_spatial >= 0.0) || !(d_temporal >= 0.0) || !std::isfinite(d_spatial) || !std::isfinite(d_temporal)) {
    throw InvalidArgument("diagnosis: divergences must be finite and >= 0");
  }
  DiagnosticWeights w;
  w.d_spatial = d_spatial;
  w.d_temporal = d_temporal;
  const double total = d_spatial + d_temporal;
  if (total <= kDegenerateDivergence) return w;
  w.w_spatial = d_spatial / total;
  w.w_temporal = 1.0 - w.w_spatial;
  return w;
}

DiagnosticWeights diagnose(const FrameAttentionDist& original, const FrameAttentionDist& spatial,
                           const FrameAttentionDist& temporal) {
  if (original.frames() != spatial.frames() || original.frames() != temporal.frames()) {
    std::ostringstream os;
    os << "diagnosis: frame counts differ (" << original.frames() << ", " << spatial.frames() << ", "
       << temporal.frames() << ")";
    throw InvalidArgument(os.str());
  }
  return weights_from_divergences(jsd(original.dist, spatial.dist), jsd(original.dist, temporal.dist));
}

}  // namespace sdcd
