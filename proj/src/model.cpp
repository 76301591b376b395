// SPDX-License-Identifier: Apache-2.0
#include "sdcd/model.hpp"

#include <sstream>
#include <string>

#include "sdcd/numerics.hpp"

namespace sdcd {

std::string_view to_string(VisualTag tag) {
  switch (tag) {
    case VisualTag::original: return "original";
    case VisualTag::spatial_negative: return "spatial_negative";
    case VisualTag::temporal_negative: return "temporal_negative";
    case VisualTag::ablation_variant: return "ablation_variant";
  }
  return "unknown";
}

VideoInput VideoInput::from_frames(FrameFeatures frames) {
  if (frames.frames() == 0) throw InvalidArgument("video: at least one frame is required");
  if (frames.patches() == 0 || frames.dim() == 0) {
    throw InvalidArgument("video: frames must have at least one patch and one feature");
  }
  require_finite(frames.data(), "video frames");
  return VideoInput{std::move(frames)};
}

std::optional<FramePatch> TokenLayout::locate(std::size_t position) const {
  if (position < offset_ || position >= offset_ + visual_count()) return std::nullopt;
  const std::size_t rel = position - offset_;
  return FramePatch{rel / patches_, rel % patches_};
}

void validate_video(const VideoLanguageModel& model, const VideoInput& video) {
  const auto& f = video.frames;
  if (f.frames() == 0) throw InvalidArgument("video: at least one frame is required");
  if (f.patches() != model.patch_count() || f.dim() != model.input_dim()) {
    std::ostringstream os;
    os << "video: frame shape " << f.patches() << "x" << f.dim() << " does not match model "
       << model.patch_count() << "x" << model.input_dim();
    throw InvalidArgument(os.str());
  }
}

void validate_tokens(const VideoLanguageModel& model, std::span<const TokenId> tokens,
                     std::string_view what) {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] >= model.vocab_size()) {
      std::ostringstream os;
      os << what << ": token " << tokens[i] << " at index " << i << " is outside vocabulary of size "
         << model.vocab_size();
      throw InvalidArgument(os.str());
    }
  }
}

FrameFeatures run_encoder(const VideoLanguageModel& model, const VideoInput& video,
                          const LayerHook& hook) {
  validate_video(model, video);
  FrameFeatures h = model.embed_patches(video.frames);
  for (std::size_t l = 1; l <= model.encoder_layer_count(); ++l) {
    h = model.encoder_layer(l, h);
    if (hook) hook(l, h);
  }
  return h;
}

LayerCache encode_layerwise(const VideoLanguageModel& model, const VideoInput& video) {
  LayerCache cache;
  cache.layers.reserve(model.encoder_layer_count());
  cache.frame_means.reserve(model.encoder_layer_count());
  FrameFeatures last = run_encoder(model, video, [&](std::size_t, FrameFeatures& h) {
    cache.layers.push_back(h);
    cache.frame_means.push_back(h.frame_mean());
  });
  cache.visual = VideoTensor{model.project(last), VisualTag::original};
  return cache;
}

VideoTensor encode(const VideoLanguageModel& model, const VideoInput& video, VisualTag tag) {
  return VideoTensor{model.project(run_encoder(model, video)), tag};
}

}  // namespace sdcd
