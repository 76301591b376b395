// SPDX-License-Identifier: Apache-2.0
#include "sdcd/negatives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace sdcd {

std::string_view to_string(LayerBand band) {
  switch (band) {
    case LayerBand::all: return "all";
    case LayerBand::early: return "early";
    case LayerBand::middle: return "middle";
    case LayerBand::late: return "late";
    case LayerBand::explicit_set: return "explicit";
  }
  return "unknown";
}

std::optional<LayerBand> parse_layer_band(std::string_view text) {
  if (text == "all") return LayerBand::all;
  if (text == "early") return LayerBand::early;
  if (text == "middle") return LayerBand::middle;
  if (text == "late") return LayerBand::late;
  return std::nullopt;
}

std::vector<std::size_t> LayerRange::resolve(std::size_t layer_count) const {
  if (layer_count == 0) throw InvalidArgument("layer range: encoder has no layers");
  const std::size_t width = (layer_count + 2) / 3;
  std::vector<std::size_t> out;
  auto span_of = [&](std::size_t first, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) out.push_back(first + i);
  };
  switch (band) {
    case LayerBand::all: span_of(1, layer_count); break;
    case LayerBand::early: span_of(1, width); break;
    case LayerBand::late: span_of(layer_count - width + 1, width); break;
    case LayerBand::middle: span_of((layer_count - width) / 2 + 1, width); break;
    case LayerBand::explicit_set:
      if (layers.empty()) throw InvalidArgument("layer range: explicit layer set is empty");
      for (std::size_t l : layers) {
        if (l < 1 || l > layer_count) {
          std::ostringstream os;
          os << "layer range: layer " << l << " outside [1, " << layer_count << "]";
          throw InvalidArgument(os.str());
        }
      }
      out = layers;
      std::sort(out.begin(), out.end());
      out.erase(std::unique(out.begin(), out.end()), out.end());
      break;
  }
  return out;
}

std::string_view to_string(MeanSource source) {
  return source == MeanSource::clean ? "clean" : "progressive";
}

std::optional<MeanSource> parse_mean_source(std::string_view text) {
  if (text == "clean") return MeanSource::clean;
  if (text == "progressive") return MeanSource::progressive;
  return std::nullopt;
}

void HomogenizationConfig::validate(std::size_t encoder_layers) const {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    std::ostringstream os;
    os << "homogenization: beta = " << beta << " outside [0, 1]";
    throw InvalidArgument(os.str());
  }
  (void)layer_range.resolve(encoder_layers);
}

namespace {

void blend_toward(FrameFeatures& h, const FrameFeatures& mean, double beta) {
  auto m = mean.frame(0);
  for (std::size_t t = 0; t < h.frames(); ++t) {
    auto f = h.frame(t);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = (1.0 - beta) * f[i] + beta * m[i];
  }
}

}  // namespace

VideoTensor temporal_homogenize(const VideoLanguageModel& model, const VideoInput& video,
                                const HomogenizationConfig& cfg) {
  validate_video(model, video);
  cfg.validate(model.encoder_layer_count());
  const auto layers = cfg.layer_range.resolve(model.encoder_layer_count());
  std::vector<bool> selected(model.encoder_layer_count() + 1, false);
  for (std::size_t l : layers) selected[l] = true;

  std::vector<FrameFeatures> clean_means;
  if (cfg.d_source == MeanSource::clean) clean_means = encode_layerwise(model, video).frame_means;

  FrameFeatures last = run_encoder(model, video, [&](std::size_t l, FrameFeatures& h) {
    if (!selected[l]) return;
    if (cfg.d_source == MeanSource::clean) {
      blend_toward(h, clean_means[l - 1], cfg.beta);
    } else {
      const FrameFeatures mean = h.frame_mean();
      blend_toward(h, mean, cfg.beta);
    }
  });
  return VideoTensor{model.project(last), VisualTag::temporal_negative};
}

std::string_view to_string(NoiseStage stage) { return stage == NoiseStage::pixel ? "pixel" : "feature"; }

std::optional<NoiseStage> parse_noise_stage(std::string_view text) {
  if (text == "pixel") return NoiseStage::pixel;
  if (text == "feature") return NoiseStage::feature;
  return std::nullopt;
}

VideoInput add_pixel_noise(const VideoInput& video, double sigma, SeededRng& rng) {
  const auto noise = gaussian_noise(rng, video.frames.size(), sigma);
  VideoInput out = video;
  auto d = out.frames.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += noise[i];
  return out;
}

VideoTensor add_feature_noise(const VideoTensor& visual, double sigma, SeededRng& rng) {
  const auto noise = gaussian_noise(rng, visual.features.size(), sigma);
  VideoTensor out{visual.features, VisualTag::spatial_negative};
  auto d = out.features.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += noise[i];
  return out;
}

VideoTensor spatial_negative(const VideoLanguageModel& model, const VideoInput& video, double sigma,
                             SeededRng& rng, NoiseStage stage) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw InvalidArgument("spatial negative: sigma must be finite and >= 0");
  }
  if (stage == NoiseStage::pixel) {
    return encode(model, add_pixel_noise(video, sigma, rng), VisualTag::spatial_negative);
  }
  return add_feature_noise(encode(model, video), sigma, rng);
}

namespace {

double population_std(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(values.size()));
}

}  // namespace

double auto_noise_sigma(const VideoLanguageModel& model, const VideoInput& video, NoiseStage stage) {
  if (stage == NoiseStage::pixel) return population_std(video.frames.data());
  return population_std(encode(model, video).features.data());
}

std::string_view to_string(AblationKind kind) {
  switch (kind) {
    case AblationKind::average: return "average";
    case AblationKind::shuffled: return "shuffled";
    case AblationKind::reverse: return "reverse";
  }
  return "unknown";
}

std::optional<AblationKind> parse_ablation_kind(std::string_view text) {
  if (text == "average") return AblationKind::average;
  if (text == "shuffled") return AblationKind::shuffled;
  if (text == "reverse") return AblationKind::reverse;
  return std::nullopt;
}

std::vector<std::size_t> random_nonidentity_permutation(std::size_t n, SeededRng& rng) {
  if (n < 2) throw InvalidArgument("shuffled negative: needs at least two frames for a non-identity permutation");
  std::vector<std::size_t> perm(n);
  for (;;) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_index(i + 1));
      std::swap(perm[i], perm[j]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (perm[i] != i) return perm;
    }
  }
}

AblationResult ablation_negative(const VideoLanguageModel& model, const VideoInput& video,
                                 AblationKind kind, SeededRng& rng) {
  validate_video(model, video);
  const std::size_t frames = video.frame_count();
  AblationResult out;
  switch (kind) {
    case AblationKind::shuffled:
    case AblationKind::reverse: {
      if (kind == AblationKind::shuffled) {
        out.frame_order = random_nonidentity_permutation(frames, rng);
      } else {
        out.frame_order.resize(frames);
        for (std::size_t i = 0; i < frames; ++i) out.frame_order[i] = frames - 1 - i;
      }
      const VideoInput permuted{video.frames.select_frames(out.frame_order)};
      out.visual = encode(model, permuted, VisualTag::ablation_variant);
      break;
    }
    case AblationKind::average: {
      FrameFeatures last = run_encoder(model, video);
      const FrameFeatures mean = last.frame_mean();
      for (std::size_t t = 0; t < frames; ++t) {
        auto src = mean.frame(0);
        std::copy(src.begin(), src.end(), last.frame(t).begin());
      }
      out.visual = VideoTensor{model.project(last), VisualTag::ablation_variant};
      break;
    }
  }
  return out;
}

std::vector<std::size_t> tcd_kept_frames(std::size_t frames, std::size_t rate) {
  if (rate < 1) throw InvalidArgument("tcd: downsample rate must be >= 1");
  if (rate > frames) {
    std::ostringstream os;
    os << "tcd: downsample rate " << rate << " exceeds frame count " << frames;
    throw InvalidArgument(os.str());
  }
  std::vector<std::size_t> kept;
  for (std::size_t t = 0; t < frames; t += rate) kept.push_back(t);
  return kept;
}

VideoInput tcd_framedrop(const VideoInput& video, std::size_t rate) {
  const auto kept = tcd_kept_frames(video.frame_count(), rate);
  return VideoInput{video.frames.select_frames(kept)};
}

std::string_view to_string(NegativeStrategy::Kind kind) {
  using K = NegativeStrategy::Kind;
  switch (kind) {
    case K::temporal_homogenized: return "temporal_homogenized";
    case K::spatial_gaussian: return "spatial_gaussian";
    case K::average: return "average";
    case K::shuffled: return "shuffled";
    case K::reverse: return "reverse";
    case K::tcd_framedrop: return "tcd_framedrop";
  }
  return "unknown";
}

std::optional<NegativeStrategy::Kind> parse_negative_kind(std::string_view text) {
  using K = NegativeStrategy::Kind;
  for (K k : {K::temporal_homogenized, K::spatial_gaussian, K::average, K::shuffled, K::reverse,
              K::tcd_framedrop}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

void NegativeStrategy::validate(const VideoLanguageModel& model, const VideoInput& video) const {
  switch (kind) {
    case Kind::temporal_homogenized: homogenization.validate(model.encoder_layer_count()); break;
    case Kind::spatial_gaussian:
      if (sigma && !(*sigma >= 0.0 && std::isfinite(*sigma))) {
        throw InvalidArgument("spatial negative: sigma must be finite and >= 0");
      }
      break;
    case Kind::shuffled:
      if (video.frame_count() < 2) {
        throw InvalidArgument("shuffled negative: a single-frame video has no non-identity permutation");
      }
      break;
    case Kind::tcd_framedrop: (void)tcd_kept_frames(video.frame_count(), rate); break;
    case Kind::average:
    case Kind::reverse: break;
  }
}

BuiltNegative build_negative(const VideoLanguageModel& model, const VideoInput& video,
                             const NegativeStrategy& strategy) {
  strategy.validate(model, video);
  SeededRng rng(strategy.seed);
  BuiltNegative out;
  using K = NegativeStrategy::Kind;
  switch (strategy.kind) {
    case K::temporal_homogenized:
      out.visual = temporal_homogenize(model, video, strategy.homogenization);
      break;
    case K::spatial_gaussian: {
      const double sigma = strategy.sigma ? *strategy.sigma : auto_noise_sigma(model, video, strategy.stage);
      out.sigma = sigma;
      out.visual = spatial_negative(model, video, sigma, rng, strategy.stage);
      break;
    }
    case K::average:
    case K::shuffled:
    case K::reverse: {
      const AblationKind kind = strategy.kind == K::average    ? AblationKind::average
                                : strategy.kind == K::shuffled ? AblationKind::shuffled
                                                               : AblationKind::reverse;
      auto result = ablation_negative(model, video, kind, rng);
      out.visual = std::move(result.visual);
      out.frame_order = std::move(result.frame_order);
      break;
    }
    case K::tcd_framedrop:
      out.visual = encode(model, tcd_framedrop(video, strategy.rate), VisualTag::ablation_variant);
      break;
  }
  return out;
}

}  // namespace sdcd
