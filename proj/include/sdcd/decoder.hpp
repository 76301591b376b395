// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sdcd/diagnosis.hpp"
#include "sdcd/model.hpp"
#include "sdcd/negatives.hpp"
#include "sdcd/numerics.hpp"

namespace sdcd {

enum class DecodeMode { baseline, temporal_only, spatial_only, season, tcd, ablation };

struct Selection {
  enum class Kind { greedy, sample };
  Kind kind = Kind::greedy;
  double temperature = 1.0;
  std::uint64_t seed = 0;

  friend bool operator==(const Selection&, const Selection&) = default;
};

struct DecodeConfig {
  /// Contrastive strength; 0 reduces every contrastive mode to plain decoding.
  double alpha = 1.0;
  HomogenizationConfig homogenization;
  /// Spatial noise level; nullopt means auto_noise_sigma.
  std::optional<double> sigma;
  NoiseStage spatial_stage = NoiseStage::pixel;
  /// Seeds the spatial noise and the shuffled-frame permutation.
  std::uint64_t noise_seed = 0;
  LayerSet layers;
  DecodeMode mode = DecodeMode::season;
  AblationKind ablation = AblationKind::average;
  std::size_t tcd_rate = 2;
  Selection selection;
  std::size_t max_tokens = 16;
  std::optional<double> plausibility_cutoff;
  /// Overrides the diagnosed (w_S, w_T) in season mode. Test hook for the
  /// spatial/temporal equivalence chain.
  std::optional<std::pair<double, double>> forced_weights;
  /// Record the three frame distributions in every trace record.
  bool verbose_trace = false;

  void validate(const VideoLanguageModel& model, const VideoInput& video) const;
  friend bool operator==(const DecodeConfig&, const DecodeConfig&) = default;
};

std::string_view to_string(DecodeMode mode);
std::string mode_name(DecodeMode mode, AblationKind ablation);
/// Parses "baseline", "temporal_only", "spatial_only", "season", "tcd" or
/// "ablation:<average|shuffled|reverse>".
std::optional<std::pair<DecodeMode, AblationKind>> parse_mode(std::string_view text);

/// Logits of one decode step under the original video and both negatives.
struct StepLogits {
  std::vector<double> original;
  std::vector<double> spatial;
  std::vector<double> temporal;

  void validate() const;
};

/// (1 + alpha) * l_O - alpha * l_neg.
std::vector<double> contrast_logits(std::span<const double> original, std::span<const double> negative,
                                    double alpha);

/// softmax[(1 + alpha) l_O - alpha l_T].
ProbVec contrast_temporal(std::span<const double> original, std::span<const double> temporal, double alpha);

/// (1 + alpha) l_O - alpha (w_S l_S + w_T l_T).
std::vector<double> season_logits(const StepLogits& step, const DiagnosticWeights& w, double alpha);

ProbVec contrast_season(const StepLogits& step, const DiagnosticWeights& w, double alpha);

/// Masks to -inf every position whose baseline probability falls below
/// cutoff * max(p_base).
std::vector<double> plausibility_filter(const ProbVec& p_base, std::span<const double> contrast,
                                        double cutoff);

struct TraceRecord {
  std::size_t step = 0;
  TokenId token = 0;
  std::string text;
  std::optional<double> w_spatial;
  std::optional<double> w_temporal;
  std::optional<double> d_spatial;
  std::optional<double> d_temporal;
  double top1_prob = 0.0;
  TokenId baseline_top1 = 0;
  std::optional<std::vector<double>> a_original;
  std::optional<std::vector<double>> a_spatial;
  std::optional<std::vector<double>> a_temporal;
  std::string mode;
  std::string config_digest;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct DecodeResult {
  std::vector<TokenId> tokens;
  std::vector<TraceRecord> trace;
  /// Spatial sigma actually used, when a spatial negative was built.
  std::optional<double> sigma_used;
  /// Frame order of a shuffled / reversed ablation negative.
  std::vector<std::size_t> frame_order;
};

/// Display text for a token: vocab_names[id] when available, otherwise "tok<id>".
std::string token_text(std::span<const std::string> vocab_names, TokenId id);

/// Autoregressive contrastive decoding. Negatives are built once up front; every
/// step evaluates the decoder under each required visual input on an identical
/// textual context, diagnoses weights from the last position's frame attention,
/// combines logits according to cfg.mode and selects the next token.
DecodeResult decode_loop(const VideoLanguageModel& model, const VideoInput& video,
                         std::span<const TokenId> query, const DecodeConfig& cfg,
                         std::span<const std::string> vocab_names = {});

}  // namespace sdcd
