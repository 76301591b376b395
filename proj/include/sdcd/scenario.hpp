// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sdcd/config_io.hpp"
#include "sdcd/decoder.hpp"
#include "sdcd/model.hpp"

namespace sdcd {

inline constexpr int kScenarioVersion = 1;

/// One event signature: `amplitude` on feature channel `channel` of every patch in
/// each listed frame. Distinct channels give orthogonal signatures.
struct EventPlacement {
  std::size_t channel = 0;
  std::vector<std::size_t> frames;
  double amplitude = 1.0;
  friend bool operator==(const EventPlacement&, const EventPlacement&) = default;
};

/// Seeded background noise N(0, background^2) with event signatures added on top.
struct SyntheticVideo {
  std::size_t frames = kDefaultFrameCount;
  std::uint64_t seed = 0;
  double background = 0.05;
  std::vector<EventPlacement> events;
  friend bool operator==(const SyntheticVideo&, const SyntheticVideo&) = default;
};

using ModelSpec = std::variant<ToyModelConfig, ProbeSpec>;
using VideoSpec = std::variant<FrameFeatures, SyntheticVideo>;

struct ExpectedAnswer {
  TokenId correct_token = 0;
  TokenId incorrect_prior_token = 0;
  friend bool operator==(const ExpectedAnswer&, const ExpectedAnswer&) = default;
};

struct Scenario {
  std::string name;
  ModelSpec model;
  VideoSpec video;
  std::vector<TokenId> query;
  std::optional<ExpectedAnswer> expected;
  std::vector<std::string> vocab_names;
  /// Scenario-level decode defaults (built-in defaults overlaid with the file's
  /// "decode" block).
  DecodeConfig decode;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

std::unique_ptr<VideoLanguageModel> build_model(const ModelSpec& spec);
std::size_t model_input_dim(const ModelSpec& spec);
std::size_t model_patches(const ModelSpec& spec);
std::size_t model_vocab(const ModelSpec& spec);

/// Materializes the video for a model with the given patch count and raw width.
VideoInput build_video(const VideoSpec& spec, std::size_t patches, std::size_t input_dim);
VideoInput build_video(const Scenario& scenario);

/// Parses and fully validates a scenario document. Errors carry the field path.
Scenario scenario_from_json(const json& j);
json scenario_to_json(const Scenario& scenario);

/// Reads, parses and validates a scenario file.
Scenario scenario_load(const std::filesystem::path& path);
void scenario_save(const Scenario& scenario, const std::filesystem::path& path);

/// Re-checks every scenario invariant (used after programmatic construction).
void validate_scenario(const Scenario& scenario);

/// Built-in order-probe scenarios with known ground truth: each pairs a visual event
/// order with a language prior favouring the wrong answer.
std::vector<Scenario> probe_suite();

/// Prior bias, contrast strength and homogenization degree at which the reference
/// two-event probe (event A at frame 0, event B at frame 5 of 8, prior toward B)
/// is answered wrongly by plain decoding and correctly by temporal-only and full
/// contrastive decoding. Found by grid search and frozen.
struct ProbeFixture {
  double prior_bias;
  double alpha;
  double beta;
};
inline constexpr ProbeFixture kProbeFixture{3.5, 1.0, 0.33};

/// The reference two-event probe scenario with the given prior bias toward event B.
Scenario reference_probe(double prior_bias);

}  // namespace sdcd
