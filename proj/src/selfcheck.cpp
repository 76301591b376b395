// SPDX-License-Identifier: Apache-2.0
#include "sdcd/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "sdcd/decoder.hpp"
#include "sdcd/diagnosis.hpp"
#include "sdcd/oracles.hpp"
#include "sdcd/report.hpp"
#include "sdcd/scenario.hpp"

namespace sdcd {

bool SelfCheckReport::all_passed() const { return failed_count() == 0; }

std::size_t SelfCheckReport::failed_count() const {
  return static_cast<std::size_t>(
      std::count_if(checks.begin(), checks.end(), [](const CheckResult& c) { return !c.passed; }));
}

const CheckResult* SelfCheckReport::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

json SelfCheckReport::to_json() const {
  json list = json::array();
  for (const auto& c : checks) {
    // Non-finite residuals are written as strings.
    json residual = std::isfinite(c.residual) ? json(c.residual) : json(std::to_string(c.residual));
    list.push_back(json{{"name", c.name},
                        {"passed", c.passed},
                        {"residual", residual},
                        {"tolerance", c.tolerance},
                        {"detail", c.detail}});
  }
  return json{{"checks", list},
              {"total", checks.size()},
              {"failed", failed_count()},
              {"passed", all_passed()}};
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Measure {
  double residual = 0.0;
  std::string detail;
};

struct Context {
  const SelfCheckOptions& options;
  std::uint64_t seed(std::uint64_t salt) const { return options.seed * 1000003ULL + salt; }
};

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return kInf;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    if (std::isnan(d)) return kInf;
    worst = std::max(worst, d);
  }
  return worst;
}

double max_abs_diff(const FrameFeatures& a, const FrameFeatures& b) {
  if (!a.same_shape(b)) return kInf;
  return max_abs_diff(a.data(), b.data());
}

std::vector<double> random_logits(SeededRng& rng, std::size_t n, double scale) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * (2.0 * rng.uniform() - 1.0);
  return v;
}

std::vector<double> random_distribution(SeededRng& rng, std::size_t n, bool allow_zeros) {
  std::vector<double> v(n);
  double sum = 0.0;
  for (auto& x : v) {
    x = -std::log(1.0 - rng.uniform());
    if (allow_zeros && rng.uniform() < 0.2) x = 0.0;
    sum += x;
  }
  if (sum == 0.0) {
    v[0] = 1.0;
    sum = 1.0;
  }
  for (auto& x : v) x /= sum;
  return v;
}

VideoInput random_video(SeededRng& rng, std::size_t frames, std::size_t patches, std::size_t dim) {
  FrameFeatures f(frames, patches, dim);
  for (double& x : f.data()) x = rng.normal();
  return VideoInput::from_frames(std::move(f));
}

std::vector<std::size_t> random_permutation(SeededRng& rng, std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.uniform_index(i)]);
  return p;
}

ToyModelConfig check_toy() { return ToyModelConfig{}; }

ToyModelConfig small_toy(std::size_t layers, std::uint64_t seed) {
  ToyModelConfig c;
  c.encoder_layers = layers;
  c.patches = 2;
  c.dim = 8;
  c.seed = seed;
  return c;
}

std::vector<TokenId> random_tokens(SeededRng& rng, std::size_t n, std::size_t vocab) {
  std::vector<TokenId> t(n);
  for (auto& x : t) x = static_cast<TokenId>(1 + rng.uniform_index(vocab - 1));
  return t;
}

// ---------------------------------------------------------------------------
// numerics

Measure softmax_oracle(const Context& ctx) {
  SeededRng rng(ctx.seed(1));
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto x = random_logits(rng, 2 + rng.uniform_index(15), 30.0);
    const auto p = softmax(x);
    const auto ref = oracle::softmax_extended(x);
    for (std::size_t j = 0; j < x.size(); ++j) {
      worst = std::max(worst, static_cast<double>(std::abs(static_cast<long double>(p[j]) - ref[j])));
    }
  }
  const auto p = softmax(std::vector<double>{1.0, 2.0, 3.0});
  const auto ref = oracle::softmax_extended({1.0, 2.0, 3.0});
  for (std::size_t j = 0; j < 3; ++j) {
    worst = std::max(worst, static_cast<double>(std::abs(static_cast<long double>(p[j]) - ref[j])));
  }
  return {worst, "200 random vectors and [1,2,3] against long double softmax"};
}

Measure softmax_shift(const Context& ctx) {
  SeededRng rng(ctx.seed(2));
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const auto x = random_logits(rng, 2 + rng.uniform_index(31), 10.0);
    const double c = 200.0 * rng.uniform() - 100.0;
    std::vector<double> y = x;
    for (auto& v : y) v += c;
    const auto px = softmax(x);
    const auto py = softmax(y);
    if (argmax_stable(px.values()) != argmax_stable(py.values())) return {kInf, "argmax changed under shift"};
    worst = std::max(worst, max_abs_diff(px.values(), py.values()));
  }
  return {worst, "500 vectors, |c| <= 100"};
}

struct JsdSample {
  std::vector<double> p;
  std::vector<double> q;
};

std::vector<JsdSample> jsd_samples(const Context& ctx) {
  SeededRng rng(ctx.seed(3));
  std::vector<JsdSample> out;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 2 + rng.uniform_index(15);
    out.push_back({random_distribution(rng, n, i % 3 == 0), random_distribution(rng, n, i % 5 == 0)});
  }
  return out;
}

Measure jsd_oracle(const Context& ctx) {
  double worst = 0.0;
  for (const auto& s : jsd_samples(ctx)) {
    worst = std::max(worst, std::abs(jsd(ProbVec(s.p), ProbVec(s.q)) - oracle::jsd_naive(s.p, s.q)));
  }
  return {worst, "1000 pairs, T in [2, 16]"};
}

Measure jsd_symmetry(const Context& ctx) {
  double worst = 0.0;
  for (const auto& s : jsd_samples(ctx)) {
    const ProbVec p(s.p);
    const ProbVec q(s.q);
    worst = std::max(worst, std::abs(jsd(p, q) - jsd(q, p)));
  }
  return {worst, "1000 pairs"};
}

Measure jsd_bounds(const Context& ctx) {
  double worst = 0.0;
  for (const auto& s : jsd_samples(ctx)) {
    const double j = jsd(ProbVec(s.p), ProbVec(s.q));
    worst = std::max({worst, -j, j - kLn2});
  }
  const double self = jsd(ProbVec({0.3, 0.7}), ProbVec({0.3, 0.7}));
  const double disjoint = jsd(ProbVec({1.0, 0.0}), ProbVec({0.0, 1.0}));
  worst = std::max({worst, std::abs(self), std::abs(disjoint - kLn2)});
  return {worst, "violation of [0, ln 2] over 1000 pairs plus equal and disjoint pairs"};
}

Measure argmax_softmax(const Context& ctx) {
  SeededRng rng(ctx.seed(4));
  double mismatches = 0.0;
  for (int i = 0; i < 1000; ++i) {
    auto x = random_logits(rng, 1 + rng.uniform_index(32), 20.0);
    if (i % 10 == 0 && x.size() > 2) x[1] = x[2];
    if (argmax_stable(softmax(x).values()) != argmax_stable(x)) mismatches += 1.0;
  }
  return {mismatches, "1000 vectors"};
}

Measure gaussian_moments(const Context&) {
  SeededRng rng(42);
  const auto x = gaussian_noise(rng, 100000, 1.0);
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(x.size()));
  std::ostringstream os;
  os << "mean " << mean << ", std " << sd;
  return {std::max(std::abs(mean), std::abs(sd - 1.0)), os.str()};
}

Measure rng_determinism(const Context&) {
  SeededRng a(42);
  SeededRng b(42);
  const auto x = gaussian_noise(a, 4096, 0.7);
  const auto y = gaussian_noise(b, 4096, 0.7);
  SeededRng z(0);
  const auto zeros = gaussian_noise(z, 16, 0.0);
  double bad = x == y ? 0.0 : 1.0;
  for (double v : zeros) bad += v == 0.0 ? 0.0 : 1.0;
  return {bad, "seed 42 twice; sigma 0 gives zeros"};
}

// ---------------------------------------------------------------------------
// model

Measure model_determinism(const Context& ctx) {
  SeededRng rng(ctx.seed(5));
  const auto toy = toy_model_build(check_toy());
  const auto video = random_video(rng, 4, 4, 16);
  const auto query = random_tokens(rng, 3, 64);
  const auto v1 = encode(*toy, video);
  const auto v2 = encode(*toy, video);
  const auto o1 = toy->decode_step(v1, query, {});
  const auto o2 = toy->decode_step(v2, query, {});
  double bad = v1.features == v2.features ? 0.0 : 1.0;
  bad += o1.logits == o2.logits && o1.attentions == o2.attentions ? 0.0 : 1.0;

  const Scenario probe = reference_probe(1.0);
  const auto pm = build_model(probe.model);
  const auto pv = build_video(probe);
  const auto p1 = pm->decode_step(encode(*pm, pv), probe.query, {});
  const auto p2 = pm->decode_step(encode(*pm, pv), probe.query, {});
  bad += p1.logits == p2.logits && p1.attentions == p2.attentions ? 0.0 : 1.0;
  return {bad, "toy encode/decode and probe decode repeated"};
}

Measure causal_mask(const Context& ctx) {
  SeededRng rng(ctx.seed(6));
  const auto toy = toy_model_build(check_toy());
  double worst = 0.0;
  for (int s = 0; s < 5; ++s) {
    const auto video = random_video(rng, 1 + rng.uniform_index(4), 4, 16);
    const auto visual = encode(*toy, video);
    const auto query = random_tokens(rng, 1 + rng.uniform_index(3), 64);
    const auto gen = random_tokens(rng, rng.uniform_index(3), 64);
    const auto heads = toy->decode_step_per_head(visual, query, gen);
    const auto out = toy->decode_step(visual, query, gen);
    for (const auto& layer : heads) {
      for (const auto& m : layer) {
        for (std::size_t r = 0; r < m.rows(); ++r) {
          for (std::size_t c = r + 1; c < m.cols(); ++c) worst = std::max(worst, std::abs(m.at(r, c)));
        }
      }
    }
    for (const auto& m : out.attentions) {
      for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = r + 1; c < m.cols(); ++c) worst = std::max(worst, std::abs(m.at(r, c)));
      }
    }
  }
  return {worst, "largest attention weight on a future position"};
}

Measure attention_row_sums(const Context& ctx) {
  SeededRng rng(ctx.seed(7));
  const auto toy = toy_model_build(check_toy());
  const auto visual = encode(*toy, random_video(rng, 3, 4, 16));
  const auto out = toy->decode_step(visual, random_tokens(rng, 3, 64), random_tokens(rng, 2, 64));
  const double heads = static_cast<double>(toy->attention_heads());
  double worst = 0.0;
  for (const auto& m : out.attentions) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const auto row = m.row(r);
      worst = std::max(worst, std::abs(std::accumulate(row.begin(), row.end(), 0.0) - heads));
    }
  }
  return {worst, "head-summed rows sum to the head count"};
}

Measure encoder_equivariance(const Context& ctx) {
  SeededRng rng(ctx.seed(8));
  const auto toy = toy_model_build(check_toy());
  const auto video = random_video(rng, 6, 4, 16);
  const auto base = encode_layerwise(*toy, video);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto perm = random_permutation(rng, video.frame_count());
    const auto moved = encode_layerwise(*toy, VideoInput{video.frames.select_frames(perm)});
    for (std::size_t l = 0; l < base.layers.size(); ++l) {
      worst = std::max(worst, max_abs_diff(moved.layers[l], base.layers[l].select_frames(perm)));
    }
    worst = std::max(worst, max_abs_diff(moved.visual.features, base.visual.features.select_frames(perm)));
  }
  return {worst, "50 permutations, every layer and the projection"};
}

Measure frame_mean_invariance(const Context& ctx) {
  SeededRng rng(ctx.seed(9));
  const auto toy = toy_model_build(check_toy());
  const auto video = random_video(rng, 7, 4, 16);
  const auto base = encode_layerwise(*toy, video);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto perm = random_permutation(rng, video.frame_count());
    const auto moved = encode_layerwise(*toy, VideoInput{video.frames.select_frames(perm)});
    for (std::size_t l = 0; l < base.frame_means.size(); ++l) {
      worst = std::max(worst, max_abs_diff(moved.frame_means[l], base.frame_means[l]));
    }
  }
  return {worst, "d_l under 50 permutations"};
}

Measure frame_mean_oracle(const Context& ctx) {
  SeededRng rng(ctx.seed(10));
  const auto toy = toy_model_build(check_toy());
  const auto cache = encode_layerwise(*toy, random_video(rng, 8, 4, 16));
  double worst = 0.0;
  for (std::size_t l = 0; l < cache.layers.size(); ++l) {
    worst = std::max(worst, max_abs_diff(cache.frame_means[l].data(), oracle::frame_mean_resummed(cache.layers[l])));
  }
  return {worst, "d_l against a compensated re-summation"};
}

Measure layout_bijection(const Context&) {
  double bad = 0.0;
  const auto toy = toy_model_build(check_toy());
  const Scenario probe = reference_probe(0.0);
  const auto pm = build_model(probe.model);
  for (const VideoLanguageModel* m : std::vector<const VideoLanguageModel*>{toy.get(), pm.get()}) {
    for (std::size_t frames : {1u, 3u, 8u}) {
      const TokenLayout layout = m->token_layout(frames);
      std::vector<int> hits(layout.visual_offset() + layout.visual_count() + 4, 0);
      for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t k = 0; k < layout.patches(); ++k) {
          const std::size_t pos = layout.position(t, k);
          if (pos >= hits.size()) {
            bad += 1.0;
            continue;
          }
          ++hits[pos];
          const auto back = layout.locate(pos);
          if (!back || back->frame != t || back->patch != k) bad += 1.0;
        }
      }
      for (std::size_t pos = 0; pos < hits.size(); ++pos) {
        const bool visual = pos >= layout.visual_offset() && pos < layout.visual_offset() + layout.visual_count();
        if (visual && hits[pos] != 1) bad += 1.0;
        if (!visual && (hits[pos] != 0 || layout.locate(pos))) bad += 1.0;
      }
    }
  }
  return {bad, "toy and probe layouts for T in {1, 3, 8}"};
}

Measure single_frame_video(const Context& ctx) {
  SeededRng rng(ctx.seed(11));
  const auto toy = toy_model_build(check_toy());
  const auto video = random_video(rng, 1, 4, 16);
  DecodeConfig cfg;
  cfg.max_tokens = 3;
  const auto r = decode_loop(*toy, video, random_tokens(rng, 2, 64), cfg);
  return {r.tokens.empty() ? 1.0 : 0.0, "T = 1 season decode"};
}

// ---------------------------------------------------------------------------
// negatives

HomogenizationConfig homog(double beta, LayerRange range = LayerRange::all(), MeanSource src = MeanSource::clean) {
  HomogenizationConfig c;
  c.beta = beta;
  c.layer_range = std::move(range);
  c.d_source = src;
  return c;
}

Measure beta0_identity(const Context& ctx) {
  SeededRng rng(ctx.seed(12));
  const auto toy = toy_model_build(check_toy());
  const auto video = random_video(rng, 5, 4, 16);
  const auto clean = encode(*toy, video);
  double bad = 0.0;
  for (MeanSource src : {MeanSource::clean, MeanSource::progressive}) {
    const auto neg = ctx.options.homogenizer(*toy, video, homog(0.0, LayerRange::all(), src));
    if (!(neg.features == clean.features)) bad += 1.0;
  }
  return {bad, "beta = 0 in both mean-source modes, bit-exact"};
}

Measure beta1_uniformity(const Context& ctx) {
  SeededRng rng(ctx.seed(13));
  const auto toy = toy_model_build(check_toy());
  const auto video = random_video(rng, 5, 4, 16);
  double worst = 0.0;
  for (MeanSource src : {MeanSource::clean, MeanSource::progressive}) {
    const auto neg = ctx.options.homogenizer(*toy, video, homog(1.0, LayerRange::all(), src));
    worst = std::max(worst, neg.features.max_pairwise_frame_distance());
  }
  return {worst, "max pairwise frame distance at beta = 1"};
}

Measure homogenization_oracle(const Context& ctx) {
  SeededRng rng(ctx.seed(14));
  double worst = 0.0;
  std::size_t cases = 0;
  for (std::size_t layers : {2u, 3u}) {
    const auto toy = toy_model_build(small_toy(layers, 100 + layers));
    const std::vector<LayerRange> ranges = {LayerRange::all(), LayerRange::explicit_layers({2}),
                                            LayerRange::of(LayerBand::early)};
    for (std::size_t frames = 1; frames <= 4; ++frames) {
      const auto video = random_video(rng, frames, 2, 8);
      for (double beta : {0.25, 0.33, 0.5}) {
        for (MeanSource src : {MeanSource::clean, MeanSource::progressive}) {
          for (const auto& range : ranges) {
            std::vector<bool> selected(layers + 1, false);
            for (std::size_t l : range.resolve(layers)) selected[l] = true;
            const auto got = ctx.options.homogenizer(*toy, video, homog(beta, range, src));
            const auto want = oracle::homogenize_unrolled(*toy, video, beta, src, selected);
            worst = std::max(worst, max_abs_diff(got.features, want));
            ++cases;
          }
        }
      }
    }
  }
  return {worst, std::to_string(cases) + " cases: T <= 4, L in {2, 3}, both mean sources"};
}

Measure monotone_homogenization(const Context& ctx) {
  SeededRng rng(ctx.seed(15));
  ToyModelConfig cfg = check_toy();
  cfg.encoder_kind = EncoderKind::linear;
  const auto toy = toy_model_build(cfg);
  const auto video = random_video(rng, 6, 4, 16);
  double prev = kInf;
  double worst = 0.0;
  std::ostringstream os;
  for (double beta : {0.0, 0.25, 0.33, 0.5, 1.0}) {
    const double d = ctx.options.homogenizer(*toy, video, homog(beta)).features.max_pairwise_frame_distance();
    os << beta << ":" << d << " ";
    if (std::isfinite(prev)) worst = std::max(worst, d - prev);
    prev = d;
  }
  worst = std::max(worst, prev);
  return {worst, "linear encoder distances " + os.str()};
}

Measure tag_independence(const Context& ctx) {
  SeededRng rng(ctx.seed(16));
  const auto toy = toy_model_build(check_toy());
  const auto video = random_video(rng, 3, 4, 16);
  const auto query = random_tokens(rng, 2, 64);
  const auto base = encode(*toy, video);
  const auto ref = toy->decode_step(base, query, {});
  double bad = 0.0;
  for (VisualTag tag : {VisualTag::spatial_negative, VisualTag::temporal_negative, VisualTag::ablation_variant}) {
    const auto tagged = encode(*toy, video, tag);
    if (tagged.tag != tag || !(tagged.features == base.features)) bad += 1.0;
    const auto out = toy->decode_step(tagged, query, {});
    if (out.logits != ref.logits || !(out.attentions == ref.attentions)) bad += 1.0;
    const TokenLayout layout = toy->token_layout(3);
    if (frame_attention(out, layout, {}, out.sequence_length() - 1, tag).dist !=
        frame_attention(ref, layout, {}, ref.sequence_length() - 1).dist) {
      bad += 1.0;
    }
  }
  SeededRng a(3);
  SeededRng b(3);
  if (spatial_negative(*toy, video, 0.5, a).tag != VisualTag::spatial_negative) bad += 1.0;
  if (ctx.options.homogenizer(*toy, video, homog(0.5)).tag != VisualTag::temporal_negative) bad += 1.0;
  if (ablation_negative(*toy, video, AblationKind::reverse, b).visual.tag != VisualTag::ablation_variant) bad += 1.0;
  return {bad, "tags set correctly and never change numbers"};
}

Measure shuffled_matches_permuted(const Context& ctx) {
  SeededRng rng(ctx.seed(17));
  const auto toy = toy_model_build(check_toy());
  const auto video = random_video(rng, 6, 4, 16);
  double bad = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SeededRng r(seed);
    const auto res = ablation_negative(*toy, video, AblationKind::shuffled, r);
    std::vector<std::size_t> identity(video.frame_count());
    std::iota(identity.begin(), identity.end(), std::size_t{0});
    if (res.frame_order == identity) bad += 1.0;
    const auto direct = encode(*toy, VideoInput{video.frames.select_frames(res.frame_order)});
    if (!(res.visual.features == direct.features)) bad += 1.0;
  }
  return {bad, "10 seeded shuffles against encoding the permuted video"};
}

Measure average_parity(const Context& ctx) {
  SeededRng rng(ctx.seed(18));
  const auto toy = toy_model_build(check_toy());
  const auto video = random_video(rng, 5, 4, 16);
  SeededRng unused(0);
  const auto avg = ablation_negative(*toy, video, AblationKind::average, unused);
  const std::size_t last = toy->encoder_layer_count();
  const auto h = ctx.options.homogenizer(*toy, video, homog(1.0, LayerRange::explicit_layers({last})));
  return {max_abs_diff(avg.visual.features, h.features), "average vs final-layer-only beta = 1"};
}

Measure reverse_single_frame(const Context& ctx) {
  SeededRng rng(ctx.seed(19));
  const auto toy = toy_model_build(check_toy());
  const auto video = random_video(rng, 1, 4, 16);
  SeededRng unused(0);
  const auto rev = ablation_negative(*toy, video, AblationKind::reverse, unused);
  return {rev.visual.features == encode(*toy, video).features ? 0.0 : 1.0, "reverse on T = 1"};
}

Measure tcd_frames(const Context& ctx) {
  SeededRng rng(ctx.seed(20));
  const auto video = random_video(rng, 8, 2, 3);
  double bad = 0.0;
  if (!(tcd_framedrop(video, 1) == video)) bad += 1.0;
  if (tcd_kept_frames(8, 2) != std::vector<std::size_t>{0, 2, 4, 6}) bad += 1.0;
  if (tcd_kept_frames(8, 4) != std::vector<std::size_t>{0, 4}) bad += 1.0;
  if (tcd_kept_frames(7, 3) != std::vector<std::size_t>{0, 3, 6}) bad += 1.0;
  return {bad, "r = 1 identity; kept frame sets for r = 2, 4, 3"};
}

Measure noise_streams(const Context& ctx) {
  SeededRng rng(ctx.seed(21));
  const auto toy = toy_model_build(check_toy());
  const auto video = random_video(rng, 3, 4, 16);
  const auto clean = encode(*toy, video);
  double bad = 0.0;
  SeededRng a(9);
  if (!(spatial_negative(*toy, video, 0.0, a, NoiseStage::feature).features == clean.features)) bad += 1.0;
  SeededRng b(9);
  if (!(spatial_negative(*toy, video, 0.0, b, NoiseStage::pixel).features == clean.features)) bad += 1.0;
  SeededRng c(77);
  const auto noisy = spatial_negative(*toy, video, 0.3, c, NoiseStage::feature);
  SeededRng d(77);
  const auto noise = gaussian_noise(d, clean.features.size(), 0.3);
  FrameFeatures expect = clean.features;
  for (std::size_t i = 0; i < noise.size(); ++i) expect.data()[i] += noise[i];
  if (!(noisy.features == expect)) bad += 1.0;
  return {bad, "sigma 0 is exact; feature noise equals a regenerated stream"};
}

// ---------------------------------------------------------------------------
// diagnosis

Measure frame_attention_oracle(const Context& ctx) {
  SeededRng rng(ctx.seed(22));
  ToyModelConfig cfg = check_toy();
  cfg.decoder_layers = 5;
  const auto toy = toy_model_build(cfg);
  double worst = 0.0;
  for (int s = 0; s < 100; ++s) {
    const std::size_t frames = 1 + rng.uniform_index(6);
    const auto visual = encode(*toy, random_video(rng, frames, 4, 16));
    const auto query = random_tokens(rng, 1 + rng.uniform_index(4), 64);
    const auto gen = random_tokens(rng, rng.uniform_index(4), 64);
    const auto out = toy->decode_step(visual, query, gen);
    const auto heads = toy->decode_step_per_head(visual, query, gen);
    const TokenLayout layout = toy->token_layout(frames);
    const LayerSet layers = s % 2 == 0 ? LayerSet::late4() : LayerSet::of({1, 3, 5});
    const std::size_t row = out.sequence_length() - 1;
    const auto got = frame_attention(out, layout, layers, row);
    const auto want = oracle::frame_attention_from_heads(heads, layout, layers.resolve(5), row);
    worst = std::max(worst, max_abs_diff(got.dist.values(), want));
  }
  return {worst, "100 random decoder states, late4 and {1,3,5}"};
}

Measure weight_fuzz(const Context& ctx) {
  SeededRng rng(ctx.seed(23));
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    double ds = rng.uniform() * kLn2;
    double dt = rng.uniform() * kLn2;
    if (i % 7 == 0) ds = 0.0;
    if (i % 11 == 0) dt = 0.0;
    if (i % 13 == 0) ds *= 1e-15;
    const auto w = weights_from_divergences(ds, dt);
    worst = std::max(worst, std::abs(w.w_spatial + w.w_temporal - 1.0));
    if (w.w_spatial < 0.0 || w.w_temporal < 0.0 || w.w_spatial > 1.0 || w.w_temporal > 1.0) worst = kInf;
  }
  return {worst, "10^4 fuzzed divergence pairs"};
}

Measure scale_free(const Context& ctx) {
  SeededRng rng(ctx.seed(24));
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double ds = 1e-6 + rng.uniform();
    const double dt = 1e-6 + rng.uniform();
    const double c = std::exp(12.0 * rng.uniform() - 6.0);
    const auto a = weights_from_divergences(ds, dt);
    const auto b = weights_from_divergences(c * ds, c * dt);
    worst = std::max({worst, std::abs(a.w_spatial - b.w_spatial), std::abs(a.w_temporal - b.w_temporal)});
  }
  return {worst, "1000 pairs, c in [e^-6, e^6]"};
}

FrameAttentionDist dist_of(std::vector<double> v) { return {ProbVec(std::move(v)), VisualTag::original}; }

Measure degenerate_weights(const Context&) {
  double worst = 0.0;
  const auto a = dist_of({0.2, 0.5, 0.3});
  const auto b = dist_of({0.6, 0.1, 0.3});
  const auto all_equal = diagnose(a, a, a);
  worst = std::max({worst, std::abs(all_equal.w_spatial - 0.5), std::abs(all_equal.w_temporal - 0.5)});
  const auto s_equal = diagnose(a, a, b);
  worst = std::max({worst, std::abs(s_equal.w_spatial), std::abs(s_equal.w_temporal - 1.0)});
  const auto t_equal = diagnose(a, b, a);
  worst = std::max({worst, std::abs(t_equal.w_spatial - 1.0), std::abs(t_equal.w_temporal)});
  return {worst, "all equal, a_S == a_O, a_T == a_O"};
}

Measure reference_weights(const Context&) {
  const std::vector<double> o{0.5, 0.5};
  const std::vector<double> s{0.25, 0.75};
  const std::vector<double> t{0.9, 0.1};
  const double ds = oracle::jsd_naive(o, s);
  const double dt = oracle::jsd_naive(o, t);
  const auto w = diagnose(dist_of(o), dist_of(s), dist_of(t));
  std::ostringstream os;
  os << "w_S " << w.w_spatial << " vs " << ds / (ds + dt);
  return {std::max(std::abs(w.w_spatial - ds / (ds + dt)), std::abs(w.w_temporal - dt / (ds + dt))), os.str()};
}

Measure permutation_covariance(const Context& ctx) {
  SeededRng rng(ctx.seed(25));
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t n = 2 + rng.uniform_index(10);
    const auto o = random_distribution(rng, n, false);
    const auto s = random_distribution(rng, n, false);
    const auto t = random_distribution(rng, n, false);
    const auto perm = random_permutation(rng, n);
    auto apply = [&](const std::vector<double>& v) {
      std::vector<double> out(n);
      for (std::size_t j = 0; j < n; ++j) out[j] = v[perm[j]];
      return out;
    };
    const auto w1 = diagnose(dist_of(o), dist_of(s), dist_of(t));
    const auto w2 = diagnose(dist_of(apply(o)), dist_of(apply(s)), dist_of(apply(t)));
    worst = std::max({worst, std::abs(w1.w_spatial - w2.w_spatial), std::abs(w1.w_temporal - w2.w_temporal)});
  }
  return {worst, "50 common permutations"};
}

// Runs a short season decode on the toy model and returns the trace.
std::vector<TraceRecord> toy_season_trace(const Context& ctx, std::uint64_t salt, const DecodeConfig& cfg) {
  SeededRng rng(ctx.seed(salt));
  const auto toy = toy_model_build(check_toy());
  const auto video = random_video(rng, 4, 4, 16);
  return decode_loop(*toy, video, random_tokens(rng, 3, 64), cfg).trace;
}

Measure beta0_temporal_weight(const Context& ctx) {
  DecodeConfig cfg;
  cfg.homogenization.beta = 0.0;
  cfg.max_tokens = 4;
  cfg.sigma = 1.0;
  const auto trace = toy_season_trace(ctx, 26, cfg);
  double worst = 0.0;
  std::size_t informative = 0;
  for (const auto& r : trace) {
    worst = std::max(worst, std::abs(*r.d_temporal));
    if (*r.d_spatial > 0.0) {
      ++informative;
      worst = std::max(worst, std::abs(*r.w_temporal));
    }
  }
  if (informative == 0) return {kInf, "no step had D_S > 0"};
  return {worst, std::to_string(informative) + " steps with D_S > 0"};
}

Measure sigma0_spatial_weight(const Context& ctx) {
  DecodeConfig cfg;
  cfg.sigma = 0.0;
  cfg.spatial_stage = NoiseStage::feature;
  cfg.homogenization.beta = 0.5;
  cfg.max_tokens = 4;
  const auto trace = toy_season_trace(ctx, 27, cfg);
  double worst = 0.0;
  std::size_t informative = 0;
  for (const auto& r : trace) {
    worst = std::max(worst, std::abs(*r.d_spatial));
    if (*r.d_temporal > 0.0) {
      ++informative;
      worst = std::max(worst, std::abs(*r.w_spatial));
    }
  }
  if (informative == 0) return {kInf, "no step had D_T > 0"};
  return {worst, std::to_string(informative) + " steps with D_T > 0"};
}

// ---------------------------------------------------------------------------
// decoder

StepLogits random_step(SeededRng& rng, std::size_t n) {
  return {random_logits(rng, n, 8.0), random_logits(rng, n, 8.0), random_logits(rng, n, 8.0)};
}

Measure alpha_zero(const Context& ctx) {
  SeededRng rng(ctx.seed(28));
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto step = random_step(rng, 2 + rng.uniform_index(30));
    const double ws = rng.uniform();
    const auto p = contrast_season(step, {ws, 1.0 - ws}, 0.0);
    const auto base = softmax(step.original);
    worst = std::max(worst, max_abs_diff(p.values(), base.values()));
    worst = std::max(worst, max_abs_diff(contrast_temporal(step.original, step.temporal, 0.0).values(), base.values()));
  }
  return {worst, "200 random steps"};
}

Measure equivalence_chain(const Context& ctx) {
  SeededRng rng(ctx.seed(29));
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto step = random_step(rng, 2 + rng.uniform_index(30));
    const double alpha = 2.0 * rng.uniform();
    const auto temporal = contrast_season(step, {0.0, 1.0}, alpha);
    const auto spatial = contrast_season(step, {1.0, 0.0}, alpha);
    worst = std::max(worst, max_abs_diff(temporal.values(), contrast_temporal(step.original, step.temporal, alpha).values()));
    worst = std::max(worst, max_abs_diff(spatial.values(), softmax(contrast_logits(step.original, step.spatial, alpha)).values()));
  }
  return {worst, "forced (0,1) and (1,0) against single-negative contrast"};
}

Measure equal_negatives(const Context& ctx) {
  SeededRng rng(ctx.seed(30));
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    auto step = random_step(rng, 2 + rng.uniform_index(30));
    step.spatial = step.temporal;
    const double alpha = 2.0 * rng.uniform();
    const double ws = rng.uniform();
    const auto a = contrast_season(step, {ws, 1.0 - ws}, alpha);
    const auto b = contrast_season(step, {0.5, 0.5}, alpha);
    worst = std::max(worst, max_abs_diff(a.values(), b.values()));
  }
  return {worst, "l_S = l_T, random weights"};
}

Measure season_oracle(const Context& ctx) {
  SeededRng rng(ctx.seed(31));
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto step = random_step(rng, 2 + rng.uniform_index(30));
    const double alpha = 2.0 * rng.uniform();
    const double ws = rng.uniform();
    const auto p = contrast_season(step, {ws, 1.0 - ws}, alpha);
    const auto ref = oracle::season_scalar(step.original, step.spatial, step.temporal, ws, 1.0 - ws, alpha);
    worst = std::max(worst, max_abs_diff(p.values(), ref));
  }
  return {worst, "200 random steps against the scalar long double form"};
}

Measure valid_probabilities(const Context& ctx) {
  SeededRng rng(ctx.seed(32));
  double bad = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto step = random_step(rng, 2 + rng.uniform_index(30));
    const double alpha = 5.0 * rng.uniform();
    const double ws = rng.uniform();
    for (const ProbVec& p : {contrast_season(step, {ws, 1.0 - ws}, alpha),
                             contrast_temporal(step.original, step.temporal, alpha),
                             masked_softmax(plausibility_filter(softmax(step.original),
                                                                season_logits(step, {ws, 1.0 - ws}, alpha), 0.1))}) {
      double sum = 0.0;
      for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v)) bad += 1.0;
        sum += v;
      }
      if (std::abs(sum - 1.0) > kProbSumTolerance) bad += 1.0;
    }
  }
  return {bad, "season, temporal and filtered outputs"};
}

Measure shift_invariance(const Context& ctx) {
  SeededRng rng(ctx.seed(33));
  double bad = 0.0;
  for (int i = 0; i < 500; ++i) {
    auto step = random_step(rng, 2 + rng.uniform_index(30));
    const double alpha = 2.0 * rng.uniform();
    const double ws = rng.uniform();
    const DiagnosticWeights w{ws, 1.0 - ws};
    const auto before = argmax_stable(contrast_season(step, w, alpha).values());
    const double c = 100.0 * rng.uniform() - 50.0;
    for (auto* v : {&step.original, &step.spatial, &step.temporal}) {
      for (auto& x : *v) x += c;
    }
    if (argmax_stable(contrast_season(step, w, alpha).values()) != before) bad += 1.0;
  }
  return {bad, "500 shifted triples"};
}

Measure plausibility_example(const Context&) {
  const ProbVec p({0.6, 0.3, 0.1});
  const auto out = plausibility_filter(p, std::vector<double>{1.0, 2.0, 3.0}, 0.4);
  double bad = 0.0;
  if (out[0] != 1.0 || out[1] != 2.0 || !std::isinf(out[2])) bad += 1.0;
  const auto one = masked_softmax(plausibility_filter(p, std::vector<double>{1.0, 2.0, 3.0}, 1.0));
  if (one[0] != 1.0 || one[1] != 0.0 || one[2] != 0.0) bad += 1.0;
  return {bad, "cutoff 0.4 masks index 2; cutoff 1 keeps the baseline argmax"};
}

Measure decode_determinism(const Context& ctx) {
  DecodeConfig cfg;
  cfg.max_tokens = 5;
  cfg.verbose_trace = true;
  const auto a = toy_season_trace(ctx, 34, cfg);
  const auto b = toy_season_trace(ctx, 34, cfg);
  cfg.selection.kind = Selection::Kind::sample;
  cfg.selection.seed = 5;
  const auto c = toy_season_trace(ctx, 34, cfg);
  const auto d = toy_season_trace(ctx, 34, cfg);
  return {(a == b ? 0.0 : 1.0) + (c == d ? 0.0 : 1.0), "greedy and sampled decode repeated"};
}

Measure context_synchronization(const Context& ctx) {
  SeededRng rng(ctx.seed(35));
  const auto toy = toy_model_build(check_toy());
  const auto video = random_video(rng, 4, 4, 16);
  const auto query = random_tokens(rng, 2, 64);
  std::size_t steps = 0;
  for (const auto& m : all_modes()) {
    DecodeConfig cfg;
    cfg.mode = m.mode;
    cfg.ablation = m.ablation;
    cfg.max_tokens = 6;
    steps += decode_loop(*toy, video, query, cfg).tokens.size();
  }
  return {0.0, std::to_string(steps) + " steps across all modes without a context mismatch"};
}

Measure probe_fixture(const Context&) {
  const Scenario s = reference_probe(kProbeFixture.prior_bias);
  DecodeConfig cfg = s.decode;
  cfg.alpha = kProbeFixture.alpha;
  cfg.homogenization.beta = kProbeFixture.beta;
  const auto report = run_comparison(s, cfg, {{DecodeMode::baseline}, {DecodeMode::temporal_only}, {DecodeMode::season}});
  const TokenId a = s.expected->correct_token;
  const TokenId b = s.expected->incorrect_prior_token;
  double bad = 0.0;
  if (report.runs[0].result.tokens.front() != b) bad += 1.0;
  if (report.runs[1].result.tokens.front() != a) bad += 1.0;
  if (report.runs[2].result.tokens.front() != a) bad += 1.0;
  return {bad, "baseline follows the prior, temporal_only and season follow the video"};
}

Measure alpha_zero_decode(const Context& ctx) {
  SeededRng rng(ctx.seed(36));
  const auto toy = toy_model_build(check_toy());
  const auto video = random_video(rng, 4, 4, 16);
  const auto query = random_tokens(rng, 3, 64);
  DecodeConfig cfg;
  cfg.alpha = 0.0;
  cfg.max_tokens = 6;
  const auto season = decode_loop(*toy, video, query, cfg);
  cfg.mode = DecodeMode::baseline;
  const auto base = decode_loop(*toy, video, query, cfg);
  return {season.tokens == base.tokens ? 0.0 : 1.0, "season at alpha = 0 against baseline"};
}

// ---------------------------------------------------------------------------
// harness

Measure scenario_roundtrip(const Context& ctx) {
  double bad = 0.0;
  auto scenarios = probe_suite();
  SeededRng rng(ctx.seed(37));
  Scenario toy;
  toy.name = "toy_explicit";
  toy.model = check_toy();
  toy.video = random_video(rng, 2, 4, 16).frames;
  toy.query = {3, 4};
  toy.decode.sigma = 0.25;
  toy.decode.layers = LayerSet::of({2, 4});
  toy.decode.homogenization.layer_range = LayerRange::explicit_layers({1, 3});
  scenarios.push_back(toy);
  for (const auto& s : scenarios) {
    const auto j = scenario_to_json(s);
    const Scenario back = scenario_from_json(json::parse(j.dump()));
    if (!(back == s) || scenario_to_json(back) != j) bad += 1.0;
  }
  return {bad, std::to_string(scenarios.size()) + " scenarios through JSON text"};
}

Measure report_determinism(const Context&) {
  const Scenario s = reference_probe(kProbeFixture.prior_bias);
  const auto a = run_comparison(s, s.decode, all_modes()).to_json().dump();
  const auto b = run_comparison(s, s.decode, all_modes()).to_json().dump();
  return {a == b ? 0.0 : 1.0, "comparison report serialized twice"};
}

Measure sweep_aggregate(const Context&) {
  SweepSpec spec;
  spec.grid = default_sweep_grid();
  spec.modes = {{DecodeMode::baseline}, {DecodeMode::season}};
  const auto suite = probe_suite();
  spec.scenarios = {suite[0], suite[1]};
  spec.threads = 2;
  const json report = run_sweep(spec);
  double bad = report.at("aggregate") == recompute_sweep_aggregate(report) ? 0.0 : 1.0;
  if (report.dump() != run_sweep(spec).dump()) bad += 1.0;
  return {bad, "aggregate equals recomputation; re-run is identical"};
}

struct CheckDef {
  const char* name;
  double tolerance;
  Measure (*run)(const Context&);
};

constexpr CheckDef kChecks[] = {
    {"numerics.softmax_extended_oracle", 1e-14, softmax_oracle},
    {"numerics.softmax_shift_invariance", 1e-9, softmax_shift},
    {"numerics.jsd_oracle", 1e-10, jsd_oracle},
    {"numerics.jsd_symmetry", 1e-12, jsd_symmetry},
    {"numerics.jsd_bounds", 1e-12, jsd_bounds},
    {"numerics.argmax_softmax", 0.0, argmax_softmax},
    {"numerics.gaussian_moments", 0.02, gaussian_moments},
    {"numerics.rng_determinism", 0.0, rng_determinism},
    {"model.determinism", 0.0, model_determinism},
    {"model.causal_mask", 0.0, causal_mask},
    {"model.attention_row_sums", 1e-12, attention_row_sums},
    {"model.frame_permutation_equivariance", 0.0, encoder_equivariance},
    {"model.frame_mean_permutation_invariance", 0.0, frame_mean_invariance},
    {"model.frame_mean_oracle", 1e-12, frame_mean_oracle},
    {"model.token_layout_bijection", 0.0, layout_bijection},
    {"model.single_frame_video", 0.0, single_frame_video},
    {"negatives.beta0_identity", 0.0, beta0_identity},
    {"negatives.beta1_uniformity", 1e-9, beta1_uniformity},
    {"negatives.homogenization_oracle", 1e-9, homogenization_oracle},
    {"negatives.monotone_homogenization", 1e-12, monotone_homogenization},
    {"negatives.tag_independence", 0.0, tag_independence},
    {"negatives.shuffled_matches_permuted_encoding", 0.0, shuffled_matches_permuted},
    {"negatives.average_parity", 1e-9, average_parity},
    {"negatives.reverse_single_frame", 0.0, reverse_single_frame},
    {"negatives.tcd_frame_sets", 0.0, tcd_frames},
    {"negatives.noise_streams", 0.0, noise_streams},
    {"diagnosis.frame_attention_oracle", 1e-9, frame_attention_oracle},
    {"diagnosis.weight_sum_fuzz", 1e-12, weight_fuzz},
    {"diagnosis.scale_free", 1e-12, scale_free},
    {"diagnosis.degenerate_weights", 0.0, degenerate_weights},
    {"diagnosis.reference_weights", 1e-12, reference_weights},
    {"diagnosis.permutation_covariance", 1e-12, permutation_covariance},
    {"diagnosis.beta0_temporal_weight", 0.0, beta0_temporal_weight},
    {"diagnosis.sigma0_spatial_weight", 0.0, sigma0_spatial_weight},
    {"decoder.alpha_zero_reduction", 1e-12, alpha_zero},
    {"decoder.equivalence_chain", 0.0, equivalence_chain},
    {"decoder.equal_negatives_weight_free", 1e-12, equal_negatives},
    {"decoder.season_oracle", 1e-12, season_oracle},
    {"decoder.valid_probabilities", 0.0, valid_probabilities},
    {"decoder.shift_invariance", 0.0, shift_invariance},
    {"decoder.plausibility_example", 0.0, plausibility_example},
    {"decoder.determinism", 0.0, decode_determinism},
    {"decoder.context_synchronization", 0.0, context_synchronization},
    {"decoder.alpha_zero_decode", 0.0, alpha_zero_decode},
    {"decoder.probe_fixture", 0.0, probe_fixture},
    {"harness.scenario_roundtrip", 0.0, scenario_roundtrip},
    {"harness.report_determinism", 0.0, report_determinism},
    {"harness.sweep_aggregate", 0.0, sweep_aggregate},
};

}  // namespace

SelfCheckReport self_check(const SelfCheckOptions& options) {
  const Context ctx{options};
  SelfCheckReport report;
  for (const auto& def : kChecks) {
    CheckResult r;
    r.name = def.name;
    r.tolerance = def.tolerance;
    try {
      const Measure m = def.run(ctx);
      r.residual = m.residual;
      r.detail = m.detail;
      r.passed = m.residual <= def.tolerance;
    } catch (const std::exception& e) {
      r.residual = kInf;
      r.detail = std::string("threw: ") + e.what();
      r.passed = false;
    }
    report.checks.push_back(std::move(r));
  }
  return report;
}

}  // namespace sdcd
