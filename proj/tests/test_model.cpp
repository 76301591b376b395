// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "sdcd/model.hpp"
#include "sdcd/oracles.hpp"
#include "sdcd/scenario.hpp"
#include "support/fixtures.hpp"

using namespace sdcd;
using namespace sdcd::testing;

TEST_SUITE("model") {

TEST_CASE("toy config validation") {
  ToyModelConfig c;
  CHECK_NOTHROW(c.validate());
  c.encoder_layers = 1;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = ToyModelConfig{};
  c.dim = 15;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("video validation") {
  CHECK_THROWS_AS(VideoInput::from_frames(FrameFeatures(0, 4, 16)), InvalidArgument);
  FrameFeatures f(1, 4, 16);
  f.at(0, 1, 2) = NAN;
  CHECK_THROWS_AS(VideoInput::from_frames(f), InvalidArgument);
  const auto toy = toy_model_build(ToyModelConfig{});
  CHECK_THROWS_AS(encode(*toy, VideoInput{FrameFeatures(2, 3, 16)}), InvalidArgument);
}

TEST_CASE("toy model is deterministic") {
  SeededRng rng(1);
  const auto video = random_video(rng, 3, 4, 16);
  const auto a = toy_model_build(ToyModelConfig{});
  const auto b = toy_model_build(ToyModelConfig{});
  const auto va = encode(*a, video);
  const auto vb = encode(*b, video);
  CHECK(va.features == vb.features);
  const std::vector<TokenId> q{3, 9, 12};
  const auto oa = a->decode_step(va, q, std::vector<TokenId>{7});
  const auto ob = b->decode_step(vb, q, std::vector<TokenId>{7});
  CHECK(oa.logits == ob.logits);
  CHECK(oa.attentions == ob.attentions);
  CHECK(oa.logits.size() == 64);
  CHECK(oa.attentions.size() == 4);
  CHECK(oa.sequence_length() == 3 * 4 + 3 + 1);

  ToyModelConfig other;
  other.seed = 8;
  CHECK(encode(*toy_model_build(other), video).features != va.features);
}

TEST_CASE("decoder attention is causal and head-summed") {
  SeededRng rng(2);
  const auto toy = toy_model_build(ToyModelConfig{});
  for (int s = 0; s < 10; ++s) {
    const auto visual = encode(*toy, random_video(rng, 1 + rng.uniform_index(4), 4, 16));
    const auto q = random_tokens(rng, 1 + rng.uniform_index(3), 64);
    const auto g = random_tokens(rng, rng.uniform_index(3), 64);
    const auto out = toy->decode_step(visual, q, g);
    const auto heads = toy->decode_step_per_head(visual, q, g);
    REQUIRE(heads.size() == out.attentions.size());
    for (std::size_t l = 0; l < out.attentions.size(); ++l) {
      const Matrix& m = out.attentions[l];
      REQUIRE(heads[l].size() == 2);
      for (std::size_t r = 0; r < m.rows(); ++r) {
        double row_sum = 0.0;
        for (std::size_t c = 0; c < m.cols(); ++c) {
          if (c > r) REQUIRE(m.at(r, c) == 0.0);
          REQUIRE(m.at(r, c) == heads[l][0].at(r, c) + heads[l][1].at(r, c));
          row_sum += m.at(r, c);
        }
        REQUIRE(std::abs(row_sum - 2.0) < 1e-12);
      }
    }
  }
}

TEST_CASE("decode_step rejects out-of-vocabulary tokens") {
  const auto toy = toy_model_build(ToyModelConfig{});
  SeededRng rng(3);
  const auto visual = encode(*toy, random_video(rng, 2, 4, 16));
  const std::vector<TokenId> bad{64};
  CHECK_THROWS_AS(toy->decode_step(visual, bad, {}), InvalidArgument);
}

TEST_CASE("toy encoder is frame-permutation equivariant and d_l is invariant") {
  SeededRng rng(4);
  const auto toy = toy_model_build(ToyModelConfig{});
  const auto video = random_video(rng, 6, 4, 16);
  const auto base = encode_layerwise(*toy, video);
  for (int i = 0; i < 50; ++i) {
    const auto perm = random_permutation(rng, 6);
    const auto moved = encode_layerwise(*toy, VideoInput{video.frames.select_frames(perm)});
    for (std::size_t l = 0; l < base.layers.size(); ++l) {
      REQUIRE(moved.layers[l] == base.layers[l].select_frames(perm));
      REQUIRE(moved.frame_means[l] == base.frame_means[l]);
    }
    REQUIRE(moved.visual.features == base.visual.features.select_frames(perm));
  }
}

TEST_CASE("d_l equals an independent re-summation of the layer output") {
  SeededRng rng(5);
  const auto toy = toy_model_build(ToyModelConfig{});
  const auto cache = encode_layerwise(*toy, random_video(rng, 8, 4, 16));
  REQUIRE(cache.frame_means.size() == 3);
  for (std::size_t l = 0; l < 3; ++l) {
    CHECK(max_abs_diff(cache.frame_means[l].data(), oracle::frame_mean_resummed(cache.layers[l])) < 1e-12);
  }
}

TEST_CASE("run_encoder hook sees every layer in order") {
  SeededRng rng(6);
  const auto toy = toy_model_build(ToyModelConfig{});
  const auto video = random_video(rng, 2, 4, 16);
  std::vector<std::size_t> seen;
  const auto last = run_encoder(*toy, video, [&](std::size_t l, FrameFeatures&) { seen.push_back(l); });
  CHECK(seen == std::vector<std::size_t>{1, 2, 3});
  CHECK(toy->project(last) == encode(*toy, video).features);
}

TEST_CASE("token layout is a bijection onto the visual block") {
  const auto toy = toy_model_build(ToyModelConfig{});
  for (std::size_t frames : {1u, 2u, 8u}) {
    const TokenLayout layout = toy->token_layout(frames);
    std::vector<int> hits(layout.visual_offset() + layout.visual_count(), 0);
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t k = 0; k < 4; ++k) {
        const std::size_t pos = layout.position(t, k);
        REQUIRE(pos < hits.size());
        ++hits[pos];
        const auto back = layout.locate(pos);
        REQUIRE(back.has_value());
        CHECK(back->frame == t);
        CHECK(back->patch == k);
      }
    }
    for (int h : hits) CHECK(h == 1);
    CHECK_FALSE(layout.locate(layout.visual_offset() + layout.visual_count()).has_value());
  }
  const TokenLayout shifted(3, 2, 2);
  CHECK_FALSE(shifted.locate(2).has_value());
  CHECK(shifted.locate(3)->frame == 0);
  CHECK(shifted.locate(6)->frame == 1);
  CHECK(shifted.locate(6)->patch == 1);
}

TEST_CASE("single-frame video runs end to end") {
  SeededRng rng(7);
  const auto toy = toy_model_build(ToyModelConfig{});
  const auto visual = encode(*toy, random_video(rng, 1, 4, 16));
  const auto out = toy->decode_step(visual, std::vector<TokenId>{1}, {});
  CHECK(out.sequence_length() == 5);
  require_finite(out.logits, "logits");
}

TEST_CASE("linear encoder kind") {
  ToyModelConfig c;
  c.encoder_kind = EncoderKind::linear;
  const auto toy = toy_model_build(c);
  SeededRng rng(8);
  const auto x = random_video(rng, 1, 4, 16);
  const auto y = random_video(rng, 1, 4, 16);
  FrameFeatures mix(1, 4, 16);
  for (std::size_t i = 0; i < mix.size(); ++i) mix.data()[i] = 0.5 * x.frames.data()[i] + 0.5 * y.frames.data()[i];
  const auto ex = toy->encoder_layer(1, toy->embed_patches(x.frames));
  const auto ey = toy->encoder_layer(1, toy->embed_patches(y.frames));
  const auto em = toy->encoder_layer(1, toy->embed_patches(mix));
  for (std::size_t i = 0; i < em.size(); ++i) {
    CHECK(std::abs(em.data()[i] - (0.5 * ex.data()[i] + 0.5 * ey.data()[i])) < 1e-12);
  }
}

TEST_CASE("scripted probe reads event order from the video") {
  const Scenario s = reference_probe(0.0);
  const auto model = build_model(s.model);
  const auto* probe = dynamic_cast<const ScriptedProbeModel*>(model.get());
  REQUIRE(probe != nullptr);
  const VideoInput video = build_video(s);
  const auto visual = encode(*probe, video);
  const auto pos = probe->event_positions(visual.features);
  REQUIRE(pos.size() == 2);
  CHECK(pos[0] < 0.1);
  CHECK(pos[1] > 0.6);

  const auto out = probe->decode_step(visual, s.query, {});
  CHECK(argmax_stable(out.logits) == 1);
  const auto after = probe->decode_step(visual, s.query, std::vector<TokenId>{1});
  CHECK(argmax_stable(after.logits) == 0);

  const auto biased = reference_probe(kProbeFixture.prior_bias);
  const auto bm = build_model(biased.model);
  CHECK(argmax_stable(bm->decode_step(encode(*bm, build_video(biased)), biased.query, {}).logits) == 2);
}

TEST_CASE("scripted probe attention concentrates on event frames") {
  const Scenario s = reference_probe(0.0);
  const auto model = build_model(s.model);
  const auto visual = encode(*model, build_video(s));
  const auto out = model->decode_step(visual, s.query, {});
  const TokenLayout layout = model->token_layout(8);
  const Matrix& m = out.attentions.back();
  const std::size_t last = out.sequence_length() - 1;
  double visual_mass = 0.0;
  double event_mass = 0.0;
  for (std::size_t t = 0; t < 8; ++t) {
    for (std::size_t k = 0; k < layout.patches(); ++k) {
      const double a = m.at(last, layout.position(t, k));
      visual_mass += a;
      if (t == 0 || t == 5) event_mass += a;
    }
  }
  CHECK(visual_mass == doctest::Approx(0.9));
  CHECK(event_mass > 0.5 * visual_mass);
}

TEST_CASE("probe spec validation") {
  ProbeSpec p;
  p.event_tokens = {1, 2};
  p.prior_bias = {0.0, 0.0};
  CHECK_NOTHROW(p.validate());
  p.event_tokens = {1, 1};
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p.event_tokens = {0, 1};
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p.event_tokens = {1, 2};
  p.prior_bias = {0.0};
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
}

}  // TEST_SUITE
