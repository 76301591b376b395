// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "sdcd/negatives.hpp"
#include "sdcd/oracles.hpp"
#include "support/fixtures.hpp"

using namespace sdcd;
using namespace sdcd::testing;

namespace {

HomogenizationConfig homog(double beta, LayerRange range = LayerRange::all(), MeanSource src = MeanSource::clean) {
  HomogenizationConfig c;
  c.beta = beta;
  c.layer_range = std::move(range);
  c.d_source = src;
  return c;
}

ToyModelConfig small(std::size_t layers) {
  ToyModelConfig c;
  c.encoder_layers = layers;
  c.patches = 2;
  c.dim = 8;
  c.seed = 30 + layers;
  return c;
}

}  // namespace

TEST_SUITE("negatives") {

TEST_CASE("layer bands") {
  CHECK(LayerRange::all().resolve(3) == std::vector<std::size_t>{1, 2, 3});
  CHECK(LayerRange::of(LayerBand::early).resolve(3) == std::vector<std::size_t>{1});
  CHECK(LayerRange::of(LayerBand::middle).resolve(3) == std::vector<std::size_t>{2});
  CHECK(LayerRange::of(LayerBand::late).resolve(3) == std::vector<std::size_t>{3});
  CHECK(LayerRange::of(LayerBand::early).resolve(12) == std::vector<std::size_t>{1, 2, 3, 4});
  CHECK(LayerRange::of(LayerBand::middle).resolve(12) == std::vector<std::size_t>{5, 6, 7, 8});
  CHECK(LayerRange::of(LayerBand::late).resolve(12) == std::vector<std::size_t>{9, 10, 11, 12});
  CHECK(LayerRange::explicit_layers({3, 1, 3}).resolve(3) == std::vector<std::size_t>{1, 3});
  CHECK_THROWS_AS(LayerRange::explicit_layers({4}).resolve(3), InvalidArgument);
  CHECK_THROWS_AS(LayerRange::explicit_layers({0}).resolve(3), InvalidArgument);
  CHECK_THROWS_AS(LayerRange::explicit_layers({}).resolve(3), InvalidArgument);
  CHECK(parse_layer_band("middle") == LayerBand::middle);
  CHECK_FALSE(parse_layer_band("center").has_value());
}

TEST_CASE("homogenization config validation") {
  CHECK_THROWS_AS(homog(-0.1).validate(3), InvalidArgument);
  CHECK_THROWS_AS(homog(1.5).validate(3), InvalidArgument);
  CHECK_NOTHROW(homog(1.0).validate(3));
}

TEST_CASE("beta = 0 reproduces the clean encoding bit for bit") {
  SeededRng rng(1);
  const auto toy = toy_model_build(ToyModelConfig{});
  const auto video = random_video(rng, 5, 4, 16);
  const auto clean = encode(*toy, video);
  for (MeanSource src : {MeanSource::clean, MeanSource::progressive}) {
    for (const auto& range : {LayerRange::all(), LayerRange::of(LayerBand::middle)}) {
      const auto neg = temporal_homogenize(*toy, video, homog(0.0, range, src));
      CHECK(neg.features == clean.features);
      CHECK(neg.tag == VisualTag::temporal_negative);
    }
  }
}

TEST_CASE("beta = 1 on every layer collapses all frames") {
  SeededRng rng(2);
  const auto toy = toy_model_build(ToyModelConfig{});
  const auto video = random_video(rng, 6, 4, 16);
  CHECK(encode(*toy, video).features.max_pairwise_frame_distance() > 1.0);
  for (MeanSource src : {MeanSource::clean, MeanSource::progressive}) {
    CHECK(temporal_homogenize(*toy, video, homog(1.0, LayerRange::all(), src)).features.max_pairwise_frame_distance() <
          1e-9);
  }
}

TEST_CASE("two-pass recurrence matches the unrolled oracle") {
  SeededRng rng(3);
  for (std::size_t layers : {2u, 3u}) {
    const auto toy = toy_model_build(small(layers));
    for (std::size_t frames = 1; frames <= 4; ++frames) {
      const auto video = random_video(rng, frames, 2, 8);
      for (double beta : {0.25, 0.33, 0.5}) {
        for (MeanSource src : {MeanSource::clean, MeanSource::progressive}) {
          for (const auto& range : {LayerRange::all(), LayerRange::explicit_layers({1, layers}),
                                    LayerRange::of(LayerBand::late)}) {
            std::vector<bool> selected(layers + 1, false);
            for (std::size_t l : range.resolve(layers)) selected[l] = true;
            const auto got = temporal_homogenize(*toy, video, homog(beta, range, src));
            const auto want = oracle::homogenize_unrolled(*toy, video, beta, src, selected);
            REQUIRE(max_abs_diff(got.features.data(), want.data()) < 1e-9);
          }
        }
      }
    }
  }
}

TEST_CASE("clean and progressive means differ once an earlier layer is blended") {
  SeededRng rng(4);
  const auto toy = toy_model_build(small(3));
  const auto video = random_video(rng, 4, 2, 8);
  const auto clean = temporal_homogenize(*toy, video, homog(0.5, LayerRange::all(), MeanSource::clean));
  const auto prog = temporal_homogenize(*toy, video, homog(0.5, LayerRange::all(), MeanSource::progressive));
  CHECK(max_abs_diff(clean.features.data(), prog.features.data()) > 1e-6);
  // Only the first layer blended: both sources use the same d_1.
  const auto c1 = temporal_homogenize(*toy, video, homog(0.5, LayerRange::explicit_layers({1}), MeanSource::clean));
  const auto p1 =
      temporal_homogenize(*toy, video, homog(0.5, LayerRange::explicit_layers({1}), MeanSource::progressive));
  CHECK(c1.features == p1.features);
}

TEST_CASE("homogenization is monotone in beta on the linear encoder") {
  SeededRng rng(5);
  ToyModelConfig c;
  c.encoder_kind = EncoderKind::linear;
  const auto toy = toy_model_build(c);
  const auto video = random_video(rng, 6, 4, 16);
  double prev = INFINITY;
  for (double beta : {0.0, 0.25, 0.33, 0.5, 1.0}) {
    const double d = temporal_homogenize(*toy, video, homog(beta)).features.max_pairwise_frame_distance();
    CHECK(d <= prev);
    prev = d;
  }
  CHECK(prev < 1e-12);
}

TEST_CASE("pixel and feature noise") {
  SeededRng rng(6);
  const auto toy = toy_model_build(ToyModelConfig{});
  const auto video = random_video(rng, 3, 4, 16);
  const auto clean = encode(*toy, video);

  SeededRng a(1);
  CHECK(spatial_negative(*toy, video, 0.0, a, NoiseStage::pixel).features == clean.features);
  SeededRng b(1);
  CHECK(spatial_negative(*toy, video, 0.0, b, NoiseStage::feature).features == clean.features);

  SeededRng c(99);
  const auto noisy = spatial_negative(*toy, video, 0.2, c, NoiseStage::feature);
  CHECK(noisy.tag == VisualTag::spatial_negative);
  SeededRng d(99);
  const auto stream = gaussian_noise(d, clean.features.size(), 0.2);
  for (std::size_t i = 0; i < stream.size(); ++i) {
    REQUIRE(noisy.features.data()[i] == clean.features.data()[i] + stream[i]);
  }

  SeededRng e(99);
  const auto pix = add_pixel_noise(video, 0.2, e);
  SeededRng f(99);
  const auto pstream = gaussian_noise(f, video.frames.size(), 0.2);
  for (std::size_t i = 0; i < pstream.size(); ++i) {
    REQUIRE(pix.frames.data()[i] == video.frames.data()[i] + pstream[i]);
  }
}

TEST_CASE("auto sigma is the population standard deviation") {
  FrameFeatures f(2, 1, 2);
  f.at(0, 0, 0) = 1.0;
  f.at(0, 0, 1) = 3.0;
  f.at(1, 0, 0) = 5.0;
  f.at(1, 0, 1) = 7.0;
  ToyModelConfig c;
  c.patches = 1;
  c.dim = 2;
  c.heads = 1;
  const auto toy = toy_model_build(c);
  CHECK(auto_noise_sigma(*toy, VideoInput{f}, NoiseStage::pixel) == doctest::Approx(std::sqrt(5.0)));
}

TEST_CASE("ablations") {
  SeededRng rng(7);
  const auto toy = toy_model_build(ToyModelConfig{});
  const auto video = random_video(rng, 5, 4, 16);

  SeededRng s(3);
  const auto shuffled = ablation_negative(*toy, video, AblationKind::shuffled, s);
  CHECK(shuffled.frame_order.size() == 5);
  CHECK(shuffled.frame_order != std::vector<std::size_t>{0, 1, 2, 3, 4});
  CHECK(shuffled.visual.features == encode(*toy, VideoInput{video.frames.select_frames(shuffled.frame_order)}).features);
  CHECK(shuffled.visual.features == encode(*toy, video).features.select_frames(shuffled.frame_order));
  SeededRng s2(3);
  CHECK(ablation_negative(*toy, video, AblationKind::shuffled, s2).frame_order == shuffled.frame_order);

  SeededRng r(0);
  const auto reversed = ablation_negative(*toy, video, AblationKind::reverse, r);
  CHECK(reversed.frame_order == std::vector<std::size_t>{4, 3, 2, 1, 0});
  CHECK(reversed.visual.tag == VisualTag::ablation_variant);

  SeededRng u(0);
  const auto avg = ablation_negative(*toy, video, AblationKind::average, u);
  const auto final_only = temporal_homogenize(*toy, video, homog(1.0, LayerRange::explicit_layers({3})));
  CHECK(max_abs_diff(avg.visual.features.data(), final_only.features.data()) < 1e-9);
  CHECK(avg.visual.features.max_pairwise_frame_distance() < 1e-12);

  const auto single = random_video(rng, 1, 4, 16);
  SeededRng r1(0);
  CHECK(ablation_negative(*toy, single, AblationKind::reverse, r1).visual.features == encode(*toy, single).features);
  SeededRng bad(0);
  CHECK_THROWS_AS(ablation_negative(*toy, single, AblationKind::shuffled, bad), InvalidArgument);
}

TEST_CASE("non-identity permutations") {
  SeededRng rng(8);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 2 + rng.uniform_index(6);
    auto p = random_nonidentity_permutation(n, rng);
    std::vector<std::size_t> sorted = p;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> identity(n);
    std::iota(identity.begin(), identity.end(), std::size_t{0});
    REQUIRE(sorted == identity);
    REQUIRE(p != identity);
  }
}

TEST_CASE("TCD frame dropping") {
  CHECK(tcd_kept_frames(8, 1) == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7});
  CHECK(tcd_kept_frames(8, 2) == std::vector<std::size_t>{0, 2, 4, 6});
  CHECK(tcd_kept_frames(8, 4) == std::vector<std::size_t>{0, 4});
  CHECK_THROWS_AS(tcd_kept_frames(8, 9), InvalidArgument);
  CHECK_THROWS_AS(tcd_kept_frames(8, 0), InvalidArgument);
  SeededRng rng(9);
  const auto video = random_video(rng, 8, 2, 3);
  CHECK(tcd_framedrop(video, 1) == video);
  const auto dropped = tcd_framedrop(video, 4);
  CHECK(dropped.frame_count() == 2);
  CHECK(dropped.frames == video.frames.select_frames(std::vector<std::size_t>{0, 4}));
}

TEST_CASE("build_negative dispatches and validates") {
  SeededRng rng(10);
  const auto toy = toy_model_build(ToyModelConfig{});
  const auto video = random_video(rng, 4, 4, 16);
  NegativeStrategy s;
  s.kind = NegativeStrategy::Kind::spatial_gaussian;
  const auto spatial = build_negative(*toy, video, s);
  REQUIRE(spatial.sigma.has_value());
  CHECK(*spatial.sigma == doctest::Approx(auto_noise_sigma(*toy, video, NoiseStage::pixel)));
  s.sigma = -1.0;
  CHECK_THROWS_AS(build_negative(*toy, video, s), InvalidArgument);
  s = NegativeStrategy{};
  s.kind = NegativeStrategy::Kind::tcd_framedrop;
  s.rate = 2;
  CHECK(build_negative(*toy, video, s).visual.frame_count() == 2);
  CHECK(parse_negative_kind("tcd_framedrop") == NegativeStrategy::Kind::tcd_framedrop);
}

}  // TEST_SUITE
