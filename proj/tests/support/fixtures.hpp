// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "sdcd/model.hpp"
#include "sdcd/numerics.hpp"

namespace sdcd::testing {

inline VideoInput random_video(SeededRng& rng, std::size_t frames, std::size_t patches, std::size_t dim) {
  FrameFeatures f(frames, patches, dim);
  for (double& x : f.data()) x = rng.normal();
  return VideoInput::from_frames(std::move(f));
}

inline std::vector<double> random_logits(SeededRng& rng, std::size_t n, double scale) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * (2.0 * rng.uniform() - 1.0);
  return v;
}

inline std::vector<double> random_distribution(SeededRng& rng, std::size_t n) {
  std::vector<double> v(n);
  double sum = 0.0;
  for (auto& x : v) {
    x = -std::log(1.0 - rng.uniform());
    sum += x;
  }
  for (auto& x : v) x /= sum;
  return v;
}

inline std::vector<std::size_t> random_permutation(SeededRng& rng, std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.uniform_index(i)]);
  return p;
}

inline std::vector<TokenId> random_tokens(SeededRng& rng, std::size_t n, std::size_t vocab) {
  std::vector<TokenId> t(n);
  for (auto& x : t) x = static_cast<TokenId>(1 + rng.uniform_index(vocab - 1));
  return t;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return INFINITY;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace sdcd::testing
