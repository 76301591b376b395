// SPDX-License-Identifier: Apache-2.0
#include "sdcd/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "sdcd/numerics.hpp"

namespace sdcd {

FrameFeatures FrameFeatures::frame_mean() const {
  FrameFeatures mean(1, patches_, dim_);
  if (frames_ == 0) return mean;
  auto out = mean.frame(0);
  // Order-independent: each element is summed in sorted order.
  std::vector<double> column(frames_);
  const double inv = 1.0 / static_cast<double>(frames_);
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t t = 0; t < frames_; ++t) column[t] = data_[t * frame_size() + i];
    std::sort(column.begin(), column.end());
    double sum = 0.0;
    for (double v : column) sum += v;
    out[i] = sum * inv;
  }
  return mean;
}

FrameFeatures FrameFeatures::select_frames(std::span<const std::size_t> order) const {
  FrameFeatures out(order.size(), patches_, dim_);
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (order[i] >= frames_) throw InvalidArgument("select_frames: frame index out of range");
    auto src = frame(order[i]);
    std::copy(src.begin(), src.end(), out.frame(i).begin());
  }
  return out;
}

double FrameFeatures::max_pairwise_frame_distance() const {
  double best = 0.0;
  for (std::size_t a = 0; a < frames_; ++a) {
    for (std::size_t b = a + 1; b < frames_; ++b) {
      auto fa = frame(a);
      auto fb = frame(b);
      double sq = 0.0;
      for (std::size_t i = 0; i < fa.size(); ++i) {
        const double d = fa[i] - fb[i];
        sq += d * d;
      }
      best = std::max(best, std::sqrt(sq));
    }
  }
  return best;
}

}  // namespace sdcd
