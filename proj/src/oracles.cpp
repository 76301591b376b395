// SPDX-License-Identifier: Apache-2.0
#include "sdcd/oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace sdcd::oracle {

std::vector<long double> softmax_extended(const std::vector<double>& logits) {
  long double max_v = logits.at(0);
  for (double v : logits) {
    if (v > max_v) max_v = v;
  }
  std::vector<long double> out(logits.size());
  long double sum = 0.0L;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(static_cast<long double>(logits[i]) - max_v);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

namespace {

double kl_terms(const std::vector<double>& p, const std::vector<double>& m) {
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    total += p[i] * (std::log(p[i]) - std::log(m[i]));
  }
  return total;
}

}  // namespace

double jsd_naive(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("jsd_naive: length mismatch");
  std::vector<double> m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = (p[i] + q[i]) / 2.0;
  return kl_terms(p, m) / 2.0 + kl_terms(q, m) / 2.0;
}

std::vector<double> frame_mean_resummed(const FrameFeatures& f) {
  const std::size_t n = f.frame_size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    double comp = 0.0;
    for (std::size_t t = f.frames(); t-- > 0;) {
      const double y = f.frame(t)[i] - comp;
      const double s = sum + y;
      comp = (s - sum) - y;
      sum = s;
    }
    out[i] = sum / static_cast<double>(f.frames());
  }
  return out;
}

namespace {

using Frames = std::vector<FrameFeatures>;  // one single-frame tensor per frame

FrameFeatures single_frame(const FrameFeatures& f, std::size_t t) {
  FrameFeatures out(1, f.patches(), f.dim());
  for (std::size_t k = 0; k < f.patches(); ++k) {
    for (std::size_t d = 0; d < f.dim(); ++d) out.at(0, k, d) = f.at(t, k, d);
  }
  return out;
}

Frames apply_layer(const VideoLanguageModel& model, std::size_t layer, const Frames& in) {
  Frames out;
  for (const auto& f : in) out.push_back(model.encoder_layer(layer, f));
  return out;
}

FrameFeatures mean_of(const Frames& frames) {
  FrameFeatures m(1, frames[0].patches(), frames[0].dim());
  for (std::size_t k = 0; k < m.patches(); ++k) {
    for (std::size_t d = 0; d < m.dim(); ++d) {
      double s = 0.0;
      for (const auto& f : frames) s += f.at(0, k, d);
      m.at(0, k, d) = s / static_cast<double>(frames.size());
    }
  }
  return m;
}

Frames blend(const Frames& pre, const FrameFeatures& mean, double beta, bool active) {
  if (!active) return pre;
  Frames out = pre;
  for (auto& f : out) {
    for (std::size_t k = 0; k < f.patches(); ++k) {
      for (std::size_t d = 0; d < f.dim(); ++d) {
        f.at(0, k, d) = (1.0 - beta) * f.at(0, k, d) + beta * mean.at(0, k, d);
      }
    }
  }
  return out;
}

}  // namespace

FrameFeatures homogenize_unrolled(const VideoLanguageModel& model, const VideoInput& video, double beta,
                                  MeanSource source, const std::vector<bool>& selected) {
  const std::size_t layers = model.encoder_layer_count();
  if (layers < 2 || layers > 3) throw std::invalid_argument("homogenize_unrolled: supports 2 or 3 encoder layers");
  if (selected.size() != layers + 1) throw std::invalid_argument("homogenize_unrolled: selection size");
  const std::size_t frames = video.frame_count();

  Frames h0;
  for (std::size_t t = 0; t < frames; ++t) h0.push_back(model.embed_patches(single_frame(video.frames, t)));

  // Standard pass: d_1, d_2, d_3.
  const Frames c1 = apply_layer(model, 1, h0);
  const FrameFeatures d1 = mean_of(c1);
  const Frames c2 = apply_layer(model, 2, c1);
  const FrameFeatures d2 = mean_of(c2);
  FrameFeatures d3;
  if (layers == 3) d3 = mean_of(apply_layer(model, 3, c2));

  const bool clean = source == MeanSource::clean;

  // Layer 1.
  const Frames p1 = apply_layer(model, 1, h0);
  const Frames h1 = blend(p1, clean ? d1 : mean_of(p1), beta, selected[1]);
  // Layer 2.
  const Frames p2 = apply_layer(model, 2, h1);
  const Frames h2 = blend(p2, clean ? d2 : mean_of(p2), beta, selected[2]);
  Frames final_frames = h2;
  // Layer 3.
  if (layers == 3) {
    const Frames p3 = apply_layer(model, 3, h2);
    final_frames = blend(p3, clean ? d3 : mean_of(p3), beta, selected[3]);
  }

  FrameFeatures stacked(frames, final_frames[0].patches(), final_frames[0].dim());
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < stacked.patches(); ++k) {
      for (std::size_t d = 0; d < stacked.dim(); ++d) stacked.at(t, k, d) = final_frames[t].at(0, k, d);
    }
  }
  FrameFeatures projected(frames, stacked.patches(), model.visual_dim());
  for (std::size_t t = 0; t < frames; ++t) {
    const FrameFeatures p = model.project(single_frame(stacked, t));
    for (std::size_t k = 0; k < p.patches(); ++k) {
      for (std::size_t d = 0; d < p.dim(); ++d) projected.at(t, k, d) = p.at(0, k, d);
    }
  }
  return projected;
}

std::vector<double> frame_attention_from_heads(const std::vector<std::vector<Matrix>>& per_head,
                                               const TokenLayout& layout, const std::vector<std::size_t>& layers,
                                               std::size_t row) {
  std::vector<double> sums(layout.frames(), 0.0);
  for (std::size_t l : layers) {
    for (const Matrix& head : per_head.at(l - 1)) {
      for (std::size_t t = 0; t < layout.frames(); ++t) {
        for (std::size_t k = 0; k < layout.patches(); ++k) {
          sums[t] += head.at(row, layout.visual_offset() + t * layout.patches() + k);
        }
      }
    }
  }
  long double z = 0.0L;
  for (double s : sums) z += std::exp(static_cast<long double>(s));
  std::vector<double> out(sums.size());
  for (std::size_t t = 0; t < sums.size(); ++t) {
    out[t] = static_cast<double>(std::exp(static_cast<long double>(sums[t])) / z);
  }
  return out;
}

std::vector<double> season_scalar(const std::vector<double>& original, const std::vector<double>& spatial,
                                  const std::vector<double>& temporal, double w_spatial, double w_temporal,
                                  double alpha) {
  const std::size_t n = original.size();
  std::vector<long double> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    const long double a = alpha;
    z[i] = (1.0L + a) * original[i] - a * (static_cast<long double>(w_spatial) * spatial[i] +
                                           static_cast<long double>(w_temporal) * temporal[i]);
  }
  long double max_z = z[0];
  for (auto v : z) max_z = v > max_z ? v : max_z;
  long double sum = 0.0L;
  for (auto& v : z) {
    v = std::exp(v - max_z);
    sum += v;
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(z[i] / sum);
  return out;
}

}  // namespace sdcd::oracle
