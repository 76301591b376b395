// SPDX-License-Identifier: Apache-2.0
#pragma once

// Reference computations written independently of the production code paths. They
// are deliberately naive (explicit loops, no shared helpers) and serve only as
// comparison targets for tests and the self-check.

#include <cstddef>
#include <vector>

#include "sdcd/model.hpp"
#include "sdcd/negatives.hpp"

namespace sdcd::oracle {

/// Softmax evaluated in long double.
std::vector<long double> softmax_extended(const std::vector<double>& logits);

/// JSD in nats built from separately summed KL terms.
double jsd_naive(const std::vector<double>& p, const std::vector<double>& q);

/// Frame mean of a tensor, summed in reverse frame order with Kahan compensation.
std::vector<double> frame_mean_resummed(const FrameFeatures& f);

/// Homogenized visual tokens for encoders of two or three layers. Every layer is
/// applied to one frame at a time and the recurrence is written out layer by layer.
/// `selected[l]` (1-based) says whether layer l is blended.
FrameFeatures homogenize_unrolled(const VideoLanguageModel& model, const VideoInput& video, double beta,
                                  MeanSource source, const std::vector<bool>& selected);

/// Frame distribution from per-head maps: loops over (layer, head, patch) and then
/// normalizes with explicit exponentials.
std::vector<double> frame_attention_from_heads(const std::vector<std::vector<Matrix>>& per_head,
                                               const TokenLayout& layout, const std::vector<std::size_t>& layers,
                                               std::size_t row);

/// (1 + alpha) l_O - alpha (w_S l_S + w_T l_T), then softmax, one scalar at a time in
/// long double.
std::vector<double> season_scalar(const std::vector<double>& original, const std::vector<double>& spatial,
                                  const std::vector<double>& temporal, double w_spatial, double w_temporal,
                                  double alpha);

}  // namespace sdcd::oracle
