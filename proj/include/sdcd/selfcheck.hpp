// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sdcd/config_io.hpp"
#include "sdcd/negatives.hpp"

namespace sdcd {

struct CheckResult {
  std::string name;
  bool passed = false;
  /// Measured deviation (or violation count) compared against `tolerance`.
  double residual = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct SelfCheckReport {
  std::vector<CheckResult> checks;

  bool all_passed() const;
  std::size_t failed_count() const;
  const CheckResult* find(const std::string& name) const;
  json to_json() const;
};

using Homogenizer =
    std::function<VideoTensor(const VideoLanguageModel&, const VideoInput&, const HomogenizationConfig&)>;

struct SelfCheckOptions {
  /// Implementation under test for the homogenization checks.
  Homogenizer homogenizer = temporal_homogenize;
  std::uint64_t seed = 20240611;
};

/// Runs the invariant and oracle suite. Never throws for a failing check; a check
/// that throws is reported as failed with the exception message.
SelfCheckReport self_check(const SelfCheckOptions& options = {});

}  // namespace sdcd
