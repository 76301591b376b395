// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdcd {

/// Raised for any rejected input (bad shape, out-of-range parameter, non-finite value).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kLn2 = 0.693147180559945309417232121458176568;

/// Tolerance used to validate that a probability vector sums to one.
inline constexpr double kProbSumTolerance = 1e-9;

/// Non-negative vector summing to one. Construction validates both invariants.
class ProbVec {
 public:
  ProbVec() = default;
  explicit ProbVec(std::vector<double> values);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }
  const std::vector<double>& vec() const { return values_; }

  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  friend bool operator==(const ProbVec&, const ProbVec&) = default;

 private:
  std::vector<double> values_;
};

/// Numerically stable softmax of logits / temperature. All entries must be finite.
ProbVec softmax(std::span<const double> logits, double temperature = 1.0);

/// Softmax that treats -inf entries as masked (zero probability). At least one entry
/// must be finite; NaN and +inf are rejected.
ProbVec masked_softmax(std::span<const double> logits, double temperature = 1.0);

/// log(sum(exp(x))) with max subtraction. Empty input is rejected.
double log_sum_exp(std::span<const double> values);

/// KL(p || q) in nats with the 0 * log(0 / q) = 0 convention. Returns +inf when p has
/// mass where q has none.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// Jensen-Shannon divergence in nats: 0.5 KL(p||m) + 0.5 KL(q||m), m = (p + q) / 2.
/// The result lies in [0, ln 2]. The base cancels in the diagnostic weight ratio.
double jsd(const ProbVec& p, const ProbVec& q);

/// Index of the maximum entry; ties resolve to the lowest index.
std::size_t argmax_stable(std::span<const double> values);

/// Portable seeded generator: xoshiro256** with state expanded from the seed by
/// SplitMix64. The integer stream is identical on every platform.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, bound) by rejection (no modulo bias).
  std::uint64_t uniform_index(std::uint64_t bound);
  /// Standard normal via the Marsaglia polar method. Pairs are cached, so the
  /// stream depends only on the sequence of calls.
  double normal();

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// `count` i.i.d. samples from N(0, sigma^2). sigma == 0 yields exact zeros and does
/// not advance the generator.
std::vector<double> gaussian_noise(SeededRng& rng, std::size_t count, double sigma);

/// Rejects the vector if any entry is NaN or infinite. `what` names the input in the
/// diagnostic.
void require_finite(std::span<const double> values, const std::string& what);

}  // namespace sdcd
