// SPDX-License-Identifier: Apache-2.0
#include "sdcd/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace sdcd {

ProbVec::ProbVec(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw InvalidArgument("ProbVec: empty distribution");
  double sum = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double v = values_[i];
    if (!std::isfinite(v) || v < 0.0) {
      std::ostringstream os;
      os << "ProbVec: entry " << i << " is " << v << " (must be finite and >= 0)";
      throw InvalidArgument(os.str());
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kProbSumTolerance) {
    std::ostringstream os;
    os.precision(17);
    os << "ProbVec: entries sum to " << sum << ", expected 1";
    throw InvalidArgument(os.str());
  }
}

void require_finite(std::span<const double> values, const std::string& what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      std::ostringstream os;
      os << what << ": entry " << i << " is not finite (" << values[i] << ")";
      throw InvalidArgument(os.str());
    }
  }
}

namespace {

void check_temperature(double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw InvalidArgument("softmax: temperature must be a positive finite number");
  }
}

ProbVec softmax_impl(std::span<const double> logits, double temperature) {
  double max_v = -std::numeric_limits<double>::infinity();
  for (double v : logits) max_v = std::max(max_v, v);
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double e = std::isinf(logits[i]) ? 0.0 : std::exp((logits[i] - max_v) / temperature);
    out[i] = e;
    sum += e;
  }
  for (double& v : out) v /= sum;
  return ProbVec(std::move(out));
}

}  // namespace

ProbVec softmax(std::span<const double> logits, double temperature) {
  if (logits.empty()) throw InvalidArgument("softmax: empty logit vector");
  check_temperature(temperature);
  require_finite(logits, "softmax");
  return softmax_impl(logits, temperature);
}

ProbVec masked_softmax(std::span<const double> logits, double temperature) {
  if (logits.empty()) throw InvalidArgument("masked_softmax: empty logit vector");
  check_temperature(temperature);
  bool any_finite = false;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double v = logits[i];
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
      std::ostringstream os;
      os << "masked_softmax: entry " << i << " is " << v;
      throw InvalidArgument(os.str());
    }
    any_finite = any_finite || std::isfinite(v);
  }
  if (!any_finite) throw InvalidArgument("masked_softmax: every entry is masked");
  return softmax_impl(logits, temperature);
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("log_sum_exp: empty input");
  const double max_v = *std::max_element(values.begin(), values.end());
  if (std::isinf(max_v)) return max_v;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - max_v);
  return max_v + std::log(sum);
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InvalidArgument("kl_divergence: length mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    total += p[i] * std::log(p[i] / q[i]);
  }
  return total;
}

double jsd(const ProbVec& p, const ProbVec& q) {
  if (p.size() != q.size()) {
    std::ostringstream os;
    os << "jsd: length mismatch (" << p.size() << " vs " << q.size() << ")";
    throw InvalidArgument(os.str());
  }
  // Accumulate both KL terms in one pass; m >= p/2 so m > 0 wherever p > 0.
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) total += 0.5 * p[i] * std::log(p[i] / m);
    if (q[i] > 0.0) total += 0.5 * q[i] * std::log(q[i] / m);
  }
  return std::clamp(total, 0.0, kLn2);
}

std::size_t argmax_stable(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("argmax_stable: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t x = seed;
  for (auto& s : s_) s = splitmix64(x);
}

std::uint64_t SeededRng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double SeededRng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t SeededRng::uniform_index(std::uint64_t bound) {
  if (bound == 0) throw InvalidArgument("uniform_index: bound must be positive");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t r;
  do {
    r = next_u64();
  } while (r >= limit);
  return r % bound;
}

double SeededRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * factor;
  has_spare_ = true;
  return u * factor;
}

std::vector<double> gaussian_noise(SeededRng& rng, std::size_t count, double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw InvalidArgument("gaussian_noise: sigma must be finite and >= 0");
  }
  std::vector<double> out(count, 0.0);
  if (sigma == 0.0) return out;
  for (double& v : out) v = sigma * rng.normal();
  return out;
}

}  // namespace sdcd
