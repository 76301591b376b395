// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sdcd {

/// Dense row-major [frames x patches x dim] tensor of doubles.
class FrameFeatures {
 public:
  FrameFeatures() = default;
  FrameFeatures(std::size_t frames, std::size_t patches, std::size_t dim, double fill = 0.0)
      : frames_(frames), patches_(patches), dim_(dim), data_(frames * patches * dim, fill) {}

  std::size_t frames() const { return frames_; }
  std::size_t patches() const { return patches_; }
  std::size_t dim() const { return dim_; }
  std::size_t frame_size() const { return patches_ * dim_; }
  std::size_t size() const { return data_.size(); }

  double& at(std::size_t t, std::size_t k, std::size_t d) {
    return data_[(t * patches_ + k) * dim_ + d];
  }
  double at(std::size_t t, std::size_t k, std::size_t d) const {
    return data_[(t * patches_ + k) * dim_ + d];
  }

  std::span<double> frame(std::size_t t) { return {data_.data() + t * frame_size(), frame_size()}; }
  std::span<const double> frame(std::size_t t) const {
    return {data_.data() + t * frame_size(), frame_size()};
  }
  std::span<double> token(std::size_t t, std::size_t k) {
    return {data_.data() + (t * patches_ + k) * dim_, dim_};
  }
  std::span<const double> token(std::size_t t, std::size_t k) const {
    return {data_.data() + (t * patches_ + k) * dim_, dim_};
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const FrameFeatures& o) const {
    return frames_ == o.frames_ && patches_ == o.patches_ && dim_ == o.dim_;
  }

  /// Mean over the frame axis, returned as a single-frame tensor [1 x patches x dim].
  FrameFeatures frame_mean() const;

  /// Copy with frames reordered so that output frame i is input frame order[i].
  FrameFeatures select_frames(std::span<const std::size_t> order) const;

  /// Largest Euclidean distance between any two frame slices.
  double max_pairwise_frame_distance() const;

  friend bool operator==(const FrameFeatures&, const FrameFeatures&) = default;

 private:
  std::size_t frames_ = 0;
  std::size_t patches_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace sdcd
