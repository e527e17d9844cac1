#pragma once

#include <cstddef>

#include "isomer/numerics/dense_array.hpp"

namespace isomer::blocks {

/// A C x H x W stage feature. Token n of the N x C token view is spatial
/// position (n / W, n % W), i.e. row-major over H then W.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(std::size_t channels, std::size_t height, std::size_t width);
  /// Wraps a C x H x W array.
  explicit FeatureMap(DenseArray chw);

  std::size_t channels() const { return channels_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t tokens() const { return height_ * width_; }

  const DenseArray& data() const { return data_; }
  DenseArray& data() { return data_; }

  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * height_ + y) * width_ + x];
  }
  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * height_ + y) * width_ + x];
  }

  /// N x C copy.
  DenseArray token_view() const;
  static FeatureMap from_tokens(const DenseArray& tokens, std::size_t height, std::size_t width);

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  std::size_t channels_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  DenseArray data_{Shape{0, 0, 0}};
};

}  // namespace isomer::blocks
