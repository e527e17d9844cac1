#include "isomer/blocks/feature_map.hpp"

namespace isomer::blocks {

FeatureMap::FeatureMap(std::size_t channels, std::size_t height, std::size_t width)
    : channels_(channels), height_(height), width_(width), data_({channels, height, width}) {}

FeatureMap::FeatureMap(DenseArray chw) {
  if (chw.rank() != 3) {
    throw DimensionError("FeatureMap expects a C x H x W array, got " +
                         shape_to_string(chw.shape()));
  }
  channels_ = chw.dim(0);
  height_ = chw.dim(1);
  width_ = chw.dim(2);
  data_ = std::move(chw);
}

DenseArray FeatureMap::token_view() const {
  const std::size_t n = tokens();
  DenseArray t({n, channels_});
  for (std::size_t c = 0; c < channels_; ++c)
    for (std::size_t i = 0; i < n; ++i) t(i, c) = data_[c * n + i];
  return t;
}

FeatureMap FeatureMap::from_tokens(const DenseArray& tokens, std::size_t height, std::size_t width) {
  if (tokens.rank() != 2 || tokens.rows() != height * width) {
    throw DimensionError("from_tokens: " + shape_to_string(tokens.shape()) + " is not " +
                         std::to_string(height * width) + " x C");
  }
  FeatureMap fm(tokens.cols(), height, width);
  const std::size_t n = height * width;
  for (std::size_t c = 0; c < fm.channels_; ++c)
    for (std::size_t i = 0; i < n; ++i) fm.data_[c * n + i] = tokens(i, c);
  return fm;
}

}  // namespace isomer::blocks
