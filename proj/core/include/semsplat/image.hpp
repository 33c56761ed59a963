#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "semsplat/errors.hpp"

namespace semsplat {

/// Dense row-major H x W x C image. Channels are interleaved per pixel.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels = 1, T fill = T{})
      : height_(height), width_(width), channels_(channels) {
    require(height >= 0 && width >= 0 && channels >= 1, "Image: invalid shape");
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t pixels() const { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int y, int x, int c = 0) { return data_[index(y, x, c)]; }
  const T& operator()(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  bool same_shape(const Image& o) const {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }
  template <typename U>
  bool same_extent(const Image<U>& o) const {
    return height_ == o.height() && width_ == o.width();
  }

  bool operator==(const Image& o) const = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 1;
  std::vector<T> data_;
};

using ImageD = Image<double>;
using LabelImage = Image<std::uint8_t>;
using MaskImage = Image<std::uint8_t>;

inline constexpr std::uint8_t kIgnoreLabel = 255;

}  // namespace semsplat
