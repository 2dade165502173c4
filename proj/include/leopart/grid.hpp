#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace leopart {

// Channel-major (C x H x W) dense grid. FeatureGrid is the f32 instance; the
// f64 instance is used by gradient checks.
template <typename T>
struct Grid {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(std::size_t c, std::size_t h, std::size_t w, T fill = T{})
      : channels(c), height(h), width(w), data(c * h * w, fill) {}

  std::size_t plane() const { return height * width; }
  std::size_t size() const { return data.size(); }

  T& at(std::size_t c, std::size_t y, std::size_t x) {
    assert(c < channels && y < height && x < width);
    return data[(c * height + y) * width + x];
  }
  const T& at(std::size_t c, std::size_t y, std::size_t x) const {
    assert(c < channels && y < height && x < width);
    return data[(c * height + y) * width + x];
  }

  std::span<T> channel(std::size_t c) { return {data.data() + c * plane(), plane()}; }
  std::span<const T> channel(std::size_t c) const { return {data.data() + c * plane(), plane()}; }

  bool same_shape(const Grid& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }

  template <typename U>
  Grid<U> cast() const {
    Grid<U> out(channels, height, width);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

using FeatureGrid = Grid<float>;

// Single-channel H x W map, row-major.
template <typename T>
struct Plane {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<T> data;

  Plane() = default;
  Plane(std::size_t h, std::size_t w, T fill = T{}) : height(h), width(w), data(h * w, fill) {}

  std::size_t size() const { return data.size(); }
  T& at(std::size_t y, std::size_t x) {
    assert(y < height && x < width);
    return data[y * width + x];
  }
  const T& at(std::size_t y, std::size_t x) const {
    assert(y < height && x < width);
    return data[y * width + x];
  }
  bool same_shape(const Plane& o) const { return height == o.height && width == o.width; }
  bool operator==(const Plane&) const = default;
};

using Map = Plane<float>;
using BinaryMask = Plane<std::uint8_t>;
using LabelMap = Plane<std::uint16_t>;

// Nearest-neighbour resize for label grids (cell centre sampling).
template <typename T>
Plane<T> resize_nearest(const Plane<T>& src, std::size_t out_h, std::size_t out_w) {
  Plane<T> out(out_h, out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const std::size_t sy = std::min(src.height - 1, (2 * y + 1) * src.height / (2 * out_h));
    for (std::size_t x = 0; x < out_w; ++x) {
      const std::size_t sx = std::min(src.width - 1, (2 * x + 1) * src.width / (2 * out_w));
      out.at(y, x) = src.at(sy, sx);
    }
  }
  return out;
}

}  // namespace leopart
