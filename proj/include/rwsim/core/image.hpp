#pragma once

#include <cstddef>
#include <vector>

#include "rwsim/core/dual.hpp"
#include "rwsim/core/error.hpp"

namespace rwsim {

// Row-major single-channel grid. Row r sits at y = (r - (height-1)/2) * pitch
// on the sensor, so row index grows with y.
template <class T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, const T& fill = T(0.0))
      : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
    if (w < 0 || h < 0) throw ConfigError("image dimensions must be non-negative");
  }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  T& at(int c, int r) { return data[static_cast<std::size_t>(r) * width + c]; }
  const T& at(int c, int r) const { return data[static_cast<std::size_t>(r) * width + c]; }
  bool same_shape(const Image& o) const { return width == o.width && height == o.height; }
};

template <class T>
Image<double> value_of(const Image<T>& img) {
  Image<double> out(img.width, img.height);
  for (std::size_t i = 0; i < img.size(); ++i) out.data[i] = value_of(img.data[i]);
  return out;
}

// Pixel-centre coordinate of column c (or row r) for an n-pixel axis.
inline double pixel_center(int index, int n, double pitch) {
  return (static_cast<double>(index) - 0.5 * static_cast<double>(n - 1)) * pitch;
}

}  // namespace rwsim
