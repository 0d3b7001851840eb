#pragma once

#include <algorithm>
#include <vector>

#include "rwsim/core/error.hpp"
#include "rwsim/core/image.hpp"

namespace rwsim {

// RGGB layout by storage index: R at (even row, even column), G at
// (even, odd) and (odd, even), B at (odd, odd).
inline int bayer_channel(int c, int r) {
  if (r % 2 == 0) return c % 2 == 0 ? 0 : 1;
  return c % 2 == 0 ? 1 : 2;
}

template <class T>
Image<T> mosaic(const std::vector<Image<T>>& rgb) {
  if (rgb.size() != 3) throw ConfigError("Bayer mosaic needs three channels");
  if (!rgb[0].same_shape(rgb[1]) || !rgb[0].same_shape(rgb[2])) {
    throw ConfigError("Bayer channels differ in size");
  }
  Image<T> out(rgb[0].width, rgb[0].height);
  for (int r = 0; r < out.height; ++r) {
    for (int c = 0; c < out.width; ++c) out.at(c, r) = rgb[bayer_channel(c, r)].at(c, r);
  }
  return out;
}

// Each 2x2 cell fills all three channels from its own R, G (even row) and B
// sites.
inline std::vector<Image<double>> demosaic_nearest(const Image<double>& raw) {
  std::vector<Image<double>> rgb(3, Image<double>(raw.width, raw.height));
  for (int r = 0; r < raw.height; ++r) {
    for (int c = 0; c < raw.width; ++c) {
      const int r0 = r - r % 2;
      const int c0 = c - c % 2;
      const int r1 = std::min(r0 + 1, raw.height - 1);
      const int c1 = std::min(c0 + 1, raw.width - 1);
      rgb[0].at(c, r) = raw.at(c0, r0);
      rgb[1].at(c, r) = c1 != c0 ? raw.at(c1, r0) : raw.at(c0, r1);
      rgb[2].at(c, r) = raw.at(c1, r1);
    }
  }
  return rgb;
}

}  // namespace rwsim
