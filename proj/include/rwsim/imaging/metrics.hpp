#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "rwsim/core/error.hpp"
#include "rwsim/core/image.hpp"
#include "rwsim/core/vec.hpp"

namespace rwsim {

// Divide by the maximum; an all-zero image is returned unchanged.
template <class T>
Image<T> normalize_peak(const Image<T>& img) {
  if (img.empty()) return img;
  std::size_t arg = 0;
  for (std::size_t i = 1; i < img.size(); ++i) {
    if (value_of(img.data[i]) > value_of(img.data[arg])) arg = i;
  }
  const T peak = img.data[arg];
  if (!(value_of(peak) > 0.0)) return img;
  Image<T> out = img;
  for (auto& v : out.data) v = v / peak;
  return out;
}

template <class T>
T mse(const Image<T>& a, const Image<T>& b) {
  if (!a.same_shape(b)) throw ConfigError("mse: image shapes differ");
  if (a.empty()) throw ConfigError("mse: empty image");
  T acc(0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const T d = a.data[i] - b.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

template <class T>
T rmse(const Image<T>& a, const Image<T>& b) {
  using std::sqrt;
  return sqrt(mse(a, b));
}

namespace detail {

inline std::vector<double> gaussian_kernel_1d(int size, double sigma) {
  std::vector<double> k(size);
  double sum = 0.0;
  const double c = 0.5 * (size - 1);
  for (int i = 0; i < size; ++i) {
    k[i] = std::exp(-0.5 * (i - c) * (i - c) / (sigma * sigma));
    sum += k[i];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Separable 'valid' filtering.
inline Image<double> filter_valid(const Image<double>& img, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int w = img.width - n + 1;
  const int h = img.height - n + 1;
  Image<double> tmp(w, img.height);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < w; ++c) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * img.at(c + i, r);
      tmp.at(c, r) = s;
    }
  }
  Image<double> out(w, h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * tmp.at(c, r + i);
      out.at(c, r) = s;
    }
  }
  return out;
}

}  // namespace detail

// Structural similarity with an 11x11 Gaussian window (sigma 1.5), constants
// K1 = 0.01, K2 = 0.03 and dynamic range 1. Images smaller than the window
// shrink it to the smaller side (kept odd).
inline double ssim(const Image<double>& a, const Image<double>& b) {
  if (!a.same_shape(b)) throw ConfigError("ssim: image shapes differ");
  if (a.empty()) throw ConfigError("ssim: empty image");
  int win = std::min({11, a.width, a.height});
  if (win % 2 == 0) --win;
  const auto k = detail::gaussian_kernel_1d(win, 1.5);
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  Image<double> aa = a, bb = b, ab = a;
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa.data[i] = a.data[i] * a.data[i];
    bb.data[i] = b.data[i] * b.data[i];
    ab.data[i] = a.data[i] * b.data[i];
  }
  const auto mu_a = detail::filter_valid(a, k);
  const auto mu_b = detail::filter_valid(b, k);
  const auto s_aa = detail::filter_valid(aa, k);
  const auto s_bb = detail::filter_valid(bb, k);
  const auto s_ab = detail::filter_valid(ab, k);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a.data[i], mb = mu_b.data[i];
    const double va = s_aa.data[i] - ma * ma;
    const double vb = s_bb.data[i] - mb * mb;
    const double cov = s_ab.data[i] - ma * mb;
    total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

// Intensity-weighted RMS distance from the centroid, in units of `pitch`.
inline double rms_radius(const Image<double>& img, double pitch) {
  double m = 0.0, cx = 0.0, cy = 0.0;
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      const double v = img.at(c, r);
      m += v;
      cx += v * c;
      cy += v * r;
    }
  }
  if (!(m > 0.0)) throw NumericDomainError("rms_radius of an image without energy");
  cx /= m;
  cy /= m;
  double acc = 0.0;
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      acc += img.at(c, r) * ((c - cx) * (c - cx) + (r - cy) * (r - cy));
    }
  }
  return std::sqrt(acc / m) * pitch;
}

// RMS radius of a point set about its centroid.
template <class T>
T rms_spot_radius(const std::vector<Vec2<T>>& hits) {
  using std::sqrt;
  if (hits.empty()) throw VignettedFieldError("rms spot of an empty spot diagram");
  T cx(0.0), cy(0.0);
  for (const auto& h : hits) {
    cx += h.x;
    cy += h.y;
  }
  const double n = static_cast<double>(hits.size());
  cx = cx / n;
  cy = cy / n;
  T acc(0.0);
  for (const auto& h : hits) {
    const T dx = h.x - cx;
    const T dy = h.y - cy;
    acc += dx * dx + dy * dy;
  }
  return sqrt(acc / n);
}

}  // namespace rwsim
