#pragma once

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "rwsim/core/error.hpp"
#include "rwsim/core/image.hpp"

namespace rwsim {

// Multi-channel image as a set of equally sized planes.
struct ColorImage {
  std::vector<Image<double>> channels;

  int width() const { return channels.empty() ? 0 : channels.front().width; }
  int height() const { return channels.empty() ? 0 : channels.front().height; }
};

// PFM layout: header "Pf" (1 channel) or "PF" (3 channels), negative scale
// for little-endian float32, scanlines from the bottom row up. Image row 0 is
// the lowest sensor y, so rows are written in storage order.
inline void write_pfm(const std::string& path, const std::vector<const Image<double>*>& planes) {
  static_assert(std::endian::native == std::endian::little, "PFM writer assumes a little-endian host");
  if (planes.size() != 1 && planes.size() != 3) throw ConfigError("PFM supports 1 or 3 channels");
  const int w = planes.front()->width;
  const int h = planes.front()->height;
  for (const auto* p : planes) {
    if (p->width != w || p->height != h) throw ConfigError("PFM channels differ in size");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << (planes.size() == 1 ? "Pf" : "PF") << "\n" << w << " " << h << "\n-1.0\n";
  std::vector<float> row(static_cast<std::size_t>(w) * planes.size());
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (std::size_t k = 0; k < planes.size(); ++k) {
        row[c * planes.size() + k] = static_cast<float>(planes[k]->at(c, r));
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw ConfigError("short write to " + path);
}

inline void write_pfm(const std::string& path, const Image<double>& img) { write_pfm(path, {&img}); }

inline ColorImage read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::string magic;
  int w = 0, h = 0;
  double scale = 0.0;
  in >> magic >> w >> h >> scale;
  in.get();
  if ((magic != "Pf" && magic != "PF") || w <= 0 || h <= 0 || scale == 0.0) {
    throw ParseError(path, 1, "not a PFM file");
  }
  const std::size_t nc = magic == "Pf" ? 1 : 3;
  const bool big_endian = scale > 0.0;
  ColorImage img;
  img.channels.assign(nc, Image<double>(w, h));
  std::vector<float> row(static_cast<std::size_t>(w) * nc);
  for (int r = 0; r < h; ++r) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) throw ParseError(path, 3, "truncated PFM data");
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, &row[i], 4);
      if (big_endian) bits = __builtin_bswap32(bits);
      float v;
      std::memcpy(&v, &bits, 4);
      img.channels[i % nc].at(static_cast<int>(i / nc), r) = v;
    }
  }
  return img;
}

namespace detail {

struct PngFile {
  std::FILE* f = nullptr;
  ~PngFile() {
    if (f) std::fclose(f);
  }
};

inline double srgb_to_linear(double v) {
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

}  // namespace detail

namespace detail {

// Rows are stored top first; `pixels` holds width * channels bytes per row.
inline void write_png_bytes(const std::string& path, int w, int h, int channels, const std::vector<png_byte>& pixels) {
  PngFile file{std::fopen(path.c_str(), "wb")};
  if (!file.f) throw ConfigError("cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ConfigError("libpng failed writing " + path);
  }
  png_init_io(png, file.f);
  png_set_IHDR(png, info, w, h, 8, channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(w) * channels;
  for (int r = 0; r < h; ++r) png_write_row(png, pixels.data() + r * stride);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace detail

// 8-bit PNG preview, values clamped to [0, 1] after dividing by `scale`
// (0 = image maximum). Written top row first, so row height-1 leads.
inline void write_png(const std::string& path, const std::vector<const Image<double>*>& planes, double scale = 0.0) {
  if (planes.size() != 1 && planes.size() != 3) throw ConfigError("PNG preview supports 1 or 3 channels");
  const int w = planes.front()->width;
  const int h = planes.front()->height;
  if (scale <= 0.0) {
    for (const auto* p : planes) {
      for (double v : p->data) scale = std::max(scale, v);
    }
    if (scale <= 0.0) scale = 1.0;
  }
  const std::size_t n = planes.size();
  std::vector<png_byte> pixels(static_cast<std::size_t>(w) * h * n);
  for (int r = h - 1; r >= 0; --r) {
    for (int c = 0; c < w; ++c) {
      for (std::size_t k = 0; k < n; ++k) {
        const double v = std::clamp(planes[k]->at(c, r) / scale, 0.0, 1.0);
        pixels[(static_cast<std::size_t>(h - 1 - r) * w + c) * n + k] = static_cast<png_byte>(std::lround(v * 255.0));
      }
    }
  }
  detail::write_png_bytes(path, w, h, static_cast<int>(n), pixels);
}

inline void write_png(const std::string& path, const Image<double>& img, double scale = 0.0) {
  write_png(path, std::vector<const Image<double>*>{&img}, scale);
}

// 8- or 16-bit PNG decoded from sRGB to linear light; gray or RGB, alpha
// dropped. The top row of the file becomes the highest image row.
inline ColorImage read_png(const std::string& path) {
  detail::PngFile file{std::fopen(path.c_str(), "rb")};
  if (!file.f) throw ConfigError("cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParseError(path, 1, "not a readable PNG");
  }
  png_init_io(png, file.f);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int nc = png_get_channels(png, info);
  const int bits = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  std::vector<png_byte> buf(stride * h);
  std::vector<png_bytep> rows(h);
  for (int r = 0; r < h; ++r) rows[r] = buf.data() + r * stride;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  ColorImage img;
  img.channels.assign(nc, Image<double>(w, h));
  const double maxv = bits == 16 ? 65535.0 : 255.0;
  for (int r = 0; r < h; ++r) {
    const png_byte* src = rows[r];
    for (int c = 0; c < w; ++c) {
      for (int k = 0; k < nc; ++k) {
        double v;
        if (bits == 16) {
          std::uint16_t s;
          std::memcpy(&s, src + 2 * (c * nc + k), 2);
          v = s / maxv;
        } else {
          v = src[c * nc + k] / maxv;
        }
        img.channels[k].at(c, h - 1 - r) = detail::srgb_to_linear(v);
      }
    }
  }
  return img;
}

// Scene loader by extension: .pfm (linear) or .png (sRGB).
inline ColorImage load_scene(const std::string& path) {
  const auto dot = path.find_last_of('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (ext == "pfm") return read_pfm(path);
  if (ext == "png") return read_png(path);
  throw ConfigError("unsupported scene format: " + path);
}

// Luminance-free channel collapse: mean of the channels.
inline Image<double> to_gray(const ColorImage& img) {
  if (img.channels.empty()) throw ConfigError("empty image");
  if (img.channels.size() == 1) return img.channels.front();
  Image<double> out(img.width(), img.height());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double s = 0.0;
    for (const auto& ch : img.channels) s += ch.data[i];
    out.data[i] = s / static_cast<double>(img.channels.size());
  }
  return out;
}

}  // namespace rwsim
