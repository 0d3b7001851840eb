#pragma once

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "rwsim/imaging/psf_grid.hpp"

namespace rwsim {

template <class T>
struct Measurement {
  Image<T> image;
  Image<double> valid;  // 1 where the full PSF window lies on the sensor
  double pitch = 0.0;
  std::vector<double> wavelengths_nm;
};

namespace detail {

inline int fft_size(int n) {
  for (int s = std::max(n, 1);; ++s) {
    int r = s;
    for (int p : {2, 3, 5, 7}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return s;
  }
}

struct FftwBuffer {
  void* p = nullptr;
  explicit FftwBuffer(std::size_t bytes) : p(fftw_malloc(bytes)) {
    if (!p) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(p); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  double* real() { return static_cast<double*>(p); }
  fftw_complex* cplx() { return static_cast<fftw_complex*>(p); }
};

// Forward/backward real 2-D plans per padded size. Planning is serialised;
// execution uses the new-array interface and is thread-safe.
class FftPlans {
 public:
  struct Pair {
    fftw_plan forward;
    fftw_plan backward;
  };

  static FftPlans& instance() {
    static FftPlans plans;
    return plans;
  }

  Pair get(int ny, int nx) {
    std::lock_guard lock(mutex_);
    const auto key = std::pair{ny, nx};
    const auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    const std::size_t nr = static_cast<std::size_t>(ny) * nx;
    const std::size_t nc = static_cast<std::size_t>(ny) * (nx / 2 + 1);
    FftwBuffer re(nr * sizeof(double));
    FftwBuffer co(nc * sizeof(fftw_complex));
    Pair p{fftw_plan_dft_r2c_2d(ny, nx, re.real(), co.cplx(), FFTW_ESTIMATE),
           fftw_plan_dft_c2r_2d(ny, nx, co.cplx(), re.real(), FFTW_ESTIMATE)};
    plans_.emplace(key, p);
    return p;
  }

  ~FftPlans() {
    for (auto& [k, p] : plans_) {
      fftw_destroy_plan(p.forward);
      fftw_destroy_plan(p.backward);
    }
  }

 private:
  std::mutex mutex_;
  std::map<std::pair<int, int>, Pair> plans_;
};

// Linear convolution of a bw x bh source block with a K x K kernel plane,
// full output (bw + K - 1) x (bh + K - 1), row-major.
class BlockConvolver {
 public:
  BlockConvolver(int bw, int bh, int k)
      : bw_(bw), bh_(bh), k_(k), nx_(fft_size(bw + k - 1)), ny_(fft_size(bh + k - 1)),
        nc_(static_cast<std::size_t>(ny_) * (nx_ / 2 + 1)),
        plans_(FftPlans::instance().get(ny_, nx_)),
        real_(static_cast<std::size_t>(nx_) * ny_ * sizeof(double)),
        src_hat_(nc_ * sizeof(fftw_complex)),
        work_(nc_ * sizeof(fftw_complex)) {}

  void set_source(const std::vector<double>& block) {
    fill_real(block, bw_, bh_);
    fftw_execute_dft_r2c(plans_.forward, real_.real(), src_hat_.cplx());
  }

  // Returns the full linear convolution of the source with `kernel`.
  std::vector<double> convolve(const std::vector<double>& kernel) {
    fill_real(kernel, k_, k_);
    fftw_execute_dft_r2c(plans_.forward, real_.real(), work_.cplx());
    fftw_complex* w = work_.cplx();
    const fftw_complex* s = src_hat_.cplx();
    for (std::size_t i = 0; i < nc_; ++i) {
      const double re = w[i][0] * s[i][0] - w[i][1] * s[i][1];
      const double im = w[i][0] * s[i][1] + w[i][1] * s[i][0];
      w[i][0] = re;
      w[i][1] = im;
    }
    fftw_execute_dft_c2r(plans_.backward, work_.cplx(), real_.real());
    const int ow = bw_ + k_ - 1, oh = bh_ + k_ - 1;
    const double scale = 1.0 / (static_cast<double>(nx_) * ny_);
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    for (int r = 0; r < oh; ++r) {
      for (int c = 0; c < ow; ++c) out[r * ow + c] = real_.real()[r * nx_ + c] * scale;
    }
    return out;
  }

 private:
  void fill_real(const std::vector<double>& v, int w, int h) {
    double* d = real_.real();
    std::fill(d, d + static_cast<std::size_t>(nx_) * ny_, 0.0);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) d[r * nx_ + c] = v[r * w + c];
    }
  }

  int bw_, bh_, k_, nx_, ny_;
  std::size_t nc_;
  FftPlans::Pair plans_;
  FftwBuffer real_, src_hat_, work_;
};

// Number of tangent slots that are not identically zero in a PSF.
template <class T>
int used_tangents(const Image<T>& img) {
  if constexpr (!is_dual_v<T>) {
    return 0;
  } else {
    int used = 0;
    for (const auto& v : img.data) {
      for (int k = static_cast<int>(tangent_width_v<T>) - 1; k >= used; --k) {
        if (v.tangent[k] != 0.0) {
          used = k + 1;
          break;
        }
      }
    }
    return used;
  }
}

template <class T>
std::vector<double> plane_of(const Image<T>& img, int slot) {
  std::vector<double> out(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    if constexpr (is_dual_v<T>) {
      out[i] = slot < 0 ? img.data[i].value : img.data[i].tangent[slot];
    } else {
      out[i] = img.data[i];
    }
  }
  return out;
}

}  // namespace detail

inline Image<double> validity_mask(int width, int height, int window) {
  Image<double> m(width, height);
  const int h = window / 2;
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      m.at(c, r) = (c >= h && c < width - h && r >= h && r < height - h) ? 1.0 : 0.0;
    }
  }
  return m;
}

// I = sum_i (b' w_i) * h_i with each node's weighted latent image convolved
// (linearly, zero padded) against its re-centred PSF. Only the block of
// pixels where w_i > 0 is transformed. Node contributions are added in node
// order.
template <class T>
Measurement<T> render_measurement(const Image<double>& latent, const PSFGrid<T>& grid) {
  const int width = latent.width, height = latent.height;
  const int k = grid.window;
  if (k > width || k > height) throw ConfigError("PSF window larger than the sensor");
  const auto& g = grid.layout;
  if (g.cols.empty() || g.cols.back() >= width || g.rows.back() >= height) {
    throw ConfigError("PSF grid does not match the latent image");
  }
  const int half = k / 2;
  const std::size_t nodes = g.count();
  struct Contribution {
    int c0 = 0, r0 = 0, w = 0, h = 0;  // output block origin/size (may extend off-sensor)
    std::vector<std::vector<double>> planes;  // [0] value, [1 + s] tangent s
  };
  std::vector<Contribution> parts(nodes);

  parallel_for(nodes, [&](std::size_t n) {
    const int i = static_cast<int>(n % g.m), j = static_cast<int>(n / g.m);
    const int c0 = g.cols[std::max(i - 1, 0)], c1 = g.cols[std::min(i + 1, g.m - 1)];
    const int r0 = g.rows[std::max(j - 1, 0)], r1 = g.rows[std::min(j + 1, g.m - 1)];
    const int bw = c1 - c0 + 1, bh = r1 - r0 + 1;
    std::vector<double> block(static_cast<std::size_t>(bw) * bh, 0.0);
    bool any = false;
    for (int r = 0; r < bh; ++r) {
      for (int c = 0; c < bw; ++c) {
        const double b = latent.at(c0 + c, r0 + r);
        if (b == 0.0) continue;
        for (const auto& [idx, w] : interp_weights(Vec2<double>{pixel_center(c0 + c, width, grid.pitch),
                                                                pixel_center(r0 + r, height, grid.pitch)},
                                                   g)) {
          if (idx == n) {
            block[r * bw + c] = b * w;
            any = true;
          }
        }
      }
    }
    const auto& img = grid.psfs[n].intensity;
    if (!any || grid.psfs[n].vignetted) return;
    detail::BlockConvolver conv(bw, bh, k);
    conv.set_source(block);
    Contribution part;
    part.c0 = c0 - half;
    part.r0 = r0 - half;
    part.w = bw + k - 1;
    part.h = bh + k - 1;
    part.planes.push_back(conv.convolve(detail::plane_of(img, -1)));
    const int used = detail::used_tangents(img);
    for (int s = 0; s < used; ++s) part.planes.push_back(conv.convolve(detail::plane_of(img, s)));
    parts[n] = std::move(part);
  });

  Measurement<T> out;
  out.image = Image<T>(width, height);
  out.valid = validity_mask(width, height, k);
  out.pitch = grid.pitch;
  out.wavelengths_nm = {grid.wavelength_nm};
  for (const auto& part : parts) {
    if (part.planes.empty()) continue;
    for (int r = 0; r < part.h; ++r) {
      const int y = part.r0 + r;
      if (y < 0 || y >= height) continue;
      for (int c = 0; c < part.w; ++c) {
        const int x = part.c0 + c;
        if (x < 0 || x >= width) continue;
        const std::size_t src = static_cast<std::size_t>(r) * part.w + c;
        T& dst = out.image.at(x, y);
        if constexpr (is_dual_v<T>) {
          dst.value += part.planes[0][src];
          for (std::size_t s = 1; s < part.planes.size(); ++s) dst.tangent[s - 1] += part.planes[s][src];
        } else {
          dst += part.planes[0][src];
        }
      }
    }
  }
  return out;
}

// Exact superposition: every non-zero latent pixel gets its own PSF, traced
// from the field point imaged to that pixel. Quadratic cost; sensors larger
// than 64 x 64 are refused.
template <class T>
Measurement<T> dense_superposition_oracle(const Image<double>& latent, const BasicLensSystem<T>& sys,
                                          const PsfOptions& opt, const DistortionMap* map = nullptr) {
  if (latent.width > 64 || latent.height > 64) throw SizeError("dense oracle is limited to 64 x 64 images");
  const int k = opt.window;
  const double pitch = opt.pitch_mm > 0.0 ? opt.pitch_mm : sys.pixel_pitch;
  const LensSystem values = detach_system(sys);
  const int width = latent.width, height = latent.height;
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < latent.size(); ++i) {
    if (latent.data[i] != 0.0) active.push_back(i);
  }
  std::vector<Vec2<double>> fields(active.size());
  std::vector<bool> ok(active.size(), true);
  parallel_for(active.size(), [&](std::size_t a) {
    const int c = static_cast<int>(active[a] % width), r = static_cast<int>(active[a] / width);
    try {
      fields[a] = field_for_pixel(values, {pixel_center(c, width, pitch), pixel_center(r, height, pitch)},
                                  opt.wavelength_nm, map);
    } catch (const NumericError&) {
      ok[a] = false;
    }
  });
  PsfOptions inner = opt;
  inner.pitch_mm = pitch;
  Measurement<T> out;
  out.image = Image<T>(width, height);
  out.valid = validity_mask(width, height, k);
  out.pitch = pitch;
  out.wavelengths_nm = {opt.wavelength_nm};
  const int half = k / 2;
  for (std::size_t a = 0; a < active.size(); ++a) {
    if (!ok[a]) continue;
    const int c = static_cast<int>(active[a] % width), r = static_cast<int>(active[a] / width);
    PSF<T> psf;
    try {
      psf = render_psf(sys, source_at_field(sys, fields[a]), inner);
    } catch (const VignettedFieldError&) {
      continue;
    }
    const double b = latent.data[active[a]];
    for (int kr = 0; kr < k; ++kr) {
      const int y = r + kr - half;
      if (y < 0 || y >= height) continue;
      for (int kc = 0; kc < k; ++kc) {
        const int x = c + kc - half;
        if (x < 0 || x >= width) continue;
        out.image.at(x, y) += b * psf.intensity.at(kc, kr);
      }
    }
  }
  return out;
}

}  // namespace rwsim
