#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "rwsim/core/complex.hpp"
#include "rwsim/core/parallel.hpp"
#include "rwsim/wavefield/sphere.hpp"

namespace rwsim {

// Evaluation is chunked into query tiles x sample batches. Each query point
// accumulates its samples in index order whatever the chunking, so results
// are independent of tile size, batch size and worker count.
struct RsOptions {
  std::size_t tile = 64 * 64;
  std::size_t batch = 8192;
};

namespace detail {

// acc[q] += weight * sum_i v_i exp(jk r)/r cos(theta) for samples [begin, end).
template <class T>
void accumulate_rs(const std::vector<WavefrontSample<T>>& samples, std::size_t begin, std::size_t end,
                   const Complex<double>& weight, const Vec3<T>& q, double k, Complex<T>& acc);

// Dual specialisation: values follow the double path operation for operation
// (so value parts match a double evaluation bit for bit); tangents use the
// hand-derived chain rule instead of generic Dual temporaries.
template <std::size_t N>
void accumulate_rs(const std::vector<WavefrontSample<Dual<N>>>& samples, std::size_t begin, std::size_t end,
                   const Complex<double>& weight, const Vec3<Dual<N>>& q, double k, Complex<Dual<N>>& acc) {
  const bool unit_weight = weight.re == 1.0 && weight.im == 0.0;
  const double qx = q.x.value, qy = q.y.value, qz = q.z.value;
  for (std::size_t i = begin; i < end; ++i) {
    const auto& s = samples[i];
    const double dx = qx - s.position.x.value;
    const double dy = qy - s.position.y.value;
    const double dz = qz - s.position.z.value;
    const double nx = s.normal.x.value, ny = s.normal.y.value, nz = s.normal.z.value;
    const double r2 = dx * dx + dy * dy + dz * dz;
    const double r = std::sqrt(r2);
    const double dn = dx * nx + dy * ny + dz * nz;
    const double cos_theta = dn / r;
    const double phase = k * r;
    const double scale = cos_theta / r;
    const double cp = std::cos(phase);
    const double sp = std::sin(phase);
    const double c = cp * scale;
    const double sn = sp * scale;
    const double vr = s.field.re.value, vi = s.field.im.value;
    double re = vr * c - vi * sn;
    double im = vr * sn + vi * c;
    std::array<double, N> tre, tim;
    for (std::size_t t = 0; t < N; ++t) {
      const double ddx = q.x.tangent[t] - s.position.x.tangent[t];
      const double ddy = q.y.tangent[t] - s.position.y.tangent[t];
      const double ddz = q.z.tangent[t] - s.position.z.tangent[t];
      const double dr = (dx * ddx + dy * ddy + dz * ddz) / r;
      const double ddn = ddx * nx + ddy * ny + ddz * nz + dx * s.normal.x.tangent[t] +
                         dy * s.normal.y.tangent[t] + dz * s.normal.z.tangent[t];
      const double dcos = (ddn - cos_theta * dr) / r;
      const double dscale = (dcos - scale * dr) / r;
      const double dc = dscale * cp - scale * sp * k * dr;
      const double ds = dscale * sp + scale * cp * k * dr;
      const double dvr = s.field.re.tangent[t], dvi = s.field.im.tangent[t];
      tre[t] = dvr * c + vr * dc - dvi * sn - vi * ds;
      tim[t] = dvr * sn + vr * ds + dvi * c + vi * dc;
    }
    if (!unit_weight) {
      const double wr = re * weight.re - im * weight.im;
      im = re * weight.im + im * weight.re;
      re = wr;
      for (std::size_t t = 0; t < N; ++t) {
        const double a = tre[t] * weight.re - tim[t] * weight.im;
        tim[t] = tre[t] * weight.im + tim[t] * weight.re;
        tre[t] = a;
      }
    }
    acc.re.value += re;
    acc.im.value += im;
    for (std::size_t t = 0; t < N; ++t) {
      acc.re.tangent[t] += tre[t];
      acc.im.tangent[t] += tim[t];
    }
  }
}

template <class T>
void accumulate_rs(const std::vector<WavefrontSample<T>>& samples, std::size_t begin, std::size_t end,
                   const Complex<double>& weight, const Vec3<T>& q, double k, Complex<T>& acc) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const bool unit_weight = weight.re == 1.0 && weight.im == 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    const auto& s = samples[i];
    const Vec3<T> d = q - s.position;
    const T r2 = dot(d, d);
    const T r = sqrt(r2);
    const T cos_theta = dot(d, s.normal) / r;
    const T phase = k * r;
    const T scale = cos_theta / r;
    const T c = cos(phase) * scale;
    const T sn = sin(phase) * scale;
    // v * (c + j sn)
    T re = s.field.re * c - s.field.im * sn;
    T im = s.field.re * sn + s.field.im * c;
    if (!unit_weight) {
      const T wr = re * weight.re - im * weight.im;
      im = re * weight.im + im * weight.re;
      re = wr;
    }
    acc.re += re;
    acc.im += im;
  }
}

}  // namespace detail

// Weighted sample set contributing to a coherent sum.
template <class T>
struct CoherentSource {
  const std::vector<WavefrontSample<T>>* samples = nullptr;
  Complex<double> weight{1.0, 0.0};
  double wavelength_nm = 0.0;
};

// Unnormalised complex field sum_s w_s sum_i v_i exp(jk r)/r cos(theta) at
// each query point.
template <class T>
std::vector<Complex<T>> coherent_field(const std::vector<CoherentSource<T>>& sources,
                                       const std::vector<Vec3<T>>& query, const RsOptions& opt = {}) {
  if (sources.empty()) throw VignettedFieldError("coherent sum over zero sources");
  const double wl = sources.front().wavelength_nm;
  for (const auto& s : sources) {
    if (s.wavelength_nm != wl) throw ConfigError("coherent sum mixes wavelengths");
    if (!s.samples) throw ConfigError("coherent source without samples");
  }
  const double k = wavenumber(wl);
  std::vector<Complex<T>> out(query.size(), Complex<T>(T(0.0), T(0.0)));
  const std::size_t tile = std::max<std::size_t>(1, opt.tile);
  const std::size_t batch = std::max<std::size_t>(1, opt.batch);
  const std::size_t tiles = (query.size() + tile - 1) / tile;
  parallel_for(tiles, [&](std::size_t t) {
    const std::size_t q0 = t * tile;
    const std::size_t q1 = std::min(query.size(), q0 + tile);
    for (const auto& src : sources) {
      const auto& samples = *src.samples;
      for (std::size_t b0 = 0; b0 < samples.size(); b0 += batch) {
        const std::size_t b1 = std::min(samples.size(), b0 + batch);
        for (std::size_t q = q0; q < q1; ++q) {
          detail::accumulate_rs(samples, b0, b1, src.weight, query[q], k, out[q]);
        }
      }
    }
  });
  return out;
}

// |field + extra|^2 / (N_total lambda^2); N_total counts every sample of every
// source plus `extra_samples` standing behind a precomputed extra field.
template <class T>
std::vector<T> coherent_integrate(const std::vector<CoherentSource<T>>& sources,
                                  const std::vector<Vec3<T>>& query, const RsOptions& opt = {},
                                  const std::vector<Complex<double>>* extra = nullptr,
                                  std::size_t extra_samples = 0) {
  auto field = coherent_field(sources, query, opt);
  std::size_t n_total = extra_samples;
  for (const auto& s : sources) n_total += s.samples->size();
  if (n_total == 0) throw VignettedFieldError("coherent sum over zero samples");
  const double lambda = wavelength_mm(sources.front().wavelength_nm);
  const double pref = 1.0 / (static_cast<double>(n_total) * lambda * lambda);
  if (extra && extra->size() != query.size()) throw ConfigError("extra field size mismatch");
  std::vector<T> out(query.size());
  for (std::size_t q = 0; q < query.size(); ++q) {
    Complex<T> f = field[q];
    if (extra) {
      f.re += (*extra)[q].re;
      f.im += (*extra)[q].im;
    }
    out[q] = pref * norm2(f);
  }
  return out;
}

// Incoherent-mode PSF values h(u) = |sum|^2 / (N lambda^2), N = live samples.
template <class T>
std::vector<T> rs_integrate(const ReferenceSphere<T>& sphere, const std::vector<Vec3<T>>& query,
                            const RsOptions& opt = {}) {
  if (sphere.samples.empty()) throw VignettedFieldError("reference sphere has no samples");
  return coherent_integrate<T>({CoherentSource<T>{&sphere.samples, {1.0, 0.0}, sphere.wavelength_nm}},
                               query, opt);
}

}  // namespace rwsim
