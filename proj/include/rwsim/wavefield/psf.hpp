#pragma once

#include <string>
#include <vector>

#include "rwsim/core/image.hpp"
#include "rwsim/wavefield/rs.hpp"
#include "rwsim/wavefield/sphere.hpp"

namespace rwsim {

template <class T>
struct PSF {
  Image<T> intensity;
  Vec2<T> center_mm;  // principal-ray sensor hit
  double pitch_mm = 0.0;
  double wavelength_nm = 0.0;
  std::string field;
  std::size_t n_rays = 0;
  bool vignetted = false;
};

struct PsfOptions {
  double wavelength_nm = 587.6;
  std::size_t n_rays = 4096;
  int window = 63;        // odd
  double pitch_mm = 0.0;  // 0 = sensor pixel pitch
  PupilOptions pupil{};
  RsOptions rs{};
};

// Sensor-plane query points for a window x window grid centred on `center`.
// Row-major, row index growing with y.
template <class T>
std::vector<Vec3<T>> sensor_grid(const Vec2<T>& center, const T& z, int window, double pitch) {
  std::vector<Vec3<T>> q;
  q.reserve(static_cast<std::size_t>(window) * window);
  for (int r = 0; r < window; ++r) {
    const double dy = pixel_center(r, window, pitch);
    for (int c = 0; c < window; ++c) {
      const double dx = pixel_center(c, window, pitch);
      q.push_back({center.x + dx, center.y + dy, z});
    }
  }
  return q;
}

template <class T>
PSF<T> psf_from_sphere(const BasicLensSystem<T>& sys, const ReferenceSphere<T>& sphere, const Source& src,
                       const PsfOptions& opt, double pitch) {
  PSF<T> psf;
  psf.center_mm = {sphere.center.x, sphere.center.y};
  psf.pitch_mm = pitch;
  psf.wavelength_nm = opt.wavelength_nm;
  psf.field = src.describe();
  psf.n_rays = sphere.samples.size();
  const auto q = sensor_grid(psf.center_mm, sys.sensor_z, opt.window, pitch);
  psf.intensity = Image<T>(opt.window, opt.window);
  psf.intensity.data = rs_integrate(sphere, q, opt.rs);
  return psf;
}

// Incoherent PSF of a point source, sampled on the sensor around the
// principal-ray hit.
template <class T>
PSF<T> render_psf(const BasicLensSystem<T>& sys, const Source& src, const PsfOptions& opt = {}) {
  if (opt.window < 1 || opt.window % 2 == 0) throw ConfigError("PSF window must be odd and positive");
  const double pitch = opt.pitch_mm > 0.0 ? opt.pitch_mm : sys.pixel_pitch;
  if (!(pitch > 0.0)) throw ConfigError("PSF pitch must be positive");
  const auto sphere = build_reference_sphere(sys, src, opt.wavelength_nm, opt.n_rays, opt.pupil);
  return psf_from_sphere(sys, sphere, src, opt, pitch);
}

template <class T>
PSF<double> value_of(const PSF<T>& p) {
  PSF<double> out;
  out.intensity = value_of(p.intensity);
  out.center_mm = {value_of(p.center_mm.x), value_of(p.center_mm.y)};
  out.pitch_mm = p.pitch_mm;
  out.wavelength_nm = p.wavelength_nm;
  out.field = p.field;
  out.n_rays = p.n_rays;
  out.vignetted = p.vignetted;
  return out;
}

}  // namespace rwsim
