#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "rwsim/core/complex.hpp"
#include "rwsim/core/vec.hpp"
#include "rwsim/raytrace/aim.hpp"

namespace rwsim {

inline double wavelength_mm(double wavelength_nm) { return wavelength_nm * 1e-6; }
inline double wavenumber(double wavelength_nm) {
  return 2.0 * std::numbers::pi / wavelength_mm(wavelength_nm);
}

template <class T>
struct WavefrontSample {
  Vec3<T> position;
  Complex<T> field;
  Vec3<T> normal;  // unit; points toward the propagation target
};

template <class T>
struct ReferenceSphere {
  Vec3<T> center;
  T radius{};
  T exit_pupil_z{};
  std::vector<WavefrontSample<T>> samples;
  std::vector<T> path;  // optical path length of each sample, mm
  double wavelength_nm = 0.0;
  std::size_t launched = 0;
};

// Sphere about the principal-ray sensor hit through the paraxial exit-pupil
// centre. Every live pupil ray is carried (forward or backward) in image
// space to its near intersection with the sphere.
template <class T>
ReferenceSphere<T> build_reference_sphere(const BasicLensSystem<T>& sys, const PupilSample<T>& pupil,
                                          double wavelength_nm) {
  using std::sqrt;
  const auto px = paraxial(sys, wavelength_nm);
  const double n_img = sys.media(wavelength_nm).back();
  const double k = wavenumber(wavelength_nm);
  ReferenceSphere<T> s;
  s.wavelength_nm = wavelength_nm;
  s.launched = pupil.rays.size();
  s.center = pupil.principal.ray.origin;
  s.exit_pupil_z = px.exit_pupil_z;
  s.radius = norm(s.center - Vec3<T>{T(0.0), T(0.0), px.exit_pupil_z});
  if (!(value_of(s.radius) > 0.0)) {
    throw DegenerateSystemError("reference sphere has zero radius (sensor at the exit pupil)");
  }
  s.samples.reserve(pupil.live);
  s.path.reserve(pupil.live);
  for (const auto& r : pupil.rays) {
    if (!r.alive) continue;
    const Vec3<T> oc = r.origin - s.center;
    const T b = dot(r.direction, oc);
    const T disc = b * b - (dot(oc, oc) - s.radius * s.radius);
    if (!(value_of(disc) > 0.0)) continue;
    const T t = -b - sqrt(disc);
    WavefrontSample<T> w;
    w.position = r.origin + t * r.direction;
    const T delta = r.opl + n_img * t;
    w.field = r.amplitude * cexp_i(k * delta);
    w.normal = (s.center - w.position) * (T(1.0) / s.radius);
    s.samples.push_back(w);
    s.path.push_back(delta);
  }
  if (s.samples.empty()) throw VignettedFieldError("no pupil ray reaches the reference sphere");
  return s;
}

template <class T>
ReferenceSphere<T> build_reference_sphere(const BasicLensSystem<T>& sys, const Source& src,
                                          double wavelength_nm, std::size_t n_rays,
                                          const PupilOptions& opt = {}) {
  return build_reference_sphere(sys, sample_pupil(sys, src, wavelength_nm, n_rays, opt),
                                wavelength_nm);
}

}  // namespace rwsim
