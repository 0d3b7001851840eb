#pragma once

#include <cmath>
#include <numbers>

#include "rwsim/core/error.hpp"
#include "rwsim/core/image.hpp"

namespace rwsim {

// Diffraction-limited pattern of a uniformly filled circular pupil.
// x = k a r / f; I(x) = (2 J1(x) / x)^2.
inline double airy_argument(double r_mm, double pupil_radius_mm, double efl_mm, double wavelength_nm) {
  return 2.0 * std::numbers::pi / (wavelength_nm * 1e-6) * pupil_radius_mm * r_mm / efl_mm;
}

inline double airy_profile(double x) {
  if (std::abs(x) < 1e-8) return 1.0;
  const double v = 2.0 * std::cyl_bessel_j(1.0, std::abs(x)) / std::abs(x);
  return v * v;
}

inline double airy_intensity(double r_mm, double pupil_radius_mm, double efl_mm, double wavelength_nm) {
  return airy_profile(airy_argument(r_mm, pupil_radius_mm, efl_mm, wavelength_nm));
}

// Radius of the first dark ring, from the first zero of J1 (3.8317...).
inline double airy_first_zero(double pupil_radius_mm, double efl_mm, double wavelength_nm) {
  constexpr double j11 = 3.8317059702075123;
  return j11 / (2.0 * std::numbers::pi) * wavelength_nm * 1e-6 * efl_mm / pupil_radius_mm;
}

// Fraction of total power inside radius x (in Airy units).
inline double airy_encircled_energy(double x) {
  const double j0 = std::cyl_bessel_j(0.0, x);
  const double j1 = std::cyl_bessel_j(1.0, x);
  return 1.0 - j0 * j0 - j1 * j1;
}

// Unit-peak Airy pattern on a window x window grid centred on the axis.
inline Image<double> airy_reference(double pupil_radius_mm, double efl_mm, double wavelength_nm, int window,
                                    double pitch_mm) {
  if (!(pupil_radius_mm > 0.0 && efl_mm > 0.0 && wavelength_nm > 0.0 && pitch_mm > 0.0) || window < 1) {
    throw ConfigError("airy_reference needs positive arguments");
  }
  Image<double> img(window, window);
  for (int r = 0; r < window; ++r) {
    const double y = pixel_center(r, window, pitch_mm);
    for (int c = 0; c < window; ++c) {
      const double x = pixel_center(c, window, pitch_mm);
      img.at(c, r) = airy_intensity(std::hypot(x, y), pupil_radius_mm, efl_mm, wavelength_nm);
    }
  }
  return img;
}

}  // namespace rwsim
