#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "rwsim/core/dual.hpp"
#include "rwsim/core/error.hpp"
#include "rwsim/lens/system.hpp"

namespace rwsim {

template <class T>
struct ParaxialSummary {
  T efl{};
  T exit_pupil_z{};
  T exit_pupil_radius{};
  T back_focal_distance{};
  T entrance_pupil_z{};
  T entrance_pupil_radius{};
};

// Paraxial ray state at a surface vertex: height y and reduced angle nu = n*u.
template <class T>
struct YNu {
  T y{};
  T nu{};
};

namespace detail {

inline constexpr double kAfocalThreshold = 1e-12;

// Refracts at surfaces [begin, end), transferring between vertices. The
// returned state sits at the vertex of surface end - 1, after refraction.
template <class T>
YNu<T> ynu_trace(const BasicLensSystem<T>& sys, const std::vector<double>& n, std::size_t begin,
                 std::size_t end, YNu<T> s) {
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) s.y = s.y + (sys.surfaces[i].z - sys.surfaces[i - 1].z) * s.nu / n[i];
    const T power = paraxial_curvature(sys.surfaces[i]) * (n[i + 1] - n[i]);
    s.nu = s.nu - s.y * power;
  }
  return s;
}

}  // namespace detail

template <class T>
ParaxialSummary<T> paraxial(const BasicLensSystem<T>& sys, double wavelength_nm) {
  using std::abs;
  if (sys.surfaces.empty()) throw DegenerateSystemError("paraxial: system has no surfaces");
  const auto n = sys.media(wavelength_nm);
  const std::size_t count = sys.surfaces.size();
  const std::size_t stop = sys.stop_index();
  const double n_img = n.back();
  const T z_last = sys.surfaces.back().z;
  const T z_first = sys.surfaces.front().z;
  ParaxialSummary<T> out;

  // Marginal ray with unit input height.
  const YNu<T> m = detail::ynu_trace(sys, n, 0, count, YNu<T>{T(1.0), T(0.0)});
  if (abs(value_of(m.nu)) < detail::kAfocalThreshold) {
    throw DegenerateSystemError("paraxial: afocal system (no finite focal length)");
  }
  out.efl = -1.0 / m.nu;
  out.back_focal_distance = -m.y * n_img / m.nu;

  // Exit pupil: image of the stop through the downstream surfaces.
  const T sa_stop = T(sys.surfaces[stop].semi_aperture);
  if (stop + 1 == count) {
    out.exit_pupil_z = sys.surfaces[stop].z;
    out.exit_pupil_radius = sa_stop;
  } else {
    const YNu<T> c = detail::ynu_trace(sys, n, stop, count, YNu<T>{T(0.0), T(1.0)});
    if (abs(value_of(c.nu)) < detail::kAfocalThreshold) {
      throw DegenerateSystemError("paraxial: exit pupil at infinity (image-space telecentric)");
    }
    out.exit_pupil_z = z_last - c.y * n_img / c.nu;
    const YNu<T> e = detail::ynu_trace(sys, n, stop, count, YNu<T>{sa_stop, T(0.0)});
    out.exit_pupil_radius = abs(e.y + (out.exit_pupil_z - z_last) * e.nu / n_img);
  }
  if (!(value_of(out.exit_pupil_radius) > 0.0)) {
    throw DegenerateSystemError("paraxial: exit pupil radius is zero");
  }

  // Entrance pupil: image of the stop through the upstream surfaces. A and B
  // are the stop heights of rays leaving the first vertex plane with
  // (y, u) = (1, 0) and (0, 1).
  if (stop == 0) {
    out.entrance_pupil_z = z_first;
    out.entrance_pupil_radius = sa_stop;
  } else {
    auto to_stop = [&](YNu<T> s) {
      const YNu<T> r = detail::ynu_trace(sys, n, 0, stop, s);
      return r.y + (sys.surfaces[stop].z - sys.surfaces[stop - 1].z) * r.nu / n[stop];
    };
    const T a = to_stop(YNu<T>{T(1.0), T(0.0)});
    const T b = to_stop(YNu<T>{T(0.0), T(n[0])});
    if (abs(value_of(a)) < detail::kAfocalThreshold) {
      throw DegenerateSystemError("paraxial: entrance pupil at infinity");
    }
    out.entrance_pupil_z = z_first + b / a;
    if (sys.object_at_infinity()) {
      out.entrance_pupil_radius = sa_stop / abs(a);
    } else {
      const double z_obj = sys.object_z();
      out.entrance_pupil_radius =
          abs(sa_stop * (out.entrance_pupil_z - z_obj) / (a * (z_first - z_obj) + b));
    }
  }
  return out;
}

template <class T>
T f_number(const BasicLensSystem<T>& sys, double wavelength_nm) {
  const auto p = paraxial(sys, wavelength_nm);
  return p.efl / (2.0 * p.entrance_pupil_radius);
}

// |F_a - F_b|.
inline double mf(const LensSystem& a, const LensSystem& b, double wavelength_nm) {
  return std::abs(f_number(a, wavelength_nm) - f_number(b, wavelength_nm));
}

// Relative RMS difference, normalised by the RMS of b (the reference).
inline double rrmse(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw ConfigError("rrmse: parameter vectors must be non-empty and of equal length");
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(num / den);
}

inline double rrmse(const LensSystem& a, const LensSystem& b) {
  return rrmse(parameter_values(a, b.selection), parameter_values(b, b.selection));
}

}  // namespace rwsim
