#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "rwsim/core/dual.hpp"
#include "rwsim/core/error.hpp"

namespace rwsim {

enum class SurfaceKind { plane, sphere, even_asphere, freeform };

inline constexpr std::size_t kAsphereTerms = 5;  // r^4, r^6, ..., r^12
inline constexpr int kFreeformDegree = 6;
inline constexpr std::size_t kFreeformTerms = 28;  // x^m y^n with m + n <= 6

// Terms ordered by total degree, then by ascending power of y.
constexpr std::size_t freeform_index(int m, int n) {
  const int d = m + n;
  return static_cast<std::size_t>(d * (d + 1) / 2 + n);
}

constexpr std::pair<int, int> freeform_powers(std::size_t index) {
  int d = 0;
  while (static_cast<std::size_t>((d + 1) * (d + 2) / 2) <= index) ++d;
  const int n = static_cast<int>(index) - d * (d + 1) / 2;
  return {d - n, n};
}

constexpr int asphere_order(std::size_t index) { return 4 + 2 * static_cast<int>(index); }

inline std::string_view to_string(SurfaceKind k) {
  switch (k) {
    case SurfaceKind::plane:
      return "plane";
    case SurfaceKind::sphere:
      return "sphere";
    case SurfaceKind::even_asphere:
      return "even-asphere";
    case SurfaceKind::freeform:
      return "xy-polynomial-freeform";
  }
  return "?";
}

inline std::optional<SurfaceKind> parse_surface_kind(std::string_view s) {
  if (s == "plane") return SurfaceKind::plane;
  if (s == "sphere") return SurfaceKind::sphere;
  if (s == "even-asphere" || s == "asphere") return SurfaceKind::even_asphere;
  if (s == "xy-polynomial-freeform" || s == "freeform") return SurfaceKind::freeform;
  return std::nullopt;
}

// A rotationally symmetric conic base plus either even radial terms
// (even-asphere) or an xy polynomial (freeform). Lengths in mm.
template <class T>
struct BasicSurface {
  SurfaceKind kind = SurfaceKind::plane;
  T curvature{};
  T conic{};
  std::array<T, kAsphereTerms> asphere{};
  std::array<T, kFreeformTerms> freeform{};
  T z{};
  double semi_aperture = 1.0;
  std::string material_after = "air";
  bool is_stop = false;
};

using Surface = BasicSurface<double>;

template <class T>
struct SagSample {
  T value;
  T dx;  // d sag / dx
  T dy;  // d sag / dy
};

// Sag with its lateral gradient, or nullopt where the conic radicand is <= 0.
template <class T>
std::optional<SagSample<T>> try_sag(const BasicSurface<T>& s, const T& x, const T& y) {
  using std::sqrt;
  SagSample<T> out{T(0.0), T(0.0), T(0.0)};
  if (s.kind == SurfaceKind::plane) return out;

  const T r2 = x * x + y * y;
  if (value_of(s.curvature) != 0.0 || tangent_width_v<T> > 0) {
    const T& c = s.curvature;
    const T radicand = 1.0 - (1.0 + s.conic) * c * c * r2;
    if (!(value_of(radicand) > 0.0)) return std::nullopt;
    const T root = sqrt(radicand);
    out.value = c * r2 / (1.0 + root);
    const T slope = c / root;  // d sag / d r divided by r
    out.dx = slope * x;
    out.dy = slope * y;
  }

  if (s.kind == SurfaceKind::even_asphere) {
    // sum_i a_i r^(2i+4); derivative wrt x is sum_i a_i (2i+4) r^(2i+2) x
    T r_pow = r2 * r2;   // r^4
    T dr_pow = 4.0 * r2;  // d(r^4)/dx / x
    for (std::size_t i = 0; i < kAsphereTerms; ++i) {
      const T& a = s.asphere[i];
      if (value_of(a) != 0.0 || tangent_width_v<T> > 0) {
        out.value += a * r_pow;
        const T g = a * dr_pow;
        out.dx += g * x;
        out.dy += g * y;
      }
      const double order = asphere_order(i);
      dr_pow = (order + 2.0) * r_pow;
      r_pow = r_pow * r2;
    }
  } else if (s.kind == SurfaceKind::freeform) {
    std::array<T, kFreeformDegree + 1> xp;
    std::array<T, kFreeformDegree + 1> yp;
    xp[0] = T(1.0);
    yp[0] = T(1.0);
    for (int p = 1; p <= kFreeformDegree; ++p) {
      xp[p] = xp[p - 1] * x;
      yp[p] = yp[p - 1] * y;
    }
    for (std::size_t i = 0; i < kFreeformTerms; ++i) {
      const T& f = s.freeform[i];
      if (value_of(f) == 0.0 && !is_dual_v<T>) continue;
      if constexpr (is_dual_v<T>) {
        bool zero = f.value == 0.0;
        for (double t : f.tangent) zero = zero && t == 0.0;
        if (zero) continue;
      }
      const auto [m, n] = freeform_powers(i);
      out.value += f * xp[m] * yp[n];
      if (m > 0) out.dx += f * static_cast<double>(m) * xp[m - 1] * yp[n];
      if (n > 0) out.dy += f * static_cast<double>(n) * xp[m] * yp[n - 1];
    }
  }
  return out;
}

template <class T>
T sag(const BasicSurface<T>& s, const T& x, const T& y) {
  auto out = try_sag(s, x, y);
  if (!out) throw SurfaceDomainError("sag radicand <= 0 at r = " +
                                     std::to_string(std::hypot(value_of(x), value_of(y))));
  return out->value;
}

// Curvature seen by paraxial rays (conic base plus quadratic freeform terms).
template <class T>
T paraxial_curvature(const BasicSurface<T>& s) {
  if (s.kind == SurfaceKind::plane) return T(0.0);
  if (s.kind == SurfaceKind::freeform) {
    return s.curvature + s.freeform[freeform_index(2, 0)] + s.freeform[freeform_index(0, 2)];
  }
  return s.curvature;
}

}  // namespace rwsim
