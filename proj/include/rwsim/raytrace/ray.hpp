#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "rwsim/core/dual.hpp"
#include "rwsim/core/vec.hpp"
#include "rwsim/lens/system.hpp"

namespace rwsim {

template <class T>
struct Ray {
  Vec3<T> origin;
  Vec3<T> direction;  // unit
  T opl{};            // accumulated optical path length, mm
  T amplitude{1.0};
  double wavelength_nm = 587.6;
  bool alive = true;

  void kill() {
    alive = false;
    amplitude = T(0.0);
  }
};

template <class T>
struct Intersection {
  T t;
  Vec3<T> point;
  Vec3<T> normal;  // unit, oriented against the incoming ray
};

inline constexpr double kNewtonTolerance = 1e-10;  // mm
inline constexpr int kNewtonMaxIterations = 64;
inline constexpr double kApertureSlack = 1.05;

// Newton solve of p_z(t) - z_s - sag(p_x(t), p_y(t)) = 0 starting from the
// vertex-plane hit. Iterates on values; the last step runs in T so the
// tangent of t follows the implicit function theorem. `values` must hold the
// values of `surf`.
template <class T>
std::optional<Intersection<T>> intersect(const Ray<T>& ray, const BasicSurface<T>& surf,
                                         const Surface& values) {
  if (!ray.alive) return std::nullopt;
  const Vec3<double> o = value_of(ray.origin);
  const Vec3<double> d = value_of(ray.direction);
  if (!(d.z > 0.0)) return std::nullopt;

  auto residual = [&](double t) -> std::optional<std::pair<double, double>> {
    const double x = o.x + t * d.x;
    const double y = o.y + t * d.y;
    const auto s = try_sag(values, x, y);
    if (!s) return std::nullopt;
    const double f = o.z + t * d.z - values.z - s->value;
    const double fp = d.z - (s->dx * d.x + s->dy * d.y);
    return std::pair{f, fp};
  };

  double t = (values.z - o.z) / d.z;
  auto cur = residual(t);
  if (!cur) return std::nullopt;
  bool converged = std::abs(cur->first) < kNewtonTolerance;
  for (int it = 0; it < kNewtonMaxIterations && !converged; ++it) {
    if (cur->second == 0.0) return std::nullopt;
    double step = -cur->first / cur->second;
    std::optional<std::pair<double, double>> next;
    // Damped Newton: halve the step while the residual grows or leaves the domain.
    for (int damp = 0; damp < 30; ++damp) {
      next = residual(t + step);
      if (next && std::abs(next->first) <= std::abs(cur->first)) break;
      step *= 0.5;
    }
    if (!next) return std::nullopt;
    t += step;
    cur = next;
    converged = std::abs(cur->first) < kNewtonTolerance;
  }
  if (!converged) return std::nullopt;
  // Polish: one more step takes the quadratic convergence to round-off.
  if (cur->second != 0.0) {
    const double t2 = t - cur->first / cur->second;
    if (auto n2 = residual(t2); n2 && std::abs(n2->first) <= std::abs(cur->first)) {
      t = t2;
      cur = n2;
    }
  }
  if (t < 0.0) return std::nullopt;

  Intersection<T> out;
  if constexpr (is_dual_v<T>) {
    const T tc(t);
    const T x = ray.origin.x + tc * ray.direction.x;
    const T y = ray.origin.y + tc * ray.direction.y;
    const auto s = try_sag(surf, x, y);
    if (!s) return std::nullopt;
    const T f = ray.origin.z + tc * ray.direction.z - surf.z - s->value;
    const T fp = ray.direction.z - (s->dx * ray.direction.x + s->dy * ray.direction.y);
    out.t = tc - f / fp;
    out.t.value = t;  // keep values identical to a double trace
  } else {
    out.t = t;
  }
  out.point = ray.origin + out.t * ray.direction;
  const T r2 = out.point.x * out.point.x + out.point.y * out.point.y;
  const double limit = kApertureSlack * surf.semi_aperture;
  if (value_of(r2) > limit * limit) return std::nullopt;
  const auto s = try_sag(surf, out.point.x, out.point.y);
  if (!s) return std::nullopt;
  Vec3<T> n{s->dx, s->dy, T(-1.0)};
  n = normalized(n);
  if (value_of(dot(n, ray.direction)) > 0.0) n = -n;
  out.normal = n;
  return out;
}

template <class T>
std::optional<Intersection<T>> intersect(const Ray<T>& ray, const BasicSurface<T>& surf) {
  if constexpr (is_dual_v<T>) {
    Surface values;
    values.kind = surf.kind;
    values.curvature = value_of(surf.curvature);
    values.conic = value_of(surf.conic);
    for (std::size_t i = 0; i < kAsphereTerms; ++i) values.asphere[i] = value_of(surf.asphere[i]);
    for (std::size_t i = 0; i < kFreeformTerms; ++i) values.freeform[i] = value_of(surf.freeform[i]);
    values.z = value_of(surf.z);
    values.semi_aperture = surf.semi_aperture;
    return intersect(ray, surf, values);
  } else {
    return intersect(ray, surf, surf);
  }
}

// Vector Snell: t = (n1/n2) d + ((n1/n2) cos_i - cos_t) n, with n facing the
// incoming ray. Total internal reflection kills the ray.
template <class T>
Ray<T> refract(Ray<T> ray, const Vec3<T>& normal, const T& n1, const T& n2) {
  using std::sqrt;
  if (!ray.alive) return ray;
  const T eta = n1 / n2;
  const T cos_i = -dot(normal, ray.direction);
  const T k = 1.0 - eta * eta * (1.0 - cos_i * cos_i);
  if (!(value_of(k) >= 0.0)) {
    ray.kill();
    return ray;
  }
  const T cos_t = sqrt(k);
  ray.direction = eta * ray.direction + (eta * cos_i - cos_t) * normal;
  // Re-normalise against round-off so |d| = 1 holds tightly.
  ray.direction = normalized(ray.direction);
  return ray;
}

// Sequential tracer bound to one system and wavelength.
template <class T>
class Tracer {
 public:
  Tracer(const BasicLensSystem<T>& system, double wavelength_nm)
      : system_(&system), values_(detach_system(system)), media_(system.media(wavelength_nm)),
        wavelength_nm_(wavelength_nm) {}

  const BasicLensSystem<T>& system() const { return *system_; }
  const LensSystem& values() const { return values_; }
  const std::vector<double>& media() const { return media_; }
  double image_index() const { return media_.back(); }
  double wavelength_nm() const { return wavelength_nm_; }

  // Traces through surfaces [begin, end). With clip set, rays beyond a
  // surface's semi-aperture die.
  Ray<T> through(Ray<T> ray, std::size_t begin, std::size_t end, bool clip = true) const {
    for (std::size_t i = begin; i < end && ray.alive; ++i) {
      const auto hit = intersect(ray, system_->surfaces[i], values_.surfaces[i]);
      if (!hit) {
        ray.kill();
        break;
      }
      if (clip) {
        const Vec3<double> p = value_of(hit->point);
        const double sa = values_.surfaces[i].semi_aperture;
        if (p.x * p.x + p.y * p.y > sa * sa) {
          ray.kill();
          break;
        }
      }
      ray.opl += media_[i] * hit->t;
      ray.origin = hit->point;
      ray = refract(ray, hit->normal, T(media_[i]), T(media_[i + 1]));
    }
    return ray;
  }

  Ray<T> to_last_surface(Ray<T> ray, bool clip = true) const {
    return through(std::move(ray), 0, system_->surfaces.size(), clip);
  }

  // Intersection with surface `index` after refracting through the ones before it.
  std::optional<Intersection<T>> hit_surface(const Ray<T>& ray, std::size_t index,
                                             bool clip = false) const {
    Ray<T> r = through(ray, 0, index, clip);
    if (!r.alive) return std::nullopt;
    return intersect(r, system_->surfaces[index], values_.surfaces[index]);
  }

  // Straight propagation in image space to the plane z = plane_z.
  Ray<T> to_plane(Ray<T> ray, const T& plane_z) const {
    if (!ray.alive) return ray;
    if (!(value_of(ray.direction.z) > 0.0)) {
      ray.kill();
      return ray;
    }
    const T t = (plane_z - ray.origin.z) / ray.direction.z;
    ray.opl += image_index() * t;
    ray.origin = ray.origin + t * ray.direction;
    return ray;
  }

  Ray<T> trace(Ray<T> ray, bool clip = true) const {
    return to_plane(to_last_surface(std::move(ray), clip), system_->sensor_z);
  }

 private:
  const BasicLensSystem<T>* system_;
  LensSystem values_;
  std::vector<double> media_;
  double wavelength_nm_;
};

// Full trace (all surfaces, then the sensor plane).
template <class T>
Ray<T> trace(const Ray<T>& ray, const BasicLensSystem<T>& system) {
  return Tracer<T>(system, ray.wavelength_nm).trace(ray);
}

}  // namespace rwsim
