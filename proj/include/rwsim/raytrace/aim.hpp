#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "rwsim/core/error.hpp"
#include "rwsim/core/parallel.hpp"
#include "rwsim/core/vec.hpp"
#include "rwsim/raytrace/paraxial.hpp"
#include "rwsim/raytrace/ray.hpp"

namespace rwsim {

// A point source: either at infinity (direction given by tangents of the
// field angles) or at a world point.
struct Source {
  enum class Kind { angle, point };
  Kind kind = Kind::angle;
  double tan_x = 0.0;
  double tan_y = 0.0;
  Vec3<double> point{};

  static Source field_angle(double angle_x_rad, double angle_y_rad) {
    return {Kind::angle, std::tan(angle_x_rad), std::tan(angle_y_rad), {}};
  }
  static Source field_tangent(double tx, double ty) { return {Kind::angle, tx, ty, {}}; }
  static Source at_point(const Vec3<double>& p) { return {Kind::point, 0.0, 0.0, p}; }

  std::string describe() const {
    char buf[128];
    if (kind == Kind::angle) {
      std::snprintf(buf, sizeof buf, "field angle (%.6g deg, %.6g deg)",
                    std::atan(tan_x) * 180.0 / std::numbers::pi, std::atan(tan_y) * 180.0 / std::numbers::pi);
    } else {
      std::snprintf(buf, sizeof buf, "point (%.6g, %.6g, %.6g) mm", point.x, point.y, point.z);
    }
    return buf;
  }
};

// Field coordinates: (tan x, tan y) for an object at infinity, object-plane
// (x, y) in mm otherwise.
template <class T>
Source source_at_field(const BasicLensSystem<T>& sys, const Vec2<double>& field) {
  if (sys.object_at_infinity()) return Source::field_tangent(field.x, field.y);
  return Source::at_point({field.x, field.y, sys.object_z()});
}

// z of the plane where collimated rays start; clear of any first-surface sag.
template <class T>
double launch_plane_z(const BasicLensSystem<T>& sys) {
  if (sys.surfaces.empty()) return value_of(sys.sensor_z) - 1.0;
  const auto& s = sys.surfaces.front();
  return value_of(s.z) - s.semi_aperture - 1.0;
}

// A ray from `src` through the point (aim.x, aim.y, z_aim). Collimated rays
// start on the plane z = z_start with the phase of a plane wavefront through
// (0, 0, z_start).
template <class T>
Ray<T> launch_ray(const Source& src, const Vec2<T>& aim, const T& z_aim, double z_start,
                  double wavelength_nm) {
  Ray<T> r;
  r.wavelength_nm = wavelength_nm;
  const Vec3<T> target{aim.x, aim.y, z_aim};
  if (src.kind == Source::Kind::angle) {
    const Vec3<double> d = normalized(Vec3<double>{src.tan_x, src.tan_y, 1.0});
    r.direction = promote<T>(d);
    const T back = (z_aim - z_start) / d.z;
    r.origin = target - back * r.direction;
    r.opl = r.origin.x * d.x + r.origin.y * d.y;
  } else {
    r.origin = promote<T>(src.point);
    r.direction = normalized(target - r.origin);
    r.opl = T(0.0);
  }
  return r;
}

template <class T>
struct PrincipalRay {
  Ray<T> ray;        // traced to the sensor plane
  Vec2<T> aim;       // aim point on the entrance-pupil plane
  T aim_z{};         // entrance-pupil plane z
  double residual = 0.0;  // stop-plane miss distance, mm
};

namespace detail {

inline constexpr double kAimTolerance = 1e-8;
inline constexpr double kAimPolish = 1e-13;
inline constexpr int kAimMaxIterations = 50;

// Stop-surface hit (x, y) of the ray aimed at `a`; apertures ignored.
template <class T>
std::optional<Vec2<T>> stop_hit(const Tracer<T>& tracer, const Source& src, const Vec2<T>& a,
                                const T& z_aim, double z_start, std::size_t stop) {
  const Ray<T> r = launch_ray(src, a, z_aim, z_start, tracer.wavelength_nm());
  const auto hit = tracer.hit_surface(r, stop, false);
  if (!hit) return std::nullopt;
  return Vec2<T>{hit->point.x, hit->point.y};
}

}  // namespace detail

// Newton iteration on the aim point so the ray crosses the stop surface at its
// centre. The values converge in double; a final step in T carries the
// parameter tangents (implicit function theorem).
template <class T>
PrincipalRay<T> aim_principal_ray(const BasicLensSystem<T>& sys, const Source& src,
                                  double wavelength_nm) {
  const std::size_t stop = sys.stop_index();
  const auto px = paraxial(sys, wavelength_nm);
  const double z_start = launch_plane_z(sys);
  const LensSystem values = detach_system(sys);
  const Tracer<double> tracer(values, wavelength_nm);
  const double z_aim = value_of(px.entrance_pupil_z);
  const double h = 1e-5 * std::max(value_of(px.entrance_pupil_radius), 1e-2);

  auto eval = [&](const Vec2<double>& a) { return detail::stop_hit(tracer, src, a, z_aim, z_start, stop); };

  double jac[2][2] = {{1.0, 0.0}, {0.0, 1.0}};
  auto jacobian = [&](const Vec2<double>& at) {
    for (int k = 0; k < 2; ++k) {
      Vec2<double> ap = at;
      Vec2<double> am = at;
      (k == 0 ? ap.x : ap.y) += h;
      (k == 0 ? am.x : am.y) -= h;
      const auto rp = eval(ap);
      const auto rm = eval(am);
      if (!rp || !rm) {
        throw AimingError("principal ray for " + src.describe() + " left the domain", INFINITY);
      }
      jac[0][k] = (rp->x - rm->x) / (2.0 * h);
      jac[1][k] = (rp->y - rm->y) / (2.0 * h);
    }
  };

  Vec2<double> a{0.0, 0.0};
  auto r = eval(a);
  if (!r) throw AimingError("principal ray for " + src.describe() + " misses the stop", INFINITY);
  double res = std::hypot(r->x, r->y);
  int iter = 0;
  bool converged = res < detail::kAimTolerance;
  int polish = 0;
  while (iter < detail::kAimMaxIterations) {
    if (converged && (res < detail::kAimPolish || polish >= 3)) break;
    ++iter;
    jacobian(a);
    const double det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    if (det == 0.0 || !std::isfinite(det)) {
      throw AimingError("singular aiming Jacobian for " + src.describe(), res);
    }
    Vec2<double> step{-(jac[1][1] * r->x - jac[0][1] * r->y) / det,
                      -(-jac[1][0] * r->x + jac[0][0] * r->y) / det};
    std::optional<Vec2<double>> next;
    double next_res = res;
    for (int damp = 0; damp < 20; ++damp) {
      next = eval({a.x + step.x, a.y + step.y});
      if (next) {
        next_res = std::hypot(next->x, next->y);
        if (next_res <= res || converged) break;
      }
      step.x *= 0.5;
      step.y *= 0.5;
    }
    if (!next) throw AimingError("principal ray for " + src.describe() + " left the domain", res);
    if (converged) {
      ++polish;
      if (!(next_res < res)) break;
    }
    a = {a.x + step.x, a.y + step.y};
    r = next;
    res = next_res;
    converged = converged || res < detail::kAimTolerance;
  }
  if (!converged) {
    throw AimingError("principal-ray aiming for " + src.describe() + " did not converge in " +
                          std::to_string(detail::kAimMaxIterations) + " iterations",
                      res);
  }

  PrincipalRay<T> out;
  out.residual = res;
  const Tracer<T> ttracer(sys, wavelength_nm);
  if constexpr (is_dual_v<T>) {
    jacobian(a);
    const Vec2<T> a0{T(a.x), T(a.y)};
    const auto rt = detail::stop_hit(ttracer, src, a0, px.entrance_pupil_z, z_start, stop);
    if (!rt) throw AimingError("principal ray for " + src.describe() + " misses the stop", res);
    const double det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    out.aim.x = a0.x - (jac[1][1] * rt->x - jac[0][1] * rt->y) / det;
    out.aim.y = a0.y - (-jac[1][0] * rt->x + jac[0][0] * rt->y) / det;
  } else {
    out.aim = a;
  }
  out.aim_z = px.entrance_pupil_z;
  out.ray = ttracer.trace(launch_ray(src, out.aim, out.aim_z, z_start, wavelength_nm), false);
  if (!out.ray.alive) {
    throw AimingError("principal ray for " + src.describe() + " does not reach the sensor", res);
  }
  return out;
}

template <class T>
struct PupilSample {
  PrincipalRay<T> principal;
  std::vector<Ray<T>> rays;  // traced through the last surface; blocked rays dead
  T entrance_pupil_radius{};
  std::size_t live = 0;
};

// Normalised (unit-disk) pupil coordinates of a side x side grid of cell
// centres, keeping those inside the disk. Jitter moves each point uniformly
// within its cell.
inline std::vector<Vec2<double>> pupil_grid(std::size_t n_rays, std::uint64_t seed, bool jitter) {
  if (n_rays == 0) throw ConfigError("n_rays must be >= 1");
  const auto side = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::sqrt(double(n_rays)))));
  std::vector<Vec2<double>> pts;
  pts.reserve(side * side);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  const double cell = 2.0 / static_cast<double>(side);
  for (std::size_t j = 0; j < side; ++j) {
    for (std::size_t i = 0; i < side; ++i) {
      double x = -1.0 + (static_cast<double>(i) + 0.5) * cell;
      double y = -1.0 + (static_cast<double>(j) + 0.5) * cell;
      if (jitter && side > 1) {
        x += u(rng) * cell;
        y += u(rng) * cell;
      }
      if (x * x + y * y <= 1.0) pts.push_back({x, y});
    }
  }
  return pts;
}

struct PupilOptions {
  std::uint64_t seed = 0;
  bool jitter = false;
  bool clip = true;
};

template <class T>
PupilSample<T> sample_pupil(const BasicLensSystem<T>& sys, const Source& src, double wavelength_nm,
                            std::size_t n_rays, const PupilOptions& opt = {}) {
  PupilSample<T> out;
  out.principal = aim_principal_ray(sys, src, wavelength_nm);
  out.entrance_pupil_radius = paraxial(sys, wavelength_nm).entrance_pupil_radius;
  const double z_start = launch_plane_z(sys);
  const Tracer<T> tracer(sys, wavelength_nm);
  const auto grid = pupil_grid(n_rays, opt.seed, opt.jitter);
  out.rays.resize(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    const Vec2<T> a{out.principal.aim.x + out.entrance_pupil_radius * grid[i].x,
                    out.principal.aim.y + out.entrance_pupil_radius * grid[i].y};
    out.rays[i] = tracer.to_last_surface(launch_ray(src, a, out.principal.aim_z, z_start, wavelength_nm),
                                         opt.clip);
  });
  for (const auto& r : out.rays) out.live += r.alive ? 1 : 0;
  if (out.live == 0) throw VignettedFieldError("source " + src.describe() + " is fully vignetted");
  return out;
}

// Sensor-plane hits of the live pupil rays.
template <class T>
std::vector<Vec2<T>> spot_diagram(const BasicLensSystem<T>& sys, const PupilSample<T>& s) {
  const Tracer<T> tracer(sys, s.principal.ray.wavelength_nm);
  std::vector<Vec2<T>> hits;
  hits.reserve(s.live);
  for (const auto& r : s.rays) {
    if (!r.alive) continue;
    const Ray<T> at = tracer.to_plane(r, sys.sensor_z);
    if (at.alive) hits.push_back({at.origin.x, at.origin.y});
  }
  return hits;
}

inline std::string spot_diagram_csv(const std::vector<Vec2<double>>& hits) {
  std::string out = "x_mm,y_mm\n";
  char buf[96];
  for (const auto& h : hits) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", h.x, h.y);
    out += buf;
  }
  return out;
}

}  // namespace rwsim
