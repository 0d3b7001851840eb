#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rwsim/core/error.hpp"
#include "rwsim/core/image.hpp"
#include "rwsim/core/parallel.hpp"
#include "rwsim/raytrace/aim.hpp"

namespace rwsim {

// Principal-ray sensor hit u = d(x) tabulated on a K x K grid of field
// coordinates spanning [-half, half] per axis. Field coordinates are (tan x,
// tan y) for an object at infinity and object-plane mm otherwise. Values are
// plain doubles: the map carries no parameter tangents.
class DistortionMap {
 public:
  DistortionMap() = default;

  DistortionMap(Vec2<double> table_half, int k, std::vector<Vec2<double>> nodes, Vec2<double> scene_half)
      : half_(table_half), k_(k), nodes_(std::move(nodes)), scene_half_(scene_half) {
    if (k_ < 3) throw ConfigError("distortion map needs K >= 3");
    if (nodes_.size() != static_cast<std::size_t>(k_) * k_) throw ConfigError("distortion table size mismatch");
  }

  // Tabulates an arbitrary mapping; used for synthetic maps.
  static DistortionMap from_function(Vec2<double> table_half, int k, Vec2<double> scene_half,
                                     const std::function<Vec2<double>(Vec2<double>)>& d) {
    std::vector<Vec2<double>> nodes(static_cast<std::size_t>(k) * k);
    for (int j = 0; j < k; ++j) {
      for (int i = 0; i < k; ++i) nodes[j * k + i] = d(node_field(table_half, k, i, j));
    }
    return DistortionMap(table_half, k, std::move(nodes), scene_half);
  }

  static Vec2<double> node_field(Vec2<double> half, int k, int i, int j) {
    return {-half.x + 2.0 * half.x * i / (k - 1), -half.y + 2.0 * half.y * j / (k - 1)};
  }

  int size() const { return k_; }
  Vec2<double> table_half() const { return half_; }
  // Field extent represented by a scene image (the field seen at the sensor edges).
  Vec2<double> scene_half() const { return scene_half_; }
  const Vec2<double>& node(int i, int j) const { return nodes_[static_cast<std::size_t>(j) * k_ + i]; }

  // Catmull-Rom bicubic interpolation; exact at nodes. Outside the table the
  // border cells are extrapolated.
  Vec2<double> operator()(const Vec2<double>& x) const {
    const double gx = (x.x + half_.x) / (2.0 * half_.x) * (k_ - 1);
    const double gy = (x.y + half_.y) / (2.0 * half_.y) * (k_ - 1);
    const int ix = std::clamp(static_cast<int>(std::floor(gx)), 0, k_ - 2);
    const int iy = std::clamp(static_cast<int>(std::floor(gy)), 0, k_ - 2);
    const auto wx = weights(gx - ix);
    const auto wy = weights(gy - iy);
    Vec2<double> out{0.0, 0.0};
    for (int b = 0; b < 4; ++b) {
      for (int a = 0; a < 4; ++a) {
        const Vec2<double> p = ghost(ix - 1 + a, iy - 1 + b);
        out.x += wx[a] * wy[b] * p.x;
        out.y += wx[a] * wy[b] * p.y;
      }
    }
    return out;
  }

  // Newton solve of d(x) = u on the interpolant. nullopt when the solution
  // leaves the table or the iteration stalls.
  std::optional<Vec2<double>> inverse(const Vec2<double>& u) const {
    const Vec2<double> c = (*this)({0.0, 0.0});
    const double sx = ((*this)({half_.x, 0.0}).x - (*this)({-half_.x, 0.0}).x) / (2.0 * half_.x);
    const double sy = ((*this)({0.0, half_.y}).y - (*this)({0.0, -half_.y}).y) / (2.0 * half_.y);
    if (sx == 0.0 || sy == 0.0) return std::nullopt;
    Vec2<double> x{(u.x - c.x) / sx, (u.y - c.y) / sy};
    const double hx = 1e-6 * half_.x;
    const double hy = 1e-6 * half_.y;
    const double tol = 1e-12 * std::max(1.0, std::hypot(u.x, u.y));
    for (int it = 0; it < 50; ++it) {
      const Vec2<double> f = (*this)(x);
      const double rx = f.x - u.x;
      const double ry = f.y - u.y;
      if (std::hypot(rx, ry) < tol) break;
      const Vec2<double> fxp = (*this)({x.x + hx, x.y}), fxm = (*this)({x.x - hx, x.y});
      const Vec2<double> fyp = (*this)({x.x, x.y + hy}), fym = (*this)({x.x, x.y - hy});
      const double j00 = (fxp.x - fxm.x) / (2 * hx), j10 = (fxp.y - fxm.y) / (2 * hx);
      const double j01 = (fyp.x - fym.x) / (2 * hy), j11 = (fyp.y - fym.y) / (2 * hy);
      const double det = j00 * j11 - j01 * j10;
      if (det == 0.0 || !std::isfinite(det)) return std::nullopt;
      x.x -= (j11 * rx - j01 * ry) / det;
      x.y -= (-j10 * rx + j00 * ry) / det;
    }
    const Vec2<double> f = (*this)(x);
    if (std::hypot(f.x - u.x, f.y - u.y) > 1e-9 * std::max(1.0, std::hypot(u.x, u.y))) return std::nullopt;
    if (std::abs(x.x) > half_.x * (1 + 1e-12) || std::abs(x.y) > half_.y * (1 + 1e-12)) return std::nullopt;
    return x;
  }

 private:
  static std::array<double, 4> weights(double t) {
    const double t2 = t * t, t3 = t2 * t;
    return {0.5 * (-t3 + 2 * t2 - t), 0.5 * (3 * t3 - 5 * t2 + 2), 0.5 * (-3 * t3 + 4 * t2 + t),
            0.5 * (t3 - t2)};
  }

  // Node value with linear extrapolation one node past each border.
  Vec2<double> ghost(int i, int j) const {
    auto at = [&](int a, int b) { return node(a, b); };
    auto ex = [&](int a, int b) -> Vec2<double> {
      const int ca = std::clamp(a, 0, k_ - 1);
      if (a == ca) return at(a, b);
      const int inner = a < 0 ? 1 : k_ - 2;
      const Vec2<double> e = at(ca, b), n = at(inner, b);
      return {2 * e.x - n.x, 2 * e.y - n.y};
    };
    const int cj = std::clamp(j, 0, k_ - 1);
    if (j == cj) return ex(i, j);
    const int inner = j < 0 ? 1 : k_ - 2;
    const Vec2<double> e = ex(i, cj), n = ex(i, inner);
    return {2 * e.x - n.x, 2 * e.y - n.y};
  }

  Vec2<double> half_{1.0, 1.0};
  int k_ = 0;
  std::vector<Vec2<double>> nodes_;
  Vec2<double> scene_half_{1.0, 1.0};
};

// Principal-ray sensor hit for a field coordinate.
template <class T>
Vec2<double> principal_hit(const BasicLensSystem<T>& sys, const Vec2<double>& field, double wavelength_nm) {
  const auto pr = aim_principal_ray(sys, source_at_field(sys, field), wavelength_nm);
  return {value_of(pr.ray.origin.x), value_of(pr.ray.origin.y)};
}

// Field coordinate whose principal ray lands on `target`, by Newton on the
// traced hit with a finite-difference Jacobian.
template <class T>
Vec2<double> field_for_sensor_point(const BasicLensSystem<T>& sys, const Vec2<double>& target, Vec2<double> guess,
                                    double wavelength_nm, double tolerance_mm = 1e-9, double scale = 1.0) {
  const double h = 1e-6 * scale;
  for (int it = 0; it < 40; ++it) {
    const Vec2<double> u = principal_hit(sys, guess, wavelength_nm);
    const double rx = u.x - target.x, ry = u.y - target.y;
    if (std::hypot(rx, ry) < tolerance_mm) return guess;
    const Vec2<double> px = principal_hit(sys, {guess.x + h, guess.y}, wavelength_nm);
    const Vec2<double> mx = principal_hit(sys, {guess.x - h, guess.y}, wavelength_nm);
    const Vec2<double> py = principal_hit(sys, {guess.x, guess.y + h}, wavelength_nm);
    const Vec2<double> my = principal_hit(sys, {guess.x, guess.y - h}, wavelength_nm);
    const double j00 = (px.x - mx.x) / (2 * h), j10 = (px.y - mx.y) / (2 * h);
    const double j01 = (py.x - my.x) / (2 * h), j11 = (py.y - my.y) / (2 * h);
    const double det = j00 * j11 - j01 * j10;
    if (det == 0.0 || !std::isfinite(det)) break;
    guess.x -= (j11 * rx - j01 * ry) / det;
    guess.y -= (-j10 * rx + j00 * ry) / det;
  }
  const Vec2<double> u = principal_hit(sys, guess, wavelength_nm);
  const double res = std::hypot(u.x - target.x, u.y - target.y);
  if (res < tolerance_mm) return guess;
  char buf[96];
  std::snprintf(buf, sizeof buf, "(%.6g, %.6g) mm", target.x, target.y);
  throw AimingError(std::string("no field point images to sensor point ") + buf, res);
}

// Extent of the field imaged onto the sensor edges: the field on the x axis
// landing at half the sensor width, and likewise for y.
template <class T>
Vec2<double> sensor_field_extent(const BasicLensSystem<T>& sys, double wavelength_nm) {
  const double probe = sys.object_at_infinity() ? 1e-3 : 1e-3 * std::max(1.0, sys.object_distance);
  const Vec2<double> u = principal_hit(sys, {probe, probe}, wavelength_nm);
  const Vec2<double> u0 = principal_hit(sys, {0.0, 0.0}, wavelength_nm);
  const double sx = (u.x - u0.x) / probe;
  const double sy = (u.y - u0.y) / probe;
  if (sx == 0.0 || sy == 0.0) throw DegenerateSystemError("principal-ray hit does not move with the field");
  const double w = 0.5 * sys.sensor_width, hgt = 0.5 * sys.sensor_height;
  const Vec2<double> fx = field_for_sensor_point(sys, {w, 0.0}, {w / sx, 0.0}, wavelength_nm, 1e-9, probe * 1e3);
  const Vec2<double> fy = field_for_sensor_point(sys, {0.0, hgt}, {0.0, hgt / sy}, wavelength_nm, 1e-9, probe * 1e3);
  return {std::abs(fx.x), std::abs(fy.y)};
}

// K x K table of principal-ray hits over `table_half`; the scene extent is
// the field seen at the sensor edges. When table_half is zero it defaults to
// 1.25 times the scene extent.
template <class T>
DistortionMap build_distortion_map(const BasicLensSystem<T>& sys, int k, double wavelength_nm,
                                   Vec2<double> table_half = {0.0, 0.0}) {
  if (k < 3) throw ConfigError("distortion map needs K >= 3");
  const LensSystem values = detach_system(sys);
  const Vec2<double> scene = sensor_field_extent(values, wavelength_nm);
  if (table_half.x <= 0.0 || table_half.y <= 0.0) table_half = {1.25 * scene.x, 1.25 * scene.y};
  std::vector<Vec2<double>> nodes(static_cast<std::size_t>(k) * k);
  parallel_for(nodes.size(), [&](std::size_t n) {
    const int i = static_cast<int>(n % k), j = static_cast<int>(n / k);
    const Vec2<double> f = DistortionMap::node_field(table_half, k, i, j);
    try {
      nodes[n] = principal_hit(values, f, wavelength_nm);
    } catch (const AimingError& e) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "distortion node (%.6g, %.6g): ", f.x, f.y);
      throw AimingError(buf + std::string(e.what()), e.residual());
    }
  });
  return DistortionMap(table_half, k, std::move(nodes), scene);
}

}  // namespace rwsim
