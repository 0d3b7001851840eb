#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rwsim/imaging/distortion.hpp"
#include "rwsim/imaging/resample.hpp"
#include "rwsim/wavefield/psf.hpp"

namespace rwsim {

// Node layout of an M x M PSF grid. Nodes sit on sensor pixel centres and
// span the extreme pixel centres; `fields` holds the field coordinate whose
// principal ray lands on each node (row-major, j * m + i).
struct GridLayout {
  int m = 0;
  std::vector<int> cols, rows;
  std::vector<double> xs, ys;  // node sensor coordinates, mm
  std::vector<Vec2<double>> fields;
  std::vector<bool> vignetted;
  std::vector<std::string> warnings;

  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * m + i; }
  std::size_t count() const { return static_cast<std::size_t>(m) * m; }
};

template <class T>
struct PSFGrid {
  GridLayout layout;
  std::vector<PSF<T>> psfs;  // row-major, j * m + i
  int window = 0;
  double pitch = 0.0;
  double wavelength_nm = 0.0;

  const PSF<T>& at(int i, int j) const { return psfs[layout.index(i, j)]; }
};

inline std::vector<int> node_pixels(int m, int n) {
  if (m < 2) throw ConfigError("PSF grid needs M >= 2");
  if (m > n) throw ConfigError("PSF grid denser than the sensor");
  std::vector<int> out(m);
  for (int i = 0; i < m; ++i) {
    out[i] = static_cast<int>(std::lround(static_cast<double>(i) * (n - 1) / (m - 1)));
  }
  return out;
}

// Linear first guess for the field imaged at `u`.
template <class T>
Vec2<double> field_guess(const BasicLensSystem<T>& sys, const Vec2<double>& u, double wavelength_nm) {
  const double probe = sys.object_at_infinity() ? 1e-3 : 1e-3 * std::max(1.0, sys.object_distance);
  const Vec2<double> u0 = principal_hit(sys, {0.0, 0.0}, wavelength_nm);
  const Vec2<double> up = principal_hit(sys, {probe, probe}, wavelength_nm);
  return {u.x * probe / (up.x - u0.x), u.y * probe / (up.y - u0.y)};
}

// Field point imaged to sensor point u; shared by grid sampling and the dense
// oracle so both place identical sources.
template <class T>
Vec2<double> field_for_pixel(const BasicLensSystem<T>& sys, const Vec2<double>& u, double wavelength_nm,
                             const DistortionMap* map = nullptr) {
  Vec2<double> guess;
  if (map) {
    const auto inv = map->inverse(u);
    guess = inv ? *inv : field_guess(sys, u, wavelength_nm);
  } else {
    guess = field_guess(sys, u, wavelength_nm);
  }
  const double scale = sys.object_at_infinity() ? 1.0 : std::max(1.0, sys.object_distance);
  return field_for_sensor_point(sys, u, guess, wavelength_nm, 1e-9, scale);
}

// Chooses node field points by aiming principal rays at the node pixels.
// Nodes whose aiming fails are flagged vignetted with a warning.
template <class T>
GridLayout plan_psf_grid(const BasicLensSystem<T>& sys, const SensorSpec& sensor, int m, double wavelength_nm,
                         const DistortionMap* map = nullptr) {
  if (m < 3 || m % 2 == 0) throw ConfigError("PSF grid size M must be odd and >= 3");
  const LensSystem values = detach_system(sys);
  GridLayout g;
  g.m = m;
  g.cols = node_pixels(m, sensor.width);
  g.rows = node_pixels(m, sensor.height);
  for (int c : g.cols) g.xs.push_back(pixel_center(c, sensor.width, sensor.pitch));
  for (int r : g.rows) g.ys.push_back(pixel_center(r, sensor.height, sensor.pitch));
  g.fields.assign(g.count(), {0.0, 0.0});
  g.vignetted.assign(g.count(), false);
  std::vector<std::string> messages(g.count());
  parallel_for(g.count(), [&](std::size_t n) {
    const int i = static_cast<int>(n % m), j = static_cast<int>(n / m);
    try {
      g.fields[n] = field_for_pixel(values, {g.xs[i], g.ys[j]}, wavelength_nm, map);
    } catch (const NumericError& e) {
      g.vignetted[n] = true;
      messages[n] = "grid node (" + std::to_string(i) + ", " + std::to_string(j) + "): " + e.what();
    }
  });
  for (auto& msg : messages) {
    if (!msg.empty()) g.warnings.push_back(std::move(msg));
  }
  return g;
}

// Renders the PSF of every node of a layout. Vignetted nodes, including
// nodes whose pupil turns out empty, get a zero PSF.
template <class T>
PSFGrid<T> render_psf_grid(const BasicLensSystem<T>& sys, GridLayout layout, const PsfOptions& opt) {
  PSFGrid<T> grid;
  grid.window = opt.window;
  grid.pitch = opt.pitch_mm > 0.0 ? opt.pitch_mm : sys.pixel_pitch;
  grid.wavelength_nm = opt.wavelength_nm;
  grid.psfs.resize(layout.count());
  std::vector<std::string> messages(layout.count());
  PsfOptions inner = opt;
  inner.pitch_mm = grid.pitch;
  for (std::size_t n = 0; n < layout.count(); ++n) {
    const Source src = source_at_field(sys, layout.fields[n]);
    auto zero = [&] {
      PSF<T> p;
      p.intensity = Image<T>(opt.window, opt.window);
      p.center_mm = {T(layout.xs[n % layout.m]), T(layout.ys[n / layout.m])};
      p.pitch_mm = grid.pitch;
      p.wavelength_nm = opt.wavelength_nm;
      p.field = src.describe();
      p.vignetted = true;
      return p;
    };
    if (layout.vignetted[n]) {
      grid.psfs[n] = zero();
      continue;
    }
    try {
      grid.psfs[n] = render_psf(sys, src, inner);
    } catch (const VignettedFieldError& e) {
      grid.psfs[n] = zero();
      layout.vignetted[n] = true;
      layout.warnings.push_back("grid node " + std::to_string(n) + ": " + e.what());
    }
  }
  grid.layout = std::move(layout);
  return grid;
}

template <class T>
PSFGrid<T> sample_psf_grid(const BasicLensSystem<T>& sys, const SensorSpec& sensor, int m, const PsfOptions& opt,
                           const DistortionMap* map = nullptr) {
  return render_psf_grid(sys, plan_psf_grid(sys, sensor, m, opt.wavelength_nm, map), opt);
}

// Bilinear weights of the (up to) four nodes around u; zero weights are
// dropped. Points outside the node hull are clamped to it.
inline std::vector<std::pair<std::size_t, double>> interp_weights(const Vec2<double>& u, const GridLayout& g) {
  auto locate = [](const std::vector<double>& nodes, double v) {
    const double c = std::clamp(v, nodes.front(), nodes.back());
    std::size_t i = std::upper_bound(nodes.begin(), nodes.end(), c) - nodes.begin();
    i = std::clamp<std::size_t>(i, 1, nodes.size() - 1) - 1;
    const double t = (c - nodes[i]) / (nodes[i + 1] - nodes[i]);
    return std::pair{i, t};
  };
  const auto [i, tx] = locate(g.xs, u.x);
  const auto [j, ty] = locate(g.ys, u.y);
  std::vector<std::pair<std::size_t, double>> w;
  const double wx[2] = {1.0 - tx, tx};
  const double wy[2] = {1.0 - ty, ty};
  for (int b = 0; b < 2; ++b) {
    for (int a = 0; a < 2; ++a) {
      const double v = wx[a] * wy[b];
      if (v != 0.0) w.emplace_back(g.index(static_cast<int>(i) + a, static_cast<int>(j) + b), v);
    }
  }
  return w;
}

template <class T>
std::vector<std::pair<std::size_t, double>> interp_weights(const Vec2<double>& u, const PSFGrid<T>& grid) {
  return interp_weights(u, grid.layout);
}

}  // namespace rwsim
