#pragma once

// Fizeau surface recovery. A collimated 650 nm beam travelling along +z
// reflects off the test surface (vertex at z = 0). The reflected path is
// unfolded about the vertex plane, so the return trip continues along +z
// to a sample plane at z = sample_plane and on to the sensor. The reference
// arm is the same beam reflected by a perfect flat; both arms are summed
// coherently at the sensor.

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "rwsim/io/image_io.hpp"
#include "rwsim/lens/prescription.hpp"
#include "rwsim/optimize/config.hpp"
#include "rwsim/optimize/loop.hpp"
#include "rwsim/optimize/loss.hpp"
#include "rwsim/wavefield/rs.hpp"

namespace rwsim {

// Cell centres of an n x n grid over [-half, half]^2; `disk` keeps those
// inside the inscribed circle.
inline std::vector<Vec2<double>> aperture_grid(double half, int n, bool disk) {
  std::vector<Vec2<double>> out;
  const double cell = 2.0 * half / n;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const Vec2<double> p{-half + (i + 0.5) * cell, -half + (j + 0.5) * cell};
      if (!disk || p.x * p.x + p.y * p.y <= half * half) out.push_back(p);
    }
  }
  return out;
}

// Pixel centres of a square sensor at height z, row-major.
template <class T>
std::vector<Vec3<T>> square_sensor(int pixels, double size, double z) {
  std::vector<Vec3<T>> q;
  const double pitch = size / pixels;
  for (int r = 0; r < pixels; ++r) {
    for (int c = 0; c < pixels; ++c) {
      q.push_back({T(pixel_center(c, pixels, pitch)), T(pixel_center(r, pixels, pitch)), T(z)});
    }
  }
  return q;
}

namespace detail {
inline constexpr double kFizeauLaunchZ = -0.5;
}

// Wavefront samples of the beam reflected by `surf`, on the unfolded sample
// plane.
template <class T>
std::vector<WavefrontSample<T>> reflected_samples(const BasicSurface<T>& surf, const std::vector<Vec2<double>>& grid,
                                                  double plane_z, double wavelength_nm) {
  const double k = wavenumber(wavelength_nm);
  const double z0 = detail::kFizeauLaunchZ;
  std::vector<WavefrontSample<T>> out(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    Ray<T> ray;
    ray.wavelength_nm = wavelength_nm;
    ray.origin = {T(grid[i].x), T(grid[i].y), T(z0)};
    ray.direction = {T(0.0), T(0.0), T(1.0)};
    const auto hit = intersect(ray, surf);
    if (!hit) {
      throw SurfaceDomainError("test surface has no intersection at (" + std::to_string(grid[i].x) + ", " +
                               std::to_string(grid[i].y) + ") mm");
    }
    const Vec3<T>& n = hit->normal;
    const Vec3<T> d = ray.direction - (2.0 * dot(ray.direction, n)) * n;
    const Vec3<T> p{hit->point.x, hit->point.y, -hit->point.z};
    const Vec3<T> du{d.x, d.y, -d.z};
    if (!(value_of(du.z) > 0.0)) throw SurfaceDomainError("reflected ray does not return toward the sensor");
    const T t = (plane_z - p.z) / du.z;
    const T opl = (hit->point.z - z0) + t;
    out[i].position = p + t * du;
    out[i].field = cexp_i(k * opl);
    out[i].normal = {T(0.0), T(0.0), T(1.0)};
  });
  return out;
}

// Test-surface container: a one-surface system whose selection lists the
// recovered coefficients (curvature, x^2, xy).
inline LensSystem fizeau_system(const FizeauSettings& f, double c, double f20, double f11) {
  LensSystem sys;
  Surface s;
  s.kind = SurfaceKind::freeform;
  s.curvature = c;
  s.freeform[freeform_index(2, 0)] = f20;
  s.freeform[freeform_index(1, 1)] = f11;
  s.semi_aperture = f.aperture_radius * 1.2;
  s.is_stop = true;
  sys.surfaces.push_back(s);
  sys.sensor_z = f.sample_plane + f.distance;
  sys.sensor_width = f.sensor_size;
  sys.sensor_height = f.sensor_size;
  sys.pixel_pitch = f.sensor_size / f.sensor_pixels;
  sys.selection.add({0, ParamField::curvature, 0});
  sys.selection.add({0, ParamField::freeform, static_cast<int>(freeform_index(2, 0))});
  sys.selection.add({0, ParamField::freeform, static_cast<int>(freeform_index(1, 1))});
  return sys;
}

// Fixed parts of the interferometer: sample grid, sensor points and the
// reference arm's field at the sensor.
struct FizeauBench {
  FizeauSettings settings;
  std::vector<Vec2<double>> grid;
  std::vector<Vec3<double>> sensor;
  std::vector<Complex<double>> reference;

  explicit FizeauBench(const FizeauSettings& f) : settings(f) {
    if (!(f.aperture_radius > 0.0) || !(f.sensor_size > 0.0) || !(f.distance > 0.0)) {
      throw ConfigError("fizeau: aperture, sensor size and distance must be positive");
    }
    grid = aperture_grid(f.aperture_radius, f.samples, true);
    sensor = square_sensor<double>(f.sensor_pixels, f.sensor_size, f.sample_plane + f.distance);
    Surface flat;
    flat.kind = SurfaceKind::plane;
    flat.semi_aperture = f.aperture_radius * 1.2;
    const auto ref = reflected_samples(flat, grid, f.sample_plane, f.wavelength_nm);
    reference = coherent_field<double>({CoherentSource<double>{&ref, {1.0, 0.0}, f.wavelength_nm}}, sensor);
  }

  template <class T>
  Image<T> render(const BasicSurface<T>& surf) const {
    const auto test = reflected_samples(surf, grid, settings.sample_plane, settings.wavelength_nm);
    std::vector<Vec3<T>> q(sensor.size());
    for (std::size_t i = 0; i < q.size(); ++i) q[i] = promote<T>(sensor[i]);
    Image<T> img(settings.sensor_pixels, settings.sensor_pixels);
    img.data = coherent_integrate<T>({CoherentSource<T>{&test, {1.0, 0.0}, settings.wavelength_nm}}, q, {},
                                     &reference, grid.size());
    return img;
  }
};

struct FizeauResult {
  std::vector<double> reference;  // true (c, f20, f11)
  std::vector<double> initial;
  std::vector<double> recovered;
  std::vector<double> relative_error;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int steps = 0;
  Trace trace;
  std::vector<std::string> log;
  std::vector<std::string> files;

  double max_relative_error() const {
    double m = 0.0;
    for (double e : relative_error) m = std::max(m, e);
    return m;
  }
};

// Each parameter is scaled by (1 + perturbation * s) with a random sign s.
inline std::vector<double> perturb(const std::vector<double>& p, double amount, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> out = p;
  for (auto& v : out) v *= 1.0 + amount * ((rng() & 1u) ? 1.0 : -1.0);
  return out;
}

// Per-parameter rates as a fraction of the initial magnitude.
inline std::vector<double> relative_rates(const std::vector<double>& p0, double fraction) {
  std::vector<double> lr;
  for (double v : p0) {
    if (v == 0.0) throw ConfigError("relative learning rate needs nonzero initial parameters");
    lr.push_back(fraction * std::abs(v));
  }
  return lr;
}

inline FizeauResult run_fizeau_experiment(const ExperimentConfig& cfg) {
  if (cfg.kind != "fizeau") throw ConfigError("run_fizeau_experiment: config kind is '" + cfg.kind + "'");
  const auto& f = cfg.fizeau;
  const FizeauBench bench(f);
  const LensSystem truth = fizeau_system(f, f.curvature, f.f20, f.f11);
  const ParameterSelection& sel = truth.selection;

  FizeauResult out;
  out.reference = parameter_values(truth, sel);
  out.initial = perturb(out.reference, f.perturbation, cfg.seed);
  const Image<double> target = bench.render(truth.surfaces.front());
  double peak = 0.0;
  for (double v : target.data) peak = std::max(peak, v);
  if (!(peak > 0.0)) throw NumericDomainError("fizeau target without intensity");
  Image<double> target_n = target;
  for (auto& v : target_n.data) v /= peak;

  std::string dir = cfg.output_dir;
  if (!dir.empty()) std::filesystem::create_directories(dir);
  const auto snaps = snapshot_iterations(cfg.iterations);

  out.trace.columns = {"iter", "loss"};
  for (const auto& p : sel.entries) out.trace.columns.push_back(param_name(p));

  auto eval = [&](const std::vector<double>& p) {
    const LensSystem s = with_parameters(truth, sel, p);
    return value_and_gradient(s, [&](const auto& sys) {
      auto img = bench.render(sys.surfaces.front());
      for (auto& v : img.data) v = v / peak;
      return mse_loss(img, target_n);
    });
  };
  auto observe = [&](int it, const std::vector<double>& p, double loss) {
    std::vector<double> row{static_cast<double>(it), loss};
    row.insert(row.end(), p.begin(), p.end());
    out.trace.add(std::move(row));
    if (!dir.empty() && std::find(snaps.begin(), snaps.end(), it) != snaps.end()) {
      const auto img = bench.render(with_parameters(truth, sel, p).surfaces.front());
      const std::string stem = dir + "/measurement_iter" + std::to_string(it);
      write_pfm(stem + ".pfm", img);
      write_png(stem + ".png", img);
      out.files.insert(out.files.end(), {stem + ".pfm", stem + ".png"});
    }
  };
  auto refresh = [](int, const std::vector<double>&) { return false; };

  AdamState state = make_adam(relative_rates(out.initial, cfg.optimizer.lr_relative), parameter_names(sel));
  state.beta1 = cfg.optimizer.beta1;
  state.beta2 = cfg.optimizer.beta2;
  state.eps = cfg.optimizer.epsilon;
  const AdamLoopOptions opt{cfg.iterations, cfg.optimizer.decay, cfg.optimizer.loss_tolerance, 10};
  const auto res = adam_loop(out.initial, state, opt, eval, refresh, observe);

  out.recovered = res.params;
  out.steps = res.accepted;
  out.log = res.log;
  out.initial_loss = out.trace.rows.front()[1];
  out.final_loss = res.loss;
  for (std::size_t i = 0; i < out.recovered.size(); ++i) {
    out.relative_error.push_back(std::abs(out.recovered[i] - out.reference[i]) / std::abs(out.reference[i]));
  }
  if (!dir.empty()) {
    out.trace.save(dir + "/trace.csv");
    write_pfm(dir + "/target.pfm", target);
    save_prescription(with_parameters(truth, sel, out.recovered), dir + "/recovered.lens");
    out.files.insert(out.files.end(), {dir + "/trace.csv", dir + "/target.pfm", dir + "/recovered.lens"});
  }
  return out;
}

}  // namespace rwsim
