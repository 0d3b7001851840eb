#pragma once

// Freeform surface recovery. A collimated beam crosses a glass plate whose
// front face is an xy-polynomial freeform and whose back face is flat, then
// propagates to the sensor. Wave mode sums the exit wavefront coherently;
// ray mode bins ray hits with a Gaussian splat.

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "rwsim/io/image_io.hpp"
#include "rwsim/lens/prescription.hpp"
#include "rwsim/optimize/config.hpp"
#include "rwsim/optimize/fizeau.hpp"
#include "rwsim/optimize/loop.hpp"
#include "rwsim/optimize/loss.hpp"
#include "rwsim/wavefield/rs.hpp"

namespace rwsim {

inline LensSystem freeform_plate(const FreeformSettings& f, const std::vector<double>& coeffs) {
  if (coeffs.size() != f.terms.size()) throw ConfigError("freeform: one coefficient per term required");
  LensSystem sys;
  sys.materials.push_back(Material::constant("plate", f.index));
  Surface front;
  front.kind = SurfaceKind::freeform;
  front.z = 0.0;
  front.semi_aperture = f.aperture_half * std::sqrt(2.0) * 1.1;
  front.material_after = "plate";
  front.is_stop = true;
  Surface back;
  back.kind = SurfaceKind::plane;
  back.z = f.thickness;
  back.semi_aperture = front.semi_aperture * 2.0;
  sys.surfaces = {front, back};
  sys.sensor_z = f.thickness + f.distance;
  sys.sensor_width = f.sensor_size;
  sys.sensor_height = f.sensor_size;
  sys.pixel_pitch = f.sensor_size / f.sensor_pixels;
  for (std::size_t i = 0; i < f.terms.size(); ++i) {
    const int idx = static_cast<int>(freeform_index(f.terms[i].m, f.terms[i].n));
    sys.surfaces[0].freeform[idx] = coeffs[i];
    sys.selection.add({0, ParamField::freeform, idx});
  }
  validate_system(sys);
  return sys;
}

struct FreeformBench {
  FreeformSettings settings;
  std::vector<Vec2<double>> grid;
  std::vector<Vec3<double>> sensor;

  explicit FreeformBench(const FreeformSettings& f) : settings(f) {
    if (f.terms.empty()) throw ConfigError("freeform: no surface terms");
    if (!(f.aperture_half > 0.0) || !(f.sensor_size > 0.0) || !(f.distance > 0.0) || !(f.thickness > 0.0)) {
      throw ConfigError("freeform: aperture, sensor size, thickness and distance must be positive");
    }
    grid = aperture_grid(f.aperture_half, f.samples, false);
    sensor = square_sensor<double>(f.sensor_pixels, f.sensor_size, f.thickness + f.distance);
  }

  // Rays through the plate, stopped on the flat back face.
  template <class T>
  std::vector<Ray<T>> exit_rays(const BasicLensSystem<T>& sys) const {
    const Tracer<T> tracer(sys, settings.wavelength_nm);
    std::vector<Ray<T>> rays(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) {
      Ray<T> r;
      r.wavelength_nm = settings.wavelength_nm;
      r.origin = {T(grid[i].x), T(grid[i].y), T(-0.5)};
      r.direction = {T(0.0), T(0.0), T(1.0)};
      rays[i] = tracer.to_last_surface(r, false);
    });
    for (std::size_t i = 0; i < rays.size(); ++i) {
      if (!rays[i].alive) {
        throw SurfaceDomainError("ray " + std::to_string(i) + " does not cross the freeform plate");
      }
    }
    return rays;
  }

  template <class T>
  Image<T> render_wave(const BasicLensSystem<T>& sys) const {
    const double k = wavenumber(settings.wavelength_nm);
    const auto rays = exit_rays(sys);
    std::vector<WavefrontSample<T>> samples(rays.size());
    for (std::size_t i = 0; i < rays.size(); ++i) {
      samples[i].position = rays[i].origin;
      samples[i].field = cexp_i(k * rays[i].opl);
      samples[i].normal = {T(0.0), T(0.0), T(1.0)};
    }
    std::vector<Vec3<T>> q(sensor.size());
    for (std::size_t i = 0; i < q.size(); ++i) q[i] = promote<T>(sensor[i]);
    Image<T> img(settings.sensor_pixels, settings.sensor_pixels);
    img.data = coherent_integrate<T>({CoherentSource<T>{&samples, {1.0, 0.0}, settings.wavelength_nm}}, q);
    return img;
  }

  // Geometric irradiance: each sensor hit deposits a unit Gaussian of
  // width splat_sigma_px pixels, truncated at 4 sigma.
  template <class T>
  Image<T> render_ray(const BasicLensSystem<T>& sys) const {
    const Tracer<T> tracer(sys, settings.wavelength_nm);
    const auto rays = exit_rays(sys);
    const int n = settings.sensor_pixels;
    const double pitch = settings.sensor_size / n;
    const double sigma = settings.splat_sigma_px * pitch;
    const int reach = static_cast<int>(std::ceil(4.0 * settings.splat_sigma_px));
    std::vector<Vec2<T>> hits;
    hits.reserve(rays.size());
    for (const auto& r : rays) {
      const Ray<T> at = tracer.to_plane(r, sys.sensor_z);
      if (at.alive) hits.push_back({at.origin.x, at.origin.y});
    }
    Image<T> img(n, n);
    // Rows are independent, so each worker owns whole rows.
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t row) {
      using std::exp;
      const int r = static_cast<int>(row);
      const double y = pixel_center(r, n, pitch);
      for (const auto& h : hits) {
        const double gy = value_of(h.y) / pitch + 0.5 * (n - 1);
        if (std::abs(gy - r) > reach) continue;
        const double gx = value_of(h.x) / pitch + 0.5 * (n - 1);
        const int c0 = std::max(0, static_cast<int>(std::floor(gx)) - reach);
        const int c1 = std::min(n - 1, static_cast<int>(std::ceil(gx)) + reach);
        const T dy = h.y - y;
        for (int c = c0; c <= c1; ++c) {
          const T dx = h.x - pixel_center(c, n, pitch);
          img.at(c, r) += exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        }
      }
    });
    return img;
  }
};

struct FreeformRun {
  PhysicsMode mode = PhysicsMode::wave;
  std::vector<double> recovered;
  double training_loss = 0.0;
  double wave_mse = 0.0;  // final surface, wave-rendered, against the target
  Trace trace;
  std::vector<std::string> log;
};

struct FreeformResult {
  std::vector<double> reference;
  std::vector<double> initial;
  double initial_wave_mse = 0.0;
  std::vector<FreeformRun> runs;
  std::vector<std::string> files;

  const FreeformRun& run(PhysicsMode m) const {
    for (const auto& r : runs) {
      if (r.mode == m) return r;
    }
    throw ConfigError("no " + to_string(m) + "-mode run in this result");
  }
};

namespace detail {

template <class T>
T image_sum(const Image<T>& img) {
  T s(0.0);
  for (const auto& v : img.data) s += v;
  return s;
}

}  // namespace detail

inline FreeformResult run_freeform_experiment(const ExperimentConfig& cfg) {
  if (cfg.kind != "freeform") throw ConfigError("run_freeform_experiment: config kind is '" + cfg.kind + "'");
  const auto& f = cfg.freeform;
  const FreeformBench bench(f);
  FreeformResult out;
  for (const auto& t : f.terms) out.reference.push_back(t.value);
  const LensSystem truth = freeform_plate(f, out.reference);
  const ParameterSelection& sel = truth.selection;
  out.initial = perturb(out.reference, f.perturbation, cfg.seed);

  const Image<double> target = bench.render_wave(truth);
  double peak = 0.0;
  for (double v : target.data) peak = std::max(peak, v);
  if (!(peak > 0.0)) throw NumericDomainError("freeform target without intensity");
  Image<double> target_n = target;
  for (auto& v : target_n.data) v /= peak;
  const double target_sum = detail::image_sum(target_n);

  auto wave_mse = [&](const std::vector<double>& p) {
    auto img = bench.render_wave(with_parameters(truth, sel, p));
    for (auto& v : img.data) v /= peak;
    return mse_loss(img, target_n);
  };
  out.initial_wave_mse = wave_mse(out.initial);

  std::string root = cfg.output_dir;
  if (!root.empty()) {
    std::filesystem::create_directories(root);
    write_pfm(root + "/target.pfm", target);
    write_png(root + "/target.png", target);
    out.files.insert(out.files.end(), {root + "/target.pfm", root + "/target.png"});
  }
  const auto snaps = snapshot_iterations(cfg.iterations);

  for (PhysicsMode mode : f.modes) {
    FreeformRun run;
    run.mode = mode;
    run.trace.columns = {"iter", "loss"};
    for (const auto& p : sel.entries) run.trace.columns.push_back(param_name(p));
    std::string dir;
    if (!root.empty()) {
      dir = root + "/" + to_string(mode);
      std::filesystem::create_directories(dir);
    }

    auto eval = [&](const std::vector<double>& p) {
      const LensSystem s = with_parameters(truth, sel, p);
      return value_and_gradient(s, [&](const auto& sys) {
        if (mode == PhysicsMode::wave) {
          auto img = bench.render_wave(sys);
          for (auto& v : img.data) v = v / peak;
          return mse_loss(img, target_n);
        }
        // Irradiance carries no absolute scale; match total energy.
        auto img = bench.render_ray(sys);
        const auto scale = target_sum / detail::image_sum(img);
        for (auto& v : img.data) v = v * scale;
        return mse_loss(img, target_n);
      });
    };
    auto observe = [&](int it, const std::vector<double>& p, double loss) {
      std::vector<double> row{static_cast<double>(it), loss};
      row.insert(row.end(), p.begin(), p.end());
      run.trace.add(std::move(row));
      if (!dir.empty() && std::find(snaps.begin(), snaps.end(), it) != snaps.end()) {
        const auto img = bench.render_wave(with_parameters(truth, sel, p));
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
    run.recovered = res.params;
    run.training_loss = res.loss;
    run.log = res.log;
    run.wave_mse = wave_mse(res.params);
    if (!dir.empty()) {
      run.trace.save(dir + "/trace.csv");
      save_prescription(with_parameters(truth, sel, res.params), dir + "/recovered.lens");
      out.files.insert(out.files.end(), {dir + "/trace.csv", dir + "/recovered.lens"});
    }
    out.runs.push_back(std::move(run));
  }
  return out;
}

}  // namespace rwsim
