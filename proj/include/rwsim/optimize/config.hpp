#pragma once

// Experiment configuration, in the same key-value dialect as prescriptions:
//
//   [experiment]  kind, iterations, seed, output_dir
//   [optimizer]   beta1, beta2, epsilon, lr_scale, lr_curvature, lr_conic,
//                 lr_distance, lr_sag, lr_relative, decay, loss_tolerance
//   [render]      grid, map_size, rays, window, wavelengths_nm
//   [lens] / [fizeau] / [freeform]   kind-specific settings
//
// Relative paths are resolved against the config file's directory.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rwsim/imaging/plan.hpp"
#include "rwsim/io/kv_format.hpp"
#include "rwsim/lens/prescription.hpp"
#include "rwsim/optimize/adam.hpp"

namespace rwsim {

enum class PhysicsMode { ray, wave };

inline std::string to_string(PhysicsMode m) { return m == PhysicsMode::ray ? "ray" : "wave"; }

struct OptimizerSettings {
  LearningRates rates;
  double lr_relative = 0.02;  // fizeau/freeform: fraction of each initial magnitude
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double decay = 1.0;
  double loss_tolerance = 0.0;
};

struct LensSettings {
  std::string prescription;
  std::vector<PhysicsMode> modes{PhysicsMode::ray, PhysicsMode::wave};
  std::vector<double> fields_deg{0.0};  // spot-loss fields along y
  int epochs = 1;
  std::vector<std::string> scenes;
  int synthetic_scenes = 2;
  int scene_size = 96;
  std::size_t spot_rays = 256;
  PsfOptions eval_psf{587.6, 20000, 63, 0.02, {}, {}};
};

struct FizeauSettings {
  double wavelength_nm = 650.0;
  double curvature = 5.6e-3;  // reference surface, 1/mm
  double f20 = 1.0e-3;        // x^2 coefficient, 1/mm
  double f11 = 8.0e-4;        // xy coefficient, 1/mm
  double perturbation = 0.05;
  double aperture_radius = 0.6;  // mm
  int samples = 80;              // per side of the sample grid
  double sample_plane = 1.0;     // mm in front of the surface vertex
  double distance = 80.0;        // sample plane to sensor, mm
  double sensor_size = 1.2649110640673518;  // side, mm (1.6 mm^2)
  int sensor_pixels = 64;
};

struct FreeformTerm {
  int m = 0;
  int n = 0;
  double value = 0.0;
};

struct FreeformSettings {
  double wavelength_nm = 532.0;
  std::vector<FreeformTerm> terms{{2, 0, 0.025}, {0, 2, 0.02}, {1, 1, 0.005},
                                  {3, 0, 0.015}, {0, 3, -0.01}, {2, 1, 0.01}};  // target surface
  double perturbation = 0.25;
  double aperture_half = 0.3;  // half-width of the square aperture, mm
  int samples = 64;            // per side
  double thickness = 1.0;
  double index = 1.5;
  double distance = 15.0;  // back face to sensor, mm
  double sensor_size = 0.6;
  int sensor_pixels = 64;
  double splat_sigma_px = 1.0;
  std::vector<PhysicsMode> modes{PhysicsMode::wave, PhysicsMode::ray};
};

struct ExperimentConfig {
  std::string kind = "lens";
  std::string source;  // config file, for messages and relative paths
  int iterations = 100;
  std::uint64_t seed = 0;
  std::string output_dir;
  OptimizerSettings optimizer;
  RenderSettings render;
  LensSettings lens;
  FizeauSettings fizeau;
  FreeformSettings freeform;
  io::Json resolved;  // the parsed document, echoed into run manifests
};

namespace detail {

inline std::vector<double> number_list(const io::Json& obj, const std::string& key, const std::string& path,
                                       std::vector<double> fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& a = obj.at(key);
  if (!a.is_array()) throw ConfigError(path + "." + key + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& v : a) {
    if (!v.is_number()) throw ConfigError(path + "." + key + ": expected an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

inline int get_int(const io::Json& obj, const std::string& key, const std::string& path, int fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(path + "." + key + ": expected an integer");
  return v.get<int>();
}

inline std::vector<PhysicsMode> parse_modes(const std::string& s, const std::string& path) {
  if (s == "ray") return {PhysicsMode::ray};
  if (s == "wave") return {PhysicsMode::wave};
  if (s == "both") return {PhysicsMode::ray, PhysicsMode::wave};
  throw ConfigError(path + ".mode: expected \"ray\", \"wave\" or \"both\", got \"" + s + "\"");
}

inline std::string resolve_path(const std::string& base, const std::string& p) {
  if (p.empty() || std::filesystem::path(p).is_absolute() || base.empty()) return p;
  return (std::filesystem::path(base) / p).lexically_normal().string();
}

inline const io::Json& table(const io::Json& doc, const std::string& name) {
  static const io::Json empty = io::Json::object();
  if (!doc.contains(name)) return empty;
  if (!doc.at(name).is_object()) throw ConfigError(name + ": expected a table");
  return doc.at(name);
}

}  // namespace detail

inline ExperimentConfig experiment_from_json(const io::Json& doc, const std::string& source = "") {
  using detail::get_int;
  using io::get_number;
  ExperimentConfig c;
  c.source = source;
  c.resolved = doc;
  const std::string base =
      source.empty() ? std::string() : std::filesystem::path(source).parent_path().string();

  const auto& ex = detail::table(doc, "experiment");
  c.kind = io::get_string(ex, "kind", "experiment");
  if (c.kind != "lens" && c.kind != "fizeau" && c.kind != "freeform") {
    throw ConfigError("experiment.kind: expected \"lens\", \"fizeau\" or \"freeform\", got \"" + c.kind + "\"");
  }
  c.iterations = get_int(ex, "iterations", "experiment", c.iterations);
  if (c.iterations < 1) throw ConfigError("experiment.iterations: must be >= 1");
  const int seed = get_int(ex, "seed", "experiment", 0);
  if (seed < 0) throw ConfigError("experiment.seed: must be >= 0");
  c.seed = static_cast<std::uint64_t>(seed);
  c.output_dir = detail::resolve_path(base, io::get_string(ex, "output_dir", "experiment", ""));

  const auto& op = detail::table(doc, "optimizer");
  auto& o = c.optimizer;
  o.beta1 = get_number(op, "beta1", "optimizer", o.beta1);
  o.beta2 = get_number(op, "beta2", "optimizer", o.beta2);
  o.epsilon = get_number(op, "epsilon", "optimizer", o.epsilon);
  o.rates.scale = get_number(op, "lr_scale", "optimizer", o.rates.scale);
  o.rates.curvature = get_number(op, "lr_curvature", "optimizer", o.rates.curvature);
  o.rates.conic = get_number(op, "lr_conic", "optimizer", o.rates.conic);
  o.rates.distance = get_number(op, "lr_distance", "optimizer", o.rates.distance);
  o.rates.sag_step = get_number(op, "lr_sag", "optimizer", o.rates.sag_step);
  o.lr_relative = get_number(op, "lr_relative", "optimizer", o.lr_relative);
  o.decay = get_number(op, "decay", "optimizer", o.decay);
  o.loss_tolerance = get_number(op, "loss_tolerance", "optimizer", o.loss_tolerance);
  if (!(o.beta1 >= 0.0 && o.beta1 < 1.0) || !(o.beta2 >= 0.0 && o.beta2 < 1.0)) {
    throw ConfigError("optimizer: beta1 and beta2 must lie in [0, 1)");
  }
  if (!(o.epsilon > 0.0)) throw ConfigError("optimizer.epsilon: must be > 0");
  if (!(o.decay > 0.0 && o.decay <= 1.0)) throw ConfigError("optimizer.decay: must lie in (0, 1]");

  const auto& rd = detail::table(doc, "render");
  auto& r = c.render;
  r.grid = get_int(rd, "grid", "render", r.grid);
  r.map_size = get_int(rd, "map_size", "render", r.map_size);
  r.psf.n_rays = static_cast<std::size_t>(get_int(rd, "rays", "render", static_cast<int>(r.psf.n_rays)));
  r.psf.window = get_int(rd, "window", "render", r.psf.window);
  r.wavelengths_nm = detail::number_list(rd, "wavelengths_nm", "render", r.wavelengths_nm);
  if (r.wavelengths_nm.empty()) throw ConfigError("render.wavelengths_nm: at least one wavelength");

  if (c.kind == "lens") {
    const auto& ln = detail::table(doc, "lens");
    auto& l = c.lens;
    l.prescription = detail::resolve_path(base, io::get_string(ln, "prescription", "lens"));
    if (!std::filesystem::exists(l.prescription)) {
      throw ConfigError("lens.prescription: file '" + l.prescription + "' does not exist");
    }
    l.modes = detail::parse_modes(io::get_string(ln, "mode", "lens", "both"), "lens");
    l.fields_deg = detail::number_list(ln, "fields_deg", "lens", l.fields_deg);
    l.epochs = get_int(ln, "epochs", "lens", l.epochs);
    if (l.epochs < 1) throw ConfigError("lens.epochs: must be >= 1");
    for (const auto& s : detail::string_list(ln, "scenes", "lens")) {
      l.scenes.push_back(detail::resolve_path(base, s));
      if (!std::filesystem::exists(l.scenes.back())) {
        throw ConfigError("lens.scenes: file '" + l.scenes.back() + "' does not exist");
      }
    }
    l.synthetic_scenes = get_int(ln, "synthetic_scenes", "lens", l.synthetic_scenes);
    l.scene_size = get_int(ln, "scene_size", "lens", l.scene_size);
    l.spot_rays = static_cast<std::size_t>(get_int(ln, "spot_rays", "lens", static_cast<int>(l.spot_rays)));
    l.eval_psf.n_rays =
        static_cast<std::size_t>(get_int(ln, "eval_rays", "lens", static_cast<int>(l.eval_psf.n_rays)));
    l.eval_psf.window = get_int(ln, "eval_window", "lens", l.eval_psf.window);
    l.eval_psf.pitch_mm = get_number(ln, "eval_pitch_mm", "lens", l.eval_psf.pitch_mm);
    if (l.scenes.empty() && l.synthetic_scenes < 1) {
      throw ConfigError("lens: no training scenes (give scenes or synthetic_scenes >= 1)");
    }
  } else if (c.kind == "fizeau") {
    const auto& fz = detail::table(doc, "fizeau");
    auto& f = c.fizeau;
    f.wavelength_nm = get_number(fz, "wavelength_nm", "fizeau", f.wavelength_nm);
    f.curvature = get_number(fz, "curvature", "fizeau", f.curvature);
    f.f20 = get_number(fz, "f20", "fizeau", f.f20);
    f.f11 = get_number(fz, "f11", "fizeau", f.f11);
    f.perturbation = get_number(fz, "perturbation", "fizeau", f.perturbation);
    f.aperture_radius = get_number(fz, "aperture_radius", "fizeau", f.aperture_radius);
    f.samples = get_int(fz, "samples", "fizeau", f.samples);
    f.sample_plane = get_number(fz, "sample_plane", "fizeau", f.sample_plane);
    f.distance = get_number(fz, "distance", "fizeau", f.distance);
    if (fz.contains("sensor_area")) {
      f.sensor_size = std::sqrt(get_number(fz, "sensor_area", "fizeau"));
    }
    f.sensor_size = get_number(fz, "sensor_size", "fizeau", f.sensor_size);
    f.sensor_pixels = get_int(fz, "sensor_pixels", "fizeau", f.sensor_pixels);
    if (f.samples < 2 || f.sensor_pixels < 2) throw ConfigError("fizeau: samples and sensor_pixels must be >= 2");
  } else {
    const auto& ff = detail::table(doc, "freeform");
    auto& f = c.freeform;
    f.wavelength_nm = get_number(ff, "wavelength_nm", "freeform", f.wavelength_nm);
    if (ff.contains("terms") && !ff.at("terms").is_array()) {
      throw ConfigError("freeform.terms: expected [[m, n, value], ...]");
    }
    if (ff.contains("terms")) f.terms.clear();
    for (const auto& t : ff.contains("terms") ? ff.at("terms") : io::Json::array()) {
      if (!t.is_array() || t.size() != 3 || !t[0].is_number_integer() || !t[1].is_number_integer() ||
          !t[2].is_number()) {
        throw ConfigError("freeform.terms: expected [[m, n, value], ...]");
      }
      FreeformTerm term{t[0].get<int>(), t[1].get<int>(), t[2].get<double>()};
      if (term.m < 0 || term.n < 0 || term.m + term.n > kFreeformDegree) {
        throw ConfigError("freeform.terms: term exceeds degree 6");
      }
      f.terms.push_back(term);
    }
    f.perturbation = get_number(ff, "perturbation", "freeform", f.perturbation);
    f.aperture_half = get_number(ff, "aperture_half", "freeform", f.aperture_half);
    f.samples = get_int(ff, "samples", "freeform", f.samples);
    f.thickness = get_number(ff, "thickness", "freeform", f.thickness);
    f.index = get_number(ff, "index", "freeform", f.index);
    f.distance = get_number(ff, "distance", "freeform", f.distance);
    f.sensor_size = get_number(ff, "sensor_size", "freeform", f.sensor_size);
    f.sensor_pixels = get_int(ff, "sensor_pixels", "freeform", f.sensor_pixels);
    f.splat_sigma_px = get_number(ff, "splat_sigma_px", "freeform", f.splat_sigma_px);
    f.modes = detail::parse_modes(io::get_string(ff, "mode", "freeform", "both"), "freeform");
    if (f.samples < 2 || f.sensor_pixels < 2) throw ConfigError("freeform: samples and sensor_pixels must be >= 2");
  }
  return c;
}

inline ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source = "") {
  return experiment_from_json(io::parse_kv(text, source.empty() ? "<string>" : source), source);
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  return experiment_from_json(io::load_kv(path), path);
}

}  // namespace rwsim
