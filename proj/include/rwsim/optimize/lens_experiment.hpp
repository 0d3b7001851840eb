#pragma once

#include <cmath>
#include <filesystem>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rwsim/imaging/plan.hpp"
#include "rwsim/io/image_io.hpp"
#include "rwsim/lens/prescription.hpp"
#include "rwsim/optimize/config.hpp"
#include "rwsim/optimize/loop.hpp"
#include "rwsim/optimize/loss.hpp"

namespace rwsim {

// Random bright discs and bars on a dim background.
inline Image<double> synthetic_scene(int size, std::uint64_t seed) {
  if (size < 2) throw ConfigError("synthetic scene needs at least 2x2 pixels");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image<double> img(size, size, 0.1);
  const int shapes = 12;
  for (int s = 0; s < shapes; ++s) {
    const double cx = u(rng) * size, cy = u(rng) * size;
    const double a = (0.03 + 0.12 * u(rng)) * size;
    const double b = (0.03 + 0.12 * u(rng)) * size;
    const double level = 0.3 + 0.7 * u(rng);
    const bool disc = u(rng) < 0.5;
    for (int r = 0; r < size; ++r) {
      for (int c = 0; c < size; ++c) {
        const double dx = (c + 0.5 - cx) / a, dy = (r + 0.5 - cy) / b;
        const bool in = disc ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
        if (in) img.at(c, r) = level;
      }
    }
  }
  return img;
}

// Training scene with its frozen plan and peak-normalised latent targets.
struct TrainingSet {
  std::vector<Image<double>> scenes;
  std::vector<RenderPlan> plans;
  std::vector<std::vector<Image<double>>> targets;  // [scene][channel]

  void rebuild(const LensSystem& sys, const RenderSettings& settings) {
    plans.clear();
    targets.clear();
    for (const auto& s : scenes) {
      plans.push_back(make_render_plan(sys, {s}, settings));
      std::vector<Image<double>> t;
      for (const auto& ch : plans.back().channels) t.push_back(normalize_peak(ch.latent));
      targets.push_back(std::move(t));
    }
  }
};

// Mean over scenes and channels of RMSE(normalize(render), normalize(latent))
// on valid pixels.
template <class T>
T wave_loss(const BasicLensSystem<T>& sys, const TrainingSet& set) {
  T acc(0.0);
  std::size_t n = 0;
  for (std::size_t s = 0; s < set.plans.size(); ++s) {
    const auto ms = render_with_plan(sys, set.plans[s]);
    for (std::size_t c = 0; c < ms.size(); ++c) {
      acc += rmse_loss(normalize_peak(ms[c].image), set.targets[s][c], ms[c].valid);
      ++n;
    }
  }
  return acc / static_cast<double>(n);
}

inline std::vector<Vec2<double>> spot_fields(const std::vector<double>& fields_deg) {
  std::vector<Vec2<double>> out;
  for (double d : fields_deg) out.push_back({0.0, std::tan(d * std::numbers::pi / 180.0)});
  return out;
}

// Keeps the field of view: sensor size and pitch scale with the EFL, the
// pixel count stays fixed.
inline void rescale_sensor(LensSystem& sys, const LensSystem& seed, double seed_efl, double wavelength_nm) {
  const double r = value_of(paraxial(sys, wavelength_nm).efl) / seed_efl;
  if (!(r > 0.0) || !std::isfinite(r)) throw DegenerateSystemError("EFL changed sign during optimization");
  sys.sensor_width = seed.sensor_width * r;
  sys.sensor_height = seed.sensor_height * r;
  sys.pixel_pitch = seed.pixel_pitch * r;
}

struct LensRun {
  PhysicsMode mode = PhysicsMode::ray;
  LensSystem final_system;
  Trace trace;
  std::vector<std::string> log;
  double wave_loss = 0.0;      // final design, wave-rendered
  double psf_rms_mm = 0.0;     // on-axis wave PSF RMS radius
  double efl = 0.0;
  double f_number = 0.0;
  std::vector<std::string> files;
};

struct LensExperimentResult {
  LensSystem seed;
  std::vector<LensRun> runs;
  std::optional<double> mf;
  std::optional<double> rrmse;
  std::vector<std::string> files;

  const LensRun& run(PhysicsMode m) const {
    for (const auto& r : runs) {
      if (r.mode == m) return r;
    }
    throw ConfigError("no " + to_string(m) + "-mode run in this result");
  }
};

namespace detail {

inline void check_proposal(const LensSystem& s) {
  try {
    validate_system(s);
  } catch (const ConfigError& e) {
    throw DegenerateSystemError(std::string("proposed system is invalid: ") + e.what());
  }
}

inline std::vector<Image<double>> training_scenes(const LensSettings& l, std::uint64_t seed) {
  std::vector<Image<double>> out;
  for (const auto& p : l.scenes) out.push_back(to_gray(load_scene(p)));
  for (int i = 0; i < l.synthetic_scenes && l.scenes.empty(); ++i) {
    out.push_back(synthetic_scene(l.scene_size, seed * 1000003ull + static_cast<std::uint64_t>(i)));
  }
  return out;
}

inline void write_measurement(const Measurement<double>& m, const std::string& stem,
                              std::vector<std::string>& files) {
  write_pfm(stem + ".pfm", m.image);
  write_png(stem + ".png", m.image);
  files.push_back(stem + ".pfm");
  files.push_back(stem + ".png");
}

}  // namespace detail

inline LensRun run_lens_mode(const LensSystem& seed, PhysicsMode mode, const ExperimentConfig& cfg,
                             const std::vector<Image<double>>& scenes) {
  const auto& l = cfg.lens;
  const double wl = cfg.render.wavelengths_nm.front();
  const double seed_efl = value_of(paraxial(seed, wl).efl);
  const auto fields = spot_fields(l.fields_deg);
  const ParameterSelection& sel = seed.selection;

  LensRun run;
  run.mode = mode;
  run.trace.columns = {"iter", "loss", "efl", "fnum"};
  for (const auto& p : sel.entries) run.trace.columns.push_back(param_name(p));

  LensSystem base = seed;  // carries the current sensor geometry
  TrainingSet set;
  set.scenes = scenes;
  if (mode == PhysicsMode::wave) set.rebuild(base, cfg.render);

  std::string dir;
  if (!cfg.output_dir.empty()) {
    dir = (std::filesystem::path(cfg.output_dir) / to_string(mode)).string();
    std::filesystem::create_directories(dir);
  }
  const auto snaps = snapshot_iterations(cfg.iterations);

  auto eval = [&](const std::vector<double>& p) {
    LensSystem s = with_parameters(base, sel, p);
    detail::check_proposal(s);
    return value_and_gradient(s, [&](const auto& sys) {
      if (mode == PhysicsMode::ray) return rms_spot_loss(sys, fields, wl, l.spot_rays);
      return wave_loss(sys, set);
    });
  };
  const int per_epoch = std::max(1, (cfg.iterations + l.epochs - 1) / l.epochs);
  auto refresh = [&](int it, const std::vector<double>& p) {
    if (l.epochs <= 1 || (it - 1) % per_epoch != 0 || it == 1) return false;
    LensSystem s = with_parameters(base, sel, p);
    rescale_sensor(s, seed, seed_efl, wl);
    base.sensor_width = s.sensor_width;
    base.sensor_height = s.sensor_height;
    base.pixel_pitch = s.pixel_pitch;
    run.log.push_back("iteration " + std::to_string(it) + ": sensor rescaled to " +
                      io::format_double(base.sensor_width) + " mm");
    if (mode == PhysicsMode::wave) set.rebuild(s, cfg.render);
    return true;
  };
  auto observe = [&](int it, const std::vector<double>& p, double loss) {
    const LensSystem s = with_parameters(base, sel, p);
    std::vector<double> row{static_cast<double>(it), loss, value_of(paraxial(s, wl).efl), f_number(s, wl)};
    row.insert(row.end(), p.begin(), p.end());
    run.trace.add(std::move(row));
    if (!dir.empty() && std::find(snaps.begin(), snaps.end(), it) != snaps.end()) {
      const auto plan = make_render_plan(s, {scenes.front()}, cfg.render);
      const auto m = render_with_plan(s, plan).front();
      detail::write_measurement(m, dir + "/measurement_iter" + std::to_string(it), run.files);
    }
  };

  AdamState state = make_adam(learning_rates(seed, cfg.optimizer.rates), parameter_names(sel));
  state.beta1 = cfg.optimizer.beta1;
  state.beta2 = cfg.optimizer.beta2;
  state.eps = cfg.optimizer.epsilon;
  const AdamLoopOptions opt{cfg.iterations, cfg.optimizer.decay, cfg.optimizer.loss_tolerance, 10};
  const auto res = adam_loop(parameter_values(seed, sel), state, opt, eval, refresh, observe);
  run.log.insert(run.log.end(), res.log.begin(), res.log.end());

  run.final_system = with_parameters(base, sel, res.params);
  if (res.accepted > 0 && l.epochs > 1) rescale_sensor(run.final_system, seed, seed_efl, wl);

  // Both modes are judged with wave rendering.
  TrainingSet eval_set;
  eval_set.scenes = scenes;
  eval_set.rebuild(run.final_system, cfg.render);
  run.wave_loss = wave_loss(run.final_system, eval_set);
  PsfOptions psf_opt = l.eval_psf;
  psf_opt.wavelength_nm = wl;
  const auto psf = render_psf(run.final_system, source_at_field(run.final_system, {0.0, 0.0}), psf_opt);
  run.psf_rms_mm = rms_radius(psf.intensity, psf.pitch_mm);
  run.efl = value_of(paraxial(run.final_system, wl).efl);
  run.f_number = f_number(run.final_system, wl);

  if (!dir.empty()) {
    run.trace.save(dir + "/trace.csv");
    save_prescription(run.final_system, dir + "/final.lens");
    write_pfm(dir + "/psf_on_axis.pfm", psf.intensity);
    run.files.insert(run.files.end(), {dir + "/trace.csv", dir + "/final.lens", dir + "/psf_on_axis.pfm"});
  }
  return run;
}

inline LensExperimentResult run_lens_experiment(const ExperimentConfig& cfg, const LensSystem& seed) {
  if (cfg.kind != "lens") throw ConfigError("run_lens_experiment: config kind is '" + cfg.kind + "'");
  if (seed.selection.empty()) throw ConfigError("lens experiment: the prescription selects no parameters");
  LensExperimentResult out;
  out.seed = seed;
  const auto scenes = detail::training_scenes(cfg.lens, cfg.seed);
  for (PhysicsMode m : cfg.lens.modes) {
    out.runs.push_back(run_lens_mode(seed, m, cfg, scenes));
    out.files.insert(out.files.end(), out.runs.back().files.begin(), out.runs.back().files.end());
  }
  if (out.runs.size() == 2) {
    const double wl = cfg.render.wavelengths_nm.front();
    const auto& ray = out.run(PhysicsMode::ray).final_system;
    const auto& wave = out.run(PhysicsMode::wave).final_system;
    out.mf = mf(ray, wave, wl);
    out.rrmse = rrmse(ray, wave);
  }
  return out;
}

inline LensExperimentResult run_lens_experiment(const ExperimentConfig& cfg) {
  return run_lens_experiment(cfg, load_prescription(cfg.lens.prescription));
}

}  // namespace rwsim
