#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "rwsim/imaging/plan.hpp"
#include "rwsim/io/image_io.hpp"
#include "rwsim/io/manifest.hpp"
#include "rwsim/lens/prescription.hpp"
#include "rwsim/optimize/fizeau.hpp"
#include "rwsim/optimize/freeform.hpp"
#include "rwsim/optimize/lens_experiment.hpp"
#include "rwsim/validation/suites.hpp"

#ifndef RWSIM_VERSION
#define RWSIM_VERSION "unknown"
#endif

namespace {

using rwsim::io::Json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitValidation = 4;

struct Globals {
  std::vector<std::string> argv;
  std::uint64_t seed = 1;
  unsigned workers = 0;
};

rwsim::io::RunManifest start_manifest(const Globals& g, const std::string& command) {
  rwsim::io::RunManifest m;
  m.command = command;
  m.argv = g.argv;
  m.seed = g.seed;
  m.version = RWSIM_VERSION;
  m.started = rwsim::io::utc_timestamp();
  return m;
}

void finish_manifest(rwsim::io::RunManifest& m, const std::string& path) {
  m.finished = rwsim::io::utc_timestamp();
  m.write(path);
}

std::vector<double> split_numbers(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size() && item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw rwsim::ConfigError("--field: '" + text + "' is not a number list");
    }
  }
  return out;
}

// "deg" (along y), "deg_x,deg_y" or "x,y,z" in mm for a finite object.
rwsim::Source parse_field(const std::string& text, const rwsim::LensSystem& sys) {
  const auto v = split_numbers(text);
  constexpr double rad = std::numbers::pi / 180.0;
  if (v.size() == 3) {
    if (sys.object_at_infinity()) throw rwsim::ConfigError("--field x,y,z needs a finite object distance");
    return rwsim::Source::at_point({v[0], v[1], v[2]});
  }
  if (v.size() == 1 || v.size() == 2) {
    if (!sys.object_at_infinity()) throw rwsim::ConfigError("finite object distance: give --field as x,y,z in mm");
    const double ax = v.size() == 2 ? v[0] : 0.0;
    const double ay = v.back();
    return rwsim::Source::field_angle(ax * rad, ay * rad);
  }
  throw rwsim::ConfigError("--field takes 1, 2 or 3 comma-separated numbers");
}

std::string stem_path(const std::string& stem, const std::string& suffix) { return stem + suffix; }

void ensure_parent(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
}

// ---- render-psf ----------------------------------------------------------------

struct PsfArgs {
  std::string lens;
  std::string field = "0";
  double wavelength = 532.0;
  std::size_t rays = 200000;
  int window = 63;
  double pitch = 0.0;
  bool jitter = false;
  std::string out = "psf";
};

int cmd_render_psf(const Globals& g, const PsfArgs& a) {
  auto manifest = start_manifest(g, "render-psf");
  const auto sys = rwsim::load_prescription(a.lens);
  const auto src = parse_field(a.field, sys);
  rwsim::PsfOptions opt;
  opt.wavelength_nm = a.wavelength;
  opt.n_rays = a.rays;
  opt.window = a.window;
  opt.pitch_mm = a.pitch;
  opt.pupil.seed = g.seed;
  opt.pupil.jitter = a.jitter;
  const auto psf = rwsim::render_psf(sys, src, opt);

  ensure_parent(a.out);
  rwsim::write_pfm(stem_path(a.out, ".pfm"), psf.intensity);
  rwsim::write_png(stem_path(a.out, ".png"), psf.intensity);
  Json side;
  side["center_mm"] = {psf.center_mm.x, psf.center_mm.y};
  side["pitch_mm"] = psf.pitch_mm;
  side["wavelength_nm"] = psf.wavelength_nm;
  side["field"] = psf.field;
  side["n_rays"] = a.rays;
  side["jitter"] = a.jitter;
  side["live_rays"] = psf.n_rays;
  side["window"] = a.window;
  rwsim::io::write_text_atomic(stem_path(a.out, ".json"), side.dump(2) + "\n");

  manifest.config = {{"lens", a.lens}, {"field", a.field}, {"wavelength_nm", a.wavelength}, {"rays", a.rays},
                     {"window", a.window}, {"pitch_mm", a.pitch}, {"jitter", a.jitter}};
  manifest.outputs = {stem_path(a.out, ".pfm"), stem_path(a.out, ".png"), stem_path(a.out, ".json")};
  finish_manifest(manifest, stem_path(a.out, ".manifest.json"));
  std::cout << "PSF " << psf.field << ": " << a.window << " x " << a.window << " at "
            << psf.pitch_mm << " mm, " << psf.n_rays << " live rays -> " << a.out
            << ".pfm\n";
  return kExitOk;
}

// ---- render-image --------------------------------------------------------------

struct ImageArgs {
  std::string lens;
  std::string scene;
  int grid = 5;
  int map_size = 9;
  std::size_t rays = 4096;
  int window = 31;
  double wavelength = 587.6;
  bool bayer = false;
  bool jitter = false;
  std::string out = "image";
};

int cmd_render_image(const Globals& g, const ImageArgs& a) {
  auto manifest = start_manifest(g, "render-image");
  const auto sys = rwsim::load_prescription(a.lens);
  const auto scene = rwsim::load_scene(a.scene);
  rwsim::RenderSettings rs;
  rs.grid = a.grid;
  rs.map_size = a.map_size;
  rs.psf.n_rays = a.rays;
  rs.psf.window = a.window;
  rs.psf.pupil.seed = g.seed;
  rs.psf.pupil.jitter = a.jitter;
  std::vector<rwsim::Image<double>> planes;
  if (a.bayer) {
    rs.wavelengths_nm = rwsim::rgb_wavelengths();
    planes = scene.channels.size() == 3 ? scene.channels : std::vector<rwsim::Image<double>>{rwsim::to_gray(scene)};
  } else {
    rs.wavelengths_nm = {a.wavelength};
    planes = {rwsim::to_gray(scene)};
  }
  const auto plan = rwsim::make_render_plan(sys, planes, rs);
  const auto m = a.bayer ? rwsim::render_rgb_bayer(sys, plan) : rwsim::render_with_plan(sys, plan).front();

  ensure_parent(a.out);
  rwsim::write_pfm(stem_path(a.out, ".pfm"), m.image);
  rwsim::write_png(stem_path(a.out, ".png"), m.image);
  rwsim::write_png(stem_path(a.out, "_valid.png"), m.valid, 1.0);
  Json side;
  side["grid"] = a.grid;
  side["map_size"] = a.map_size;
  side["n_rays"] = a.rays;
  side["window"] = a.window;
  side["wavelengths_nm"] = rs.wavelengths_nm;
  side["bayer"] = a.bayer;
  side["seed"] = g.seed;
  side["jitter"] = a.jitter;
  side["pitch_mm"] = m.pitch;
  side["warnings"] = plan.warnings();
  rwsim::io::write_text_atomic(stem_path(a.out, ".json"), side.dump(2) + "\n");
  for (const auto& w : plan.warnings()) std::cerr << "warning: " << w << "\n";

  manifest.config = {{"lens", a.lens}, {"scene", a.scene}, {"grid", a.grid}, {"map_size", a.map_size},
                     {"rays", a.rays}, {"window", a.window}, {"wavelengths_nm", rs.wavelengths_nm},
                     {"bayer", a.bayer}, {"jitter", a.jitter}};
  manifest.outputs = {stem_path(a.out, ".pfm"), stem_path(a.out, ".png"), stem_path(a.out, "_valid.png"),
                      stem_path(a.out, ".json")};
  finish_manifest(manifest, stem_path(a.out, ".manifest.json"));
  std::cout << "measurement " << m.image.width << " x " << m.image.height << " (M = " << a.grid << ") -> " << a.out
            << ".pfm\n";
  return kExitOk;
}

// ---- optimize ------------------------------------------------------------------

Json vector_json(const std::vector<double>& v) { return Json(v); }

int cmd_optimize(const Globals& g, const std::string& config_path, const std::string& out_override,
                 bool seed_given) {
  auto manifest = start_manifest(g, "optimize");
  auto cfg = rwsim::load_experiment_config(config_path);
  if (seed_given) cfg.seed = g.seed;
  if (!out_override.empty()) cfg.output_dir = out_override;
  if (cfg.output_dir.empty()) cfg.output_dir = cfg.kind + "_run";
  std::filesystem::create_directories(cfg.output_dir);
  manifest.seed = cfg.seed;

  Json summary;
  summary["kind"] = cfg.kind;
  summary["iterations"] = cfg.iterations;
  summary["seed"] = cfg.seed;
  std::vector<std::string> files;
  if (cfg.kind == "lens") {
    const auto res = rwsim::run_lens_experiment(cfg);
    for (const auto& run : res.runs) {
      const std::string mode = rwsim::to_string(run.mode);
      summary[mode] = {{"wave_loss", run.wave_loss}, {"psf_rms_mm", run.psf_rms_mm}, {"efl", run.efl},
                       {"f_number", run.f_number}, {"log", run.log}};
      std::cout << mode << ": EFL " << rwsim::io::format_double(run.efl) << " mm, F/"
                << rwsim::io::format_double(run.f_number) << ", wave loss " << rwsim::io::format_double(run.wave_loss)
                << ", on-axis PSF rms " << rwsim::io::format_double(run.psf_rms_mm) << " mm\n";
    }
    if (res.mf) summary["mf"] = *res.mf;
    if (res.rrmse) summary["rrmse"] = *res.rrmse;
    files = res.files;
  } else if (cfg.kind == "fizeau") {
    const auto res = rwsim::run_fizeau_experiment(cfg);
    summary["reference"] = vector_json(res.reference);
    summary["initial"] = vector_json(res.initial);
    summary["recovered"] = vector_json(res.recovered);
    summary["relative_error"] = vector_json(res.relative_error);
    summary["initial_loss"] = res.initial_loss;
    summary["final_loss"] = res.final_loss;
    summary["steps"] = res.steps;
    summary["log"] = res.log;
    std::cout << "fizeau: loss " << rwsim::io::format_double(res.initial_loss) << " -> "
              << rwsim::io::format_double(res.final_loss) << ", max relative parameter error "
              << rwsim::io::format_double(res.max_relative_error()) << "\n";
    files = res.files;
  } else if (cfg.kind == "freeform") {
    const auto res = rwsim::run_freeform_experiment(cfg);
    summary["reference"] = vector_json(res.reference);
    summary["initial"] = vector_json(res.initial);
    summary["initial_wave_mse"] = res.initial_wave_mse;
    for (const auto& run : res.runs) {
      const std::string mode = rwsim::to_string(run.mode);
      summary[mode] = {{"recovered", run.recovered}, {"training_loss", run.training_loss},
                       {"wave_mse", run.wave_mse}, {"log", run.log}};
      std::cout << mode << ": wave-evaluated MSE " << rwsim::io::format_double(run.wave_mse) << "\n";
    }
    files = res.files;
  } else {
    throw rwsim::ConfigError("unknown experiment kind '" + cfg.kind + "'");
  }

  const std::string summary_path = (std::filesystem::path(cfg.output_dir) / "summary.json").string();
  rwsim::io::write_text_atomic(summary_path, summary.dump(2) + "\n");
  files.push_back(summary_path);
  manifest.config = cfg.resolved;
  manifest.outputs = files;
  finish_manifest(manifest, (std::filesystem::path(cfg.output_dir) / "manifest.json").string());
  return kExitOk;
}

// ---- validate ------------------------------------------------------------------

int cmd_validate(const Globals& g, const std::string& suite, std::string report) {
  auto manifest = start_manifest(g, "validate");
  const auto rep = rwsim::validation::run_suite(suite, g.seed);
  std::cout << rep.summary();
  if (report.empty()) report = suite + "_report.json";
  ensure_parent(report);
  rwsim::io::write_text_atomic(report, rep.to_json().dump(2) + "\n");
  manifest.config = {{"suite", suite}};
  manifest.outputs = {report};
  const std::filesystem::path rp(report);
  finish_manifest(manifest, (rp.parent_path() / (rp.stem().string() + ".manifest.json")).string());
  return rep.passed() ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  Globals g;
  g.argv.assign(argv, argv + argc);

  CLI::App app{"Hybrid ray-wave optics simulator"};
  app.require_subcommand(1);
  app.add_option("--seed", g.seed, "Seed for pupil jitter and experiment initialisation");
  app.add_option("--workers", g.workers, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);

  PsfArgs psf;
  auto* c_psf = app.add_subcommand("render-psf", "Render the PSF of one field point");
  c_psf->add_option("--lens", psf.lens, "Prescription file")->required()->check(CLI::ExistingFile);
  c_psf->add_option("--field", psf.field, "Field angle in degrees (y, or x,y) or object point x,y,z in mm");
  c_psf->add_option("--wavelength", psf.wavelength, "Wavelength in nm")->check(CLI::PositiveNumber);
  c_psf->add_option("--rays", psf.rays, "Pupil rays")->check(CLI::PositiveNumber);
  c_psf->add_option("--window", psf.window, "PSF window in pixels (odd)")->check(CLI::PositiveNumber);
  c_psf->add_option("--pitch", psf.pitch, "PSF sampling pitch in mm (default: sensor pitch)");
  c_psf->add_flag("--jitter", psf.jitter, "Jitter the pupil grid (seeded by --seed)");
  c_psf->add_option("--out", psf.out, "Output path stem");

  ImageArgs img;
  auto* c_img = app.add_subcommand("render-image", "Render a scene through the lens");
  c_img->add_option("--lens", img.lens, "Prescription file")->required()->check(CLI::ExistingFile);
  c_img->add_option("--scene", img.scene, "Scene image (PNG or PFM)")->required()->check(CLI::ExistingFile);
  c_img->add_option("--grid", img.grid, "PSF grid size M (odd, >= 3)");
  c_img->add_option("--map-size", img.map_size, "Distortion map nodes per axis");
  c_img->add_option("--rays", img.rays, "Pupil rays per PSF")->check(CLI::PositiveNumber);
  c_img->add_option("--window", img.window, "PSF window in pixels (odd)")->check(CLI::PositiveNumber);
  c_img->add_option("--wavelength", img.wavelength, "Wavelength in nm (monochrome)")->check(CLI::PositiveNumber);
  c_img->add_flag("--bayer", img.bayer, "Render R, G, B channels and mosaic them (RGGB)");
  c_img->add_flag("--jitter", img.jitter, "Jitter the pupil grid (seeded by --seed)");
  c_img->add_option("--out", img.out, "Output path stem");

  std::string config_path, out_dir;
  auto* c_opt = app.add_subcommand("optimize", "Run an optimization experiment");
  c_opt->add_option("--config", config_path, "Experiment config file")->required()->check(CLI::ExistingFile);
  c_opt->add_option("--out", out_dir, "Output directory (overrides the config)");

  std::string suite, report;
  auto* c_val = app.add_subcommand("validate", "Run a validation suite");
  c_val->add_option("--suite", suite, "Suite name")
      ->required()
      ->check(CLI::IsMember(rwsim::validation::suite_names()));
  c_val->add_option("--report", report, "JSON report path (default <suite>_report.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitConfig;
  }

  rwsim::set_worker_count(g.workers);
  try {
    if (c_psf->parsed()) return cmd_render_psf(g, psf);
    if (c_img->parsed()) return cmd_render_image(g, img);
    if (c_opt->parsed()) return cmd_optimize(g, config_path, out_dir, app.count("--seed") > 0);
    if (c_val->parsed()) return cmd_validate(g, suite, report);
  } catch (const rwsim::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const rwsim::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
