// Acceptance run: one PASS/FAIL line per criterion, followed by the
// individual checks behind it. Exit status is the number of failures.
//
//   rwsim_acceptance [--only N] [--report path.json]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "rwsim/rwsim.hpp"

namespace fs = std::filesystem;
using rwsim::validation::SuiteReport;

namespace {

const std::string kConfigs = RWSIM_DATA "/configs";

std::string num(double v) { return rwsim::io::format_double(v); }

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "rwsim_acceptance" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

rwsim::ExperimentConfig experiment(const std::string& file, const std::string& scratch_name) {
  auto cfg = rwsim::load_experiment_config(kConfigs + "/" + file);
  cfg.output_dir = scratch(scratch_name).string();
  return cfg;
}

SuiteReport fizeau_criterion() {
  const auto cfg = experiment("fizeau.cfg", "fizeau");
  const auto res = rwsim::run_fizeau_experiment(cfg);
  SuiteReport rep;
  rep.suite = "fizeau";
  const char* names[] = {"curvature", "f20", "f11"};
  for (std::size_t i = 0; i < res.relative_error.size(); ++i) {
    rep.at_most(std::string("relative error ") + names[i], res.relative_error[i], 1e-2);
  }
  rep.at_least("loss reduction factor", res.initial_loss / res.final_loss, 1e3);
  return rep;
}

SuiteReport freeform_criterion() {
  const auto cfg = experiment("freeform.cfg", "freeform");
  const auto res = rwsim::run_freeform_experiment(cfg);
  SuiteReport rep;
  rep.suite = "freeform";
  const double wave = res.run(rwsim::PhysicsMode::wave).wave_mse;
  const double ray = res.run(rwsim::PhysicsMode::ray).wave_mse;
  rep.notes.push_back("initial wave MSE " + num(res.initial_wave_mse));
  rep.notes.push_back("wave-trained MSE " + num(wave) + ", ray-trained MSE " + num(ray));
  rep.at_least("ray MSE / wave MSE", ray / wave, 5.0);
  return rep;
}

SuiteReport lens_criterion() {
  const auto cfg = experiment("lens_f250.cfg", "lens");
  const auto res = rwsim::run_lens_experiment(cfg);
  const rwsim::LensRun* ray = nullptr;
  const rwsim::LensRun* wave = nullptr;
  for (const auto& r : res.runs) (r.mode == rwsim::PhysicsMode::ray ? ray : wave) = &r;
  SuiteReport rep;
  rep.suite = "lens";
  if (!ray || !wave) {
    rep.require("both physics modes ran", false);
    return rep;
  }
  rep.require("wave EFL strictly smaller", wave->efl < ray->efl,
              "wave " + num(wave->efl) + " mm, ray " + num(ray->efl) + " mm");
  rep.require("wave on-axis PSF RMS strictly smaller", wave->psf_rms_mm < ray->psf_rms_mm,
              "wave " + num(wave->psf_rms_mm) + " mm, ray " + num(ray->psf_rms_mm) + " mm");
  return rep;
}

struct Criterion {
  int id;
  std::string title;
  double budget_s;
  std::function<SuiteReport()> run;
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  std::string report_path;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else if (a == "--report" && i + 1 < argc) {
      report_path = argv[++i];
    } else {
      std::cerr << "usage: rwsim_acceptance [--only N] [--report path.json]\n";
      return 64;
    }
  }

  namespace v = rwsim::validation;
  const std::vector<Criterion> criteria{
      {1, "diffraction limit (Airy)", 60.0, [] { return v::airy_suite(); }},
      {2, "defocus continuum", 300.0, [] { return v::geometric_suite(); }},
      {3, "PSF-grid interpolation trend", 1800.0, [] { return v::interp_suite(); }},
      {4, "end-to-end gradients", 600.0, [] { return v::gradcheck_suite(); }},
      {5, "Fizeau self-consistency", 1200.0, fizeau_criterion},
      {6, "freeform wave vs ray", 1800.0, freeform_criterion},
      {7, "lens EFL direction", 3600.0, lens_criterion},
      {8, "property suites", 600.0, [] { return v::property_suite(); }},
  };

  rwsim::io::Json all = rwsim::io::Json::array();
  int failures = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    SuiteReport rep;
    try {
      rep = c.run();
    } catch (const std::exception& e) {
      rep.suite = c.title;
      rep.require("completed without error", false, e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.seconds = secs;
    rep.at_most("runtime (s)", secs, c.budget_s);
    const bool ok = rep.passed();
    failures += ok ? 0 : 1;

    std::printf("%s  criterion %d: %s (%.1f s)\n", ok ? "PASS" : "FAIL", c.id, c.title.c_str(), secs);
    for (const auto& ch : rep.checks) {
      std::printf("        %s %-40s %.6g (limit %.6g)%s%s\n", ch.pass ? "ok " : "BAD", ch.name.c_str(), ch.value,
                  ch.limit, ch.detail.empty() ? "" : "  ", ch.detail.c_str());
    }
    for (const auto& n : rep.notes) std::printf("        note: %s\n", n.c_str());
    std::fflush(stdout);

    auto j = rep.to_json();
    j["criterion"] = c.id;
    j["title"] = c.title;
    all.push_back(j);
  }

  if (!report_path.empty()) rwsim::io::write_text_atomic(report_path, all.dump(2) + "\n");
  std::printf("%d criterion(s) failed\n", failures);
  return failures;
}
