#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "rwsim/imaging/metrics.hpp"
#include "rwsim/imaging/plan.hpp"
#include "rwsim/io/kv_format.hpp"
#include "rwsim/optimize/fizeau.hpp"
#include "rwsim/optimize/lens_experiment.hpp"
#include "rwsim/validation/systems.hpp"
#include "rwsim/wavefield/airy.hpp"

namespace rwsim::validation {

struct Check {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  bool pass = false;
  std::string detail;
};

struct SuiteReport {
  std::string suite;
  std::vector<Check> checks;
  std::vector<std::string> notes;
  double seconds = 0.0;

  bool passed() const {
    if (checks.empty()) return false;
    for (const auto& c : checks) {
      if (!c.pass) return false;
    }
    return true;
  }

  void at_most(const std::string& name, double value, double limit, std::string detail = {}) {
    checks.push_back({name, value, limit, value <= limit, std::move(detail)});
  }
  void at_least(const std::string& name, double value, double limit, std::string detail = {}) {
    checks.push_back({name, value, limit, value >= limit, std::move(detail)});
  }
  void require(const std::string& name, bool ok, std::string detail = {}) {
    checks.push_back({name, ok ? 1.0 : 0.0, 1.0, ok, std::move(detail)});
  }

  io::Json to_json() const {
    io::Json j;
    j["suite"] = suite;
    j["passed"] = passed();
    j["seconds"] = seconds;
    j["checks"] = io::Json::array();
    for (const auto& c : checks) {
      j["checks"].push_back({{"name", c.name}, {"value", c.value}, {"limit", c.limit}, {"pass", c.pass},
                             {"detail", c.detail}});
    }
    j["notes"] = notes;
    return j;
  }

  std::string summary() const {
    std::string out;
    char buf[256];
    for (const auto& c : checks) {
      std::snprintf(buf, sizeof buf, "  [%s] %s: %.6g (limit %.6g)", c.pass ? "pass" : "FAIL", c.name.c_str(),
                    c.value, c.limit);
      out += buf;
      if (!c.detail.empty()) out += " " + c.detail;
      out += "\n";
    }
    for (const auto& n : notes) out += "  note: " + n + "\n";
    std::snprintf(buf, sizeof buf, "%s: %s (%.1f s)\n", suite.c_str(), passed() ? "PASS" : "FAIL", seconds);
    return out + buf;
  }
};

namespace detail {

template <class Fn>
SuiteReport timed(const std::string& name, Fn&& fn) {
  SuiteReport r;
  r.suite = name;
  const auto t0 = std::chrono::steady_clock::now();
  fn(r);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

// First local minimum of I(r) along +x from the PSF centre, located by a
// coarse scan and refined by golden-section search.
template <class Fn>
double first_minimum(Fn&& intensity, double r_max, int steps) {
  double prev = intensity(0.0);
  double r_lo = 0.0, r_hi = r_max;
  const double dr = r_max / steps;
  for (int i = 1; i <= steps; ++i) {
    const double v = intensity(i * dr);
    if (v > prev && i > 1) {
      r_lo = (i - 2) * dr;
      r_hi = i * dr;
      break;
    }
    prev = v;
  }
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = r_lo, b = r_hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = intensity(c), fd = intensity(d);
  for (int it = 0; it < 60 && b - a > 1e-12; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = intensity(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = intensity(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace detail

// ---- airy --------------------------------------------------------------------

struct AiryOptions {
  double pupil_radius_mm = 5.0;
  double efl_mm = 50.0;
  double wavelength_nm = 532.0;
  std::size_t n_rays = 200000;
  int window = 31;
  double pitch_mm = 0.5e-3;
  double min_ssim = 0.95;
  double expected_zero_mm = 3.245e-3;
  double zero_tolerance = 0.05;
};

// Diffraction-limited PSF of a perfect lens against the analytic Airy pattern.
inline SuiteReport airy_suite(const AiryOptions& o = {}) {
  return detail::timed("airy", [&](SuiteReport& rep) {
    const LensSystem sys = ideal_lens(o.pupil_radius_mm, o.efl_mm);
    const Source src = Source::field_angle(0.0, 0.0);
    const auto sphere = build_reference_sphere(sys, src, o.wavelength_nm, o.n_rays);
    PsfOptions opt;
    opt.wavelength_nm = o.wavelength_nm;
    opt.n_rays = o.n_rays;
    opt.window = o.window;
    opt.pitch_mm = o.pitch_mm;
    const auto psf = psf_from_sphere(sys, sphere, src, opt, o.pitch_mm);
    const auto airy = airy_reference(o.pupil_radius_mm, o.efl_mm, o.wavelength_nm, o.window, o.pitch_mm);
    rep.at_least("ssim vs Airy", ssim(normalize_peak(psf.intensity), airy), o.min_ssim);

    const double z = value_of(sys.sensor_z);
    auto radial = [&](double r) {
      return rs_integrate(sphere, {Vec3<double>{sphere.center.x + r, sphere.center.y, z}})[0];
    };
    const double r0 = detail::first_minimum(radial, 2.0 * o.expected_zero_mm, 200);
    const double rel = std::abs(r0 - o.expected_zero_mm) / o.expected_zero_mm;
    rep.at_most("first zero relative error", rel, o.zero_tolerance,
                detail::fmt("(measured %.4f um, analytic %.4f um)", r0 * 1e3,
                            airy_first_zero(o.pupil_radius_mm, o.efl_mm, o.wavelength_nm) * 1e3));
  });
}

// ---- geometric ---------------------------------------------------------------

struct DefocusOptions {
  double pupil_radius_mm = 5.0;
  double efl_mm = 50.0;
  double wavelength_nm = 532.0;
  std::vector<double> offsets_mm{0.0, 0.05, 0.2, 0.5, 1.0, 1.5};
  std::size_t n_rays = 30000;
  std::size_t spot_rays = 60000;
  int window = 81;
  double geometric_ratio = 20.0;  // blur diameter over Airy diameter
  double rms_tolerance = 0.10;
  double min_ssim = 0.95;
};

// Defocus sweep on a perfect lens: the in-focus PSF is the Airy pattern and
// strongly defocused PSFs reach the geometric spot-diagram RMS radius.
inline SuiteReport geometric_suite(const DefocusOptions& o = {}) {
  return detail::timed("geometric", [&](SuiteReport& rep) {
    const double airy_d = 2.0 * airy_first_zero(o.pupil_radius_mm, o.efl_mm, o.wavelength_nm);
    bool saw_focus = false, saw_geometric = false;
    for (double dz : o.offsets_mm) {
      LensSystem sys = ideal_lens(o.pupil_radius_mm, o.efl_mm);
      sys.sensor_z = value_of(sys.sensor_z) + dz;
      const Source src = Source::field_angle(0.0, 0.0);
      const auto hits = spot_diagram(sys, sample_pupil(sys, src, o.wavelength_nm, o.spot_rays));
      const double geo = rms_spot_radius(hits);
      double blur = 0.0, cx = 0.0, cy = 0.0;
      for (const auto& h : hits) {
        cx += h.x / static_cast<double>(hits.size());
        cy += h.y / static_cast<double>(hits.size());
      }
      for (const auto& h : hits) blur = std::max(blur, 2.0 * std::hypot(h.x - cx, h.y - cy));
      const double half_extent = std::max(4.0 * airy_d / 2.0, 0.8 * blur);
      PsfOptions opt;
      opt.wavelength_nm = o.wavelength_nm;
      opt.n_rays = o.n_rays;
      opt.window = o.window;
      opt.pitch_mm = 2.0 * half_extent / o.window;
      const auto psf = render_psf(sys, src, opt);
      const double wave = rms_radius(psf.intensity, opt.pitch_mm);
      const double ratio = blur / airy_d;
      rep.notes.push_back(detail::fmt("dz %.3f mm: blur/Airy %.4g", dz, ratio) +
                          detail::fmt(", PSF rms %.5g mm, spot rms %.5g mm", wave, geo));
      if (dz == 0.0) {
        const auto airy = airy_reference(o.pupil_radius_mm, o.efl_mm, o.wavelength_nm, o.window, opt.pitch_mm);
        rep.at_least("in focus: ssim vs Airy", ssim(normalize_peak(psf.intensity), airy), o.min_ssim);
        saw_focus = true;
      } else if (ratio > o.geometric_ratio) {
        rep.at_most(detail::fmt("dz %.3g mm: |PSF rms / spot rms - 1|", dz), std::abs(wave / geo - 1.0),
                    o.rms_tolerance);
        saw_geometric = true;
      }
    }
    rep.require("sweep covers focus and the geometric limit", saw_focus && saw_geometric);
  });
}

// ---- snell -------------------------------------------------------------------

struct SnellOptions {
  int rays = 100000;
  std::uint64_t seed = 17;
  double tolerance = 1e-12;
};

// Random refractions at random normals and index pairs.
inline SuiteReport snell_suite(const SnellOptions& o = {}) {
  return detail::timed("snell", [&](SuiteReport& rep) {
    std::mt19937_64 rng(o.seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> un(1.0, 2.0);
    double worst_sine = 0.0, worst_plane = 0.0, worst_unit = 0.0, worst_reverse = 0.0;
    int live = 0;
    for (int i = 0; i < o.rays; ++i) {
      const Vec3<double> n = normalized(Vec3<double>{0.4 * u(rng), 0.4 * u(rng), -1.0});
      Ray<double> r;
      r.direction = normalized(Vec3<double>{u(rng), u(rng), 1.2});
      const double n1 = un(rng), n2 = un(rng);
      const Ray<double> out = refract(r, n, n1, n2);
      if (!out.alive) continue;
      ++live;
      worst_sine = std::max(worst_sine, std::abs(n1 * norm(cross(n, r.direction)) - n2 * norm(cross(n, out.direction))));
      worst_plane = std::max(worst_plane, std::abs(dot(cross(n, r.direction), out.direction)));
      worst_unit = std::max(worst_unit, std::abs(norm(out.direction) - 1.0));
      Ray<double> back = out;
      back.direction = -out.direction;
      back = refract(back, -n, n2, n1);
      worst_reverse = std::max(worst_reverse, back.alive ? norm(back.direction + r.direction) : 1.0);
    }
    rep.at_most("max |n1 sin(t1) - n2 sin(t2)|", worst_sine, o.tolerance);
    rep.at_most("max out-of-plane component", worst_plane, o.tolerance);
    rep.at_most("max | |d'| - 1 |", worst_unit, o.tolerance);
    rep.at_most("max reversed-ray mismatch", worst_reverse, 1e3 * o.tolerance);
    rep.at_least("refracted fraction", static_cast<double>(live) / o.rays, 0.5);
  });
}

// ---- interp ------------------------------------------------------------------

struct InterpOptions {
  std::vector<int> grid_sizes{3, 5, 9, 17};
  int sensor_pixels = 64;
  double field_deg = 15.0;  // half-diagonal field of the sensor corner
  double semi_aperture = 6.0;
  double scale = 0.02;  // applied to every length of the singlet
  std::size_t n_rays = 1024;
  int window = 15;
  double wavelength_nm = 587.6;
  std::uint64_t seed = 1;
  double min_ssim = 0.98;
};

// The seed singlet shrunk by `scale`, imaging a sensor whose corner sits at
// `field_deg`. Shrinking keeps the pixel pitch within a few Airy radii, so a
// modest pupil grid samples the wavefront finely enough for the PSF window.
inline LensSystem interp_system(const InterpOptions& o) {
  LensSystem sys = seed_singlet(o.semi_aperture);
  for (auto& s : sys.surfaces) {
    s.curvature = s.curvature / o.scale;
    s.z = s.z * o.scale;
    s.semi_aperture *= o.scale;
  }
  sys.sensor_z = sys.sensor_z * o.scale;
  const double efl = value_of(paraxial(sys, o.wavelength_nm).efl);
  const double half = efl * std::tan(o.field_deg * std::numbers::pi / 180.0) / std::sqrt(2.0);
  sys.sensor_width = sys.sensor_height = 2.0 * half;
  sys.pixel_pitch = 2.0 * half / o.sensor_pixels;
  return sys;
}

// Grid-interpolated renders against the dense per-pixel superposition: SSIM
// must not drop as the grid is refined.
inline SuiteReport interp_suite(const InterpOptions& o = {}) {
  return detail::timed("interp", [&](SuiteReport& rep) {
    const LensSystem sys = interp_system(o);
    const Image<double> scene = synthetic_scene(o.sensor_pixels, o.seed);
    RenderSettings rs;
    rs.wavelengths_nm = {o.wavelength_nm};
    rs.psf.n_rays = o.n_rays;
    rs.psf.window = o.window;
    rs.grid = o.grid_sizes.front();
    const auto base_plan = make_render_plan(sys, {scene}, rs);
    PsfOptions opt = rs.psf;
    opt.wavelength_nm = o.wavelength_nm;
    opt.pitch_mm = base_plan.sensor.pitch;
    const auto& ch = base_plan.channels.front();
    const auto oracle = dense_superposition_oracle(ch.latent, sys, opt, &ch.map).image;
    double peak = 0.0;
    for (double v : oracle.data) peak = std::max(peak, v);
    auto scaled = [&](Image<double> img) {
      for (auto& v : img.data) v /= peak;
      return img;
    };
    const auto ref = scaled(oracle);
    std::vector<double> scores;
    for (int m : o.grid_sizes) {
      RenderPlan plan = base_plan;
      plan.settings.grid = m;
      plan.channels.front().layout = plan_psf_grid(sys, plan.sensor, m, o.wavelength_nm, &ch.map);
      const auto fast = render_with_plan(sys, plan).front().image;
      scores.push_back(ssim(scaled(fast), ref));
      rep.notes.push_back(detail::fmt("M = %.0f: ssim %.6f", m, scores.back()));
    }
    bool monotone = true;
    for (std::size_t i = 1; i < scores.size(); ++i) monotone = monotone && scores[i] >= scores[i - 1];
    rep.require("ssim nondecreasing in M", monotone);
    rep.at_least(detail::fmt("ssim at M = %.0f", o.grid_sizes.back()), scores.back(), o.min_ssim);
  });
}

// ---- gradcheck ---------------------------------------------------------------

struct GradcheckOptions {
  int states = 3;
  std::uint64_t seed = 2;
  int sensor_pixels = 32;
  int scene_size = 32;
  int grid = 3;
  std::size_t n_rays = 400;
  int window = 9;
  double tolerance = 1e-3;
};

// The two-element system with curvature, spacing and sensor distance free.
inline LensSystem gradcheck_system(const GradcheckOptions& o) {
  LensSystem sys = two_element();
  sys.sensor_width = sys.sensor_height = o.sensor_pixels * sys.pixel_pitch;
  sys.selection.add({0, ParamField::curvature, 0});
  sys.selection.add({1, ParamField::axial_position, 0});
  sys.selection.add({-1, ParamField::sensor_z, 0});
  return sys;
}

// Forward-mode derivatives of the rendered-image RMSE against central
// differences at random parameter states.
inline SuiteReport gradcheck_suite(const GradcheckOptions& o = {}) {
  return detail::timed("gradcheck", [&](SuiteReport& rep) {
    const LensSystem base = gradcheck_system(o);
    RenderSettings rs;
    rs.grid = o.grid;
    rs.psf.n_rays = o.n_rays;
    rs.psf.window = o.window;
    TrainingSet set;
    set.scenes = {synthetic_scene(o.scene_size, o.seed)};
    set.rebuild(base, rs);
    const auto p0 = parameter_values(base, base.selection);
    const std::vector<double> spread{0.02 * std::abs(p0[0]), 0.1, 0.2};
    const std::vector<double> steps{1e-8, 1e-6, 1e-6};
    std::mt19937_64 rng(o.seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const auto names = parameter_names(base.selection);
    std::vector<double> worst(p0.size(), 0.0);
    for (int s = 0; s < o.states; ++s) {
      auto p = p0;
      for (std::size_t k = 0; k < p.size(); ++k) p[k] += spread[k] * u(rng);
      const LensSystem sys = with_parameters(base, base.selection, p);
      const auto e = value_and_gradient(sys, [&](const auto& x) { return wave_loss(x, set); });
      for (std::size_t k = 0; k < p.size(); ++k) {
        auto pp = p, pm = p;
        pp[k] += steps[k];
        pm[k] -= steps[k];
        const double fd = (wave_loss(with_parameters(base, base.selection, pp), set) -
                           wave_loss(with_parameters(base, base.selection, pm), set)) /
                          (2.0 * steps[k]);
        const double rel = std::abs(e.grad[k] - fd) / std::max(std::abs(fd), 1e-12);
        worst[k] = std::max(worst[k], rel);
        rep.notes.push_back("state " + std::to_string(s) + " " + names[k] + ": AD " + io::format_double(e.grad[k]) +
                            ", FD " + io::format_double(fd));
      }
    }
    for (std::size_t k = 0; k < p0.size(); ++k) {
      rep.at_most("relative error d(RMSE)/d " + names[k], worst[k], o.tolerance);
    }
  });
}

// ---- properties --------------------------------------------------------------

struct PropertyOptions {
  std::uint64_t seed = 23;
  int newton_rays = 20000;
  int trials = 5;
};

namespace detail {

inline double max_abs_diff(const Image<double>& a, const Image<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

inline double max_abs(const Image<double>& a) {
  double m = 0.0;
  for (double v : a.data) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace detail

// Randomised invariants of the tracer and the renderer: Snell residual,
// Newton residual, node exactness, linearity, Bayer layout, determinism.
inline SuiteReport property_suite(const PropertyOptions& o = {}) {
  return detail::timed("properties", [&](SuiteReport& rep) {
    std::mt19937_64 rng(o.seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);

    SnellOptions so;
    so.seed = o.seed;
    for (const auto& c : snell_suite(so).checks) rep.checks.push_back(c);

    Surface asph;
    asph.kind = SurfaceKind::even_asphere;
    asph.curvature = 0.06;
    asph.conic = -0.8;
    asph.asphere = {2e-4, -3e-6, 1e-8, 0, 0};
    asph.z = 3.0;
    asph.semi_aperture = 6.0;
    double newton = 0.0;
    int converged = 0;
    for (int i = 0; i < o.newton_rays; ++i) {
      Ray<double> r;
      r.origin = {5.0 * u(rng), 5.0 * u(rng), 0.0};
      r.direction = normalized(Vec3<double>{0.3 * u(rng), 0.3 * u(rng), 1.0});
      const auto hit = intersect(r, asph);
      if (!hit) continue;
      ++converged;
      newton = std::max(newton, std::abs(hit->point.z - asph.z - sag(asph, hit->point.x, hit->point.y)));
    }
    rep.at_most("max Newton residual (mm)", newton, 1e-10);
    rep.at_least("converged fraction", static_cast<double>(converged) / o.newton_rays, 0.5);

    LensSystem sys = seed_singlet();
    sys.sensor_width = sys.sensor_height = 0.41;
    sys.pixel_pitch = 0.01;
    const SensorSpec sensor = SensorSpec::of(sys);
    PsfOptions opt;
    opt.n_rays = 400;
    opt.window = 9;
    const auto grid = sample_psf_grid(sys, sensor, 5, opt);

    std::uniform_real_distribution<double> pos(0.2, 1.0);
    Image<double> nodes(sensor.width, sensor.height);
    for (int j = 0; j < 5; ++j) {
      for (int i = 0; i < 5; ++i) nodes.at(grid.layout.cols[i], grid.layout.rows[j]) = pos(rng);
    }
    const auto exact = dense_superposition_oracle(nodes, sys, opt).image;
    rep.at_most("node exactness vs dense oracle (relative)",
                detail::max_abs_diff(render_measurement(nodes, grid).image, exact) / detail::max_abs(exact), 1e-9);

    double linear = 0.0;
    for (int t = 0; t < o.trials; ++t) {
      Image<double> s1(sensor.width, sensor.height), s2(sensor.width, sensor.height), mix(sensor.width, sensor.height);
      const double a = 2.0 * u(rng), b = 2.0 * u(rng);
      for (std::size_t i = 0; i < s1.size(); ++i) {
        s1.data[i] = pos(rng);
        s2.data[i] = pos(rng);
        mix.data[i] = a * s1.data[i] + b * s2.data[i];
      }
      const auto r1 = render_measurement(s1, grid).image;
      const auto r2 = render_measurement(s2, grid).image;
      const auto rm = render_measurement(mix, grid).image;
      Image<double> combo(sensor.width, sensor.height);
      for (std::size_t i = 0; i < combo.size(); ++i) combo.data[i] = a * r1.data[i] + b * r2.data[i];
      linear = std::max(linear, detail::max_abs_diff(rm, combo) / std::max(detail::max_abs(rm), 1e-300));
    }
    rep.at_most("linearity residual (relative)", linear, 1e-10);

    std::vector<Image<double>> planes;
    for (int c = 0; c < 3; ++c) {
      Image<double> p(6, 4);
      for (auto& v : p.data) v = c + 1.0;
      planes.push_back(p);
    }
    const auto raw = mosaic(planes);
    bool layout = true;
    for (int r = 0; r < raw.height; ++r) {
      for (int c = 0; c < raw.width; ++c) {
        const int want = r % 2 == 0 ? (c % 2 == 0 ? 0 : 1) : (c % 2 == 0 ? 1 : 2);
        layout = layout && raw.at(c, r) == want + 1.0;
      }
    }
    rep.require("RGGB site layout", layout);
    const auto back = demosaic_nearest(raw);
    bool round_trip = true;
    for (int c = 0; c < 3; ++c) round_trip = round_trip && detail::max_abs_diff(back[c], planes[c]) == 0.0;
    rep.require("Bayer demosaic round trip", round_trip);

    const unsigned workers = rwsim::detail::worker_setting();
    set_worker_count(1);
    const auto one = render_measurement(nodes, sample_psf_grid(sys, sensor, 5, opt)).image;
    set_worker_count(4);
    const auto four = render_measurement(nodes, sample_psf_grid(sys, sensor, 5, opt)).image;
    set_worker_count(workers);
    rep.require("render bit-identical across worker counts", one.data == four.data);

    ExperimentConfig cfg;
    cfg.kind = "fizeau";
    cfg.iterations = 3;
    cfg.seed = o.seed;
    cfg.fizeau.samples = 20;
    cfg.fizeau.sensor_pixels = 12;
    const auto t1 = run_fizeau_experiment(cfg).trace.csv();
    const auto t2 = run_fizeau_experiment(cfg).trace.csv();
    rep.require("experiment trace identical for identical config and seed", t1 == t2);
  });
}

// ---- dispatch ----------------------------------------------------------------

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"airy", "geometric", "snell", "interp", "gradcheck", "properties"};
  return names;
}

inline SuiteReport run_suite(const std::string& name, std::uint64_t seed = 1) {
  if (name == "airy") return airy_suite();
  if (name == "geometric") return geometric_suite();
  if (name == "snell") {
    SnellOptions o;
    o.seed = seed;
    return snell_suite(o);
  }
  if (name == "interp") {
    InterpOptions o;
    o.seed = seed;
    return interp_suite(o);
  }
  if (name == "gradcheck") {
    GradcheckOptions o;
    o.seed = seed;
    return gradcheck_suite(o);
  }
  if (name == "properties") {
    PropertyOptions o;
    o.seed = seed;
    return property_suite(o);
  }
  throw ConfigError("unknown validation suite '" + name + "'");
}

}  // namespace rwsim::validation
