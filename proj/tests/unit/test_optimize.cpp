#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "../support/systems.hpp"
#include "rwsim/optimize/fizeau.hpp"
#include "rwsim/optimize/freeform.hpp"
#include "rwsim/optimize/lens_experiment.hpp"

using namespace rwsim;
using rwsim::testing::ideal_lens;
using rwsim::testing::seed_singlet;

namespace {

Image<double> filled(int w, int h, std::vector<double> v) {
  Image<double> img(w, h);
  img.data = std::move(v);
  return img;
}

// Small interferometer: a few hundred samples, 24 x 24 sensor.
ExperimentConfig small_fizeau(double perturbation, int iterations) {
  ExperimentConfig c;
  c.kind = "fizeau";
  c.iterations = iterations;
  c.seed = 11;
  c.fizeau.samples = 28;
  c.fizeau.sensor_pixels = 24;
  c.fizeau.perturbation = perturbation;
  c.optimizer.lr_relative = 0.005;
  c.optimizer.decay = 0.95;
  return c;
}

ExperimentConfig small_lens(const std::string& mode, int iterations) {
  ExperimentConfig c;
  c.kind = "lens";
  c.iterations = iterations;
  c.seed = 3;
  c.lens.modes = detail::parse_modes(mode, "lens");
  c.lens.fields_deg = {0.0, 3.0};
  c.lens.synthetic_scenes = 1;
  c.lens.scene_size = 48;
  c.lens.spot_rays = 64;
  c.lens.eval_psf.n_rays = 1024;
  c.lens.eval_psf.window = 31;
  c.render.grid = 3;
  c.render.psf.n_rays = 256;
  c.render.psf.window = 7;
  return c;
}

LensSystem small_f250() {
  LensSystem s = seed_singlet(1.0);
  s.surfaces[0].semi_aperture = 0.1;
  s.sensor_z = 53.158;
  s.pixel_pitch = 0.276;
  s.sensor_width = 32 * 0.276;
  s.sensor_height = 32 * 0.276;
  s.selection.add({0, ParamField::curvature, 0});
  s.selection.add({1, ParamField::curvature, 0});
  s.selection.add({-1, ParamField::sensor_z, 0});
  return s;
}

}  // namespace

// ---- losses ----------------------------------------------------------------

TEST(Loss, RmseExamples) {
  const auto t = filled(2, 2, {0.1, 0.5, 0.7, 1.0});
  EXPECT_EQ(rmse_loss(t, t), 0.0);
  auto p = t;
  for (auto& v : p.data) v += 0.1;
  EXPECT_NEAR(rmse_loss(p, t), 0.1, 1e-12);
  EXPECT_NEAR(rmse_loss(filled(2, 1, {0, 0}), filled(2, 1, {0, 1})), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(mse_loss(filled(2, 1, {0, 0}), filled(2, 1, {0, 1})), 0.5, 1e-15);
}

TEST(Loss, DimensionMismatchIsConfigError) {
  EXPECT_THROW(rmse_loss(Image<double>(2, 2), Image<double>(3, 2)), ConfigError);
  EXPECT_THROW(mse_loss(Image<double>(2, 2), Image<double>(2, 3)), ConfigError);
}

TEST(Loss, MaskedLossIgnoresInvalidPixels) {
  const auto t = filled(3, 1, {0, 0, 0});
  const auto p = filled(3, 1, {5, 0.2, 0.2});
  const auto mask = filled(3, 1, {0, 1, 1});
  EXPECT_NEAR(rmse_loss(p, t, mask), 0.2, 1e-15);
}

TEST(Loss, GradientFlowsThroughPredictionOnly) {
  using D = Dual<4>;
  Image<D> p(2, 1);
  p.data = {lift<D>(0.0, 0, 1), D(0.0)};
  const auto l = mse_loss(p, filled(2, 1, {1.0, 0.0}));
  // d/dp0 of ((p0 - 1)^2 + 0) / 2 at p0 = 0
  EXPECT_NEAR(l.tangent[0], -1.0, 1e-15);
}

TEST(SpotLoss, TwoRaysOneMicronFromCentroid) {
  const std::vector<Vec2<double>> hits{{1e-3, 0.0}, {-1e-3, 0.0}};
  EXPECT_NEAR(rms_spot_radius(hits), 1e-3, 1e-15);
}

TEST(SpotLoss, PerfectFocusIsZero) {
  const auto sys = ideal_lens();
  EXPECT_LT(rms_spot_loss(sys, {{0.0, 0.0}}, 587.6, 400), 1e-9);
}

TEST(SpotLoss, GrowsLinearlyWithDefocus) {
  auto sys = ideal_lens();
  std::vector<double> dz, rms;
  for (int i = 1; i <= 8; ++i) {
    sys.sensor_z = 54.0 + 0.05 * i;
    dz.push_back(0.05 * i);
    rms.push_back(rms_spot_loss(sys, {{0.0, 0.0}}, 587.6, 900));
  }
  const double n = static_cast<double>(dz.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < dz.size(); ++i) {
    mx += dz[i] / n;
    my += rms[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < dz.size(); ++i) {
    sxy += (dz[i] - mx) * (rms[i] - my);
    sxx += (dz[i] - mx) * (dz[i] - mx);
    syy += (rms[i] - my) * (rms[i] - my);
  }
  EXPECT_GT(sxy * sxy / (sxx * syy), 0.99);
  // Similar triangles: a uniform disk of radius a dz / f has RMS radius (a dz / f) / sqrt(2).
  EXPECT_NEAR(sxy / sxx, 5.0 / 50.0 / std::sqrt(2.0), 0.02 * 5.0 / 50.0);
}

TEST(SpotLoss, VignettedFieldThrows) {
  auto sys = ideal_lens();
  sys.surfaces[1].semi_aperture = 0.5;  // narrower than the pupil grid spacing
  EXPECT_THROW(rms_spot_loss(sys, {{0.0, 0.0}}, 587.6, 64), VignettedFieldError);
}

// ---- Adam ------------------------------------------------------------------

TEST(Adam, ZeroGradientLeavesParameters) {
  auto st = make_adam({0.1, 0.1});
  const auto [s1, p1] = adam_step(st, {1.0, -2.0}, {0.0, 0.0});
  EXPECT_EQ(p1[0], 1.0);
  EXPECT_EQ(p1[1], -2.0);
  EXPECT_EQ(s1.step, 1u);
}

TEST(Adam, FirstStepIsLearningRateTimesSign) {
  auto st = make_adam({0.01, 0.01, 0.01});
  const std::vector<double> p{0.0, 0.0, 0.0};
  const auto [s1, p1] = adam_step(st, p, {3.0, -1e-3, 250.0});
  EXPECT_NEAR(p1[0], -0.01, 1e-6);
  EXPECT_NEAR(p1[1], 0.01, 1e-6);
  EXPECT_NEAR(p1[2], -0.01, 1e-6);
}

TEST(Adam, SecondStepWithConstantGradientIsNotLarger) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double g = u(rng);
    auto st = make_adam({0.05});
    const auto [s1, p1] = adam_step(st, {0.0}, {g});
    const auto [s2, p2] = adam_step(s1, p1, {g});
    EXPECT_LE(std::abs(p2[0] - p1[0]), std::abs(p1[0]) + 1e-15);
  }
}

TEST(Adam, NonFiniteGradientNamesTheParameter) {
  auto st = make_adam({0.1, 0.1}, {"surface[0].curvature", "sensor_z"});
  try {
    adam_step(st, {1.0, 1.0}, {0.0, std::nan("")});
    FAIL() << "expected NumericDomainError";
  } catch (const NumericDomainError& e) {
    EXPECT_NE(std::string(e.what()).find("sensor_z"), std::string::npos);
  }
}

TEST(Adam, LengthMismatchIsConfigError) {
  auto st = make_adam({0.1});
  EXPECT_THROW(adam_step(st, {1.0, 2.0}, {0.0, 0.0}), ConfigError);
}

TEST(Adam, LearningRateGroups) {
  LensSystem sys = seed_singlet(2.0);
  sys.selection.add({0, ParamField::curvature, 0});
  sys.selection.add({1, ParamField::axial_position, 0});
  sys.selection.add({-1, ParamField::sensor_z, 0});
  sys.surfaces[0].kind = SurfaceKind::even_asphere;
  sys.selection.add({0, ParamField::asphere, 0});
  const auto lr = learning_rates(sys);
  EXPECT_DOUBLE_EQ(lr[0], 1e-4);
  EXPECT_DOUBLE_EQ(lr[1], 1e-2);
  EXPECT_DOUBLE_EQ(lr[2], 1e-2);
  EXPECT_DOUBLE_EQ(lr[3], 1e-4 / 16.0);  // r^4 term at a 2 mm aperture
}

// ---- optimization loop -----------------------------------------------------

TEST(AdamLoop, RejectedStepsHalveTheRateAndKeepTheState) {
  // Minimise (x - 3)^2; proposals beyond x = 0.25 are declared degenerate
  // once, then accepted.
  int failures = 1;
  auto eval = [&](const std::vector<double>& p) {
    if (p[0] > 0.25 && failures > 0) {
      --failures;
      throw DegenerateSystemError("synthetic");
    }
    return Evaluation{(p[0] - 3) * (p[0] - 3), {2 * (p[0] - 3)}};
  };
  std::vector<double> xs;
  auto observe = [&](int, const std::vector<double>& p, double) { xs.push_back(p[0]); };
  const auto res = adam_loop({0.0}, make_adam({0.3}), {4, 1.0, 0.0, 10}, eval,
                             [](int, const std::vector<double>&) { return false; }, observe);
  ASSERT_EQ(xs.size(), 5u);
  EXPECT_EQ(xs[1], 0.0);               // rejected proposal
  EXPECT_NEAR(xs[2], 0.15, 1e-9);      // first Adam step at half rate
  EXPECT_EQ(res.rejected, 1);
  EXPECT_EQ(res.accepted, 3);
  ASSERT_EQ(res.log.size(), 1u);
  EXPECT_NE(res.log[0].find("rejected"), std::string::npos);
}

TEST(AdamLoop, AbortsAfterTenConsecutiveRejections) {
  int calls = 0;
  auto eval = [&](const std::vector<double>& p) {
    if (calls++ > 0) throw SurfaceDomainError("always");
    return Evaluation{p[0] * p[0] + 1, {2 * p[0] + 1}};
  };
  auto none = [](int, const std::vector<double>&) { return false; };
  auto ignore = [](int, const std::vector<double>&, double) {};
  EXPECT_THROW(adam_loop({1.0}, make_adam({0.1}), {50, 1.0, 0.0, 10}, eval, none, ignore), NumericError);
  EXPECT_EQ(calls, 11);
}

TEST(AdamLoop, MinSoFarAtTwiceTheBudgetIsNotWorse) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = u(rng), b = u(rng);
    auto eval = [&](const std::vector<double>& p) {
      // Nonconvex: a sum of a quadratic and a ripple.
      const double x = p[0];
      return Evaluation{(x - a) * (x - a) + std::sin(5 * x + b), {2 * (x - a) + 5 * std::cos(5 * x + b)}};
    };
    std::vector<double> losses;
    auto observe = [&](int, const std::vector<double>&, double l) { losses.push_back(l); };
    adam_loop({0.0}, make_adam({0.05}), {40, 1.0, -1e300, 10}, eval,
              [](int, const std::vector<double>&) { return false; }, observe);
    const double min_t = *std::min_element(losses.begin(), losses.begin() + 21);
    const double min_2t = *std::min_element(losses.begin(), losses.end());
    EXPECT_LE(min_2t, min_t);
  }
}

TEST(Trace, CsvHasFixedColumnsAndRoundTripPrecision) {
  Trace t;
  t.columns = {"iter", "loss", "efl"};
  t.add({0, 0.1, 50.0});
  t.add({1, 1.0 / 3.0, 49.5});
  const auto csv = t.csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "iter,loss,efl");
  EXPECT_NE(csv.find("1,0.33333333333333331,49.5"), std::string::npos);
  EXPECT_THROW(t.add({1.0}), ConfigError);
}

// ---- gradients through the whole pipeline --------------------------------

TEST(EndToEnd, WaveLossGradientMatchesFiniteDifferences) {
  LensSystem base = seed_singlet(2.0);
  base.sensor_width = base.sensor_height = 0.6;
  base.pixel_pitch = 0.02;
  base.selection.add({1, ParamField::curvature, 0});
  base.selection.add({-1, ParamField::sensor_z, 0});
  RenderSettings rs;
  rs.grid = 3;
  rs.psf.n_rays = 400;
  rs.psf.window = 9;
  TrainingSet set;
  set.scenes = {synthetic_scene(32, 9)};
  set.rebuild(base, rs);

  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int state = 0; state < 3; ++state) {
    const std::vector<double> p{-1.0 / 51.5 * (1.0 + 0.02 * u(rng)), 52.5 + 0.3 * u(rng)};
    const LensSystem s = with_parameters(base, base.selection, p);
    const auto e = value_and_gradient(s, [&](const auto& sys) { return wave_loss(sys, set); });
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(p[k])) * (k == 0 ? 0.01 : 1.0);
      auto pp = p, pm = p;
      pp[k] += h;
      pm[k] -= h;
      const double fd = (wave_loss(with_parameters(base, base.selection, pp), set) -
                         wave_loss(with_parameters(base, base.selection, pm), set)) /
                        (2 * h);
      EXPECT_NEAR(e.grad[k], fd, 1e-3 * std::abs(fd)) << "state " << state << " parameter " << k;
    }
  }
}

// ---- lens experiment -------------------------------------------------------

TEST(LensExperiment, ZeroIterationsReturnsTheSeed) {
  const LensSystem seed = small_f250();
  auto cfg = small_lens("both", 0);
  const auto res = run_lens_experiment(cfg, seed);
  ASSERT_EQ(res.runs.size(), 2u);
  for (const auto& run : res.runs) {
    EXPECT_EQ(format_prescription(run.final_system), format_prescription(seed));
    EXPECT_EQ(run.trace.rows.size(), 1u);
  }
  EXPECT_NEAR(*res.mf, 0.0, 1e-12);
  EXPECT_NEAR(*res.rrmse, 0.0, 1e-12);
}

TEST(LensExperiment, TraceColumnsAndDeterminism) {
  const LensSystem seed = small_f250();
  auto cfg = small_lens("both", 6);
  cfg.lens.epochs = 2;
  const auto a = run_lens_experiment(cfg, seed);
  const auto b = run_lens_experiment(cfg, seed);
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    const auto& cols = a.runs[i].trace.columns;
    ASSERT_EQ(cols.size(), 7u);
    EXPECT_EQ(cols[0], "iter");
    EXPECT_EQ(cols[1], "loss");
    EXPECT_EQ(cols[2], "efl");
    EXPECT_EQ(cols[3], "fnum");
    EXPECT_EQ(cols[4], "surface[0].curvature");
    EXPECT_EQ(cols[6], "sensor_z");
    EXPECT_EQ(a.runs[i].trace.rows.size(), 7u);
    EXPECT_EQ(a.runs[i].trace.csv(), b.runs[i].trace.csv());
  }
}

TEST(LensExperiment, IdealLensDefocusConvergesToFocus) {
  LensSystem seed = ideal_lens();
  const double dz = 0.2;
  seed.sensor_z = 54.0 + dz;
  seed.sensor_width = seed.sensor_height = 32 * 0.005;
  seed.selection.add({-1, ParamField::sensor_z, 0});
  ExperimentConfig cfg = small_lens("wave", 150);
  cfg.lens.scene_size = 64;
  cfg.render.psf.n_rays = 1024;
  cfg.render.psf.window = 15;
  cfg.optimizer.rates.distance = 0.02;
  cfg.optimizer.decay = 0.97;
  const auto res = run_lens_experiment(cfg, seed);
  EXPECT_NEAR(res.runs.front().final_system.sensor_z, 54.0, 0.01 * dz);
}

TEST(LensExperiment, RejectsSeedWithoutParameters) {
  auto cfg = small_lens("ray", 1);
  EXPECT_THROW(run_lens_experiment(cfg, seed_singlet()), ConfigError);
}

// ---- Fizeau ----------------------------------------------------------------

TEST(Fizeau, NullTestIsTheDoubledSingleBeam) {
  FizeauSettings f = small_fizeau(0, 1).fizeau;
  const FizeauBench bench(f);
  Surface flat;
  flat.kind = SurfaceKind::plane;
  flat.semi_aperture = 1.0;
  const auto both = bench.render(flat);
  // One arm alone: |E|^2 / (N lambda^2); both arms: |2E|^2 / (2N lambda^2).
  const auto ref = reflected_samples(flat, bench.grid, f.sample_plane, f.wavelength_nm);
  const auto single = coherent_integrate<double>({{&ref, {1.0, 0.0}, f.wavelength_nm}}, bench.sensor);
  for (std::size_t i = 0; i < single.size(); ++i) {
    EXPECT_NEAR(both.data[i], 2.0 * single[i], 1e-9 * single[i]);
  }
}

TEST(Fizeau, ReflectionDoublesTheSagInPath) {
  Surface s;
  s.kind = SurfaceKind::freeform;
  s.freeform[freeform_index(0, 0)] = 0.0;
  s.curvature = 0.0;
  s.z = 1e-4;  // a flat displaced by 0.1 um
  s.semi_aperture = 1.0;
  Surface flat = s;
  flat.z = 0.0;
  const std::vector<Vec2<double>> grid{{0.1, 0.2}};
  const auto a = reflected_samples(s, grid, 1.0, 650.0);
  const auto b = reflected_samples(flat, grid, 1.0, 650.0);
  const double dphase = argument(a[0].field * conj(b[0].field));
  EXPECT_NEAR(dphase, std::remainder(wavenumber(650.0) * 2e-4, 2 * std::numbers::pi), 1e-9);
}

TEST(Fizeau, ZeroPerturbationNeedsNoSteps) {
  const auto res = run_fizeau_experiment(small_fizeau(0.0, 10));
  EXPECT_EQ(res.initial_loss, 0.0);
  EXPECT_EQ(res.steps, 0);
  EXPECT_EQ(res.max_relative_error(), 0.0);
}

TEST(Fizeau, RecoversFromOnePercentAndIsDeterministic) {
  const auto cfg = small_fizeau(0.01, 40);
  const auto a = run_fizeau_experiment(cfg);
  EXPECT_LT(a.max_relative_error(), 1e-2);
  EXPECT_LT(a.final_loss, a.initial_loss);
  const auto b = run_fizeau_experiment(cfg);
  EXPECT_EQ(a.trace.csv(), b.trace.csv());
}

// ---- freeform --------------------------------------------------------------

TEST(Freeform, FlatPlateKeepsAUniformField) {
  // Observed 2 um behind the plate, far from the aperture edge, with a
  // sample spacing well under the Fresnel scale sqrt(lambda z).
  FreeformSettings f;
  f.aperture_half = 0.04;
  f.samples = 300;
  f.distance = 0.002;
  f.thickness = 0.5;
  f.sensor_size = 0.008;
  f.sensor_pixels = 16;
  f.terms = {{2, 0, 0.0}};
  const FreeformBench bench(f);
  const auto img = bench.render_wave(freeform_plate(f, {0.0}));
  double mean = 0, sq = 0;
  for (double v : img.data) {
    mean += v;
    sq += v * v;
  }
  const double n = static_cast<double>(img.data.size());
  mean /= n;
  EXPECT_LT(std::sqrt(sq / n - mean * mean) / mean, 0.01);
}

TEST(Freeform, TargetSurfaceAsInitHasZeroLoss) {
  ExperimentConfig cfg;
  cfg.kind = "freeform";
  cfg.iterations = 3;
  cfg.freeform.samples = 24;
  cfg.freeform.sensor_pixels = 16;
  cfg.freeform.perturbation = 0.0;
  const auto res = run_freeform_experiment(cfg);
  EXPECT_EQ(res.initial_wave_mse, 0.0);
  EXPECT_EQ(res.run(PhysicsMode::wave).wave_mse, 0.0);
  EXPECT_EQ(res.run(PhysicsMode::wave).trace.rows.size(), 1u);
}

TEST(Freeform, RaySplatConservesRayCount) {
  FreeformSettings f;
  f.samples = 12;
  f.sensor_pixels = 32;
  f.sensor_size = 0.6;
  const FreeformBench bench(f);
  std::vector<double> coeffs;
  for (const auto& t : f.terms) coeffs.push_back(t.value);
  const auto img = bench.render_ray(freeform_plate(f, coeffs));
  double sum = 0.0;
  for (double v : img.data) sum += v;
  // Each splat integrates to 2 pi sigma^2 in pixel units when fully on the sensor.
  EXPECT_NEAR(sum / (2 * std::numbers::pi), 144.0, 144.0 * 0.01);
}

// ---- config ----------------------------------------------------------------

TEST(ExperimentConfigParse, ReadsSectionsAndRejectsBadValues) {
  const auto c = parse_experiment_config(R"(
[experiment]
kind = "fizeau"
iterations = 12
seed = 4
[optimizer]
lr_relative = 0.01
decay = 0.9
[fizeau]
sensor_area = 1.6
samples = 30
)");
  EXPECT_EQ(c.kind, "fizeau");
  EXPECT_EQ(c.iterations, 12);
  EXPECT_EQ(c.seed, 4u);
  EXPECT_DOUBLE_EQ(c.optimizer.lr_relative, 0.01);
  EXPECT_NEAR(c.fizeau.sensor_size, std::sqrt(1.6), 1e-15);
  EXPECT_EQ(c.fizeau.samples, 30);
  EXPECT_THROW(parse_experiment_config("[experiment]\nkind = \"x\"\n"), ConfigError);
  EXPECT_THROW(parse_experiment_config("[experiment]\nkind = \"fizeau\"\niterations = 0\n"), ConfigError);
  EXPECT_THROW(parse_experiment_config("[experiment]\nkind = \"lens\"\n[lens]\nprescription = \"/nonexistent.lens\"\n"),
               ConfigError);
}
