#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "../support/systems.hpp"
#include "rwsim/imaging/metrics.hpp"
#include "rwsim/imaging/plan.hpp"

using namespace rwsim;
using rwsim::testing::ideal_lens;
using rwsim::testing::seed_singlet;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

GridLayout synthetic_layout(int m, int width, int height, double pitch) {
  GridLayout g;
  g.m = m;
  g.cols = node_pixels(m, width);
  g.rows = node_pixels(m, height);
  for (int c : g.cols) g.xs.push_back(pixel_center(c, width, pitch));
  for (int r : g.rows) g.ys.push_back(pixel_center(r, height, pitch));
  g.fields.assign(g.count(), {0, 0});
  g.vignetted.assign(g.count(), false);
  return g;
}

// Grid whose node PSFs are supplied by `make(node index)`.
template <class F>
PSFGrid<double> synthetic_grid(int m, int width, int height, int window, F make) {
  PSFGrid<double> grid;
  grid.layout = synthetic_layout(m, width, height, 1.0);
  grid.window = window;
  grid.pitch = 1.0;
  grid.wavelength_nm = 550.0;
  for (std::size_t n = 0; n < grid.layout.count(); ++n) {
    PSF<double> p;
    p.intensity = make(n);
    p.pitch_mm = 1.0;
    grid.psfs.push_back(p);
  }
  return grid;
}

Image<double> gaussian_kernel(int window, double sigma, double cx = 0.0) {
  Image<double> k(window, window);
  double sum = 0.0;
  for (int r = 0; r < window; ++r) {
    for (int c = 0; c < window; ++c) {
      const double x = c - window / 2 - cx, y = r - window / 2;
      k.at(c, r) = std::exp(-(x * x + y * y) / (2 * sigma * sigma));
      sum += k.at(c, r);
    }
  }
  for (auto& v : k.data) v /= sum;
  return k;
}

Image<double> random_kernel(int window, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image<double> k(window, window);
  for (auto& v : k.data) v = u(rng);
  return k;
}

double max_abs(const Image<double>& a) {
  double m = 0.0;
  for (double v : a.data) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

TEST(DistortionMap, ParaxialScaleAtSmallAngles) {
  const auto sys = ideal_lens();
  const double efl = paraxial(sys, 587.6).efl;
  for (double deg : {0.1, 0.25, 0.5}) {
    const auto u = principal_hit(sys, {std::tan(deg * kDeg), 0.0}, 587.6);
    EXPECT_NEAR(u.x, efl * std::tan(deg * kDeg), 2e-3 * efl * std::tan(deg * kDeg)) << deg;
    EXPECT_NEAR(u.y, 0.0, 1e-12);
  }
}

TEST(DistortionMap, OnAxisNodeExactnessAndInverse) {
  auto sys = seed_singlet();
  const auto map = build_distortion_map(sys, 9, 587.6);
  const auto c = map({0.0, 0.0});
  EXPECT_NEAR(c.x, 0.0, 1e-12);
  EXPECT_NEAR(c.y, 0.0, 1e-12);
  for (int j = 0; j < 9; j += 3) {
    for (int i = 0; i < 9; i += 2) {
      const auto f = DistortionMap::node_field(map.table_half(), 9, i, j);
      const auto u = map(f);
      EXPECT_DOUBLE_EQ(u.x, map.node(i, j).x);
      EXPECT_DOUBLE_EQ(u.y, map.node(i, j).y);
    }
  }
  for (const Vec2<double> u : {Vec2<double>{1.3, -0.7}, Vec2<double>{-3.9, 3.9}, Vec2<double>{0.0, 2.0}}) {
    const auto x = map.inverse(u);
    ASSERT_TRUE(x.has_value());
    const auto back = map(*x);
    EXPECT_NEAR(back.x, u.x, 1e-9);
    EXPECT_NEAR(back.y, u.y, 1e-9);
  }
  // Scene extent images onto the sensor edge.
  const auto edge = principal_hit(sys, {map.scene_half().x, 0.0}, 587.6);
  EXPECT_NEAR(edge.x, 0.5 * sys.sensor_width, 1e-8);
}

TEST(DistortionMap, InterpolatesTracedHitsBetweenNodes) {
  const auto sys = seed_singlet();
  const auto map = build_distortion_map(sys, 17, 587.6);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    const Vec2<double> f{u(rng) * map.scene_half().x, u(rng) * map.scene_half().y};
    const auto traced = principal_hit(sys, f, 587.6);
    const auto interp = map(f);
    EXPECT_NEAR(interp.x, traced.x, 1e-4);
    EXPECT_NEAR(interp.y, traced.y, 1e-4);
  }
}

TEST(DistortionMap, CarriesNoParameterTangents) {
  using D = Dual<4>;
  LensSystem sys = seed_singlet();
  sys.selection.add({1, ParamField::curvature, 0});
  const auto lifted = lift_system<D>(sys, sys.selection);
  const auto map = build_distortion_map(lifted, 5, 587.6);
  const auto plain = build_distortion_map(sys, 5, 587.6);
  const Vec2<double> u = map({0.01, 0.02});
  static_assert(std::is_same_v<decltype(map({0.0, 0.0})), Vec2<double>>);
  EXPECT_EQ(u.x, plain({0.01, 0.02}).x);
  // The same lifted system does carry tangents through a PSF.
  PsfOptions opt;
  opt.n_rays = 256;
  opt.window = 7;
  const auto psf = render_psf(lifted, Source::field_tangent(0.01, 0.02), opt);
  double t = 0.0;
  for (const auto& v : psf.intensity.data) t += std::abs(v.tangent[0]);
  EXPECT_GT(t, 0.0);
}

TEST(Resample, IdentityMapReproducesScene) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image<double> scene(24, 16);
  for (auto& v : scene.data) v = u(rng);
  const SensorSpec sensor{24, 16, 0.5};
  const Vec2<double> half{6.0, 4.0};
  const auto map = DistortionMap::from_function({7.0, 5.0}, 5, half, [](Vec2<double> x) { return x; });
  const auto out = resample_scene(scene, map, sensor);
  for (std::size_t i = 0; i < scene.size(); ++i) EXPECT_NEAR(out.data[i], scene.data[i], 1e-9);
}

TEST(Resample, MagnificationTwoScalesCheckerboard) {
  const int n = 32;
  Image<double> scene(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) scene.at(c, r) = ((c / 4 + r / 4) % 2) ? 1.0 : 0.0;
  }
  const SensorSpec sensor{n, n, 0.125};
  // The scene spans field [-2, 2]; the sensor sees only [-1, 1] of it.
  const auto map = DistortionMap::from_function({1.2, 1.2}, 7, {2.0, 2.0},
                                                [](Vec2<double> x) { return Vec2<double>{2 * x.x, 2 * x.y}; });
  const auto out = resample_scene(scene, map, sensor);
  // Scene squares have edges at index 4k - 0.5; magnified about the centre
  // (15.5) they land at 2 (4k - 0.5 - 15.5) + 15.5. Pixels away from those
  // edges keep the square's value.
  auto square = [&](double g) { return static_cast<int>(std::floor((g + 0.5) / 4.0)); };
  int checked = 0;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const double gx = (c - 15.5) / 2 + 15.5, gy = (r - 15.5) / 2 + 15.5;
      const bool near_edge = square(gx - 0.5) != square(gx + 0.5) || square(gy - 0.5) != square(gy + 0.5);
      if (near_edge) continue;
      EXPECT_NEAR(out.at(c, r), ((square(gx) + square(gy)) % 2) ? 1.0 : 0.0, 1e-9) << c << "," << r;
      ++checked;
    }
  }
  EXPECT_GT(checked, 400);
}

TEST(Resample, BarrelMapMovesChartDotsToDistortedPositions) {
  const int n = 64;
  const double k = -0.15;
  auto d = [k](Vec2<double> x) {
    const double s = 1.0 + k * (x.x * x.x + x.y * x.y);
    return Vec2<double>{x.x * s, x.y * s};
  };
  // Scene covers field [-1, 1]; sensor covers d's image of the field edge.
  const double edge = d({1.0, 0.0}).x;
  const SensorSpec sensor{n, n, 2.0 * edge / n};
  const auto map = DistortionMap::from_function({1.3, 1.3}, 33, {1.0, 1.0}, d);
  const int sn = 128;
  for (const auto& dot : {Vec2<double>{0.5, 0.5}, Vec2<double>{-0.7, 0.2}, Vec2<double>{0.8, -0.8}}) {
    Image<double> scene(sn, sn);
    // A 3x3 dot centred on a scene pixel.
    const int c0 = static_cast<int>(std::lround((dot.x + 1.0) / 2.0 * sn - 0.5));
    const int r0 = static_cast<int>(std::lround((dot.y + 1.0) / 2.0 * sn - 0.5));
    for (int r = r0 - 1; r <= r0 + 1; ++r) {
      for (int c = c0 - 1; c <= c0 + 1; ++c) scene.at(c, r) = 1.0;
    }
    const Vec2<double> centre{-1.0 + (c0 + 0.5) * 2.0 / sn, -1.0 + (r0 + 0.5) * 2.0 / sn};
    const auto out = resample_scene(scene, map, sensor);
    double m = 0.0, cx = 0.0, cy = 0.0;
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        m += out.at(c, r);
        cx += out.at(c, r) * sensor.pixel(c, r).x;
        cy += out.at(c, r) * sensor.pixel(c, r).y;
      }
    }
    ASSERT_GT(m, 0.0);
    const auto expected = d(centre);
    EXPECT_NEAR(cx / m, expected.x, 0.5 * sensor.pitch);
    EXPECT_NEAR(cy / m, expected.y, 0.5 * sensor.pitch);
  }
}

TEST(InterpWeights, Examples) {
  const auto g = synthetic_layout(3, 21, 21, 1.0);  // nodes at -10, 0, 10
  const auto at_node = interp_weights({0.0, 10.0}, g);
  ASSERT_EQ(at_node.size(), 1u);
  EXPECT_EQ(at_node[0].first, g.index(1, 2));
  EXPECT_DOUBLE_EQ(at_node[0].second, 1.0);
  const auto centre = interp_weights({5.0, -5.0}, g);
  ASSERT_EQ(centre.size(), 4u);
  for (const auto& [i, w] : centre) EXPECT_DOUBLE_EQ(w, 0.25);
  const auto edge = interp_weights({5.0, 0.0}, g);
  ASSERT_EQ(edge.size(), 2u);
  for (const auto& [i, w] : edge) EXPECT_DOUBLE_EQ(w, 0.5);
  const auto clamped = interp_weights({100.0, -100.0}, g);
  ASSERT_EQ(clamped.size(), 1u);
  EXPECT_EQ(clamped[0].first, g.index(2, 0));
}

TEST(InterpWeightsProperty, PartitionOfUnity) {
  const auto g = synthetic_layout(5, 40, 30, 0.01);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-0.25, 0.25);
  for (int t = 0; t < 1000; ++t) {
    const auto w = interp_weights({u(rng), u(rng)}, g);
    double s = 0.0;
    for (const auto& [i, v] : w) {
      EXPECT_GE(v, 0.0);
      EXPECT_LT(i, g.count());
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(RenderMeasurement, DeltaAtNodeGivesNodePsf) {
  std::mt19937_64 rng(4);
  const int w = 33, h = 29, k = 9;
  const auto grid = synthetic_grid(3, w, h, k, [&](std::size_t) { return random_kernel(k, rng); });
  const std::size_t node = grid.layout.index(1, 2);
  Image<double> latent(w, h);
  const int nc = grid.layout.cols[1], nr = grid.layout.rows[2];
  latent.at(nc, nr) = 1.0;
  const auto m = render_measurement(latent, grid);
  const auto& psf = grid.psfs[node].intensity;
  const double peak = max_abs(psf);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const int kc = c - nc + k / 2, kr = r - nr + k / 2;
      const bool inside = kc >= 0 && kc < k && kr >= 0 && kr < k;
      EXPECT_NEAR(m.image.at(c, r), inside ? psf.at(kc, kr) : 0.0, 1e-10 * peak);
    }
  }
}

TEST(RenderMeasurement, UniformLatentWithUnitSumKernelsStaysUniform) {
  const int w = 48, h = 40, k = 11;
  const auto grid = synthetic_grid(5, w, h, k, [&](std::size_t) { return gaussian_kernel(k, 1.7); });
  Image<double> latent(w, h, 0.6);
  const auto m = render_measurement(latent, grid);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (m.valid.at(c, r) == 0.0) continue;
      EXPECT_NEAR(m.image.at(c, r), 0.6, 1e-6 * 0.6);
    }
  }
  EXPECT_EQ(m.valid.at(0, 0), 0.0);
  EXPECT_EQ(m.valid.at(w / 2, h / 2), 1.0);
}

TEST(RenderMeasurement, DeltaBetweenIdenticalNodesIsShiftedPsf) {
  std::mt19937_64 rng(8);
  const int w = 31, h = 31, k = 7;
  const auto kernel = random_kernel(k, rng);
  const auto grid = synthetic_grid(3, w, h, k, [&](std::size_t) { return kernel; });
  Image<double> latent(w, h);
  const int pc = 19, pr = 8;  // between nodes (15, 30) and (0, 15)
  latent.at(pc, pr) = 2.0;
  const auto m = render_measurement(latent, grid);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const int kc = c - pc + k / 2, kr = r - pr + k / 2;
      const bool inside = kc >= 0 && kc < k && kr >= 0 && kr < k;
      EXPECT_NEAR(m.image.at(c, r), inside ? 2.0 * kernel.at(kc, kr) : 0.0, 1e-10);
    }
  }
}

TEST(RenderMeasurement, WindowLargerThanSensorRejected) {
  const auto grid = synthetic_grid(3, 9, 9, 5, [&](std::size_t) { return gaussian_kernel(5, 1.0); });
  auto big = grid;
  big.window = 11;
  for (auto& p : big.psfs) p.intensity = gaussian_kernel(11, 1.0);
  EXPECT_THROW(render_measurement(Image<double>(9, 9, 1.0), big), ConfigError);
}

TEST(RenderProperty, Linearity) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int w = 40, h = 36, k = 9;
  const auto grid = synthetic_grid(5, w, h, k, [&](std::size_t) { return random_kernel(k, rng); });
  Image<double> s1(w, h), s2(w, h), mix(w, h);
  for (auto& v : s1.data) v = u(rng);
  for (auto& v : s2.data) v = u(rng);
  const double a = 0.7, b = -1.3;
  for (std::size_t i = 0; i < mix.size(); ++i) mix.data[i] = a * s1.data[i] + b * s2.data[i];
  const auto r1 = render_measurement(s1, grid).image;
  const auto r2 = render_measurement(s2, grid).image;
  const auto rm = render_measurement(mix, grid).image;
  const double scale = max_abs(rm) + max_abs(r1);
  for (std::size_t i = 0; i < rm.size(); ++i) {
    EXPECT_NEAR(rm.data[i], a * r1.data[i] + b * r2.data[i], 1e-10 * scale);
  }
}

TEST(RenderProperty, TangentPlanesAreConvolvedToo) {
  using D = Dual<4>;
  std::mt19937_64 rng(2);
  const int w = 21, h = 21, k = 5;
  PSFGrid<D> grid;
  grid.layout = synthetic_layout(3, w, h, 1.0);
  grid.window = k;
  grid.pitch = 1.0;
  std::vector<Image<double>> values, slopes;
  for (std::size_t n = 0; n < grid.layout.count(); ++n) {
    values.push_back(random_kernel(k, rng));
    slopes.push_back(random_kernel(k, rng));
    PSF<D> p;
    p.intensity = Image<D>(k, k);
    for (std::size_t i = 0; i < p.intensity.size(); ++i) {
      p.intensity.data[i] = D(values.back().data[i]);
      p.intensity.data[i].tangent[1] = slopes.back().data[i];
    }
    grid.psfs.push_back(p);
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image<double> latent(w, h);
  for (auto& v : latent.data) v = u(rng);
  const auto dual = render_measurement(latent, grid).image;
  auto as_grid = [&](const std::vector<Image<double>>& planes) {
    auto g = synthetic_grid(3, w, h, k, [&](std::size_t n) { return planes[n]; });
    return render_measurement(latent, g).image;
  };
  const auto v = as_grid(values), s = as_grid(slopes);
  for (std::size_t i = 0; i < dual.size(); ++i) {
    EXPECT_NEAR(dual.data[i].value, v.data[i], 1e-12);
    EXPECT_NEAR(dual.data[i].tangent[1], s.data[i], 1e-12);
    EXPECT_EQ(dual.data[i].tangent[0], 0.0);
  }
}

TEST(Bayer, LayoutAndFilters) {
  std::vector<Image<double>> rgb{Image<double>(4, 4, 1.0), Image<double>(4, 4, 2.0), Image<double>(4, 4, 3.0)};
  const auto raw = mosaic(rgb);
  EXPECT_EQ(raw.at(0, 0), 1.0);
  EXPECT_EQ(raw.at(1, 0), 2.0);
  EXPECT_EQ(raw.at(0, 1), 2.0);
  EXPECT_EQ(raw.at(1, 1), 3.0);
  std::vector<Image<double>> red{Image<double>(6, 6, 0.8), Image<double>(6, 6), Image<double>(6, 6)};
  const auto rr = mosaic(red);
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 6; ++c) EXPECT_EQ(rr.at(c, r), bayer_channel(c, r) == 0 ? 0.8 : 0.0);
  }
  EXPECT_THROW(mosaic(std::vector<Image<double>>{Image<double>(4, 4), Image<double>(4, 5), Image<double>(4, 4)}),
               ConfigError);
}

TEST(BayerProperty, DemosaicRoundTripOfUniformField) {
  for (int size : {4, 6, 10}) {
    std::vector<Image<double>> rgb{Image<double>(size, size, 0.25), Image<double>(size, size, 0.5),
                                   Image<double>(size, size, 0.125)};
    const auto back = demosaic_nearest(mosaic(rgb));
    for (int ch = 0; ch < 3; ++ch) {
      for (std::size_t i = 0; i < back[ch].size(); ++i) EXPECT_EQ(back[ch].data[i], rgb[ch].data[i]);
    }
  }
}

TEST(Bayer, UniformWhiteThroughGridsIsUniformPerSite) {
  const int w = 30, h = 30, k = 7;
  std::vector<PSFGrid<double>> grids;
  std::vector<Image<double>> latents;
  for (int c = 0; c < 3; ++c) {
    grids.push_back(synthetic_grid(3, w, h, k, [&](std::size_t) { return gaussian_kernel(k, 1.0 + 0.3 * c); }));
    latents.emplace_back(w, h, 1.0);
  }
  const auto m = render_rgb_bayer(latents, grids);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (m.valid.at(c, r) != 0.0) {
        EXPECT_NEAR(m.image.at(c, r), 1.0, 1e-9);
      }
    }
  }
  latents[1] = Image<double>(w, h + 2, 1.0);
  EXPECT_THROW(render_rgb_bayer(latents, grids), ConfigError);
}

TEST(Ssim, IdenticalIsOneAndDifferentIsLess) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image<double> a(32, 32), b(32, 32);
  for (auto& v : a.data) v = u(rng);
  for (auto& v : b.data) v = u(rng);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
  EXPECT_LT(ssim(a, b), 0.2);
}

// The remaining tests trace real PSFs on a small sensor.

TEST(PsfGrid, NodesLandOnIntendedPixels) {
  auto sys = seed_singlet();
  sys.sensor_width = 1.0;
  sys.sensor_height = 1.0;
  sys.pixel_pitch = 0.01;
  PsfOptions opt;
  opt.n_rays = 400;
  opt.window = 15;
  const auto grid = sample_psf_grid(sys, SensorSpec::of(sys), 3, opt);
  ASSERT_EQ(grid.psfs.size(), 9u);
  for (int j = 0; j < 3; ++j) {
    for (int i = 0; i < 3; ++i) {
      EXPECT_NEAR(grid.at(i, j).center_mm.x, grid.layout.xs[i], 1e-6);
      EXPECT_NEAR(grid.at(i, j).center_mm.y, grid.layout.ys[j], 1e-6);
    }
  }
  EXPECT_NEAR(grid.layout.xs[0], -0.495, 1e-12);
  EXPECT_THROW(sample_psf_grid(sys, SensorSpec::of(sys), 4, opt), ConfigError);
}

// The plano-hyperbolic lens is only perfect on axis; its off-axis coma
// scales with NA^3 relative to the Airy size, so an F/25 stop keeps the
// field practically shift-invariant.
TEST(PsfGrid, NarrowFieldIdealLensIsShiftInvariant) {
  auto sys = ideal_lens(1.0);
  sys.pixel_pitch = 6e-3;
  sys.sensor_width = 64 * 6e-3;
  sys.sensor_height = 64 * 6e-3;
  PsfOptions opt;
  opt.n_rays = 2500;
  opt.window = 15;
  const auto grid = sample_psf_grid(sys, SensorSpec::of(sys), 3, opt);
  const auto ref = normalize_peak(grid.at(1, 1).intensity);
  for (const auto& p : grid.psfs) EXPECT_GT(ssim(normalize_peak(p.intensity), ref), 0.999);
}

TEST(PsfGrid, WideFieldSingletCornerDiffersFromCentre) {
  auto sys = seed_singlet(4.0);
  const double half = 50.0 * std::tan(15.0 * kDeg) / std::sqrt(2.0);
  sys.sensor_width = 2 * half;
  sys.sensor_height = 2 * half;
  sys.pixel_pitch = 2 * half / 64;
  PsfOptions opt;
  opt.n_rays = 900;
  opt.window = 21;
  opt.pitch_mm = 0.004;
  auto layout = plan_psf_grid(sys, SensorSpec::of(sys), 3, opt.wavelength_nm);
  const auto grid = render_psf_grid(sys, layout, opt);
  const auto centre = normalize_peak(grid.at(1, 1).intensity);
  const auto corner = normalize_peak(grid.at(2, 2).intensity);
  EXPECT_LT(ssim(centre, corner), 0.9);
}

TEST(DenseOracle, SinglePixelAndLinearity) {
  auto sys = seed_singlet();
  sys.sensor_width = 0.21;
  sys.sensor_height = 0.21;
  sys.pixel_pitch = 0.01;
  PsfOptions opt;
  opt.n_rays = 300;
  opt.window = 7;
  Image<double> one(21, 21), two(21, 21);
  one.at(4, 13) = 1.0;
  two.at(4, 13) = 1.0;
  two.at(15, 6) = 0.5;
  const auto m1 = dense_superposition_oracle(one, sys, opt);
  const auto f = field_for_pixel(sys, {pixel_center(4, 21, 0.01), pixel_center(13, 21, 0.01)}, 587.6);
  const auto psf = render_psf(sys, source_at_field(sys, f), opt);
  for (int r = 0; r < 7; ++r) {
    for (int c = 0; c < 7; ++c) EXPECT_DOUBLE_EQ(m1.image.at(4 + c - 3, 13 + r - 3), psf.intensity.at(c, r));
  }
  Image<double> other(21, 21);
  other.at(15, 6) = 0.5;
  const auto m2 = dense_superposition_oracle(two, sys, opt);
  const auto mo = dense_superposition_oracle(other, sys, opt);
  for (std::size_t i = 0; i < m2.image.size(); ++i) {
    EXPECT_NEAR(m2.image.data[i], m1.image.data[i] + mo.image.data[i], 1e-12 * max_abs(m2.image));
  }
  EXPECT_THROW(dense_superposition_oracle(Image<double>(65, 10), sys, opt), SizeError);
}

TEST(DenseOracle, NodeSupportedSceneMatchesGridRender) {
  auto sys = seed_singlet();
  sys.sensor_width = 0.41;
  sys.sensor_height = 0.41;
  sys.pixel_pitch = 0.01;
  const SensorSpec sensor = SensorSpec::of(sys);
  PsfOptions opt;
  opt.n_rays = 400;
  opt.window = 9;
  const auto grid = sample_psf_grid(sys, sensor, 5, opt);
  Image<double> latent(sensor.width, sensor.height);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  for (int j = 0; j < 5; ++j) {
    for (int i = 0; i < 5; ++i) latent.at(grid.layout.cols[i], grid.layout.rows[j]) = u(rng);
  }
  const auto fast = render_measurement(latent, grid).image;
  const auto exact = dense_superposition_oracle(latent, sys, opt).image;
  const double peak = max_abs(exact);
  for (std::size_t i = 0; i < fast.size(); ++i) EXPECT_NEAR(fast.data[i], exact.data[i], 1e-9 * peak);
}
