#pragma once

#include <string>
#include <vector>

#include "rwsim/imaging/bayer.hpp"
#include "rwsim/imaging/render.hpp"
#include "rwsim/imaging/resample.hpp"

namespace rwsim {

struct RenderSettings {
  int grid = 5;    // M
  int map_size = 9;  // K
  std::vector<double> wavelengths_nm{587.6};
  PsfOptions psf{};  // wavelength_nm is overridden per channel
};

inline const std::vector<double>& rgb_wavelengths() {
  static const std::vector<double> w{656.3, 587.6, 486.1};  // R, G, B
  return w;
}

// Everything a render needs that stays fixed while lens parameters change:
// the distortion map, the latent image and the grid field points, per
// channel.
struct RenderPlan {
  SensorSpec sensor;
  struct Channel {
    double wavelength_nm = 0.0;
    DistortionMap map;
    GridLayout layout;
    Image<double> latent;
  };
  std::vector<Channel> channels;
  RenderSettings settings;

  std::vector<std::string> warnings() const {
    std::vector<std::string> w;
    for (const auto& c : channels) w.insert(w.end(), c.layout.warnings.begin(), c.layout.warnings.end());
    return w;
  }
};

// `scene` has one plane per wavelength, or a single plane reused for all.
template <class T>
RenderPlan make_render_plan(const BasicLensSystem<T>& sys, const std::vector<Image<double>>& scene,
                            const RenderSettings& settings) {
  if (scene.empty()) throw ConfigError("scene has no channels");
  if (scene.size() != 1 && scene.size() != settings.wavelengths_nm.size()) {
    throw ConfigError("scene channel count does not match the wavelengths");
  }
  const LensSystem values = detach_system(sys);
  RenderPlan plan;
  plan.settings = settings;
  plan.sensor = SensorSpec::of(values);
  for (std::size_t c = 0; c < settings.wavelengths_nm.size(); ++c) {
    RenderPlan::Channel ch;
    ch.wavelength_nm = settings.wavelengths_nm[c];
    ch.map = build_distortion_map(values, settings.map_size, ch.wavelength_nm);
    ch.latent = resample_scene(scene[scene.size() == 1 ? 0 : c], ch.map, plan.sensor);
    ch.layout = plan_psf_grid(values, plan.sensor, settings.grid, ch.wavelength_nm, &ch.map);
    plan.channels.push_back(std::move(ch));
  }
  return plan;
}

template <class T>
std::vector<Measurement<T>> render_with_plan(const BasicLensSystem<T>& sys, const RenderPlan& plan) {
  std::vector<Measurement<T>> out;
  for (const auto& ch : plan.channels) {
    PsfOptions opt = plan.settings.psf;
    opt.wavelength_nm = ch.wavelength_nm;
    if (opt.pitch_mm <= 0.0) opt.pitch_mm = plan.sensor.pitch;
    if (opt.pitch_mm != plan.sensor.pitch) throw ConfigError("PSF pitch must equal the sensor pitch for rendering");
    const auto grid = render_psf_grid(sys, ch.layout, opt);
    out.push_back(render_measurement(ch.latent, grid));
  }
  return out;
}

// Channels rendered independently, then subsampled in RGGB order.
template <class T>
Measurement<T> render_rgb_bayer(const std::vector<Image<double>>& latents, const std::vector<PSFGrid<T>>& grids) {
  if (latents.size() != 3 || grids.size() != 3) throw ConfigError("Bayer rendering needs three channels");
  std::vector<Image<T>> planes;
  Measurement<T> out;
  for (int c = 0; c < 3; ++c) {
    if (!latents[c].same_shape(latents[0])) throw ConfigError("Bayer channels differ in size");
    auto m = render_measurement(latents[c], grids[c]);
    if (c == 0) {
      out.valid = m.valid;
      out.pitch = m.pitch;
    }
    out.wavelengths_nm.push_back(grids[c].wavelength_nm);
    planes.push_back(std::move(m.image));
  }
  out.image = mosaic(planes);
  return out;
}

template <class T>
Measurement<T> render_rgb_bayer(const BasicLensSystem<T>& sys, const RenderPlan& plan) {
  if (plan.channels.size() != 3) throw ConfigError("Bayer rendering needs three channel wavelengths");
  auto ms = render_with_plan(sys, plan);
  std::vector<Image<T>> planes;
  Measurement<T> out;
  out.valid = ms[0].valid;
  out.pitch = ms[0].pitch;
  for (auto& m : ms) {
    out.wavelengths_nm.push_back(m.wavelengths_nm.front());
    planes.push_back(std::move(m.image));
  }
  out.image = mosaic(planes);
  return out;
}

}  // namespace rwsim
