#pragma once

#include <cmath>
#include <optional>

#include "rwsim/core/image.hpp"
#include "rwsim/core/parallel.hpp"
#include "rwsim/imaging/distortion.hpp"

namespace rwsim {

// Sensor pixel lattice: width x height point samples at `pitch` spacing,
// centred on the optical axis.
struct SensorSpec {
  int width = 0;
  int height = 0;
  double pitch = 0.0;

  Vec2<double> pixel(int c, int r) const { return {pixel_center(c, width, pitch), pixel_center(r, height, pitch)}; }

  template <class T>
  static SensorSpec of(const BasicLensSystem<T>& sys) {
    SensorSpec s;
    s.pitch = sys.pixel_pitch;
    s.width = static_cast<int>(std::lround(sys.sensor_width / sys.pixel_pitch));
    s.height = static_cast<int>(std::lround(sys.sensor_height / sys.pixel_pitch));
    if (s.width < 1 || s.height < 1) throw ConfigError("sensor smaller than one pixel");
    return s;
  }
};

// Bilinear lookup of a scene spanning field [-half, half] (pixel-centre
// convention). Outside the scene the value is 0.
inline double sample_scene(const Image<double>& scene, const Vec2<double>& half, const Vec2<double>& field) {
  if (std::abs(field.x) > half.x || std::abs(field.y) > half.y) return 0.0;
  const double gx = (field.x + half.x) / (2.0 * half.x) * scene.width - 0.5;
  const double gy = (field.y + half.y) / (2.0 * half.y) * scene.height - 0.5;
  const double cx = std::clamp(gx, 0.0, static_cast<double>(scene.width - 1));
  const double cy = std::clamp(gy, 0.0, static_cast<double>(scene.height - 1));
  const int x0 = std::min(static_cast<int>(cx), scene.width - 1);
  const int y0 = std::min(static_cast<int>(cy), scene.height - 1);
  const int x1 = std::min(x0 + 1, scene.width - 1);
  const int y1 = std::min(y0 + 1, scene.height - 1);
  const double fx = cx - x0, fy = cy - y0;
  return (1 - fx) * (1 - fy) * scene.at(x0, y0) + fx * (1 - fy) * scene.at(x1, y0) +
         (1 - fx) * fy * scene.at(x0, y1) + fx * fy * scene.at(x1, y1);
}

// Latent image b'(u) = b(d^-1(u)) on the sensor lattice.
inline Image<double> resample_scene(const Image<double>& scene, const DistortionMap& map, const SensorSpec& sensor) {
  if (scene.empty()) throw ConfigError("empty scene");
  Image<double> out(sensor.width, sensor.height);
  parallel_for(static_cast<std::size_t>(sensor.height), [&](std::size_t r) {
    for (int c = 0; c < sensor.width; ++c) {
      const auto x = map.inverse(sensor.pixel(c, static_cast<int>(r)));
      out.at(c, static_cast<int>(r)) = x ? sample_scene(scene, map.scene_half(), *x) : 0.0;
    }
  });
  return out;
}

}  // namespace rwsim
