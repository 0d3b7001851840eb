#pragma once

#include <string>

#include "rwsim/lens/system.hpp"

// Reference prescriptions shared by the validation suites and the tests.
namespace rwsim::validation {

inline Surface make_surface(SurfaceKind kind, double c, double z, double sa, const std::string& after = "air",
                            bool stop = false) {
  Surface s;
  s.kind = kind;
  s.curvature = c;
  s.z = z;
  s.semi_aperture = sa;
  s.material_after = after;
  s.is_stop = stop;
  return s;
}

// Plano-hyperbolic lens, stop on the flat face. The exit face has conic
// -n^2, which brings a collimated axial beam inside the glass to a perfect
// focus `efl` behind the vertex.
inline LensSystem ideal_lens(double pupil_radius = 5.0, double efl = 50.0, double n = 1.5,
                             double thickness = 4.0) {
  LensSystem sys;
  sys.materials.push_back(Material::constant("glass", n));
  sys.surfaces.push_back(make_surface(SurfaceKind::plane, 0.0, 0.0, pupil_radius, "glass", true));
  auto back = make_surface(SurfaceKind::sphere, -1.0 / ((n - 1.0) * efl), thickness, pupil_radius * 1.2);
  back.conic = -n * n;
  sys.surfaces.push_back(back);
  sys.sensor_z = thickness + efl;
  sys.sensor_width = 2.0;
  sys.sensor_height = 2.0;
  sys.pixel_pitch = 0.005;
  return sys;
}

// Biconvex BK7-like singlet with the stop on its front surface.
inline LensSystem seed_singlet(double sa = 6.0) {
  LensSystem sys;
  sys.materials.push_back({"bk7", {{486.1, 1.5224}, {587.6, 1.5168}, {656.3, 1.5143}}});
  sys.surfaces.push_back(make_surface(SurfaceKind::sphere, 1.0 / 51.5, 0.0, sa, "bk7", true));
  sys.surfaces.push_back(make_surface(SurfaceKind::sphere, -1.0 / 51.5, 4.0, sa));
  sys.sensor_z = 4.0 + 48.5;
  sys.sensor_width = 8;
  sys.sensor_height = 8;
  sys.pixel_pitch = 0.01;
  return sys;
}

// Two singlets with the stop on a plane between them.
inline LensSystem two_element() {
  LensSystem sys;
  sys.materials.push_back(Material::constant("n16", 1.6));
  sys.surfaces.push_back(make_surface(SurfaceKind::sphere, 0.02, 0.0, 8.0, "n16"));
  sys.surfaces.push_back(make_surface(SurfaceKind::sphere, -0.005, 3.0, 8.0));
  sys.surfaces.push_back(make_surface(SurfaceKind::plane, 0.0, 8.0, 3.0, "air", true));
  sys.surfaces.push_back(make_surface(SurfaceKind::sphere, 0.01, 12.0, 7.0, "n16"));
  sys.surfaces.push_back(make_surface(SurfaceKind::sphere, -0.02, 15.0, 7.0));
  sys.sensor_z = 45.0;
  sys.sensor_width = 4.0;
  sys.sensor_height = 4.0;
  sys.pixel_pitch = 0.01;
  return sys;
}

}  // namespace rwsim::validation
