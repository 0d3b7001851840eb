#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rwsim/core/dual.hpp"
#include "rwsim/core/error.hpp"
#include "rwsim/lens/material.hpp"
#include "rwsim/lens/surface.hpp"

namespace rwsim {

enum class ParamField { curvature, conic, axial_position, asphere, freeform, sensor_z };

// One optimizable scalar. surface == -1 addresses system-level fields.
struct ParamRef {
  int surface = -1;
  ParamField field = ParamField::sensor_z;
  int component = 0;

  friend bool operator==(const ParamRef&, const ParamRef&) = default;
};

std::string param_name(const ParamRef& p);

// Ordered parameter list; entry i owns tangent slot i.
struct ParameterSelection {
  std::vector<ParamRef> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }

  void add(const ParamRef& p) {
    if (std::find(entries.begin(), entries.end(), p) != entries.end()) {
      throw ConfigError("parameter " + param_name(p) + " selected twice");
    }
    entries.push_back(p);
  }
};

template <class T>
struct BasicLensSystem {
  std::vector<BasicSurface<T>> surfaces;
  std::vector<Material> materials;
  double object_distance = std::numeric_limits<double>::infinity();
  T sensor_z{};
  double sensor_width = 1.0;
  double sensor_height = 1.0;
  double pixel_pitch = 0.01;
  ParameterSelection selection;

  bool object_at_infinity() const { return std::isinf(object_distance); }

  // Object plane z; the object sits object_distance before the first vertex.
  double object_z() const {
    return value_of(surfaces.empty() ? sensor_z : surfaces.front().z) - object_distance;
  }

  std::size_t stop_index() const {
    for (std::size_t i = 0; i < surfaces.size(); ++i) {
      if (surfaces[i].is_stop) return i;
    }
    throw ConfigError("lens system has no aperture stop");
  }

  int sensor_pixels_x() const { return static_cast<int>(std::lround(sensor_width / pixel_pitch)); }
  int sensor_pixels_y() const {
    return static_cast<int>(std::lround(sensor_height / pixel_pitch));
  }

  const Material& material(const std::string& name) const {
    for (const auto& m : materials) {
      if (m.name == name) return m;
    }
    static const Material kAir = air();
    static const Material kVacuum = Material::constant("vacuum", 1.0);
    if (name == "air") return kAir;
    if (name == "vacuum") return kVacuum;
    throw ConfigError("unknown material '" + name + "'");
  }

  // Refractive index after each surface at one wavelength; index 0 of the
  // result is object space, index i + 1 follows surface i.
  std::vector<double> media(double wavelength_nm) const {
    std::vector<double> n;
    n.reserve(surfaces.size() + 1);
    n.push_back(1.0);
    for (const auto& s : surfaces) n.push_back(index_at(material(s.material_after), wavelength_nm));
    return n;
  }
};

using LensSystem = BasicLensSystem<double>;

inline std::string param_name(const ParamRef& p) {
  const std::string prefix = p.surface < 0 ? "" : "surface[" + std::to_string(p.surface) + "].";
  switch (p.field) {
    case ParamField::curvature:
      return prefix + "curvature";
    case ParamField::conic:
      return prefix + "conic";
    case ParamField::axial_position:
      return prefix + "axial_position";
    case ParamField::asphere:
      return prefix + "asphere_coeffs[" +
             std::to_string(asphere_order(static_cast<std::size_t>(p.component))) + "]";
    case ParamField::freeform: {
      const auto [m, n] = freeform_powers(static_cast<std::size_t>(p.component));
      return prefix + "freeform_coeffs[" + std::to_string(m) + "," + std::to_string(n) + "]";
    }
    case ParamField::sensor_z:
      return "sensor_z";
  }
  return "?";
}

template <class T>
T& parameter(BasicLensSystem<T>& s, const ParamRef& p) {
  if (p.field == ParamField::sensor_z) return s.sensor_z;
  if (p.surface < 0 || static_cast<std::size_t>(p.surface) >= s.surfaces.size()) {
    throw ConfigError("parameter " + param_name(p) + " addresses a missing surface");
  }
  auto& surf = s.surfaces[static_cast<std::size_t>(p.surface)];
  switch (p.field) {
    case ParamField::curvature:
      return surf.curvature;
    case ParamField::conic:
      return surf.conic;
    case ParamField::axial_position:
      return surf.z;
    case ParamField::asphere:
      return surf.asphere.at(static_cast<std::size_t>(p.component));
    case ParamField::freeform:
      return surf.freeform.at(static_cast<std::size_t>(p.component));
    case ParamField::sensor_z:
      break;
  }
  return s.sensor_z;
}

template <class T>
const T& parameter(const BasicLensSystem<T>& s, const ParamRef& p) {
  return parameter(const_cast<BasicLensSystem<T>&>(s), p);
}

inline std::vector<double> parameter_values(const LensSystem& s, const ParameterSelection& sel) {
  std::vector<double> out;
  out.reserve(sel.size());
  for (const auto& p : sel.entries) out.push_back(parameter(s, p));
  return out;
}

inline LensSystem with_parameters(LensSystem s, const ParameterSelection& sel,
                                  const std::vector<double>& values) {
  if (values.size() != sel.size()) throw ConfigError("parameter vector length mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) parameter(s, sel.entries[i]) = values[i];
  return s;
}

// Copies a double system into scalar type T, seeding selected parameters.
template <class T>
BasicLensSystem<T> lift_system(const LensSystem& s, const ParameterSelection& sel) {
  BasicLensSystem<T> out;
  out.materials = s.materials;
  out.object_distance = s.object_distance;
  out.sensor_z = T(s.sensor_z);
  out.sensor_width = s.sensor_width;
  out.sensor_height = s.sensor_height;
  out.pixel_pitch = s.pixel_pitch;
  out.selection = s.selection;
  out.surfaces.reserve(s.surfaces.size());
  for (const auto& src : s.surfaces) {
    BasicSurface<T> d;
    d.kind = src.kind;
    d.curvature = T(src.curvature);
    d.conic = T(src.conic);
    for (std::size_t i = 0; i < kAsphereTerms; ++i) d.asphere[i] = T(src.asphere[i]);
    for (std::size_t i = 0; i < kFreeformTerms; ++i) d.freeform[i] = T(src.freeform[i]);
    d.z = T(src.z);
    d.semi_aperture = src.semi_aperture;
    d.material_after = src.material_after;
    d.is_stop = src.is_stop;
    out.surfaces.push_back(std::move(d));
  }
  for (std::size_t slot = 0; slot < sel.size(); ++slot) {
    T& target = parameter(out, sel.entries[slot]);
    target = lift<T>(value_of(target), slot, sel.size());
  }
  return out;
}

template <class T>
LensSystem detach_system(const BasicLensSystem<T>& s) {
  LensSystem out;
  out.materials = s.materials;
  out.object_distance = s.object_distance;
  out.sensor_z = value_of(s.sensor_z);
  out.sensor_width = s.sensor_width;
  out.sensor_height = s.sensor_height;
  out.pixel_pitch = s.pixel_pitch;
  out.selection = s.selection;
  for (const auto& src : s.surfaces) {
    Surface d;
    d.kind = src.kind;
    d.curvature = value_of(src.curvature);
    d.conic = value_of(src.conic);
    for (std::size_t i = 0; i < kAsphereTerms; ++i) d.asphere[i] = value_of(src.asphere[i]);
    for (std::size_t i = 0; i < kFreeformTerms; ++i) d.freeform[i] = value_of(src.freeform[i]);
    d.z = value_of(src.z);
    d.semi_aperture = src.semi_aperture;
    d.material_after = src.material_after;
    d.is_stop = src.is_stop;
    out.surfaces.push_back(std::move(d));
  }
  return out;
}

// Throws ConfigError naming the offending field path.
inline void validate_system(const LensSystem& s) {
  for (std::size_t i = 0; i < s.materials.size(); ++i) {
    validate_material(s.materials[i], "material[" + std::to_string(i) + "]");
  }
  std::vector<std::size_t> stops;
  for (std::size_t i = 0; i < s.surfaces.size(); ++i) {
    const auto& surf = s.surfaces[i];
    const std::string path = "surface[" + std::to_string(i) + "]";
    if (!(surf.semi_aperture > 0.0)) throw ConfigError(path + ".semi_aperture: must be > 0");
    if (i > 0 && !(surf.z > s.surfaces[i - 1].z)) {
      throw ConfigError(path + ".axial_position: surfaces must be in strictly increasing z");
    }
    if (surf.kind != SurfaceKind::plane) {
      const double r = surf.semi_aperture;
      if ((1.0 + surf.conic) * surf.curvature * surf.curvature * r * r >= 1.0) {
        throw ConfigError(path + ": sag is not real over the clear aperture");
      }
    }
    if (surf.is_stop) stops.push_back(i);
    (void)s.material(surf.material_after);
  }
  if (stops.empty()) throw ConfigError("surfaces: exactly one surface needs is_stop = true, found none");
  if (stops.size() > 1) {
    std::string names;
    for (std::size_t k = 0; k < stops.size(); ++k) {
      names += (k ? " and " : "") + ("surface[" + std::to_string(stops[k]) + "]");
    }
    throw ConfigError(names + " all set is_stop = true; exactly one stop is allowed");
  }
  if (!s.surfaces.empty() && !(s.sensor_z > s.surfaces.back().z)) {
    throw ConfigError("system.sensor_z: sensor must lie beyond the last surface");
  }
  if (!(s.object_distance > 0.0)) throw ConfigError("system.object_distance: must be > 0");
  if (!(s.pixel_pitch > 0.0) || !(s.sensor_width > 0.0) || !(s.sensor_height > 0.0)) {
    throw ConfigError("system: sensor_width, sensor_height and pixel_pitch must be > 0");
  }
  for (const auto& p : s.selection.entries) {
    if (p.field != ParamField::sensor_z &&
        (p.surface < 0 || static_cast<std::size_t>(p.surface) >= s.surfaces.size())) {
      throw ConfigError("optimize: " + param_name(p) + " addresses a missing surface");
    }
  }
}

}  // namespace rwsim
