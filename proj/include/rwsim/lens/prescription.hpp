#pragma once

// Prescription files: a [system] table, optional [[material]] blocks and an
// ordered list of [[surface]] blocks. Each block may carry
// `optimize = [...]` naming fields that become optimization parameters, in
// file order. Lengths in mm, wavelengths in nm.

#include <fstream>
#include <sstream>
#include <string>

#include "rwsim/io/kv_format.hpp"
#include "rwsim/lens/system.hpp"

namespace rwsim {

namespace detail {

inline void parse_optimize_entry(const std::string& name, int surface, const Surface* surf,
                                 const std::vector<int>& listed_freeform, ParameterSelection& sel,
                                 const std::string& path) {
  auto bad = [&] { return ConfigError(path + ".optimize: unknown parameter '" + name + "'"); };
  if (surface < 0) {
    if (name != "sensor_z") throw bad();
    sel.add({-1, ParamField::sensor_z, 0});
    return;
  }
  (void)surf;
  if (name == "curvature") return sel.add({surface, ParamField::curvature, 0});
  if (name == "conic") return sel.add({surface, ParamField::conic, 0});
  if (name == "axial_position") return sel.add({surface, ParamField::axial_position, 0});
  if (name == "asphere_coeffs") {
    for (int i = 0; i < static_cast<int>(kAsphereTerms); ++i) sel.add({surface, ParamField::asphere, i});
    return;
  }
  if (name == "freeform_coeffs") {
    for (int idx : listed_freeform) sel.add({surface, ParamField::freeform, idx});
    return;
  }
  const auto open = name.find('[');
  if (open == std::string::npos || name.back() != ']') throw bad();
  const std::string field = name.substr(0, open);
  const std::string inner = name.substr(open + 1, name.size() - open - 2);
  if (field == "asphere_coeffs") {
    const int order = std::atoi(inner.c_str());
    if (order < 4 || order > 12 || order % 2 != 0) throw bad();
    return sel.add({surface, ParamField::asphere, (order - 4) / 2});
  }
  if (field == "freeform_coeffs") {
    int m = -1;
    int n = -1;
    if (std::sscanf(inner.c_str(), "%d,%d", &m, &n) != 2 || m < 0 || n < 0 ||
        m + n > kFreeformDegree) {
      throw bad();
    }
    return sel.add({surface, ParamField::freeform, static_cast<int>(freeform_index(m, n))});
  }
  throw bad();
}

inline std::vector<std::string> string_list(const io::Json& obj, const std::string& key,
                                            const std::string& path) {
  std::vector<std::string> out;
  if (!obj.contains(key)) return out;
  const auto& arr = obj.at(key);
  if (!arr.is_array()) throw ConfigError(path + "." + key + ": expected an array of strings");
  for (const auto& v : arr) {
    if (!v.is_string()) throw ConfigError(path + "." + key + ": expected an array of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace detail

inline LensSystem prescription_from_json(const io::Json& doc) {
  LensSystem sys;
  if (!doc.contains("system")) throw ConfigError("system: missing [system] table");
  const auto& st = doc.at("system");
  sys.object_distance = io::get_number(st, "object_distance", "system",
                                       std::numeric_limits<double>::infinity());
  sys.sensor_z = io::get_number(st, "sensor_z", "system");
  sys.sensor_width = io::get_number(st, "sensor_width", "system");
  sys.sensor_height = io::get_number(st, "sensor_height", "system");
  sys.pixel_pitch = io::get_number(st, "pixel_pitch", "system");

  if (doc.contains("material")) {
    std::size_t i = 0;
    for (const auto& m : doc.at("material")) {
      const std::string path = "material[" + std::to_string(i++) + "]";
      Material mat;
      mat.name = io::get_string(m, "name", path);
      if (!m.contains("index_table") || !m.at("index_table").is_array()) {
        throw ConfigError(path + ".index_table: expected [[wavelength_nm, index], ...]");
      }
      for (const auto& row : m.at("index_table")) {
        if (!row.is_array() || row.size() != 2 || !row[0].is_number() || !row[1].is_number()) {
          throw ConfigError(path + ".index_table: expected [[wavelength_nm, index], ...]");
        }
        mat.index_table.emplace_back(row[0].get<double>(), row[1].get<double>());
      }
      sys.materials.push_back(std::move(mat));
    }
  }

  std::vector<std::vector<std::string>> optimize_lists;
  std::vector<std::vector<int>> freeform_lists;
  if (doc.contains("surface")) {
    std::size_t i = 0;
    for (const auto& s : doc.at("surface")) {
      const std::string path = "surface[" + std::to_string(i++) + "]";
      Surface surf;
      const std::string kind = io::get_string(s, "kind", path, "sphere");
      const auto parsed = parse_surface_kind(kind);
      if (!parsed) throw ConfigError(path + ".kind: unknown surface kind '" + kind + "'");
      surf.kind = *parsed;
      surf.curvature = io::get_number(s, "curvature", path, 0.0);
      surf.conic = io::get_number(s, "conic", path, 0.0);
      surf.z = io::get_number(s, "axial_position", path);
      surf.semi_aperture = io::get_number(s, "semi_aperture", path);
      surf.material_after = io::get_string(s, "material_after", path, "air");
      surf.is_stop = io::get_bool(s, "is_stop", path, false);
      if (s.contains("asphere_coeffs")) {
        const auto& a = s.at("asphere_coeffs");
        if (!a.is_array() || a.size() > kAsphereTerms) {
          throw ConfigError(path + ".asphere_coeffs: expected up to 5 numbers (orders 4..12)");
        }
        for (std::size_t k = 0; k < a.size(); ++k) {
          if (!a[k].is_number()) throw ConfigError(path + ".asphere_coeffs: expected numbers");
          surf.asphere[k] = a[k].get<double>();
        }
      }
      std::vector<int> listed;
      if (s.contains("freeform_coeffs")) {
        for (const auto& t : s.at("freeform_coeffs")) {
          if (!t.is_array() || t.size() != 3 || !t[0].is_number_integer() ||
              !t[1].is_number_integer() || !t[2].is_number()) {
            throw ConfigError(path + ".freeform_coeffs: expected [[m, n, value], ...]");
          }
          const int m = t[0].get<int>();
          const int n = t[1].get<int>();
          if (m < 0 || n < 0 || m + n > kFreeformDegree) {
            throw ConfigError(path + ".freeform_coeffs: term x^" + std::to_string(m) + " y^" +
                              std::to_string(n) + " exceeds degree 6");
          }
          surf.freeform[freeform_index(m, n)] = t[2].get<double>();
          listed.push_back(static_cast<int>(freeform_index(m, n)));
        }
      }
      optimize_lists.push_back(detail::string_list(s, "optimize", path));
      freeform_lists.push_back(std::move(listed));
      sys.surfaces.push_back(std::move(surf));
    }
  }

  for (std::size_t i = 0; i < sys.surfaces.size(); ++i) {
    const std::string path = "surface[" + std::to_string(i) + "]";
    for (const auto& name : optimize_lists[i]) {
      detail::parse_optimize_entry(name, static_cast<int>(i), &sys.surfaces[i], freeform_lists[i],
                                   sys.selection, path);
    }
  }
  for (const auto& name : detail::string_list(st, "optimize", "system")) {
    detail::parse_optimize_entry(name, -1, nullptr, {}, sys.selection, "system");
  }
  validate_system(sys);
  return sys;
}

inline LensSystem parse_prescription(const std::string& text, const std::string& source = "<string>") {
  return prescription_from_json(io::parse_kv(text, source));
}

inline LensSystem load_prescription(const std::string& path) {
  return prescription_from_json(io::load_kv(path));
}

inline std::string format_prescription(const LensSystem& sys) {
  using io::format_double;
  std::ostringstream os;
  auto optimize_for = [&](int surface) {
    std::vector<std::string> names;
    for (const auto& p : sys.selection.entries) {
      if (p.surface != surface) continue;
      std::string n = param_name(p);
      if (const auto dot = n.find("]."); dot != std::string::npos) n = n.substr(dot + 2);
      names.push_back(n);
    }
    return names;
  };
  auto write_list = [&](const std::vector<std::string>& names) {
    os << "optimize = [";
    for (std::size_t i = 0; i < names.size(); ++i) os << (i ? ", " : "") << '"' << names[i] << '"';
    os << "]\n";
  };

  os << "[system]\n";
  os << "object_distance = " << format_double(sys.object_distance) << "\n";
  os << "sensor_z = " << format_double(sys.sensor_z) << "\n";
  os << "sensor_width = " << format_double(sys.sensor_width) << "\n";
  os << "sensor_height = " << format_double(sys.sensor_height) << "\n";
  os << "pixel_pitch = " << format_double(sys.pixel_pitch) << "\n";
  if (auto names = optimize_for(-1); !names.empty()) write_list(names);

  for (const auto& m : sys.materials) {
    os << "\n[[material]]\nname = \"" << m.name << "\"\nindex_table = [";
    for (std::size_t i = 0; i < m.index_table.size(); ++i) {
      os << (i ? ", " : "") << "[" << format_double(m.index_table[i].first) << ", "
         << format_double(m.index_table[i].second) << "]";
    }
    os << "]\n";
  }

  for (std::size_t i = 0; i < sys.surfaces.size(); ++i) {
    const auto& s = sys.surfaces[i];
    os << "\n[[surface]]\n";
    os << "kind = \"" << to_string(s.kind) << "\"\n";
    os << "curvature = " << format_double(s.curvature) << "\n";
    os << "conic = " << format_double(s.conic) << "\n";
    os << "asphere_coeffs = [";
    for (std::size_t k = 0; k < kAsphereTerms; ++k) os << (k ? ", " : "") << format_double(s.asphere[k]);
    os << "]\n";
    os << "freeform_coeffs = [";
    bool first = true;
    for (std::size_t k = 0; k < kFreeformTerms; ++k) {
      const bool selected = std::any_of(sys.selection.entries.begin(), sys.selection.entries.end(),
                                        [&](const ParamRef& p) {
                                          return p.surface == static_cast<int>(i) &&
                                                 p.field == ParamField::freeform &&
                                                 p.component == static_cast<int>(k);
                                        });
      if (s.freeform[k] == 0.0 && !selected) continue;
      const auto [m, n] = freeform_powers(k);
      os << (first ? "" : ", ") << "[" << m << ", " << n << ", " << format_double(s.freeform[k]) << "]";
      first = false;
    }
    os << "]\n";
    os << "axial_position = " << format_double(s.z) << "\n";
    os << "semi_aperture = " << format_double(s.semi_aperture) << "\n";
    os << "material_after = \"" << s.material_after << "\"\n";
    os << "is_stop = " << (s.is_stop ? "true" : "false") << "\n";
    if (auto names = optimize_for(static_cast<int>(i)); !names.empty()) write_list(names);
  }
  return os.str();
}

inline void save_prescription(const LensSystem& sys, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << format_prescription(sys);
  if (!out) throw ConfigError("failed writing '" + path + "'");
}

}  // namespace rwsim
