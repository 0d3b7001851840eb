#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rwsim/core/error.hpp"

namespace rwsim {

// Tabulated refractive index: (wavelength nm, index) pairs, linearly
// interpolated and held constant past the ends.
struct Material {
  std::string name;
  std::vector<std::pair<double, double>> index_table;

  static Material constant(std::string name, double index) {
    return Material{std::move(name), {{587.6, index}}};
  }
};

inline Material air() { return Material::constant("air", 1.0); }

inline void validate_material(const Material& m, const std::string& path) {
  if (m.index_table.empty()) throw ConfigError(path + ".index_table: needs at least one entry");
  for (std::size_t i = 0; i < m.index_table.size(); ++i) {
    if (!(m.index_table[i].second >= 1.0)) {
      throw ConfigError(path + ".index_table[" + std::to_string(i) + "]: index must be >= 1.0");
    }
    if (i > 0 && !(m.index_table[i].first > m.index_table[i - 1].first)) {
      throw ConfigError(path + ".index_table[" + std::to_string(i) +
                        "]: wavelengths must be strictly increasing");
    }
  }
}

inline double index_at(const Material& m, double wavelength_nm) {
  const auto& t = m.index_table;
  if (t.empty()) throw ConfigError("material '" + m.name + "' has an empty index table");
  if (t.size() == 1) return t.front().second;
  if (wavelength_nm < t.front().first - 50.0 || wavelength_nm > t.back().first + 50.0) {
    throw ConfigError("wavelength " + std::to_string(wavelength_nm) + " nm outside the table of '" +
                      m.name + "'");
  }
  if (wavelength_nm <= t.front().first) return t.front().second;
  if (wavelength_nm >= t.back().first) return t.back().second;
  std::size_t i = 1;
  while (t[i].first < wavelength_nm) ++i;
  const auto& [w0, n0] = t[i - 1];
  const auto& [w1, n1] = t[i];
  return n0 + (wavelength_nm - w0) / (w1 - w0) * (n1 - n0);
}

}  // namespace rwsim
