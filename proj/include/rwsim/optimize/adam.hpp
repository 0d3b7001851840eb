#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "rwsim/core/error.hpp"
#include "rwsim/lens/system.hpp"

namespace rwsim {

struct AdamState {
  std::size_t step = 0;
  std::vector<double> m;   // first moment
  std::vector<double> v;   // second moment
  std::vector<double> lr;  // per parameter
  std::vector<std::string> names;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

inline AdamState make_adam(std::vector<double> lr, std::vector<std::string> names = {}) {
  AdamState s;
  s.m.assign(lr.size(), 0.0);
  s.v.assign(lr.size(), 0.0);
  if (names.empty()) {
    for (std::size_t i = 0; i < lr.size(); ++i) names.push_back("param[" + std::to_string(i) + "]");
  }
  if (names.size() != lr.size()) throw ConfigError("adam: one name per parameter required");
  s.lr = std::move(lr);
  s.names = std::move(names);
  return s;
}

// Bias-corrected Adam. `lr_scale` multiplies every per-parameter rate
// (decay schedules, step-rejection halving).
inline std::pair<AdamState, std::vector<double>> adam_step(AdamState state, std::vector<double> params,
                                                           const std::vector<double>& grads,
                                                           double lr_scale = 1.0) {
  const std::size_t p = state.lr.size();
  if (params.size() != p || grads.size() != p || state.m.size() != p || state.v.size() != p) {
    throw ConfigError("adam: expected " + std::to_string(p) + " parameters and gradients, got " +
                      std::to_string(params.size()) + " and " + std::to_string(grads.size()));
  }
  for (std::size_t i = 0; i < p; ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericDomainError("gradient of " + state.names[i] + " is not finite");
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < p; ++i) {
    const double g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double mh = state.m[i] / c1;
    const double vh = state.v[i] / c2;
    params[i] -= lr_scale * state.lr[i] * mh / (std::sqrt(vh) + state.eps);
  }
  return {std::move(state), std::move(params)};
}

// Group learning rates in physical units. Polynomial coefficients are scaled
// so one step moves the sag at the clear-aperture edge by about `sag_step`.
struct LearningRates {
  double curvature = 1e-4;   // 1/mm
  double conic = 1e-2;
  double distance = 1e-2;    // mm, axial positions and sensor_z
  double sag_step = 1e-4;    // mm
  double scale = 1.0;
};

inline double learning_rate(const LensSystem& sys, const ParamRef& p, const LearningRates& r) {
  double lr = 0.0;
  switch (p.field) {
    case ParamField::curvature: lr = r.curvature; break;
    case ParamField::conic: lr = r.conic; break;
    case ParamField::axial_position:
    case ParamField::sensor_z: lr = r.distance; break;
    case ParamField::asphere: {
      const double sa = sys.surfaces.at(p.surface).semi_aperture;
      lr = r.sag_step / std::pow(sa, asphere_order(static_cast<std::size_t>(p.component)));
      break;
    }
    case ParamField::freeform: {
      const double sa = sys.surfaces.at(p.surface).semi_aperture;
      const auto [m, n] = freeform_powers(static_cast<std::size_t>(p.component));
      lr = r.sag_step / std::pow(sa, m + n);
      break;
    }
  }
  return lr * r.scale;
}

inline std::vector<double> learning_rates(const LensSystem& sys, const LearningRates& r = {}) {
  std::vector<double> out;
  for (const auto& p : sys.selection.entries) out.push_back(learning_rate(sys, p, r));
  return out;
}

inline std::vector<std::string> parameter_names(const ParameterSelection& sel) {
  std::vector<std::string> out;
  for (const auto& p : sel.entries) out.push_back(param_name(p));
  return out;
}

}  // namespace rwsim
