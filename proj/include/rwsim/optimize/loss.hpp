#pragma once

#include <cmath>
#include <vector>

#include "rwsim/imaging/metrics.hpp"
#include "rwsim/imaging/render.hpp"
#include "rwsim/raytrace/aim.hpp"

namespace rwsim {

// Losses take the prediction in the working scalar type and a constant
// target, so gradients flow through the prediction only.

template <class T>
T mse_loss(const Image<T>& pred, const Image<double>& target) {
  if (pred.width != target.width || pred.height != target.height) {
    throw ConfigError("loss: prediction is " + std::to_string(pred.width) + "x" + std::to_string(pred.height) +
                      ", target is " + std::to_string(target.width) + "x" + std::to_string(target.height));
  }
  if (pred.empty()) throw ConfigError("loss: empty image");
  T acc(0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T d = pred.data[i] - target.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

template <class T>
T rmse_loss(const Image<T>& pred, const Image<double>& target) {
  using std::sqrt;
  const T m = mse_loss(pred, target);
  // sqrt has an infinite slope at 0; a perfect match reports a zero gradient.
  if (value_of(m) == 0.0) return T(0.0);
  return sqrt(m);
}

// Restricted to pixels where the mask is nonzero.
template <class T>
T mse_loss(const Image<T>& pred, const Image<double>& target, const Image<double>& mask) {
  if (!mask.empty() && (mask.width != pred.width || mask.height != pred.height)) {
    throw ConfigError("loss: mask size differs from the prediction");
  }
  if (pred.width != target.width || pred.height != target.height) {
    throw ConfigError("loss: prediction and target sizes differ");
  }
  T acc(0.0);
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask.empty() && mask.data[i] == 0.0) continue;
    const T d = pred.data[i] - target.data[i];
    acc += d * d;
    ++n;
  }
  if (n == 0) throw ConfigError("loss: no valid pixels");
  return acc / static_cast<double>(n);
}

template <class T>
T rmse_loss(const Image<T>& pred, const Image<double>& target, const Image<double>& mask) {
  using std::sqrt;
  const T m = mse_loss(pred, target, mask);
  if (value_of(m) == 0.0) return T(0.0);
  return sqrt(m);
}

template <class T>
T rmse_loss(const Measurement<T>& pred, const Measurement<double>& target) {
  return rmse_loss(pred.image, target.image, pred.valid);
}

template <class T>
T mse_loss(const Measurement<T>& pred, const Measurement<double>& target) {
  return mse_loss(pred.image, target.image, pred.valid);
}

// Mean over fields of the RMS spot radius about the spot centroid.
template <class T>
T rms_spot_loss(const BasicLensSystem<T>& sys, const std::vector<Vec2<double>>& fields, double wavelength_nm,
                std::size_t n_rays) {
  if (fields.empty()) throw ConfigError("rms_spot_loss: no field points");
  T acc(0.0);
  for (const auto& f : fields) {
    const Source src = source_at_field(sys, f);
    const auto pupil = sample_pupil(sys, src, wavelength_nm, n_rays);
    const auto hits = spot_diagram(sys, pupil);
    if (hits.empty()) throw VignettedFieldError("source " + src.describe() + " has no ray on the sensor");
    acc += rms_spot_radius(hits);
  }
  return acc / static_cast<double>(fields.size());
}

}  // namespace rwsim
