#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "rwsim/core/dual.hpp"
#include "rwsim/optimize/adam.hpp"

namespace rwsim {

// Per-iteration table written as CSV with a fixed column order.
struct Trace {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row) {
    if (row.size() != columns.size()) throw ConfigError("trace row has the wrong number of columns");
    rows.push_back(std::move(row));
  }

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) return i;
    }
    throw ConfigError("trace has no column '" + name + "'");
  }

  std::string csv() const {
    std::string out;
    for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + columns[i];
    out += "\n";
    char buf[64];
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (i == 0) {
          std::snprintf(buf, sizeof buf, "%.0f", r[i]);
        } else {
          std::snprintf(buf, sizeof buf, ",%.17g", r[i]);
        }
        out += buf;
      }
      out += "\n";
    }
    return out;
  }

  void save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write '" + path + "'");
    f << csv();
  }
};

struct Evaluation {
  double loss = 0.0;
  std::vector<double> grad;
};

// Loss and gradient over the system's parameter selection: fn is called once
// with the system lifted to Dual<N>, N the smallest capacity >= P.
template <class Fn>
Evaluation value_and_gradient(const LensSystem& sys, Fn&& fn) {
  const std::size_t p = sys.selection.size();
  if (p == 0) return {value_of(fn(sys)), {}};
  return dispatch_tangent_width(p, [&]<std::size_t N>() {
    const auto lifted = lift_system<Dual<N>>(sys, sys.selection);
    const Dual<N> out = fn(lifted);
    Evaluation e{out.value, std::vector<double>(p)};
    for (std::size_t k = 0; k < p; ++k) e.grad[k] = out.tangent[k];
    return e;
  });
}

struct AdamLoopOptions {
  int iterations = 100;
  double decay = 1.0;           // learning-rate factor applied per iteration
  double loss_tolerance = 0.0;  // stop once the loss is at or below this
  int max_rejections = 10;
};

struct AdamLoopResult {
  std::vector<double> params;
  double loss = 0.0;
  int accepted = 0;
  int rejected = 0;
  std::vector<std::string> log;
};

// Adam with step rejection. A proposal whose evaluation throws a
// NumericError is discarded and the learning rate halved; too many
// consecutive rejections abort the run. `refresh(iter, params)` runs before
// each proposal and returns true when the objective itself changed (the
// current point is then re-evaluated). `observe(iter, params, loss)` sees the
// accepted state after every iteration, iteration 0 being the start.
template <class Eval, class Refresh, class Observe>
AdamLoopResult adam_loop(std::vector<double> params, AdamState state, const AdamLoopOptions& opt, Eval&& eval,
                         Refresh&& refresh, Observe&& observe) {
  if (opt.iterations < 0) throw ConfigError("iterations must be >= 0");
  AdamLoopResult out;
  Evaluation cur = eval(params);
  observe(0, params, cur.loss);
  double scale = 1.0;
  int streak = 0;
  for (int it = 1; it <= opt.iterations; ++it) {
    if (cur.loss <= opt.loss_tolerance) {
      out.log.push_back("iteration " + std::to_string(it) + ": loss at tolerance, stopping");
      break;
    }
    if (refresh(it, params)) cur = eval(params);
    auto [next_state, next_params] =
        adam_step(state, params, cur.grad, scale * std::pow(opt.decay, static_cast<double>(it - 1)));
    try {
      Evaluation e = eval(next_params);
      if (!std::isfinite(e.loss)) throw NumericDomainError("loss evaluation");
      state = std::move(next_state);
      params = std::move(next_params);
      cur = std::move(e);
      streak = 0;
      ++out.accepted;
    } catch (const NumericError& err) {
      ++streak;
      ++out.rejected;
      scale *= 0.5;
      out.log.push_back("iteration " + std::to_string(it) + ": step rejected (" + err.what() +
                        "), learning rate halved");
      if (streak >= opt.max_rejections) {
        throw NumericError("optimization aborted after " + std::to_string(streak) +
                           " consecutive rejected steps; last: " + err.what());
      }
    }
    observe(it, params, cur.loss);
  }
  out.params = std::move(params);
  out.loss = cur.loss;
  return out;
}

// Snapshot iterations 0, T/4, T/2 and T.
inline std::vector<int> snapshot_iterations(int t) {
  std::vector<int> s{0, t / 4, t / 2, t};
  std::vector<int> out;
  for (int v : s) {
    if (out.empty() || out.back() != v) out.push_back(v);
  }
  return out;
}

}  // namespace rwsim
