#pragma once

// Fits DeviceParams to target accumulative switching curves.
//
// The objective is the mean squared error over both curves at the target
// voltages. It is evaluated by Monte Carlo with one fixed seed for every
// candidate (common random numbers), which makes it a deterministic, piecewise
// smooth function of the parameters. Nelder-Mead runs in a log-transformed
// space so every fitted quantity stays positive.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "fefet/device_model.hpp"

namespace fefet {

struct NelderMeadOptions {
  int max_evaluations = 300;
  double f_tolerance = 1e-7;    // stop when the simplex spread of f drops below this
  double x_tolerance = 1e-4;    // ... and the simplex diameter drops below this
  double initial_step = 0.15;   // relative step for the initial simplex
  int restarts = 2;             // fresh simplices around the best point after convergence
};

struct NelderMeadResult {
  std::vector<double> x;
  double f = std::numeric_limits<double>::infinity();
  double f_initial = std::numeric_limits<double>::infinity();
  int evaluations = 0;
  bool converged = false;
};

namespace detail {

inline NelderMeadResult nelder_mead_once(const std::function<double(const std::vector<double>&)>& f,
                                         std::vector<double> x0, const NelderMeadOptions& opt) {
  const std::size_t n = x0.size();
  detail::require(n >= 1, "nelder_mead: empty parameter vector");
  NelderMeadResult res;

  auto eval = [&](const std::vector<double>& x) {
    ++res.evaluations;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::max();
  };

  std::vector<std::vector<double>> simplex(n + 1, x0);
  std::vector<double> fv(n + 1);
  fv[0] = eval(x0);
  res.f_initial = fv[0];
  for (std::size_t i = 0; i < n; ++i) {
    simplex[i + 1][i] += opt.initial_step * std::max(1.0, std::abs(x0[i]));
    fv[i + 1] = eval(simplex[i + 1]);
  }

  std::vector<std::size_t> order(n + 1);
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    std::vector<std::vector<double>> s2(n + 1);
    std::vector<double> f2(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
      s2[i] = simplex[order[i]];
      f2[i] = fv[order[i]];
    }
    simplex.swap(s2);
    fv.swap(f2);
  };

  auto affine = [&](const std::vector<double>& a, const std::vector<double>& b, double t) {
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = a[i] + t * (b[i] - a[i]);
    return r;
  };

  while (res.evaluations < opt.max_evaluations) {
    sort_simplex();
    double diameter = 0.0;
    for (std::size_t i = 1; i <= n; ++i)
      for (std::size_t k = 0; k < n; ++k) diameter = std::max(diameter, std::abs(simplex[i][k] - simplex[0][k]));
    if (fv[n] - fv[0] <= opt.f_tolerance && diameter <= opt.x_tolerance) {
      res.converged = true;
      break;
    }

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) centroid[k] += simplex[i][k] / static_cast<double>(n);

    const auto xr = affine(centroid, simplex[n], -1.0);
    const double fr = eval(xr);
    if (fr < fv[0]) {
      const auto xe = affine(centroid, simplex[n], -2.0);
      const double fe = eval(xe);
      if (fe < fr) {
        simplex[n] = xe;
        fv[n] = fe;
      } else {
        simplex[n] = xr;
        fv[n] = fr;
      }
      continue;
    }
    if (fr < fv[n - 1]) {
      simplex[n] = xr;
      fv[n] = fr;
      continue;
    }
    const bool outside = fr < fv[n];
    const auto xc = outside ? affine(centroid, xr, 0.5) : affine(centroid, simplex[n], 0.5);
    const double fc = eval(xc);
    if (fc < std::min(fr, fv[n])) {
      simplex[n] = xc;
      fv[n] = fc;
      continue;
    }
    // shrink towards the best vertex
    for (std::size_t i = 1; i <= n; ++i) {
      simplex[i] = affine(simplex[0], simplex[i], 0.5);
      fv[i] = eval(simplex[i]);
    }
  }
  sort_simplex();
  res.x = simplex[0];
  res.f = fv[0];
  return res;
}

}  // namespace detail

// Nelder-Mead with restarts: after a converged run the simplex is rebuilt
// around the best point, which recovers from premature collapse.
inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                    std::vector<double> x0, const NelderMeadOptions& opt = {}) {
  NelderMeadResult best = detail::nelder_mead_once(f, std::move(x0), opt);
  for (int r = 0; r < opt.restarts && best.converged; ++r) {
    NelderMeadOptions sub = opt;
    sub.max_evaluations = opt.max_evaluations - best.evaluations;
    if (sub.max_evaluations <= static_cast<int>(best.x.size()) + 1) break;
    NelderMeadResult next = detail::nelder_mead_once(f, best.x, sub);
    const bool improved = next.f < best.f - opt.f_tolerance;
    next.evaluations += best.evaluations;
    next.f_initial = best.f_initial;
    if (next.f <= best.f) {
      best = std::move(next);
    } else {
      best.evaluations = next.evaluations;
      best.converged = next.converged;
    }
    if (!improved) break;
  }
  return best;
}

// Mean squared error between two curve sets sampled on the same voltages.
inline double curve_mse(const SwitchCurves& sim, const SwitchCurves& target) {
  detail::require(sim.size() == target.size() && sim.size() > 0, "curve_mse: curve sizes differ or are empty");
  double s = 0.0;
  for (std::size_t i = 0; i < sim.size(); ++i) {
    const double d1 = sim.p_s0_to_s1[i] - target.p_s0_to_s1[i];
    const double d2 = sim.p_s0_to_s2[i] - target.p_s0_to_s2[i];
    s += d1 * d1 + d2 * d2;
  }
  return s / (2.0 * static_cast<double>(sim.size()));
}

struct CalibrationOptions {
  int trials = 200;             // Monte Carlo trials per voltage per objective evaluation
  std::uint64_t seed = 1;       // common random numbers for every candidate
  NelderMeadOptions optimizer{};
  int jobs = 1;
};

struct CalibrationResult {
  DeviceParams params;
  double mse = 0.0;
  double initial_mse = 0.0;
  int evaluations = 0;
  bool converged = false;  // false: evaluation budget exhausted, best-so-far returned
};

namespace detail {

// Fitted coordinates: log tau0, log alpha, log ea_mean, log ea_sigma, log beta.
inline std::vector<double> to_fit_space(const DeviceParams& p) {
  return {std::log(p.tau0_s), std::log(p.alpha), std::log(p.ea_mean), std::log(std::max(p.ea_sigma, 1e-6)),
          std::log(p.beta)};
}

inline DeviceParams from_fit_space(DeviceParams base, const std::vector<double>& x) {
  base.tau0_s = std::exp(x[0]);
  base.alpha = std::exp(x[1]);
  base.ea_mean = std::exp(x[2]);
  base.ea_sigma = std::exp(x[3]);
  base.beta = std::exp(x[4]);
  return base;
}

}  // namespace detail

inline double calibration_objective(const DeviceParams& params, const PulseProtocol& protocol,
                                    const SwitchCurves& targets, const CalibrationOptions& opt) {
  const SwitchCurves sim = accumulative_curves(params, protocol, targets.voltages, opt.trials, opt.seed, opt.jobs);
  return curve_mse(sim, targets);
}

inline CalibrationResult calibrate(const DeviceParams& initial, const PulseProtocol& protocol,
                                   const SwitchCurves& targets, const CalibrationOptions& opt = {}) {
  initial.validate();
  targets.validate();
  detail::require(targets.size() > 0, "calibrate: empty target curves");

  auto objective = [&](const std::vector<double>& x) {
    const DeviceParams p = detail::from_fit_space(initial, x);
    try {
      p.validate();
    } catch (const InvalidArgument&) {
      return std::numeric_limits<double>::infinity();
    }
    return calibration_objective(p, protocol, targets, opt);
  };
  const NelderMeadResult nm = nelder_mead(objective, detail::to_fit_space(initial), opt.optimizer);

  CalibrationResult r;
  r.params = detail::from_fit_space(initial, nm.x);
  r.mse = nm.f;
  r.initial_mse = nm.f_initial;
  r.evaluations = nm.evaluations;
  r.converged = nm.converged;
  if (r.initial_mse <= r.mse) {  // the start is always a simplex vertex; keep it exactly on ties
    r.params = initial;
    r.mse = r.initial_mse;
  }
  return r;
}

}  // namespace fefet
