#pragma once

// Monte Carlo model of a multi-domain ferroelectric gate layer.
//
// Each domain carries a polarization sign, an activation field and an
// accumulated switching history h. Under a field that opposes its
// polarization, h grows by dt / tau(E, Ea) per step and the domain flips with
// probability 1 - exp(h_old^beta - h_new^beta). A flip aligns the domain with
// the field and resets its history to zero.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "fefet/errors.hpp"
#include "fefet/random.hpp"

namespace fefet {

enum class DeviceState : std::uint8_t { S0 = 0, S1 = 1, S2 = 2 };

inline std::string_view to_string(DeviceState s) {
  switch (s) {
    case DeviceState::S0: return "S0";
    case DeviceState::S1: return "S1";
    case DeviceState::S2: return "S2";
  }
  return "?";
}

struct DeviceParams {
  int n_domains = 20;
  double t_fe_nm = 8.0;
  double divider_kappa = 0.6;   // fraction of the gate voltage across the FE layer
  double tau0_s = 1e-9;         // Merz attempt time
  double alpha = 2.0;           // Merz exponent
  double ea_mean = 5.5;         // MV/cm
  double ea_sigma = 1.0;        // MV/cm
  double beta = 1.0;            // shape parameter of the switching distribution
  double vth_high = 1.5;        // V, all domains negative
  double vth_low = 0.2;         // V, all domains positive
  std::array<double, 2> state_bounds{1.0 / 3.0, 2.0 / 3.0};
  // Identifies the sampled device when curves reuse one device for every
  // trial; a calibrated parameter set is only meaningful with its device.
  std::uint64_t device_seed = 1;

  // Activation fields are truncated below at this floor (MV/cm).
  static constexpr double kEaFloor = 1e-3;

  void validate() const {
    using detail::require;
    require(n_domains >= 1, "DeviceParams: n_domains must be >= 1");
    require(std::isfinite(t_fe_nm) && t_fe_nm > 0, "DeviceParams: t_fe must be > 0");
    require(divider_kappa > 0 && divider_kappa <= 1, "DeviceParams: kappa must be in (0, 1]");
    require(std::isfinite(tau0_s) && tau0_s > 0, "DeviceParams: tau0 must be > 0");
    require(std::isfinite(alpha) && alpha > 0, "DeviceParams: alpha must be > 0");
    require(std::isfinite(beta) && beta > 0, "DeviceParams: beta must be > 0");
    require(std::isfinite(ea_mean) && ea_mean > kEaFloor, "DeviceParams: ea_mean must be finite and positive");
    require(std::isfinite(ea_sigma) && ea_sigma >= 0, "DeviceParams: ea_sigma must be finite and >= 0");
    require(std::isfinite(vth_high) && std::isfinite(vth_low) && vth_high > vth_low,
            "DeviceParams: vth_high must exceed vth_low");
    require(0 < state_bounds[0] && state_bounds[0] < state_bounds[1] && state_bounds[1] < 1,
            "DeviceParams: state bounds must satisfy 0 < b0 < b1 < 1");
  }
};

// How an experiment drives the device: pulse widths, integration step and the
// reset convention.
struct PulseProtocol {
  enum class ResetMode { Kernel, Deterministic };
  enum class DeviceSampling { PerCurve, PerTrial };

  double program_width_s = 1e-6;
  int steps_per_pulse = 100;  // dt = width / steps
  double reset_amplitude_v = -4.0;
  double reset_width_s = 1.0;  // long enough that the slowest domains still flip
  ResetMode reset_mode = ResetMode::Kernel;
  // PerCurve: one device is drawn per curve and restored before every trial
  // (a single physical device measured repeatedly). PerTrial: a fresh device
  // per trial.
  DeviceSampling sampling = DeviceSampling::PerCurve;

  void validate() const {
    using detail::require;
    require(program_width_s > 0 && std::isfinite(program_width_s), "PulseProtocol: program width must be > 0");
    require(reset_width_s > 0 && std::isfinite(reset_width_s), "PulseProtocol: reset width must be > 0");
    require(steps_per_pulse >= 1, "PulseProtocol: steps_per_pulse must be >= 1");
    require(std::isfinite(reset_amplitude_v), "PulseProtocol: reset amplitude must be finite");
  }
};

struct DomainEnsemble {
  std::vector<std::int8_t> polarization;  // -1 or +1
  std::vector<double> e_a;                // MV/cm
  std::vector<double> history;            // dimensionless, >= 0

  std::size_t size() const noexcept { return polarization.size(); }

  std::size_t count_positive() const noexcept {
    return static_cast<std::size_t>(std::count(polarization.begin(), polarization.end(), std::int8_t{1}));
  }

  bool operator==(const DomainEnsemble&) const = default;
};

struct PulseSpec {
  double amplitude_v = 0.0;
  double width_s = 1e-6;
  double dt_s = 1e-8;

  void validate() const {
    detail::require(std::isfinite(amplitude_v), "PulseSpec: amplitude must be finite");
    detail::require(width_s > 0, "PulseSpec: width must be > 0");
    detail::require(dt_s > 0 && dt_s <= width_s, "PulseSpec: need 0 < dt <= width");
  }

  static PulseSpec with_steps(double amplitude_v, double width_s, int steps) {
    return PulseSpec{amplitude_v, width_s, width_s / steps};
  }
};

struct DeviceReadout {
  double v_th = 0.0;
  double switched_fraction = 0.0;
  DeviceState state = DeviceState::S0;

  bool operator==(const DeviceReadout&) const = default;
};

struct SwitchCurves {
  std::vector<double> voltages;
  std::vector<double> p_s0_to_s1;
  std::vector<double> p_s0_to_s2;
  std::vector<int> trials;

  std::size_t size() const noexcept { return voltages.size(); }

  void validate() const {
    detail::require(p_s0_to_s1.size() == voltages.size() && p_s0_to_s2.size() == voltages.size() &&
                        trials.size() == voltages.size(),
                    "SwitchCurves: column lengths differ");
    for (std::size_t i = 0; i < size(); ++i) {
      detail::require(p_s0_to_s1[i] >= 0 && p_s0_to_s1[i] <= 1 && p_s0_to_s2[i] >= 0 && p_s0_to_s2[i] <= 1,
                      "SwitchCurves: probabilities must lie in [0, 1]");
      detail::require(trials[i] >= 1, "SwitchCurves: trials must be >= 1");
    }
  }
};

// ---------------------------------------------------------------------------
// Primitive kernels

inline DomainEnsemble sample_device(const DeviceParams& params, Rng& rng) {
  params.validate();
  const auto n = static_cast<std::size_t>(params.n_domains);
  DomainEnsemble ens;
  ens.polarization.assign(n, -1);
  ens.history.assign(n, 0.0);
  ens.e_a.resize(n);
  for (auto& ea : ens.e_a) {
    if (params.ea_sigma == 0.0) {
      ea = params.ea_mean;
      continue;
    }
    do {
      ea = rng.normal(params.ea_mean, params.ea_sigma);
    } while (ea < DeviceParams::kEaFloor);
  }
  return ens;
}

// Ferroelectric field in MV/cm for a gate voltage, through a fixed capacitive
// divider. 1 V across 1 nm is 10 MV/cm.
inline double field_from_voltage(double v, const DeviceParams& params) {
  return params.divider_kappa * v / params.t_fe_nm * 10.0;
}

// Merz-law switching time for a domain driven by a field pointing in the
// switching direction. Non-positive driving fields never switch.
inline double tau(double e_fe, double e_a, const DeviceParams& params) {
  if (!(e_fe > 0.0)) return std::numeric_limits<double>::infinity();
  return params.tau0_s * std::exp(std::pow(e_a / e_fe, params.alpha));
}

// Field component that pushes a domain of polarization p towards -p.
inline double driving_field(std::int8_t polarization, double e_fe) noexcept {
  return -static_cast<double>(polarization) * e_fe;
}

inline DomainEnsemble step_history(DomainEnsemble ens, double e_fe, double dt, const DeviceParams& params) {
  detail::require(dt > 0, "step_history: dt must be > 0");
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const double drive = driving_field(ens.polarization[i], e_fe);
    if (drive > 0.0) ens.history[i] += dt / tau(drive, ens.e_a[i], params);
  }
  return ens;
}

inline double switch_prob(double h_before, double h_after, double beta) {
  detail::require(h_before >= 0 && h_after >= h_before, "switch_prob: need 0 <= h_before <= h_after");
  if (h_after == h_before) return 0.0;
  const double p = -std::expm1(std::pow(h_before, beta) - std::pow(h_after, beta));
  return std::clamp(p, 0.0, 1.0);
}

inline void apply_pulse_inplace(DomainEnsemble& ens, const PulseSpec& pulse, const DeviceParams& params, Rng& rng) {
  pulse.validate();
  if (pulse.amplitude_v == 0.0) return;
  const double e_fe = field_from_voltage(pulse.amplitude_v, params);
  const std::int8_t target = e_fe > 0 ? 1 : -1;

  const auto n_steps = static_cast<long>(std::ceil(pulse.width_s / pulse.dt_s - 1e-9));
  const double last_dt = pulse.width_s - static_cast<double>(n_steps - 1) * pulse.dt_s;

  // tau is constant per domain for a constant-amplitude pulse
  std::vector<double> rate(ens.size(), 0.0);
  bool any = false;
  for (std::size_t i = 0; i < ens.size(); ++i) {
    if (ens.polarization[i] != target) {
      rate[i] = 1.0 / tau(std::abs(e_fe), ens.e_a[i], params);
      any = any || rate[i] > 0.0;
    }
  }
  if (!any) return;

  // h^beta carried between steps; the per-step flip probability is
  // switch_prob(h_old, h_new, beta) written out on the cached powers.
  const double beta = params.beta;
  auto hpow = [beta](double h) { return beta == 1.0 ? h : std::pow(h, beta); };
  std::vector<double> h_beta(ens.size());
  for (std::size_t i = 0; i < ens.size(); ++i) h_beta[i] = hpow(ens.history[i]);

  for (long k = 0; k < n_steps; ++k) {
    const double dt = k + 1 == n_steps ? last_dt : pulse.dt_s;
    for (std::size_t i = 0; i < ens.size(); ++i) {
      if (ens.polarization[i] == target || rate[i] == 0.0) continue;
      const double h_new = ens.history[i] + dt * rate[i];
      const double hb_new = hpow(h_new);
      const double p = -std::expm1(h_beta[i] - hb_new);
      if (rng.uniform() < p) {
        ens.polarization[i] = target;
        ens.history[i] = 0.0;
        rate[i] = 0.0;
      } else {
        ens.history[i] = h_new;
        h_beta[i] = hb_new;
      }
    }
  }
}

inline DomainEnsemble apply_pulse(DomainEnsemble ens, const PulseSpec& pulse, const DeviceParams& params, Rng& rng) {
  apply_pulse_inplace(ens, pulse, params, rng);
  return ens;
}

inline DeviceState classify_fraction(double fraction, const DeviceParams& params) noexcept {
  if (fraction < params.state_bounds[0]) return DeviceState::S0;
  if (fraction < params.state_bounds[1]) return DeviceState::S1;
  return DeviceState::S2;
}

inline DeviceReadout readout(const DomainEnsemble& ens, const DeviceParams& params) {
  DeviceReadout r;
  r.switched_fraction = ens.size() == 0 ? 0.0 : static_cast<double>(ens.count_positive()) / ens.size();
  r.v_th = params.vth_high - (params.vth_high - params.vth_low) * r.switched_fraction;
  r.state = classify_fraction(r.switched_fraction, params);
  return r;
}

// Reset pulse from the protocol. Deterministic mode skips the kernel and sets
// every domain negative with cleared history.
inline void apply_reset(DomainEnsemble& ens, const DeviceParams& params, const PulseProtocol& protocol, Rng& rng) {
  if (protocol.reset_mode == PulseProtocol::ResetMode::Deterministic) {
    for (std::size_t i = 0; i < ens.size(); ++i) {
      if (ens.polarization[i] != -1) {
        ens.polarization[i] = -1;
        ens.history[i] = 0.0;
      }
    }
    return;
  }
  apply_pulse_inplace(ens,
                      PulseSpec::with_steps(protocol.reset_amplitude_v, protocol.reset_width_s,
                                            protocol.steps_per_pulse),
                      params, rng);
}

// Largest probability, over the device's domains, that a positive domain with
// zero history survives the reset pulse unswitched: exp(-(W / tau)^beta) at
// the reset field.
inline double reset_survival(const DomainEnsemble& ens, const DeviceParams& params, const PulseProtocol& protocol) {
  if (protocol.reset_mode == PulseProtocol::ResetMode::Deterministic) return 0.0;
  const double e = std::abs(field_from_voltage(protocol.reset_amplitude_v, params));
  double worst = 0.0;
  for (double ea : ens.e_a) {
    const double h = protocol.reset_width_s / tau(e, ea, params);
    worst = std::max(worst, std::exp(-std::pow(h, params.beta)));
  }
  return worst;
}

// Restores a device to its as-sampled state: all negative, zero history.
inline void restore(DomainEnsemble& ens) {
  std::fill(ens.polarization.begin(), ens.polarization.end(), std::int8_t{-1});
  std::fill(ens.history.begin(), ens.history.end(), 0.0);
}

// ---------------------------------------------------------------------------
// Accumulative switching curves

// Voltage grid lo, lo+step, ..., hi (inclusive up to rounding).
inline std::vector<double> voltage_grid(double lo, double hi, double step) {
  detail::require(step > 0 && hi >= lo, "voltage_grid: need step > 0 and hi >= lo");
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = lo + step * static_cast<double>(i);
  return v;
}

// The device identified by params.device_seed and the domain count.
inline DomainEnsemble device_for(const DeviceParams& params) {
  Rng rng(derive_seed(params.device_seed, {static_cast<std::uint64_t>(params.n_domains)}));
  return sample_device(params, rng);
}

struct TrialOutcome {
  DeviceState state;
  double switched_fraction;
};

namespace detail {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. fn must only write to
// slot i of its outputs.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t used = std::min(workers, n);
  pool.reserve(used);
  for (std::size_t w = 0; w < used; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += used) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace detail

// One reset-then-program trial per (voltage, trial) pair. Each pair gets its
// own stream derived from `seed`, so results do not depend on `jobs`.
inline std::vector<std::vector<TrialOutcome>> run_trials(const DeviceParams& params, const PulseProtocol& protocol,
                                                         std::span<const double> v_grid, int trials,
                                                         std::uint64_t seed, int jobs = 1) {
  params.validate();
  protocol.validate();
  detail::require(trials >= 1, "accumulative curves: trials must be >= 1");

  const DomainEnsemble device = device_for(params);

  std::vector<std::vector<TrialOutcome>> out(v_grid.size(), std::vector<TrialOutcome>(static_cast<std::size_t>(trials)));
  detail::parallel_for(v_grid.size(), jobs, [&](std::size_t vi) {
    const PulseSpec program = PulseSpec::with_steps(v_grid[vi], protocol.program_width_s, protocol.steps_per_pulse);
    DomainEnsemble ens = device;
    for (int t = 0; t < trials; ++t) {
      Rng rng(derive_seed(seed, {vi, static_cast<std::uint64_t>(t)}));
      if (protocol.sampling == PulseProtocol::DeviceSampling::PerTrial) {
        ens = sample_device(params, rng);
      } else {
        restore(ens);
      }
      apply_reset(ens, params, protocol, rng);
      apply_pulse_inplace(ens, program, params, rng);
      const DeviceReadout r = readout(ens, params);
      out[vi][static_cast<std::size_t>(t)] = {r.state, r.switched_fraction};
    }
  });
  return out;
}

inline SwitchCurves accumulative_curves(const DeviceParams& params, const PulseProtocol& protocol,
                                        std::span<const double> v_grid, int trials, std::uint64_t seed,
                                        int jobs = 1) {
  const auto outcomes = run_trials(params, protocol, v_grid, trials, seed, jobs);
  SwitchCurves c;
  c.voltages.assign(v_grid.begin(), v_grid.end());
  for (const auto& row : outcomes) {
    int n1 = 0, n2 = 0;
    for (const auto& o : row) {
      n1 += o.state == DeviceState::S1;
      n2 += o.state == DeviceState::S2;
    }
    c.p_s0_to_s1.push_back(static_cast<double>(n1) / trials);
    c.p_s0_to_s2.push_back(static_cast<double>(n2) / trials);
    c.trials.push_back(trials);
  }
  return c;
}

// Threshold voltage after each reset/program iteration, per grid voltage. The
// device is not restored between iterations, so unswitched domains keep their
// accumulated history.
inline std::vector<std::vector<double>> threshold_trajectories(const DeviceParams& params,
                                                               const PulseProtocol& protocol,
                                                               std::span<const double> v_grid, int iterations,
                                                               std::uint64_t seed) {
  params.validate();
  protocol.validate();
  const DomainEnsemble device = device_for(params);
  std::vector<std::vector<double>> vth(v_grid.size());
  for (std::size_t vi = 0; vi < v_grid.size(); ++vi) {
    Rng rng(derive_seed(seed, {0x7a1, vi}));
    DomainEnsemble ens = device;
    const PulseSpec program = PulseSpec::with_steps(v_grid[vi], protocol.program_width_s, protocol.steps_per_pulse);
    for (int it = 0; it < iterations; ++it) {
      apply_reset(ens, params, protocol, rng);
      apply_pulse_inplace(ens, program, params, rng);
      vth[vi].push_back(readout(ens, params).v_th);
    }
  }
  return vth;
}

// ---------------------------------------------------------------------------
// Domain-count scaling

// Counts conductance plateaus along a mean switched-fraction curve. Walking
// the grid, a cluster extends while the curve stays within `gap` of the
// cluster's first value. Clusters spanning at least `min_run` grid points are
// plateaus; adjacent plateaus whose mean levels differ by less than `gap` are
// merged.
inline int count_plateaus(std::span<const double> mean_fraction, double gap = 0.1, int min_run = 3) {
  if (mean_fraction.empty()) return 0;
  std::vector<double> levels;
  auto close_cluster = [&](std::size_t begin, std::size_t end) {
    if (static_cast<int>(end - begin) < min_run) return;
    double sum = 0.0;
    for (std::size_t j = begin; j < end; ++j) sum += mean_fraction[j];
    const double level = sum / static_cast<double>(end - begin);
    if (!levels.empty() && std::abs(level - levels.back()) < gap) return;
    levels.push_back(level);
  };
  std::size_t start = 0;
  for (std::size_t j = 1; j < mean_fraction.size(); ++j) {
    if (std::abs(mean_fraction[j] - mean_fraction[start]) >= gap) {
      close_cluster(start, j);
      start = j;
    }
  }
  close_cluster(start, mean_fraction.size());
  return static_cast<int>(levels.size());
}

// Per-voltage summary of the switched fraction that the plateau rule reads.
// Modal follows the value a single device most often lands on, which keeps
// the discreteness of small domain counts; Mean smooths it into a sigmoid.
enum class PlateauObservable { Modal, Median, Mean };

inline double summarize_fraction(std::span<const TrialOutcome> per_v, PlateauObservable obs) {
  detail::require(!per_v.empty(), "summarize_fraction: no trials");
  std::vector<double> f;
  f.reserve(per_v.size());
  for (const auto& o : per_v) f.push_back(o.switched_fraction);
  if (obs == PlateauObservable::Mean) {
    double s = 0.0;
    for (double x : f) s += x;
    return s / static_cast<double>(f.size());
  }
  std::sort(f.begin(), f.end());
  if (obs == PlateauObservable::Median) {
    const std::size_t m = f.size() / 2;
    return f.size() % 2 ? f[m] : 0.5 * (f[m - 1] + f[m]);
  }
  // fractions are k / n exactly, so equal values compare equal; ties go to the lowest
  double best = f[0];
  std::size_t best_run = 0;
  for (std::size_t i = 0; i < f.size();) {
    std::size_t j = i;
    while (j < f.size() && f[j] == f[i]) ++j;
    if (j - i > best_run) {
      best_run = j - i;
      best = f[i];
    }
    i = j;
  }
  return best;
}

struct PlateauRow {
  int n_domains;
  int plateaus;
  std::vector<double> fraction;  // summarized switched fraction per voltage
};

inline std::vector<PlateauRow> states_vs_domains(DeviceParams params, const PulseProtocol& protocol,
                                                 std::span<const int> n_list, std::span<const double> v_grid,
                                                 int trials, std::uint64_t seed, int jobs = 1,
                                                 PlateauObservable obs = PlateauObservable::Modal) {
  std::vector<PlateauRow> rows;
  for (const int n : n_list) {
    detail::require(n >= 1, "states_vs_domains: domain counts must be >= 1");
    params.n_domains = n;
    const auto outcomes = run_trials(params, protocol, v_grid, trials, derive_seed(seed, {static_cast<std::uint64_t>(n)}), jobs);
    PlateauRow row{n, 0, {}};
    for (const auto& per_v : outcomes) row.fraction.push_back(summarize_fraction(per_v, obs));
    row.plateaus = count_plateaus(row.fraction);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace fefet
