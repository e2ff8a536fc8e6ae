#pragma once

// Spiking network: 784 Poisson inputs feeding a crossbar of stochastic
// synapses, read out by leaky integrate-and-fire neurons with all-to-all
// lateral inhibition (winner-take-all) and adaptive thresholds.
//
// Learning is the stepped rule: on every postsynaptic spike, each input's
// latest presynaptic spike time decides the pulse sent to its cell. Tight
// timing sends the Strong pulse, looser timing inside the window the Weak
// pulse, and everything else (no spike, outside the window, anti-causal) is a
// depression candidate that resets the cell with a small probability.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fefet/crossbar.hpp"
#include "fefet/data.hpp"
#include "fefet/errors.hpp"
#include "fefet/random.hpp"
#include "fefet/synapse.hpp"

namespace fefet {

inline constexpr double kNoSpike = -std::numeric_limits<double>::infinity();

struct NeuronParams {
  double v_rest = 0.0;
  double v_reset = 0.0;
  double v_thresh_base = 1.0;
  double tau_mem_ms = 100.0;
  double refractory_ms = 5.0;
  double theta_plus = 0.2;
  double theta_decay_ms = 1e5;
  double inhibition_strength = 1.0;
  double input_gain = 0.01;  // membrane jump per unit conductance per input spike

  void validate() const {
    detail::require(v_reset < v_thresh_base, "NeuronParams: v_reset must be below v_thresh_base");
    detail::require(tau_mem_ms > 0 && refractory_ms > 0 && theta_decay_ms > 0,
                    "NeuronParams: time constants must be > 0");
    detail::require(theta_plus >= 0 && inhibition_strength >= 0 && input_gain > 0,
                    "NeuronParams: theta_plus, inhibition and gain must be non-negative (gain > 0)");
  }
};

struct LearnRuleParams {
  double timing_threshold_ms = 2.0;
  double stdp_window_ms = 50.0;
  bool depression_enabled = true;
  double depression_prob = 0.02;
  // Also treat presynaptic spikes that follow a postsynaptic spike (within
  // the window) as depression candidates.
  bool anticausal_depression = true;

  void validate() const {
    detail::require(0 < timing_threshold_ms && timing_threshold_ms < stdp_window_ms,
                    "LearnRuleParams: need 0 < timing threshold < window");
    detail::require(depression_prob >= 0 && depression_prob <= 1, "LearnRuleParams: depression_prob outside [0, 1]");
  }
};

struct EncoderParams {
  double duration_ms = 350.0;
  double dt_ms = 0.5;
  double max_rate_hz = 63.75;
  // Patterns that draw fewer output spikes are shown again with the rate
  // raised by rate_boost_hz, up to max_presentations in total.
  int min_spikes = 2;
  double rate_boost_hz = 32.0;
  int max_presentations = 4;

  void validate() const {
    detail::require(duration_ms >= 0 && dt_ms > 0, "EncoderParams: need duration >= 0 and dt > 0");
    detail::require(max_rate_hz >= 0 && rate_boost_hz >= 0, "EncoderParams: rates must be non-negative");
    detail::require(max_presentations >= 1 && min_spikes >= 0, "EncoderParams: need max_presentations >= 1");
  }

  std::size_t steps() const { return static_cast<std::size_t>(std::llround(duration_ms / dt_ms)); }
};

enum class WeightInit { Zeros, Random };

struct NetworkConfig {
  std::size_t n_input = 784;
  std::size_t n_exc = 100;
  NeuronParams neuron{};
  LearnRuleParams rule{};
  EncoderParams encoder{};
  WeightInit init = WeightInit::Random;
  double init_s2_prob = 0.1;  // Random init: each cell S2 with this probability, else S0

  void validate() const {
    detail::require(n_input > 0 && n_exc > 0, "NetworkConfig: layer sizes must be positive");
    neuron.validate();
    rule.validate();
    encoder.validate();
    detail::require(init_s2_prob >= 0 && init_s2_prob <= 1, "NetworkConfig: init_s2_prob outside [0, 1]");
  }
};

// ---------------------------------------------------------------------------
// Input encoding

// Per time step, the inputs that spike.
struct SpikeRaster {
  double dt_ms = 0.5;
  std::vector<std::vector<std::uint32_t>> active;

  std::size_t steps() const noexcept { return active.size(); }

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& a : active) n += a.size();
    return n;
  }

  std::vector<std::size_t> counts(std::size_t n_inputs) const {
    std::vector<std::size_t> c(n_inputs, 0);
    for (const auto& a : active)
      for (auto i : a) ++c[i];
    return c;
  }
};

// Pixel p spikes as a Bernoulli process with per-step probability
// max_rate * p / 255 * dt (the discrete-time Poisson process).
inline SpikeRaster encode_poisson(std::span<const std::uint8_t> image, double duration_ms, double dt_ms,
                                  double max_rate_hz, Rng& rng) {
  detail::require(dt_ms > 0 && duration_ms >= 0, "encode_poisson: need dt > 0 and duration >= 0");
  SpikeRaster r;
  r.dt_ms = dt_ms;
  const auto steps = static_cast<std::size_t>(std::llround(duration_ms / dt_ms));
  r.active.resize(steps);
  std::vector<std::uint32_t> lit;
  std::vector<double> prob;
  for (std::size_t i = 0; i < image.size(); ++i) {
    if (image[i] == 0) continue;
    lit.push_back(static_cast<std::uint32_t>(i));
    prob.push_back(std::min(1.0, max_rate_hz * image[i] / 255.0 * dt_ms * 1e-3));
  }
  for (auto& step : r.active)
    for (std::size_t k = 0; k < lit.size(); ++k)
      if (rng.uniform() < prob[k]) step.push_back(lit[k]);
  return r;
}

// ---------------------------------------------------------------------------
// Network state and dynamics

struct SnnState {
  CrossbarArray weights;                 // n_input x n_exc
  std::vector<double> membrane;
  std::vector<double> theta;
  std::vector<double> refractory_until;  // ms
  std::vector<double> last_pre;          // ms, kNoSpike if none
  std::vector<double> last_post;         // ms, kNoSpike if none
  std::vector<int> labels;               // per neuron class, -1 = unassigned; empty before labeling
  double t_ms = 0.0;

  std::size_t n_exc() const noexcept { return membrane.size(); }
  std::size_t n_input() const noexcept { return last_pre.size(); }
};

inline SnnState make_state(const NetworkConfig& cfg, const SynapseModel& tri, const SynapseModel& binary, Rng& rng) {
  cfg.validate();
  SnnState s;
  s.weights = CrossbarArray(cfg.n_input, cfg.n_exc, tri, binary);
  if (cfg.init == WeightInit::Random) {
    for (std::size_t r = 0; r < cfg.n_input; ++r)
      for (std::size_t c = 0; c < cfg.n_exc; ++c)
        if (rng.uniform() < cfg.init_s2_prob) s.weights.set_state(r, c, SynapseState::S2);
  }
  s.membrane.assign(cfg.n_exc, cfg.neuron.v_rest);
  s.theta.assign(cfg.n_exc, 0.0);
  s.refractory_until.assign(cfg.n_exc, kNoSpike);
  s.last_pre.assign(cfg.n_input, kNoSpike);
  s.last_post.assign(cfg.n_exc, kNoSpike);
  return s;
}

// Clears per-pattern dynamics; weights, thresholds and labels persist.
inline void rest_state(SnnState& s, const NeuronParams& p) {
  std::fill(s.membrane.begin(), s.membrane.end(), p.v_rest);
  std::fill(s.refractory_until.begin(), s.refractory_until.end(), kNoSpike);
  std::fill(s.last_pre.begin(), s.last_pre.end(), kNoSpike);
  std::fill(s.last_post.begin(), s.last_post.end(), kNoSpike);
  s.t_ms = 0.0;
}

// Advances every neuron by dt. Membranes leak towards v_rest and integrate the
// step's input; crossing v_thresh_base + theta fires, resets and starts the
// refractory period. With `adapt`, theta decays and grows by theta_plus per
// spike.
inline std::vector<std::uint8_t> lif_step(SnnState& s, std::span<const double> input, double dt_ms,
                                          const NeuronParams& p, bool adapt = true) {
  detail::require(dt_ms > 0, "lif_step: dt must be > 0");
  detail::require(input.size() == s.n_exc(), "lif_step: input length must equal the neuron count");
  s.t_ms += dt_ms;
  const double leak = std::exp(-dt_ms / p.tau_mem_ms);
  const double theta_leak = std::exp(-dt_ms / p.theta_decay_ms);
  std::vector<std::uint8_t> spikes(s.n_exc(), 0);
  for (std::size_t j = 0; j < s.n_exc(); ++j) {
    if (adapt) s.theta[j] *= theta_leak;
    if (s.t_ms < s.refractory_until[j]) {
      s.membrane[j] = p.v_reset;
      continue;
    }
    double v = p.v_rest + (s.membrane[j] - p.v_rest) * leak + input[j];
    if (v > p.v_thresh_base + s.theta[j]) {
      spikes[j] = 1;
      v = p.v_reset;
      s.refractory_until[j] = s.t_ms + p.refractory_ms;
      if (adapt) s.theta[j] += p.theta_plus;
    }
    s.membrane[j] = v;
  }
  return spikes;
}

// Every spiking neuron inhibits every other neuron by `strength`.
inline std::vector<double> wta_inhibit(std::span<const std::uint8_t> spikes, double strength) {
  std::size_t total = 0;
  for (auto x : spikes) total += x;
  std::vector<double> out(spikes.size(), 0.0);
  if (total == 0) return out;
  for (std::size_t j = 0; j < spikes.size(); ++j)
    out[j] = -strength * static_cast<double>(total - spikes[j]);
  return out;
}

// Pulse for one (pre, post) pair at a postsynaptic spike. Reset means a
// depression candidate; the caller applies it with depression_prob.
inline PulseLevel stdp_decide(double pre_t, double post_t, const LearnRuleParams& rule) {
  const PulseLevel miss = rule.depression_enabled ? PulseLevel::Reset : PulseLevel::None;
  if (pre_t == kNoSpike) return miss;
  const double delta = post_t - pre_t;
  if (delta < 0) return miss;
  if (delta <= rule.timing_threshold_ms) return PulseLevel::Strong;
  if (delta <= rule.stdp_window_ms) return PulseLevel::Weak;
  return miss;
}

// ---------------------------------------------------------------------------
// Pattern presentation

struct PulseCounts {
  std::size_t strong = 0;
  std::size_t weak = 0;
  std::size_t reset = 0;
};

struct PresentationResult {
  std::vector<std::uint32_t> spike_counts;
  PulseCounts pulses;
  int presentations = 0;
};

namespace detail {

// One pass over a raster. With `learn`, programs the crossbar on every
// postsynaptic spike (and on anti-causal presynaptic spikes).
inline void run_raster(SnnState& s, const SpikeRaster& raster, const NetworkConfig& cfg, bool learn, Rng& rng,
                       PresentationResult& res) {
  const auto& np = cfg.neuron;
  const auto& rule = cfg.rule;
  const std::size_t n = s.n_exc();
  std::vector<double> current(n), inhibition(n, 0.0);
  for (std::size_t k = 0; k < raster.steps(); ++k) {
    const double t_next = s.t_ms + raster.dt_ms;
    const auto& active = raster.active[k];
    for (auto i : active) s.last_pre[i] = t_next;

    if (learn && rule.depression_enabled && rule.anticausal_depression && !active.empty()) {
      const std::uint64_t key = rng.next_u64();
      for (std::size_t j = 0; j < n; ++j) {
        if (s.last_post[j] == kNoSpike || t_next - s.last_post[j] > rule.stdp_window_ms) continue;
        for (auto i : active) {
          if (keyed_uniform(key, i, j) < rule.depression_prob) {
            s.weights.program_cell(i, j, PulseLevel::Reset, 0.0);
            ++res.pulses.reset;
          }
        }
      }
    }

    std::fill(current.begin(), current.end(), 0.0);
    s.weights.read_active(active, current);
    for (std::size_t j = 0; j < n; ++j) current[j] = np.input_gain * current[j] + inhibition[j];
    const auto spikes = lif_step(s, current, raster.dt_ms, np, learn);
    inhibition = wta_inhibit(spikes, np.inhibition_strength);

    for (std::size_t j = 0; j < n; ++j) {
      if (!spikes[j]) continue;
      ++res.spike_counts[j];
      s.last_post[j] = s.t_ms;
      if (!learn) continue;
      const std::uint64_t key = rng.next_u64();
      for (std::size_t i = 0; i < s.n_input(); ++i) {
        const PulseLevel level = stdp_decide(s.last_pre[i], s.t_ms, rule);
        switch (level) {
          case PulseLevel::None: break;
          case PulseLevel::Reset:
            if (keyed_uniform(key, i, 2 * j + 1) < rule.depression_prob) {
              s.weights.program_cell(i, j, PulseLevel::Reset, 0.0);
              ++res.pulses.reset;
            }
            break;
          case PulseLevel::Weak:
          case PulseLevel::Strong:
            s.weights.program_cell(i, j, level, keyed_uniform(key, i, 2 * j));
            ++(level == PulseLevel::Strong ? res.pulses.strong : res.pulses.weak);
            break;
        }
      }
    }
  }
}

}  // namespace detail

// Presents one image, repeating at a higher rate while the network stays
// below min_spikes.
inline PresentationResult present(SnnState& s, std::span<const std::uint8_t> image, const NetworkConfig& cfg,
                                  bool learn, Rng& rng) {
  PresentationResult res;
  res.spike_counts.assign(s.n_exc(), 0);
  const auto& enc = cfg.encoder;
  double rate = enc.max_rate_hz;
  for (int k = 0; k < enc.max_presentations; ++k) {
    rest_state(s, cfg.neuron);
    std::fill(res.spike_counts.begin(), res.spike_counts.end(), 0u);
    const SpikeRaster raster = encode_poisson(image, enc.duration_ms, enc.dt_ms, rate, rng);
    detail::run_raster(s, raster, cfg, learn, rng, res);
    ++res.presentations;
    std::size_t total = 0;
    for (auto c : res.spike_counts) total += c;
    if (total >= static_cast<std::size_t>(enc.min_spikes) || raster.steps() == 0) break;
    rate += enc.rate_boost_hz;
  }
  rest_state(s, cfg.neuron);
  return res;
}

// ---------------------------------------------------------------------------
// Training, labeling, evaluation

struct PatternLog {
  std::size_t index;
  int label;
  const PresentationResult& result;
};

using PatternLogger = std::function<void(const PatternLog&)>;

// Assigns each neuron the class with the highest mean response per pattern of
// that class (ties to the lower class). Silent neurons stay unassigned (-1).
inline std::vector<int> assign_labels(const std::vector<std::array<double, 10>>& class_spikes,
                                      const std::array<std::size_t, 10>& class_counts) {
  std::vector<int> labels(class_spikes.size(), -1);
  for (std::size_t j = 0; j < class_spikes.size(); ++j) {
    double best = 0.0;
    for (int c = 0; c < 10; ++c) {
      if (class_counts[c] == 0) continue;
      const double rate = class_spikes[j][c] / static_cast<double>(class_counts[c]);
      if (rate > best) {
        best = rate;
        labels[j] = c;
      }
    }
  }
  return labels;
}

inline std::vector<int> label_neurons(const SnnState& trained, const Dataset& ds, const NetworkConfig& cfg,
                                      std::uint64_t seed) {
  detail::require(ds.size() > 0, "label_neurons: empty dataset");
  SnnState s = trained;
  std::vector<std::array<double, 10>> class_spikes(s.n_exc(), std::array<double, 10>{});
  for (std::size_t k = 0; k < ds.size(); ++k) {
    Rng rng(derive_seed(seed, {0x1abe1, k}));
    const auto res = present(s, ds.image(k), cfg, false, rng);
    for (std::size_t j = 0; j < s.n_exc(); ++j) class_spikes[j][ds.labels[k]] += res.spike_counts[j];
  }
  return assign_labels(class_spikes, ds.class_counts());
}

struct TrainReport {
  PulseCounts pulses;
  std::size_t patterns = 0;
};

// One pass over `ds` with learning on, followed by a labeling pass over the
// same patterns with learning off.
inline TrainReport train(SnnState& s, const Dataset& ds, const NetworkConfig& cfg, std::uint64_t seed,
                         const PatternLogger& log = {}) {
  cfg.validate();
  if (ds.size() == 0) throw InvalidArgument("train: empty dataset");
  detail::require(ds.pixels() == s.n_input(), "train: image size does not match the input layer");
  TrainReport rep;
  for (std::size_t k = 0; k < ds.size(); ++k) {
    Rng rng(derive_seed(seed, {0x7a1a, k}));
    const auto res = present(s, ds.image(k), cfg, true, rng);
    rep.pulses.strong += res.pulses.strong;
    rep.pulses.weak += res.pulses.weak;
    rep.pulses.reset += res.pulses.reset;
    ++rep.patterns;
    if (log) log(PatternLog{k, ds.labels[k], res});
  }
  s.labels = label_neurons(s, ds, cfg, seed);
  return rep;
}

struct EvalReport {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::size_t degenerate = 0;  // patterns with no output spikes (predicted class 0)
  std::array<std::array<std::size_t, 10>, 10> confusion{};  // [true][predicted]
};

inline int predict(std::span<const std::uint32_t> spike_counts, std::span<const int> labels) {
  std::array<double, 10> sum{};
  std::array<std::size_t, 10> members{};
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] < 0) continue;
    sum[labels[j]] += spike_counts[j];
    ++members[labels[j]];
  }
  int best = 0;
  double best_rate = -1.0;
  for (int c = 0; c < 10; ++c) {
    if (members[c] == 0) continue;
    const double rate = sum[c] / static_cast<double>(members[c]);
    if (rate > best_rate) {
      best_rate = rate;
      best = c;
    }
  }
  return best;
}

// Read-only: works on a copy of the dynamic state, thresholds frozen.
inline EvalReport evaluate(const SnnState& trained, const Dataset& test, const NetworkConfig& cfg, std::uint64_t seed,
                           int jobs = 1) {
  if (trained.labels.empty()) throw InvalidArgument("evaluate: network has no label assignment");
  detail::require(test.size() > 0, "evaluate: empty test set");
  std::vector<int> predicted(test.size(), 0);
  std::vector<std::uint8_t> silent(test.size(), 0);
  detail::parallel_for(static_cast<std::size_t>(std::max(1, jobs)), jobs, [&](std::size_t w) {
    SnnState s = trained;
    const auto workers = static_cast<std::size_t>(std::max(1, jobs));
    for (std::size_t k = w; k < test.size(); k += workers) {
      Rng rng(derive_seed(seed, {0xe7a1, k}));
      const auto res = present(s, test.image(k), cfg, false, rng);
      std::size_t total = 0;
      for (auto c : res.spike_counts) total += c;
      silent[k] = total == 0;
      predicted[k] = total == 0 ? 0 : predict(res.spike_counts, s.labels);
    }
  });
  EvalReport rep;
  rep.total = test.size();
  for (std::size_t k = 0; k < test.size(); ++k) {
    rep.degenerate += silent[k];
    rep.correct += predicted[k] == test.labels[k];
    ++rep.confusion[test.labels[k]][predicted[k]];
  }
  rep.accuracy = static_cast<double>(rep.correct) / static_cast<double>(rep.total);
  return rep;
}

}  // namespace fefet
