#pragma once

// Discrete-state stochastic synapses distilled from the device curves.
//
// A SynapseModel is a transition table P[state][pulse] -> distribution over
// next states, plus a normalized conductance per state. TriState models use
// S0/S1/S2; Binary models use S0/S2 only.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "fefet/device_model.hpp"
#include "fefet/errors.hpp"
#include "fefet/random.hpp"

namespace fefet {

using SynapseState = DeviceState;

enum class PulseLevel : std::uint8_t { None = 0, Weak = 1, Strong = 2, Reset = 3 };

enum class SynapseKind : std::uint8_t { TriState = 0, Binary = 1 };

inline std::string_view to_string(PulseLevel l) {
  switch (l) {
    case PulseLevel::None: return "None";
    case PulseLevel::Weak: return "Weak";
    case PulseLevel::Strong: return "Strong";
    case PulseLevel::Reset: return "Reset";
  }
  return "?";
}

inline std::string_view to_string(SynapseKind k) { return k == SynapseKind::TriState ? "TriState" : "Binary"; }

inline constexpr std::size_t kStates = 3;
inline constexpr std::size_t kLevels = 4;

inline constexpr std::size_t idx(SynapseState s) { return static_cast<std::size_t>(s); }
inline constexpr std::size_t idx(PulseLevel l) { return static_cast<std::size_t>(l); }

using StateDistribution = std::array<double, kStates>;
using TransitionTable = std::array<std::array<StateDistribution, kLevels>, kStates>;

struct PulseAmplitudes {
  double weak_v = 2.82;
  double strong_v = 3.6;
  double reset_v = -4.0;
};

class SynapseModel {
 public:
  SynapseModel() = default;

  SynapseModel(SynapseKind kind, std::array<double, kStates> weight_map, TransitionTable table,
               PulseAmplitudes amplitudes = {})
      : kind_(kind), weight_map_(weight_map), table_(table), amplitudes_(amplitudes) {
    validate();
  }

  SynapseKind kind() const noexcept { return kind_; }
  const std::array<double, kStates>& weight_map() const noexcept { return weight_map_; }
  const TransitionTable& table() const noexcept { return table_; }
  const PulseAmplitudes& amplitudes() const noexcept { return amplitudes_; }

  const StateDistribution& row(SynapseState s, PulseLevel l) const noexcept { return table_[idx(s)][idx(l)]; }

  double weight(SynapseState s) const noexcept { return weight_map_[idx(s)]; }

  bool allows(SynapseState s) const noexcept { return kind_ == SynapseKind::TriState || s != SynapseState::S1; }

  double amplitude(PulseLevel l) const noexcept {
    switch (l) {
      case PulseLevel::Weak: return amplitudes_.weak_v;
      case PulseLevel::Strong: return amplitudes_.strong_v;
      case PulseLevel::Reset: return amplitudes_.reset_v;
      case PulseLevel::None: return 0.0;
    }
    return 0.0;
  }

  // Next state for a uniform draw u in [0,1).
  SynapseState next(SynapseState s, PulseLevel l, double u) const noexcept {
    const auto& d = row(s, l);
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < kStates; ++k) {
      acc += d[k];
      if (u < acc) return static_cast<SynapseState>(k);
    }
    return SynapseState::S2;
  }

  void validate() const;

 private:
  SynapseKind kind_ = SynapseKind::TriState;
  std::array<double, kStates> weight_map_{0.0, 0.5, 1.0};
  TransitionTable table_{};
  PulseAmplitudes amplitudes_{};
};

inline void SynapseModel::validate() const {
  using detail::require;
  require(amplitudes_.weak_v < amplitudes_.strong_v, "SynapseModel: weak amplitude must be below strong amplitude");
  for (double w : weight_map_) require(w >= 0.0 && w <= 1.0, "SynapseModel: weights must lie in [0, 1]");
  require(weight_map_[0] < weight_map_[1] && weight_map_[1] < weight_map_[2],
          "SynapseModel: weight map must be strictly increasing S0 < S1 < S2");

  for (std::size_t s = 0; s < kStates; ++s) {
    const auto state = static_cast<SynapseState>(s);
    for (std::size_t l = 0; l < kLevels; ++l) {
      const auto level = static_cast<PulseLevel>(l);
      const auto& d = table_[s][l];
      double sum = 0.0;
      for (double p : d) {
        require(p >= 0.0 && std::isfinite(p), "SynapseModel: negative or non-finite transition probability");
        sum += p;
      }
      if (!allows(state)) continue;
      require(std::abs(sum - 1.0) <= 1e-12, "SynapseModel: transition row does not sum to 1");
      if (kind_ == SynapseKind::Binary) require(d[1] == 0.0, "SynapseModel: binary model cannot reach S1");
      switch (level) {
        case PulseLevel::None:
          require(d[s] == 1.0, "SynapseModel: None pulse must be the identity");
          break;
        case PulseLevel::Reset:
          require(d[0] == 1.0, "SynapseModel: Reset must put all mass on S0");
          break;
        case PulseLevel::Weak:
        case PulseLevel::Strong:
          for (std::size_t k = 0; k < s; ++k)
            require(d[k] == 0.0, "SynapseModel: potentiating pulse moves a state downward");
          break;
      }
    }
    if (!allows(state)) continue;
    // Strong must first-order dominate Weak: its CDF is nowhere above Weak's.
    double cdf_weak = 0.0, cdf_strong = 0.0;
    for (std::size_t k = 0; k + 1 < kStates; ++k) {
      cdf_weak += table_[s][idx(PulseLevel::Weak)][k];
      cdf_strong += table_[s][idx(PulseLevel::Strong)][k];
      require(cdf_strong <= cdf_weak + 1e-12, "SynapseModel: Strong pulse does not dominate Weak pulse");
    }
  }
  if (kind_ == SynapseKind::TriState)
    require(table_[1][idx(PulseLevel::Weak)][1] == 1.0, "SynapseModel: Weak pulse must leave S1 unchanged");
}

namespace detail {

inline TransitionTable identity_and_reset() {
  TransitionTable t{};
  for (std::size_t s = 0; s < kStates; ++s) {
    t[s][idx(PulseLevel::None)][s] = 1.0;
    t[s][idx(PulseLevel::Reset)][0] = 1.0;
    t[s][idx(PulseLevel::Weak)][s] = 1.0;
    t[s][idx(PulseLevel::Strong)][s] = 1.0;
  }
  return t;
}

// Linear interpolation of a curve column at v; v must lie on the grid span.
inline double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double v) {
  require(!xs.empty() && v >= xs.front() - 1e-12 && v <= xs.back() + 1e-12,
          "from_device_curves: operating voltage outside the curve grid");
  if (v <= xs.front()) return ys.front();
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (v <= xs[i]) {
      const double t = (v - xs[i - 1]) / (xs[i] - xs[i - 1]);
      return ys[i - 1] + t * (ys[i] - ys[i - 1]);
    }
  }
  return ys.back();
}

}  // namespace detail

// Probabilities of the 2-tier synapse read off the device curves at the two
// programming voltages.
struct OperatingPoint {
  double to_s1 = 0.0;
  double to_s2 = 0.0;
  double any() const noexcept { return to_s1 + to_s2; }
};

inline OperatingPoint operating_point(const SwitchCurves& curves, double v) {
  OperatingPoint op{detail::interpolate(curves.voltages, curves.p_s0_to_s1, v),
                    detail::interpolate(curves.voltages, curves.p_s0_to_s2, v)};
  const double total = op.any();
  if (total > 1.0) {  // Monte Carlo rounding; a trial ends in one state only
    op.to_s1 /= total;
    op.to_s2 /= total;
  }
  return op;
}

// Tri-state model. At S0, a Weak (v1) pulse lands on S1 or S2 with the curve
// probabilities at v1 (p1 is their sum); a Strong (v2) pulse does the same at
// v2 (p2 is the S2 probability). From S1, Weak is inert and Strong reaches S2
// with p2. S2 is absorbing under potentiation.
inline SynapseModel from_device_curves(const SwitchCurves& curves, double v1, double v2,
                                       std::array<double, kStates> weight_map = {0.0, 0.5, 1.0},
                                       double reset_v = -4.0) {
  curves.validate();
  const OperatingPoint weak = operating_point(curves, v1);
  const OperatingPoint strong = operating_point(curves, v2);
  const double p1 = weak.any();
  const double p2 = strong.to_s2;
  detail::require(p2 > p1, "from_device_curves: p2 must exceed p1 (got p1=" + std::to_string(p1) +
                               ", p2=" + std::to_string(p2) + ")");

  TransitionTable t = detail::identity_and_reset();
  auto& s0_weak = t[0][idx(PulseLevel::Weak)];
  s0_weak = {1.0 - weak.to_s1 - weak.to_s2, weak.to_s1, weak.to_s2};
  auto& s0_strong = t[0][idx(PulseLevel::Strong)];
  s0_strong = {1.0 - strong.to_s1 - strong.to_s2, strong.to_s1, strong.to_s2};
  t[1][idx(PulseLevel::Strong)] = {0.0, 1.0 - p2, p2};
  // Exact row sums: absorb rounding into the largest entry.
  for (auto* d : {&s0_weak, &s0_strong}) {
    for (auto& p : *d) p = std::max(0.0, p);
    const double sum = (*d)[0] + (*d)[1] + (*d)[2];
    std::size_t big = 0;
    for (std::size_t k = 1; k < kStates; ++k)
      if ((*d)[k] > (*d)[big]) big = k;
    (*d)[big] += 1.0 - sum;
  }
  return SynapseModel(SynapseKind::TriState, weight_map, t, PulseAmplitudes{v1, v2, reset_v});
}

inline SynapseModel make_binary(double p_hi, double p_lo, std::array<double, kStates> weight_map = {0.0, 0.5, 1.0},
                                PulseAmplitudes amplitudes = {}) {
  detail::require(0.0 <= p_lo && p_lo < p_hi && p_hi <= 1.0, "make_binary: need 0 <= p_lo < p_hi <= 1");
  TransitionTable t = detail::identity_and_reset();
  t[0][idx(PulseLevel::Strong)] = {1.0 - p_hi, 0.0, p_hi};
  t[0][idx(PulseLevel::Weak)] = {1.0 - p_lo, 0.0, p_lo};
  // S1 is unreachable for binary cells; its rows only carry the Reset/None
  // conventions and are never sampled.
  t[1][idx(PulseLevel::Weak)] = {0.0, 0.0, 0.0};
  t[1][idx(PulseLevel::Strong)] = {0.0, 0.0, 0.0};
  t[1][idx(PulseLevel::None)] = {0.0, 0.0, 0.0};
  return SynapseModel(SynapseKind::Binary, weight_map, t, amplitudes);
}

// Binary baseline with the tri-state model's constant probabilities: strong
// correlations reach S2 with p2, weak ones with p1.
inline SynapseModel matched_binary(const SynapseModel& tri) {
  detail::require(tri.kind() == SynapseKind::TriState, "matched_binary: expects a tri-state model");
  const auto& weak = tri.row(SynapseState::S0, PulseLevel::Weak);
  const double p1 = weak[1] + weak[2];
  const double p2 = tri.row(SynapseState::S0, PulseLevel::Strong)[2];
  return make_binary(p2, p1, tri.weight_map(), tri.amplitudes());
}

inline SynapseState apply_program(SynapseState state, PulseLevel level, const SynapseModel& model, Rng& rng) {
  detail::require(model.allows(state), "apply_program: S1 presented to a binary model");
  if (level == PulseLevel::Reset) return SynapseState::S0;
  if (level == PulseLevel::None) return state;
  return model.next(state, level, rng.uniform());
}

inline double weight(SynapseState state, const SynapseModel& model) { return model.weight(state); }

}  // namespace fefet
