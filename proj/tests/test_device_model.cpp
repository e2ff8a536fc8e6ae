#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fefet/device_model.hpp"

using namespace fefet;

namespace {

DeviceParams single_domain(double ea, double beta) {
  DeviceParams p;
  p.n_domains = 1;
  p.ea_mean = ea;
  p.ea_sigma = 0.0;
  p.beta = beta;
  return p;
}

// Closed-form probability that a domain starting at zero history has flipped
// after a constant-field pulse of width w.
double flip_oracle(double w, double tau0, double alpha, double ea, double e, double beta) {
  const double tau = tau0 * std::exp(std::pow(ea / e, alpha));
  return 1.0 - std::exp(-std::pow(w / tau, beta));
}

}  // namespace

TEST(Field, DividerAndUnits) {
  DeviceParams p;
  EXPECT_DOUBLE_EQ(field_from_voltage(4.0, p), 3.0);  // 0.6 * 4 V / 8 nm = 0.3 V/nm
  EXPECT_DOUBLE_EQ(field_from_voltage(-4.0, p), -3.0);
  p.t_fe_nm = 10.0;
  p.divider_kappa = 1.0;
  EXPECT_DOUBLE_EQ(field_from_voltage(2.5, p), 2.5);
}

TEST(Merz, TauMatchesFormula) {
  DeviceParams p;
  p.tau0_s = 1e-9;
  p.alpha = 2.0;
  EXPECT_NEAR(tau(3.0, 5.5, p), 1e-9 * std::exp((5.5 / 3.0) * (5.5 / 3.0)), 1e-18);
  p.alpha = 1.5;
  EXPECT_NEAR(tau(2.0, 4.0, p) / (1e-9 * std::exp(std::pow(2.0, 1.5))), 1.0, 1e-12);
  EXPECT_TRUE(std::isinf(tau(0.0, 4.0, p)));
  EXPECT_TRUE(std::isinf(tau(-1.0, 4.0, p)));
}

TEST(SwitchProb, EdgeCasesAndRange) {
  EXPECT_EQ(switch_prob(0.3, 0.3, 1.0), 0.0);
  EXPECT_EQ(switch_prob(0.0, 0.0, 2.5), 0.0);
  EXPECT_THROW(switch_prob(0.5, 0.4, 1.0), InvalidArgument);
  EXPECT_THROW(switch_prob(-0.1, 0.4, 1.0), InvalidArgument);
  for (double beta : {0.5, 1.0, 2.0, 4.0})
    for (double h0 : {0.0, 0.1, 1.0, 5.0})
      for (double dh : {1e-12, 1e-3, 0.5, 50.0}) {
        const double p = switch_prob(h0, h0 + dh, beta);
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, 1.0);
        EXPECT_NEAR(p, 1.0 - std::exp(std::pow(h0, beta) - std::pow(h0 + dh, beta)), 1e-12);
      }
}

TEST(SwitchProb, MemorylessSplitAtBetaOne) {
  for (double h0 : {0.0, 0.2, 1.7})
    for (double dh : {0.01, 0.3, 2.0}) {
      const double whole = 1.0 - switch_prob(h0, h0 + dh, 1.0);
      const double split = (1.0 - switch_prob(h0, h0 + dh / 2, 1.0)) * (1.0 - switch_prob(h0 + dh / 2, h0 + dh, 1.0));
      EXPECT_NEAR(whole, split, 1e-14);
    }
}

TEST(SwitchProb, SplitTelescopesForAnyBeta) {
  // survival over consecutive steps multiplies out to exp(h0^b - h2^b)
  for (double beta : {0.7, 1.3, 2.0}) {
    const double a = 0.4, b = 0.9, c = 1.6;
    const double prod = (1 - switch_prob(a, b, beta)) * (1 - switch_prob(b, c, beta));
    EXPECT_NEAR(prod, 1 - switch_prob(a, c, beta), 1e-14);
  }
}

TEST(StepHistory, AdvancesOnlyOpposingDomains) {
  DeviceParams p;
  p.n_domains = 3;
  DomainEnsemble ens{{-1, 1, -1}, {4.0, 4.0, 6.0}, {0.0, 0.0, 0.25}};
  const double dt = 1e-8, e = 3.0;
  const auto out = step_history(ens, e, dt, p);
  EXPECT_NEAR(out.history[0], dt / tau(e, 4.0, p), 1e-15);
  EXPECT_EQ(out.history[1], 0.0);  // already aligned with the field
  EXPECT_NEAR(out.history[2], 0.25 + dt / tau(e, 6.0, p), 1e-15);
  EXPECT_THROW(step_history(ens, e, 0.0, p), InvalidArgument);
}

TEST(Pulse, HistoryMonotoneAndResetOnFlip) {
  DeviceParams p;
  p.n_domains = 40;
  Rng rng(3);
  auto ens = sample_device(p, rng);
  const auto pulse = PulseSpec::with_steps(3.0, 1e-7, 1);
  for (int k = 0; k < 40; ++k) {
    const auto before = ens;
    apply_pulse_inplace(ens, pulse, p, rng);
    for (std::size_t i = 0; i < ens.size(); ++i) {
      EXPECT_GE(ens.history[i], 0.0);
      if (ens.polarization[i] != before.polarization[i])
        EXPECT_EQ(ens.history[i], 0.0);
      else
        EXPECT_GE(ens.history[i], before.history[i]);
    }
  }
}

TEST(Pulse, MonteCarloFlipFrequencyMatchesClosedForm) {
  struct Case {
    double v, beta;
  };
  const double w = 1e-6;
  for (const auto& c : {Case{2.6, 1.0}, Case{3.0, 1.0}, Case{3.0, 0.6}, Case{3.3, 2.0}, Case{2.8, 1.5}}) {
    DeviceParams p = single_domain(5.5, c.beta);
    const double e = field_from_voltage(c.v, p);
    const double expected = flip_oracle(w, p.tau0_s, p.alpha, 5.5, e, c.beta);
    Rng rng(derive_seed(11, {static_cast<std::uint64_t>(c.v * 100), static_cast<std::uint64_t>(c.beta * 10)}));
    const DomainEnsemble fresh{{-1}, {5.5}, {0.0}};
    const int n = 100000;
    int flips = 0;
    for (int t = 0; t < n; ++t) {
      DomainEnsemble ens = fresh;
      apply_pulse_inplace(ens, PulseSpec::with_steps(c.v, w, 100), p, rng);
      flips += ens.polarization[0] == 1;
    }
    const double freq = static_cast<double>(flips) / n;
    const double se = std::sqrt(std::max(expected * (1 - expected), 1e-6) / n);
    EXPECT_NEAR(freq, expected, 3 * se) << "v=" << c.v << " beta=" << c.beta;
  }
}

TEST(Pulse, ZeroAmplitudeIsNoOp) {
  DeviceParams p;
  Rng rng(1);
  auto ens = sample_device(p, rng);
  const auto before = ens;
  apply_pulse_inplace(ens, PulseSpec::with_steps(0.0, 1e-6, 10), p, rng);
  EXPECT_EQ(ens, before);
}

TEST(Reset, FullyPositiveEnsembleReturnsNegative) {
  DeviceParams p;
  p.tau0_s = 2.5e-9;
  p.alpha = 2.2;
  p.ea_mean = 5.3;
  p.ea_sigma = 1.0;
  PulseProtocol proto;
  for (int n : {1, 20, 200}) {
    p.n_domains = n;
    for (std::uint64_t s = 0; s < 20; ++s) {
      Rng rng(s);
      auto ens = sample_device(p, rng);
      std::fill(ens.polarization.begin(), ens.polarization.end(), std::int8_t{1});
      EXPECT_LT(reset_survival(ens, p, proto), 1e-3);
      apply_reset(ens, p, proto, rng);
      EXPECT_EQ(ens.count_positive(), 0u);
    }
  }
}

TEST(Reset, DeterministicShortcut) {
  DeviceParams p;
  PulseProtocol proto;
  proto.reset_mode = PulseProtocol::ResetMode::Deterministic;
  Rng rng(2);
  auto ens = sample_device(p, rng);
  std::fill(ens.polarization.begin(), ens.polarization.end(), std::int8_t{1});
  ens.history.assign(ens.size(), 0.7);
  apply_reset(ens, p, proto, rng);
  EXPECT_EQ(ens.count_positive(), 0u);
  for (double h : ens.history) EXPECT_EQ(h, 0.0);
  EXPECT_EQ(reset_survival(ens, p, proto), 0.0);
}

TEST(Readout, ThresholdLevelsAndClassification) {
  DeviceParams p;
  p.n_domains = 6;
  DomainEnsemble ens{{-1, -1, -1, -1, -1, -1}, std::vector<double>(6, 5.0), std::vector<double>(6, 0.0)};
  auto r = readout(ens, p);
  EXPECT_DOUBLE_EQ(r.v_th, 1.5);
  EXPECT_EQ(r.state, DeviceState::S0);
  ens.polarization = {1, 1, 1, -1, -1, -1};
  r = readout(ens, p);
  EXPECT_DOUBLE_EQ(r.switched_fraction, 0.5);
  EXPECT_NEAR(r.v_th, 1.5 - 1.3 * 0.5, 1e-12);
  EXPECT_EQ(r.state, DeviceState::S1);
  ens.polarization.assign(6, 1);
  r = readout(ens, p);
  EXPECT_DOUBLE_EQ(r.v_th, 0.2);
  EXPECT_EQ(r.state, DeviceState::S2);
  EXPECT_EQ(readout(ens, p), r);
}

TEST(Readout, BoundaryValues) {
  DeviceParams p;
  EXPECT_EQ(classify_fraction(0.0, p), DeviceState::S0);
  EXPECT_EQ(classify_fraction(0.33, p), DeviceState::S0);
  EXPECT_EQ(classify_fraction(1.0 / 3.0, p), DeviceState::S1);
  EXPECT_EQ(classify_fraction(0.66, p), DeviceState::S1);
  EXPECT_EQ(classify_fraction(2.0 / 3.0, p), DeviceState::S2);
  EXPECT_EQ(classify_fraction(1.0, p), DeviceState::S2);
}

TEST(Device, SamplingRespectsFloorAndStartsReset) {
  DeviceParams p;
  p.n_domains = 500;
  p.ea_mean = 0.5;
  p.ea_sigma = 1.0;
  Rng rng(4);
  const auto ens = sample_device(p, rng);
  ASSERT_EQ(ens.size(), 500u);
  for (std::size_t i = 0; i < ens.size(); ++i) {
    EXPECT_EQ(ens.polarization[i], -1);
    EXPECT_EQ(ens.history[i], 0.0);
    EXPECT_GE(ens.e_a[i], DeviceParams::kEaFloor);
  }
  EXPECT_EQ(device_for(p), device_for(p));
}

TEST(Params, ValidationRejectsBadValues) {
  DeviceParams p;
  EXPECT_NO_THROW(p.validate());
  p.n_domains = 0;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = {};
  p.state_bounds = {0.7, 0.3};
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = {};
  p.beta = 0;
  EXPECT_THROW(p.validate(), InvalidArgument);
  PulseProtocol proto;
  proto.steps_per_pulse = 0;
  EXPECT_THROW(proto.validate(), InvalidArgument);
}

TEST(Grid, InclusiveEndpoints) {
  const auto g = voltage_grid(2.0, 4.0, 0.02);
  ASSERT_EQ(g.size(), 101u);
  EXPECT_DOUBLE_EQ(g.front(), 2.0);
  EXPECT_NEAR(g.back(), 4.0, 1e-12);
  EXPECT_THROW(voltage_grid(2.0, 1.0, 0.1), InvalidArgument);
}

TEST(Curves, ResultsIndependentOfThreadCount) {
  DeviceParams p;
  PulseProtocol proto;
  const auto g = voltage_grid(2.6, 3.6, 0.1);
  const auto a = accumulative_curves(p, proto, g, 30, 9, 1);
  const auto b = accumulative_curves(p, proto, g, 30, 9, 3);
  EXPECT_EQ(a.p_s0_to_s1, b.p_s0_to_s1);
  EXPECT_EQ(a.p_s0_to_s2, b.p_s0_to_s2);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LE(a.p_s0_to_s1[i] + a.p_s0_to_s2[i], 1.0 + 1e-12);
}

TEST(Curves, PerCurveSamplingReusesOneDevice) {
  // one domain, one device: every trial at a voltage sees the same e_a, so the
  // switched fraction is a Bernoulli with the closed-form probability
  DeviceParams p = single_domain(5.5, 1.0);
  PulseProtocol proto;
  const std::vector<double> v{3.0};
  const auto c = accumulative_curves(p, proto, v, 4000, 5);
  const double expected = flip_oracle(proto.program_width_s, p.tau0_s, p.alpha, 5.5, field_from_voltage(3.0, p), 1.0);
  EXPECT_NEAR(c.p_s0_to_s2[0], expected, 4 * std::sqrt(expected * (1 - expected) / 4000));
  EXPECT_EQ(c.p_s0_to_s1[0], 0.0);  // a single domain has no intermediate level
}

TEST(Plateaus, SyntheticStaircases) {
  std::vector<double> three;
  for (double level : {0.0, 0.5, 1.0})
    for (int k = 0; k < 6; ++k) three.push_back(level);
  EXPECT_EQ(count_plateaus(three), 3);

  // two-point blip between plateaus is too short to count
  std::vector<double> blip{0, 0, 0, 0.5, 0.5, 1, 1, 1};
  EXPECT_EQ(count_plateaus(blip), 2);

  // levels closer than the gap fall into one band
  std::vector<double> close{0, 0, 0, 0.05, 0.05, 0.05, 1, 1, 1};
  EXPECT_EQ(count_plateaus(close), 2);

  EXPECT_EQ(count_plateaus(std::vector<double>{}), 0);
  EXPECT_EQ(count_plateaus(std::vector<double>{0.3, 0.3, 0.3}), 1);
}

TEST(Plateaus, SummaryStatistics) {
  auto mk = [](std::vector<double> f) {
    std::vector<TrialOutcome> o;
    for (double x : f) o.push_back({DeviceState::S0, x});
    return o;
  };
  const auto o = mk({0.0, 0.5, 0.5, 1.0, 1.0, 1.0, 0.25});
  EXPECT_DOUBLE_EQ(summarize_fraction(o, PlateauObservable::Modal), 1.0);
  EXPECT_DOUBLE_EQ(summarize_fraction(o, PlateauObservable::Median), 0.5);
  EXPECT_NEAR(summarize_fraction(o, PlateauObservable::Mean), 4.25 / 7, 1e-15);
  EXPECT_DOUBLE_EQ(summarize_fraction(mk({0.0, 1.0}), PlateauObservable::Modal), 0.0);  // tie to lowest
  EXPECT_DOUBLE_EQ(summarize_fraction(mk({0.0, 1.0}), PlateauObservable::Median), 0.5);
}

TEST(Plateaus, SingleDomainIsBinary) {
  DeviceParams p;
  p.tau0_s = 2.5e-9;
  p.alpha = 2.2;
  p.ea_mean = 5.3;
  const std::vector<int> ns{1};
  const auto rows = states_vs_domains(p, PulseProtocol{}, ns, voltage_grid(2.0, 4.0, 0.02), 40, 1);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].plateaus, 2);
  for (double f : rows[0].fraction) EXPECT_TRUE(f == 0.0 || f == 1.0);
}
