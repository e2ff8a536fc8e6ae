#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "fefet/synapse.hpp"

using namespace fefet;

namespace {

// Hand-built curves with values chosen to make interpolation easy to check.
SwitchCurves toy_curves() {
  return SwitchCurves{{2.0, 2.8, 2.9, 3.5, 3.7, 4.0},
                      {0.0, 0.30, 0.50, 0.10, 0.02, 0.0},
                      {0.0, 0.00, 0.02, 0.80, 0.96, 1.0},
                      {50, 50, 50, 50, 50, 50}};
}

constexpr std::array<SynapseState, 3> kAllStates{SynapseState::S0, SynapseState::S1, SynapseState::S2};
constexpr std::array<PulseLevel, 4> kAllLevels{PulseLevel::None, PulseLevel::Weak, PulseLevel::Strong,
                                               PulseLevel::Reset};

void expect_sound(const SynapseModel& m) {
  for (auto s : kAllStates) {
    if (!m.allows(s)) continue;
    for (auto l : kAllLevels) {
      const auto& d = m.row(s, l);
      EXPECT_NEAR(d[0] + d[1] + d[2], 1.0, 1e-12);
      if (l == PulseLevel::Weak || l == PulseLevel::Strong)
        for (std::size_t k = 0; k < idx(s); ++k) EXPECT_EQ(d[k], 0.0);
    }
    // P(reach at least state k) is larger for Strong than Weak
    const auto& w = m.row(s, PulseLevel::Weak);
    const auto& st = m.row(s, PulseLevel::Strong);
    EXPECT_GE(st[1] + st[2], w[1] + w[2] - 1e-12);
    EXPECT_GE(st[2], w[2] - 1e-12);
  }
}

}  // namespace

TEST(TriState, TableFromCurves) {
  const auto m = from_device_curves(toy_curves(), 2.85, 3.6);
  // at 2.85 V, halfway between 2.8 and 2.9
  const double s1_weak = 0.40, s2_weak = 0.01;
  // at 3.6 V, halfway between 3.5 and 3.7
  const double s1_strong = 0.06, s2_strong = 0.88;
  const auto& w = m.row(SynapseState::S0, PulseLevel::Weak);
  EXPECT_NEAR(w[1], s1_weak, 1e-12);
  EXPECT_NEAR(w[2], s2_weak, 1e-12);
  EXPECT_NEAR(w[0], 1 - s1_weak - s2_weak, 1e-12);
  const auto& s = m.row(SynapseState::S0, PulseLevel::Strong);
  EXPECT_NEAR(s[1], s1_strong, 1e-12);
  EXPECT_NEAR(s[2], s2_strong, 1e-12);
  const auto& s1s = m.row(SynapseState::S1, PulseLevel::Strong);
  EXPECT_NEAR(s1s[2], s2_strong, 1e-12);
  EXPECT_NEAR(s1s[1], 1 - s2_strong, 1e-12);
  EXPECT_EQ(m.row(SynapseState::S1, PulseLevel::Weak)[1], 1.0);
  EXPECT_EQ(m.row(SynapseState::S2, PulseLevel::Strong)[2], 1.0);
  EXPECT_EQ(m.row(SynapseState::S2, PulseLevel::Weak)[2], 1.0);
  EXPECT_DOUBLE_EQ(m.amplitude(PulseLevel::Weak), 2.85);
  EXPECT_DOUBLE_EQ(m.amplitude(PulseLevel::Strong), 3.6);
  EXPECT_DOUBLE_EQ(m.amplitude(PulseLevel::Reset), -4.0);
  expect_sound(m);
}

TEST(TriState, RejectsBadOperatingPoints) {
  EXPECT_THROW(from_device_curves(toy_curves(), 1.5, 3.6), InvalidArgument);
  EXPECT_THROW(from_device_curves(toy_curves(), 2.85, 4.2), InvalidArgument);
  // weak voltage so high that p1 reaches p2
  EXPECT_THROW(from_device_curves(toy_curves(), 3.7, 3.5), InvalidArgument);
}

TEST(TriState, NoneAndResetRows) {
  const auto m = from_device_curves(toy_curves(), 2.85, 3.6);
  for (auto s : kAllStates) {
    const auto& none = m.row(s, PulseLevel::None);
    for (std::size_t k = 0; k < kStates; ++k) EXPECT_EQ(none[k], k == idx(s) ? 1.0 : 0.0);
    EXPECT_EQ(m.row(s, PulseLevel::Reset)[0], 1.0);
  }
}

TEST(Binary, MatchedProbabilities) {
  const auto tri = from_device_curves(toy_curves(), 2.85, 3.6);
  const auto bin = matched_binary(tri);
  EXPECT_EQ(bin.kind(), SynapseKind::Binary);
  EXPECT_NEAR(bin.row(SynapseState::S0, PulseLevel::Strong)[2], 0.88, 1e-12);
  EXPECT_NEAR(bin.row(SynapseState::S0, PulseLevel::Weak)[2], 0.41, 1e-12);
  EXPECT_FALSE(bin.allows(SynapseState::S1));
  for (auto s : {SynapseState::S0, SynapseState::S2})
    for (auto l : kAllLevels) EXPECT_EQ(bin.row(s, l)[1], 0.0);
  expect_sound(bin);
  EXPECT_THROW(matched_binary(bin), InvalidArgument);
}

TEST(Binary, ParameterChecks) {
  EXPECT_THROW(make_binary(0.3, 0.5), InvalidArgument);
  EXPECT_THROW(make_binary(1.2, 0.5), InvalidArgument);
  EXPECT_NO_THROW(make_binary(1.0, 0.0));
}

TEST(Model, ValidationCatchesBrokenTables) {
  auto t = detail::identity_and_reset();
  t[0][idx(PulseLevel::Weak)] = {0.5, 0.4, 0.0};  // sums to 0.9
  EXPECT_THROW(SynapseModel(SynapseKind::TriState, {0, 0.5, 1}, t), InvalidArgument);

  t = detail::identity_and_reset();
  t[2][idx(PulseLevel::Strong)] = {0.1, 0.0, 0.9};  // potentiation moving down
  EXPECT_THROW(SynapseModel(SynapseKind::TriState, {0, 0.5, 1}, t), InvalidArgument);

  t = detail::identity_and_reset();
  t[0][idx(PulseLevel::Weak)] = {0.2, 0.0, 0.8};
  t[0][idx(PulseLevel::Strong)] = {0.5, 0.0, 0.5};  // weak stronger than strong
  EXPECT_THROW(SynapseModel(SynapseKind::TriState, {0, 0.5, 1}, t), InvalidArgument);

  t = detail::identity_and_reset();
  EXPECT_THROW(SynapseModel(SynapseKind::TriState, {0, 1, 0.5}, t), InvalidArgument);

  t = detail::identity_and_reset();
  t[0][idx(PulseLevel::Weak)] = {0.5, 0.5, 0.0};  // binary cell reaching S1
  EXPECT_THROW(SynapseModel(SynapseKind::Binary, {0, 0.5, 1}, t), InvalidArgument);

  t = detail::identity_and_reset();
  t[1][idx(PulseLevel::Weak)] = {0.0, 0.5, 0.5};  // S1 must be inert under Weak
  EXPECT_THROW(SynapseModel(SynapseKind::TriState, {0, 0.5, 1}, t), InvalidArgument);
}

TEST(Model, NextFollowsCumulativeBoundaries) {
  const auto m = from_device_curves(toy_curves(), 2.85, 3.6);
  // Weak from S0: {0.59, 0.40, 0.01}
  EXPECT_EQ(m.next(SynapseState::S0, PulseLevel::Weak, 0.0), SynapseState::S0);
  EXPECT_EQ(m.next(SynapseState::S0, PulseLevel::Weak, 0.58), SynapseState::S0);
  EXPECT_EQ(m.next(SynapseState::S0, PulseLevel::Weak, 0.60), SynapseState::S1);
  EXPECT_EQ(m.next(SynapseState::S0, PulseLevel::Weak, 0.995), SynapseState::S2);
}

TEST(Model, SampledFrequenciesMatchTable) {
  const auto m = from_device_curves(toy_curves(), 2.85, 3.6);
  Rng rng(21);
  for (auto s : kAllStates)
    for (auto l : kAllLevels) {
      const int n = 40000;
      std::array<int, 3> hits{};
      for (int i = 0; i < n; ++i) ++hits[idx(apply_program(s, l, m, rng))];
      for (std::size_t k = 0; k < kStates; ++k) {
        const double p = m.row(s, l)[k];
        EXPECT_NEAR(static_cast<double>(hits[k]) / n, p, 4 * std::sqrt(p * (1 - p) / n) + 1e-12);
      }
    }
}

TEST(Model, ApplyProgramRejectsS1OnBinary) {
  const auto bin = matched_binary(from_device_curves(toy_curves(), 2.85, 3.6));
  Rng rng(1);
  EXPECT_THROW(apply_program(SynapseState::S1, PulseLevel::Weak, bin, rng), InvalidArgument);
}

TEST(Model, WeightMap) {
  const auto m = from_device_curves(toy_curves(), 2.85, 3.6, {0.0, 0.3, 1.0});
  EXPECT_EQ(weight(SynapseState::S0, m), 0.0);
  EXPECT_EQ(weight(SynapseState::S1, m), 0.3);
  EXPECT_EQ(weight(SynapseState::S2, m), 1.0);
}

TEST(OperatingPoint, NormalizesOvershoot) {
  SwitchCurves c{{2.0, 3.0}, {0.6, 0.6}, {0.6, 0.6}, {10, 10}};
  const auto op = operating_point(c, 2.5);
  EXPECT_NEAR(op.any(), 1.0, 1e-15);
  EXPECT_NEAR(op.to_s1, 0.5, 1e-15);
}
