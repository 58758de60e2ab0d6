#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "aoi/analytic.hpp"
#include "aoi/bounds.hpp"

namespace {

using aoi::Scenario;
using aoi::ServiceModel;
using aoi::ThreatCaps;
namespace an = aoi::analytic;
namespace bd = aoi::bounds;

std::vector<ServiceModel> paper_models() {
  return {ServiceModel::pareto(1.0, 3.0), ServiceModel::erlang(2, 4.0 / 3.0), ServiceModel::hyperexp2(0.5, 1.0, 0.5)};
}

TEST(LowerBound, BaselineReducesToMeanServicePlusInterarrival) {
  for (const auto& m : paper_models()) {
    const auto scn = Scenario::two_source(2.0, 1.0, m, 1.5);
    EXPECT_NEAR(bd::lower_bound(scn, 0, true), 2.0, 1e-9) << m.kind();
    EXPECT_NEAR(bd::lower_bound(scn.with_rate(0, 1.0), 0, true), 2.5, 1e-9) << m.kind();
  }
}

TEST(LowerBound, BaselineEqualsServiceMeanPlusInverseRateExactly) {
  for (const auto& m : paper_models()) {
    for (int k = 1; k <= 15; ++k) {
      const double l1 = k / 5.0;
      const auto scn = Scenario::two_source(l1, 1.0, m, 1.5);
      EXPECT_EQ(bd::lower_bound(scn, 0, true), m.mean() + 1.0 / l1);
    }
  }
}

TEST(LowerBound, WithAttackUsesConditionalSystemTime) {
  const auto scn = Scenario::two_source(1.0, 1.0, ServiceModel::exponential(2.0), 1.5);
  EXPECT_NEAR(bd::lower_bound(scn, 0, false), 4.0 / 3.0, 1e-15);
}

TEST(UpperBound, DominatesExactAgeOnTheAttackGrid) {
  const auto m = ServiceModel::exponential(2.0 / 3.0);
  for (double lc : {0.5, 1.0, 1.5, 2.0}) {
    for (double beta : {1.1, 1.5, 2.0}) {
      const auto scn = Scenario::two_source(1.0, lc, m, beta);
      const double exact = an::average_aoi(scn, 0, an::Mode::exact);
      EXPECT_GE(bd::upper_bound(scn, 0), exact) << lc << " " << beta;
      EXPECT_GE(bd::upper_bound(scn, 0, bd::DelayReading::caps), exact) << lc << " " << beta;
    }
  }
}

TEST(UpperBound, SandwichForServicePresets) {
  for (const auto& m : paper_models()) {
    for (int k = 1; k <= 15; ++k) {
      const auto scn = Scenario::two_source(k / 5.0, 1.0, m, 1.5);
      const double exact = an::average_aoi(scn, 0, an::Mode::exact);
      EXPECT_LE(bd::lower_bound(scn, 0, true), exact) << m.kind() << " " << k;
      EXPECT_LE(exact, bd::upper_bound(scn, 0)) << m.kind() << " " << k;
    }
  }
}

TEST(UpperBound, CollapsesToNoAttackCycleWhenCapsVanish) {
  const double l1 = 1.3;
  for (const auto& m : {ServiceModel::exponential(2.0 / 3.0), ServiceModel::erlang(2, 4.0 / 3.0)}) {
    const auto scn = Scenario::baseline({l1, 0.0}, 1, m, ThreatCaps{1e-9, 1.0 + 1e-9});
    // Y = I + S with I ~ Exp(l1) independent of S.
    const double ey = 1.0 / l1 + m.mean();
    const double ey2 = 2.0 / (l1 * l1) + 2.0 * m.mean() / l1 + m.moment(2);
    const double gap = bd::upper_bound(scn, 0) - bd::lower_bound(scn, 0, true);
    EXPECT_NEAR(gap, ey2 / (2.0 * ey) - 1.0 / l1, 1e-6) << m.kind();
  }
}

TEST(UpperBound, NondecreasingInCaps) {
  for (const auto& m : paper_models()) {
    const auto base = Scenario::two_source(1.0, 0.25, m, 1.05);
    double prev = 0.0;
    for (double lmax : {0.5, 1.0, 1.5, 2.0, 3.0}) {
      const double ub = bd::upper_bound(base.with_caps({lmax, 2.0}), 0);
      EXPECT_GE(ub, prev) << m.kind() << " lambda_max=" << lmax;
      prev = ub;
    }
    prev = 0.0;
    for (double bmax : {1.1, 1.5, 2.0, 3.0}) {
      const double ub = bd::upper_bound(base.with_caps({2.0, bmax}), 0);
      EXPECT_GE(ub, prev) << m.kind() << " beta_max=" << bmax;
      prev = ub;
    }
  }
}

TEST(UpperBound, RejectsScenarioBeyondItsCaps) {
  const auto scn = Scenario::two_source(1.0, 1.5, ServiceModel::exponential(1.0), 1.5);
  EXPECT_THROW(scn.with_caps({1.0, 2.0}), aoi::InvalidScenarioError);
  EXPECT_THROW(Scenario::two_source(1.0, 2.5, ServiceModel::exponential(1.0), 1.5), aoi::InvalidScenarioError);
  EXPECT_THROW(Scenario::two_source(1.0, 1.0, ServiceModel::exponential(1.0), 2.5), aoi::InvalidScenarioError);
}

TEST(BoundPair, OrderedAndFinite) {
  for (const auto& m : paper_models()) {
    for (double lc : {0.0, 0.75, 2.0}) {
      const auto scn = Scenario::adversarial({0.6, 0.9, lc > 0.0 ? lc : 1.0}, 2, m, 1.5);
      const auto s = lc > 0.0 ? scn : Scenario::baseline({0.6, 0.9, 0.0}, 2, m);
      for (std::size_t i : {0u, 1u}) {
        const auto b = bd::bound_pair(s, i);
        EXPECT_TRUE(std::isfinite(b.lower) && std::isfinite(b.upper));
        EXPECT_GT(b.lower, 0.0);
        EXPECT_LE(b.lower, b.upper);
        EXPECT_LE(b.upper, b.upper_conservative + 1e-12);
        EXPECT_EQ(b.attack_rate, lc);
      }
    }
  }
}

TEST(BoundPair, AdversaryIsNotABenignSource) {
  const auto scn = Scenario::two_source(1.0, 1.0, ServiceModel::exponential(2.0), 1.5);
  EXPECT_THROW(bd::lower_bound(scn, 1, true), aoi::InvalidScenarioError);
  EXPECT_THROW(bd::upper_bound(scn, 1), aoi::InvalidScenarioError);
}

}  // namespace
