#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "nablavar/timescale.hpp"

using namespace nablavar;

namespace {

// {0} ∪ [1, 2] with [1, 2] sampled at step 0.25.
TimeScale junction() {
  const TimeScale parts[] = {sampled_interval(1.0, 2.0, 4)};
  const double iso[] = {0.0};
  return unite(parts, iso);
}

TimeScale random_scale(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(2, 40);
  std::uniform_real_distribution<double> step(0.01, 2.0);
  std::bernoulli_distribution dense(0.4);
  const int m = count(rng);
  std::vector<double> pts{std::uniform_real_distribution<double>(-5, 5)(rng)};
  std::vector<GapKind> gaps;
  for (int i = 1; i < m; ++i) {
    pts.push_back(pts.back() + step(rng));
    gaps.push_back(dense(rng) ? GapKind::kDenseSample : GapKind::kScattered);
  }
  return from_points(pts, gaps);
}

}  // namespace

TEST(TimeScale, RhoExamples) {
  EXPECT_EQ(rho(integers(0, 5), 3), 2);
  EXPECT_EQ(rho(sampled_interval(0, 1, 4), 0.5), 0.5);
  EXPECT_EQ(rho(junction(), 1.0), 0.0);
}

TEST(TimeScale, SigmaExamples) {
  EXPECT_EQ(sigma(integers(0, 5), 3), 4);
  EXPECT_EQ(sigma(sampled_interval(0, 1, 4), 0.5), 0.5);
  EXPECT_EQ(sigma(q_scale(2, 1, 4), 2), 4);
}

TEST(TimeScale, NuExamples) {
  EXPECT_EQ(nu(integers(0, 5), 3), 1);
  EXPECT_EQ(nu(sampled_interval(0, 1, 4), 0.5), 0);
  EXPECT_EQ(nu(q_scale(2, 1, 4), 8), 4);
}

TEST(TimeScale, BoundaryConvention) {
  const TimeScale ts = integers(0, 5);
  EXPECT_EQ(rho(ts, 0), 0);
  EXPECT_EQ(sigma(ts, 5), 5);
  EXPECT_EQ(nu(ts, 0), 0);
}

TEST(TimeScale, ClassifyExamples) {
  EXPECT_TRUE(classify(integers(0, 5), 3).isolated());
  EXPECT_TRUE(classify(sampled_interval(0, 1, 4), 0.5).dense());
  const PointClass c = classify(junction(), 1.0);
  EXPECT_EQ(c.left, Side::kScattered);
  EXPECT_EQ(c.right, Side::kDense);
}

TEST(TimeScale, KappaSet) {
  EXPECT_EQ(kappa_set(integers(0, 5)), (std::vector<double>{1, 2, 3, 4, 5}));
  const TimeScale s = sampled_interval(0, 1, 4);
  EXPECT_EQ(kappa_set(s), (std::vector<double>(s.points().begin(), s.points().end())));
  EXPECT_EQ(kappa_set(junction()), (std::vector<double>{1, 1.25, 1.5, 1.75, 2}));
}

TEST(TimeScale, Builders) {
  const TimeScale z = integers(0, 5);
  EXPECT_EQ(z.size(), 6u);
  for (GapKind g : z.gaps()) EXPECT_EQ(g, GapKind::kScattered);

  const TimeScale s = sampled_interval(0, 1, 4);
  EXPECT_EQ(std::vector<double>(s.points().begin(), s.points().end()),
            (std::vector<double>{0, 0.25, 0.5, 0.75, 1}));
  for (GapKind g : s.gaps()) EXPECT_EQ(g, GapKind::kDenseSample);

  const TimeScale q = q_scale(2, 1, 4);
  EXPECT_EQ(std::vector<double>(q.points().begin(), q.points().end()), (std::vector<double>{1, 2, 4, 8}));

  const TimeScale u = uniform(0, 1, 0.5);
  EXPECT_EQ(std::vector<double>(u.points().begin(), u.points().end()), (std::vector<double>{0, 0.5, 1}));
}

TEST(TimeScale, InvalidInput) {
  EXPECT_THROW(from_points({0.0}, {}), InvalidTimeScale);
  EXPECT_THROW(from_points({}, {}), InvalidTimeScale);
  EXPECT_THROW(from_points({0, 2, 1}, {GapKind::kScattered, GapKind::kScattered}), InvalidTimeScale);
  EXPECT_THROW(from_points({0, 1, 1}, {GapKind::kScattered, GapKind::kScattered}), InvalidTimeScale);
  EXPECT_THROW(from_points({0, 1}, {}), InvalidTimeScale);
  EXPECT_THROW(integers(3, 3), InvalidTimeScale);
  EXPECT_THROW(q_scale(1, 1, 4), InvalidTimeScale);
}

TEST(TimeScale, OffGridPointIsRejected) {
  const TimeScale ts = integers(0, 5);
  try {
    rho(ts, 2.5);
    FAIL() << "expected PointNotInScale";
  } catch (const PointNotInScale& e) {
    EXPECT_EQ(e.point(), 2.5);
    EXPECT_NE(std::string(e.what()).find("2.5"), std::string::npos);
  }
  // No snapping to a nearby point.
  EXPECT_THROW(ts.index_of(3.0000000000000004), PointNotInScale);
}

TEST(TimeScale, UnionOfPieces) {
  const TimeScale pieces[] = {integers(0, 2), sampled_interval(3, 4, 2)};
  const TimeScale u = unite(pieces);
  EXPECT_EQ(std::vector<double>(u.points().begin(), u.points().end()),
            (std::vector<double>{0, 1, 2, 3, 3.5, 4}));
  EXPECT_EQ(u.gaps()[2], GapKind::kScattered);
  EXPECT_EQ(u.gaps()[3], GapKind::kDenseSample);

  const TimeScale touching[] = {sampled_interval(0, 1, 2), sampled_interval(1, 2, 2)};
  EXPECT_EQ(unite(touching).size(), 5u);

  const TimeScale overlapping[] = {integers(0, 3), integers(2, 5)};
  EXPECT_THROW(unite(overlapping), InvalidTimeScale);
}

TEST(TimeScale, UnboundedFlagIsCarried) {
  const TimeScale ts = integers(0, 5).with_unbounded_above();
  EXPECT_TRUE(ts.unbounded_above());
  EXPECT_FALSE(ts == integers(0, 5));
  EXPECT_EQ(sigma(ts, 5), 5);
}

TEST(TimeScaleProperty, JumpOperatorsOrderAndGraininess) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const TimeScale ts = random_scale(rng);
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const double t = ts[i];
      EXPECT_LE(ts.rho_at(i), t);
      EXPECT_GE(ts.sigma_at(i), t);
      EXPECT_EQ(ts.nu_at(i), t - ts.rho_at(i));
      const bool zero_nu = ts.nu_at(i) == 0.0;
      EXPECT_EQ(zero_nu, ts.classify_at(i).left == Side::kDense || i == 0);
    }
  }
}

TEST(TimeScaleProperty, RhoOfSigmaAtIsolatedInteriorPoints) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const TimeScale ts = random_scale(rng);
    for (std::size_t i = 1; i + 1 < ts.size(); ++i) {
      if (!ts.classify_at(i).isolated()) continue;
      EXPECT_EQ(rho(ts, sigma(ts, ts[i])), ts[i]);
    }
  }
}

TEST(TimeScaleProperty, RoundTripThroughPointsAndGaps) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const TimeScale ts = random_scale(rng);
    const TimeScale back = from_points({ts.points().begin(), ts.points().end()},
                                       {ts.gaps().begin(), ts.gaps().end()});
    EXPECT_TRUE(back == ts);
  }
}
