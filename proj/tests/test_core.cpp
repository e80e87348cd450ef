#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mtmct/core.hpp"

using namespace mtmct;

namespace {

FeatureVec unit(std::size_t dim, std::size_t axis) {
  std::vector<float> v(dim, 0.0f);
  v[axis] = 1.0f;
  return FeatureVec(v);
}

FeatureVec random_unit(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  std::vector<double> v(dim);
  for (auto& x : v) x = n(rng);
  return normalized_feature(v);
}

std::vector<Frame> starts(const std::vector<TemporalWindow>& ws) {
  std::vector<Frame> s;
  for (const auto& w : ws) s.push_back(w.start);
  return s;
}

}  // namespace

TEST(PoolFeature, IdenticalInputsReturnTheInput) {
  std::mt19937_64 rng(1);
  const auto v = random_unit(16, rng);
  const std::vector<FeatureVec> m = {v, v, v};
  const auto p = pool_feature(m);
  for (std::size_t k = 0; k < v.dim(); ++k) EXPECT_NEAR(p.values[k], v.values[k], 1e-7);
}

TEST(PoolFeature, OppositeInputsGiveFlaggedZero) {
  std::mt19937_64 rng(2);
  const auto v = random_unit(8, rng);
  std::vector<float> neg(v.values);
  for (auto& x : neg) x = -x;
  const std::vector<FeatureVec> m = {v, FeatureVec(neg)};
  EXPECT_TRUE(pool_feature(m).is_flagged_zero());
}

TEST(PoolFeature, OrthonormalPairHandNormalized) {
  const std::vector<FeatureVec> m = {unit(4, 0), unit(4, 1)};
  const auto p = pool_feature(m);
  const double h = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(p.values[0], h, 1e-7);
  EXPECT_NEAR(p.values[1], h, 1e-7);
  EXPECT_EQ(p.values[2], 0.0f);
  EXPECT_EQ(p.values[3], 0.0f);
}

TEST(PoolFeature, Errors) {
  EXPECT_THROW(
      {
        try {
          pool_feature(std::vector<FeatureVec>{});
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), ErrorCode::EmptyPool);
          throw;
        }
      },
      Error);
  const std::vector<FeatureVec> mixed = {unit(3, 0), unit(4, 0)};
  try {
    pool_feature(mixed);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(PoolFeature, UnitNormAndPermutationInvariant) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 7;
    std::vector<FeatureVec> m;
    for (std::size_t k = 0; k < n; ++k) m.push_back(random_unit(12, rng));
    const auto p = pool_feature(m);
    ASSERT_TRUE(p.is_flagged_zero() || std::fabs(p.norm() - 1.0) < 1e-6);
    std::reverse(m.begin(), m.end());
    std::shuffle(m.begin(), m.end(), rng);
    const auto q = pool_feature(m);
    for (std::size_t k = 0; k < p.dim(); ++k) ASSERT_NEAR(p.values[k], q.values[k], 1e-6);
  }
}

TEST(WindowsOver, ArithmeticProgression) {
  EXPECT_EQ(starts(windows_over(0, 99, 50, 25)), (std::vector<Frame>{0, 25, 50, 75}));
  EXPECT_EQ(starts(windows_over(0, 0, 7, 3)), (std::vector<Frame>{0}));
  EXPECT_EQ(starts(windows_over(0, 599, 600, 300)), (std::vector<Frame>{0, 300}));
}

TEST(WindowsOver, RejectsBadGeometry) {
  for (auto [len, stride] : {std::pair<Frame, Frame>{0, 1}, {5, 0}, {-1, 1}}) {
    try {
      windows_over(0, 10, len, stride);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidWindow);
    }
  }
}

TEST(WindowsOver, CoversEveryFrameWhenStrideWithinLength) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const Frame first = static_cast<Frame>(rng() % 50);
    const Frame last = first + static_cast<Frame>(rng() % 300);
    const Frame len = 1 + static_cast<Frame>(rng() % 60);
    const Frame stride = 1 + static_cast<Frame>(rng() % static_cast<std::uint64_t>(len));
    const auto ws = windows_over(first, last, len, stride);
    for (Frame f = first; f <= last; ++f) {
      ASSERT_TRUE(std::any_of(ws.begin(), ws.end(), [f](const TemporalWindow& w) { return w.contains(f); }))
          << "frame " << f;
    }
  }
}

TEST(ScopeSpec, Invariants) {
  EXPECT_NO_THROW(ScopeSpec::reid().validate());
  EXPECT_NO_THROW(ScopeSpec::sct(150).validate());
  EXPECT_NO_THROW(ScopeSpec::mct(500).validate());
  ScopeSpec bad = ScopeSpec::sct(150);
  bad.camera_rule = CameraRule::Any;
  EXPECT_THROW(bad.validate(), Error);
  ScopeSpec bounded_reid = ScopeSpec::reid();
  bounded_reid.window_len = 10;
  EXPECT_THROW(bounded_reid.validate(), Error);
}

TEST(ScopeSpec, Admission) {
  const auto sct = ScopeSpec::sct(10);
  EXPECT_TRUE(sct.admits(0, 5, 0, 15));
  EXPECT_FALSE(sct.admits(0, 5, 0, 16));
  EXPECT_FALSE(sct.admits(0, 5, 1, 5));
  const auto mct = ScopeSpec::mct(10);
  EXPECT_FALSE(mct.admits(0, 5, 0, 5));
  EXPECT_TRUE(mct.admits(0, 5, 1, 15));
  EXPECT_TRUE(ScopeSpec::reid().admits(0, 0, 3, 1'000'000));
}

TEST(AffinityMatrix, SetIsSymmetric) {
  AffinityMatrix a(3);
  a.set(0, 2, 0.25);
  a.set(1, 0, -0.5);
  EXPECT_TRUE(a.is_symmetric());
  EXPECT_EQ(a(2, 0), 0.25);
  EXPECT_EQ(a(0, 1), -0.5);
  EXPECT_EQ(a(1, 1), 0.0);
}

TEST(Euclidean, DimensionMismatchThrows) {
  EXPECT_THROW(euclidean(unit(3, 0), unit(4, 0)), Error);
  EXPECT_NEAR(euclidean(unit(3, 0), unit(3, 1)), std::sqrt(2.0), 1e-12);
}
