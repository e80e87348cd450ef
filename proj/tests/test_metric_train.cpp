#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "mtmct/metric_train.hpp"

using namespace mtmct;

namespace {

FeatureVec random_unit(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  std::vector<double> v(dim);
  for (auto& x : v) x = n(rng);
  return normalized_feature(v);
}

/// Samples with unique (camera, frame) so pair metadata identifies the pair.
std::vector<LabeledSample> toy_samples(std::size_t n, std::size_t cameras, std::size_t ids, std::mt19937_64& rng) {
  std::vector<LabeledSample> out;
  for (std::size_t k = 0; k < n; ++k) {
    LabeledSample s;
    s.camera = static_cast<CameraId>(k % cameras);
    s.frame = static_cast<Frame>(k * 7 % 97 + 100 * (k / 97));
    s.identity = static_cast<IdentityId>(rng() % ids);
    s.feature = random_unit(4, rng);
    out.push_back(s);
  }
  return out;
}

bool brute_eligible(const SamplerConfig& cfg, const LabeledSample& a, const LabeledSample& b, bool positive) {
  if ((a.identity == b.identity) != positive) return false;
  const Frame gap = a.frame > b.frame ? a.frame - b.frame : b.frame - a.frame;
  if (cfg.scheme == SamplingScheme::Intra) return a.camera == b.camera && gap <= cfg.tau;
  if (cfg.scheme == SamplingScheme::Inter) return (!positive || a.camera != b.camera) && gap <= cfg.tau;
  return true;
}

using Key = std::tuple<CameraId, Frame, CameraId, Frame>;

Key key_of(const PairMeta& m) { return {m.camera_i, m.frame_i, m.camera_j, m.frame_j}; }

LabeledPair random_pair(std::size_t dim, std::mt19937_64& rng) {
  LabeledPair p;
  std::uniform_real_distribution<double> u(0.0, 0.4);
  for (std::size_t k = 0; k < dim; ++k) p.diff.push_back(u(rng));
  p.label = static_cast<int>(rng() % 2);
  return p;
}

}  // namespace

TEST(Sampler, BalancedCountAndEligibility) {
  std::mt19937_64 rng(1);
  const auto data = toy_samples(60, 3, 5, rng);
  std::map<Key, std::pair<std::size_t, std::size_t>> index;
  for (std::size_t i = 0; i < data.size(); ++i) index[{data[i].camera, data[i].frame, 0, 0}] = {i, 0};
  auto lookup = [&](CameraId c, Frame f) { return index.at({c, f, 0, 0}).first; };
  for (auto scheme : {SamplingScheme::Intra, SamplingScheme::Inter, SamplingScheme::Global}) {
    SamplerConfig cfg{scheme, 30, 400, 9};
    const auto pairs = sample_pairs(data, cfg);
    ASSERT_EQ(pairs.size(), 400u);
    std::size_t pos = 0;
    for (const auto& p : pairs) {
      pos += p.label == 1;
      const auto i = lookup(p.meta.camera_i, p.meta.frame_i);
      const auto j = lookup(p.meta.camera_j, p.meta.frame_j);
      ASSERT_NE(i, j);
      const SamplerConfig eff = scheme == SamplingScheme::Global ? SamplerConfig{scheme, kUnboundedFrames, 400, 9} : cfg;
      ASSERT_TRUE(brute_eligible(eff, data[i], data[j], p.label == 1));
      const auto d = abs_diff(data[i].feature, data[j].feature);
      ASSERT_EQ(p.diff, d);
    }
    EXPECT_EQ(pos, 200u);
  }
}

TEST(Sampler, UniformOverEligiblePairs) {
  std::mt19937_64 rng(2);
  const auto data = toy_samples(24, 2, 3, rng);
  const SamplerConfig cfg{SamplingScheme::Inter, 40, 40000, 17};
  std::map<Key, int> expected;
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t j = 0; j < data.size(); ++j)
      if (i != j && brute_eligible(cfg, data[i], data[j], true))
        expected[{data[i].camera, data[i].frame, data[j].camera, data[j].frame}] = 0;
  ASSERT_GT(expected.size(), 5u);
  const auto pairs = sample_pairs(data, cfg);
  for (const auto& p : pairs) {
    if (p.label != 1) continue;
    auto it = expected.find(key_of(p.meta));
    ASSERT_NE(it, expected.end());
    ++it->second;
  }
  const double e = 20000.0 / static_cast<double>(expected.size());
  double chi2 = 0.0;
  for (const auto& [k, c] : expected) chi2 += (c - e) * (c - e) / e;
  const double dof = static_cast<double>(expected.size() - 1);
  EXPECT_LT(chi2, dof + 5.0 * std::sqrt(2.0 * dof));
}

TEST(Sampler, ExhaustionNamesTheClass) {
  std::mt19937_64 rng(3);
  auto data = toy_samples(10, 1, 3, rng);
  try {
    sample_inter_pairs(data, {SamplingScheme::Inter, 1000, 10, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SamplerExhausted);
    EXPECT_EQ(e.detail(), "positive");
  }
  for (auto& s : data) s.identity = 1;
  try {
    sample_global_pairs(data, {SamplingScheme::Global, 0, 10, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.detail(), "negative");
  }
}

TEST(Sampler, RejectsOddOrZeroCount) {
  std::mt19937_64 rng(4);
  const auto data = toy_samples(10, 2, 2, rng);
  EXPECT_THROW(sample_intra_pairs(data, {SamplingScheme::Intra, 100, 3, 0}), Error);
  EXPECT_THROW(sample_intra_pairs(data, {SamplingScheme::Intra, 100, 0, 0}), Error);
}

TEST(Sampler, DeterministicForSeed) {
  std::mt19937_64 rng(5);
  const auto data = toy_samples(50, 3, 4, rng);
  const SamplerConfig cfg{SamplingScheme::Intra, 50, 64, 21};
  const auto a = sample_pairs(data, cfg), b = sample_pairs(data, cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].diff, b[k].diff);
    EXPECT_EQ(key_of(a[k].meta), key_of(b[k].meta));
  }
}

TEST(CosineLr, Endpoints) {
  EXPECT_DOUBLE_EQ(cosine_lr(0, 100, 1e-3, 0.0), 1e-3);
  EXPECT_NEAR(cosine_lr(100, 100, 1e-3, 0.0), 0.0, 1e-18);
  EXPECT_NEAR(cosine_lr(50, 100, 1e-3, 0.0), 5e-4, 1e-15);
  EXPECT_NEAR(cosine_lr(100, 100, 1e-3, 1e-5), 1e-5, 1e-18);
  try {
    cosine_lr(101, 100, 1e-3, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidStep);
  }
}

TEST(CosineLr, MonotoneNonIncreasing) {
  double prev = 1.0;
  for (int t = 0; t <= 500; ++t) {
    const double lr = cosine_lr(t, 500, 0.5, 0.01);
    ASSERT_LE(lr, prev);
    ASSERT_GE(lr, 0.01 - 1e-15);
    prev = lr;
  }
}

TEST(GradientCheck, AnalyticMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t dim = 3 + rng() % 6;
    const std::vector<std::size_t> dims = {dim, 12, 8, 6, 2};
    auto model = SiameseModel::he_init(dims, rng());
    std::normal_distribution<double> bias(0.0, 0.1);
    for (auto& l : model.layers)
      for (auto& b : l.biases) b = bias(rng);
    const auto pair = random_pair(dim, rng);
    // Finite differences are meaningless across a ReLU kink.
    const auto trace = forward_trace(model, pair.diff);
    bool near_kink = false;
    for (std::size_t k = 0; k + 1 < model.layers.size(); ++k)
      for (double z : trace.pre[k]) near_kink = near_kink || std::fabs(z) < 1e-3;
    if (near_kink) continue;
    EXPECT_LT(gradient_check(model, pair, 1e-5), 1e-4) << "trial " << trial;
    ++checked;
  }
  EXPECT_GE(checked, 20);
}

TEST(GradientCheck, SignFlipIsDetected) {
  std::mt19937_64 rng(7);
  const std::vector<std::size_t> dims = {5, 6, 5, 4, 2};
  const auto model = SiameseModel::he_init(dims, 3);
  const auto pair = random_pair(5, rng);
  auto flipped = loss_gradient(model, pair.diff, pair.label);
  for (auto& l : flipped.layers) {
    for (auto& w : l.weights) w = -w;
    for (auto& b : l.biases) b = -b;
  }
  EXPECT_NEAR(compare_gradients(model, pair, 1e-5, flipped), 2.0, 1e-3);
}

TEST(GradientCheck, EpsilonRange) {
  std::mt19937_64 rng(8);
  const auto model = SiameseModel::he_init(std::vector<std::size_t>{4, 3, 2}, 1);
  const auto pair = random_pair(4, rng);
  EXPECT_THROW(gradient_check(model, pair, 1e-2), Error);
  EXPECT_THROW(gradient_check(model, pair, 1e-8), Error);
}

TEST(TrainMetric, SeparableSetIsLearned) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> near(0.0, 0.1), far(0.3, 0.5);
  std::vector<LabeledPair> pairs;
  for (int k = 0; k < 512; ++k) {
    LabeledPair p;
    p.label = k % 2;
    for (int d = 0; d < 8; ++d) p.diff.push_back(p.label ? near(rng) : far(rng));
    pairs.push_back(p);
  }
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.seed = 4;
  cfg.record_epoch_loss = true;
  const auto res = train_metric(pairs, cfg, 11);
  EXPECT_GE(res.final_accuracy, 0.99);
  EXPECT_LT(res.epoch_losses.back(), res.epoch_losses.front());
  EXPECT_EQ(res.steps, 20 * 8);
  EXPECT_NEAR(res.final_lr, 0.0, 1e-18);
  const auto again = train_metric(pairs, cfg, 11);
  EXPECT_EQ(again.model, res.model);
}

TEST(TrainMetric, Errors) {
  TrainConfig cfg;
  EXPECT_THROW(train_metric(std::vector<LabeledPair>{}, cfg, 0), Error);
  std::vector<LabeledPair> bad(2);
  bad[0].diff = {0.1, 0.2};
  bad[1].diff = {0.1};
  try {
    train_metric(bad, cfg, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
  cfg.epochs = 0;
  std::vector<LabeledPair> ok(1);
  ok[0].diff = {0.1};
  EXPECT_THROW(train_metric(ok, cfg, 0), Error);
}
