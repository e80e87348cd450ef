// Training-pair sampling (intra-camera, inter-camera, global) and
// mini-batch training of the Siamese metric.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mtmct/affinity.hpp"
#include "mtmct/core.hpp"

namespace mtmct {

/// One labeled observation available to the samplers: a detection or a
/// pooled ground-truth tracklet. `frame` is the observation time used for the
/// sampling window.
struct LabeledSample {
  CameraId camera = 0;
  Frame frame = 0;
  IdentityId identity = kNoIdentity;
  FeatureVec feature;
};

struct SamplerConfig {
  SamplingScheme scheme = SamplingScheme::Intra;
  Frame tau = kUnboundedFrames;
  std::size_t pair_count = 4096;
  std::uint64_t seed = 0;

  void validate() const {
    if (pair_count == 0 || pair_count % 2 != 0) {
      throw Error(ErrorCode::InvalidArgument, "pair_count", "must be a positive even number");
    }
    if (scheme != SamplingScheme::Global && tau <= 0) {
      throw Error(ErrorCode::InvalidArgument, "tau", "must be positive");
    }
  }

  Provenance provenance() const {
    return {scheme, scheme == SamplingScheme::Global ? kUnboundedFrames : tau};
  }
};

struct PairMeta {
  CameraId camera_i = 0;
  CameraId camera_j = 0;
  Frame frame_i = 0;
  Frame frame_j = 0;
};

struct LabeledPair {
  std::vector<double> diff;
  int label = 0;
  PairMeta meta;
};

namespace detail {

inline Frame frame_gap(Frame a, Frame b) { return a > b ? a - b : b - a; }

inline bool eligible(const SamplerConfig& cfg, const LabeledSample& a, const LabeledSample& b, bool positive) {
  const bool same_id = a.identity == b.identity;
  if (same_id != positive) return false;
  switch (cfg.scheme) {
    case SamplingScheme::Intra:
      return a.camera == b.camera && frame_gap(a.frame, b.frame) <= cfg.tau;
    case SamplingScheme::Inter:
      if (positive && a.camera == b.camera) return false;
      return frame_gap(a.frame, b.frame) <= cfg.tau;
    case SamplingScheme::Global:
      return true;
  }
  return false;
}

/// Uniform draw in [0, n) from a 64-bit engine.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng);
}

}  // namespace detail

/// Draws pair_count/2 positive and pair_count/2 negative ordered pairs,
/// uniformly (with replacement) over the pairs eligible under `cfg.scheme`.
inline std::vector<LabeledPair> sample_pairs(std::span<const LabeledSample> data, const SamplerConfig& cfg) {
  cfg.validate();
  const std::size_t n = data.size();

  // Observations sorted by frame; every eligible partner of i lies in the
  // frame window [frame_i - tau, frame_i + tau] of this order.
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return data[a].frame < data[b].frame; });
  std::vector<Frame> sorted_frames(n);
  for (std::size_t k = 0; k < n; ++k) sorted_frames[k] = data[order[k]].frame;

  const bool windowed = cfg.scheme != SamplingScheme::Global && cfg.tau != kUnboundedFrames;
  auto range_of = [&](std::size_t i) -> std::pair<std::size_t, std::size_t> {
    if (!windowed) return {0, n};
    const Frame f = data[i].frame;
    const Frame lo = f - cfg.tau;
    const Frame hi = f > kUnboundedFrames - cfg.tau ? kUnboundedFrames : f + cfg.tau;
    const auto b = std::lower_bound(sorted_frames.begin(), sorted_frames.end(), lo) - sorted_frames.begin();
    const auto e = std::upper_bound(sorted_frames.begin(), sorted_frames.end(), hi) - sorted_frames.begin();
    return {static_cast<std::size_t>(b), static_cast<std::size_t>(e)};
  };

  // Eligible partner counts per anchor and class.
  std::vector<std::uint64_t> cum_pos(n + 1, 0), cum_neg(n + 1, 0);
  std::vector<std::size_t> identity_count;
  if (!windowed) {
    std::vector<IdentityId> ids;
    for (const auto& s : data) ids.push_back(s.identity);
    std::sort(ids.begin(), ids.end());
    identity_count.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = std::equal_range(ids.begin(), ids.end(), data[i].identity);
      identity_count[i] = static_cast<std::size_t>(r.second - r.first);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t pos = 0, neg = 0;
    if (cfg.scheme == SamplingScheme::Global || !windowed) {
      if (cfg.scheme == SamplingScheme::Intra) {
        for (std::size_t j = 0; j < n; ++j) {
          if (j == i) continue;
          pos += detail::eligible(cfg, data[i], data[j], true);
          neg += detail::eligible(cfg, data[i], data[j], false);
        }
      } else if (cfg.scheme == SamplingScheme::Inter) {
        for (std::size_t j = 0; j < n; ++j) {
          if (j == i) continue;
          pos += detail::eligible(cfg, data[i], data[j], true);
        }
        neg = n - identity_count[i];
      } else {
        pos = identity_count[i] - 1;
        neg = n - identity_count[i];
      }
    } else {
      const auto [b, e] = range_of(i);
      for (std::size_t k = b; k < e; ++k) {
        const std::size_t j = order[k];
        if (j == i) continue;
        pos += detail::eligible(cfg, data[i], data[j], true);
        neg += detail::eligible(cfg, data[i], data[j], false);
      }
    }
    cum_pos[i + 1] = cum_pos[i] + pos;
    cum_neg[i + 1] = cum_neg[i] + neg;
  }
  if (cum_pos[n] == 0) throw Error(ErrorCode::SamplerExhausted, "positive");
  if (cum_neg[n] == 0) throw Error(ErrorCode::SamplerExhausted, "negative");

  std::mt19937_64 rng(cfg.seed);
  std::vector<LabeledPair> out;
  out.reserve(cfg.pair_count);
  auto draw = [&](const std::vector<std::uint64_t>& cum, bool positive) {
    const std::uint64_t r = detail::uniform_below(rng, cum[n]);
    const std::size_t i =
        static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), r) - cum.begin()) - 1;
    const auto [b, e] = range_of(i);
    std::size_t j = i;
    for (;;) {
      j = order[b + static_cast<std::size_t>(detail::uniform_below(rng, e - b))];
      if (j != i && detail::eligible(cfg, data[i], data[j], positive)) break;
    }
    LabeledPair p;
    p.diff = abs_diff(data[i].feature, data[j].feature);
    p.label = positive ? 1 : 0;
    p.meta = {data[i].camera, data[j].camera, data[i].frame, data[j].frame};
    out.push_back(std::move(p));
  };
  for (std::size_t k = 0; k < cfg.pair_count / 2; ++k) draw(cum_pos, true);
  for (std::size_t k = 0; k < cfg.pair_count / 2; ++k) draw(cum_neg, false);
  return out;
}

inline std::vector<LabeledPair> sample_intra_pairs(std::span<const LabeledSample> data, SamplerConfig cfg) {
  cfg.scheme = SamplingScheme::Intra;
  return sample_pairs(data, cfg);
}

inline std::vector<LabeledPair> sample_inter_pairs(std::span<const LabeledSample> data, SamplerConfig cfg) {
  cfg.scheme = SamplingScheme::Inter;
  return sample_pairs(data, cfg);
}

inline std::vector<LabeledPair> sample_global_pairs(std::span<const LabeledSample> data, SamplerConfig cfg) {
  cfg.scheme = SamplingScheme::Global;
  cfg.tau = kUnboundedFrames;
  return sample_pairs(data, cfg);
}

/// lr_min + (lr_max - lr_min) * (1 + cos(pi * t / T)) / 2, no restarts.
inline double cosine_lr(std::int64_t t, std::int64_t total, double lr_max, double lr_min) {
  if (total < 1) throw Error(ErrorCode::InvalidStep, "total", "must be at least 1");
  if (t < 0 || t > total) throw Error(ErrorCode::InvalidStep, "t=" + std::to_string(t));
  const double c = std::cos(std::numbers::pi * static_cast<double>(t) / static_cast<double>(total));
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + c);
}

enum class Optimizer { Sgd, Adam };

struct TrainConfig {
  int epochs = 40;
  double lr_max = 1e-3;
  double lr_min = 0.0;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::Adam;
  std::vector<std::size_t> hidden = {kDefaultHidden.begin(), kDefaultHidden.end()};
  /// Evaluate the full-set loss after every epoch (costs one extra pass).
  bool record_epoch_loss = false;

  void validate() const {
    if (epochs < 1) throw Error(ErrorCode::InvalidArgument, "epochs", "must be >= 1");
    if (!(lr_max > lr_min) || lr_min < 0.0) throw Error(ErrorCode::InvalidArgument, "lr", "need lr_max > lr_min >= 0");
    if (batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch_size", "must be >= 1");
  }
};

/// Learning rate of optimizer step `step` out of `total_steps`: lr_max on the
/// first update, lr_min on the last.
inline double scheduled_lr(std::int64_t step, std::int64_t total_steps, const TrainConfig& cfg) {
  if (total_steps <= 1) return cfg.lr_max;
  return cosine_lr(step, total_steps - 1, cfg.lr_max, cfg.lr_min);
}

/// Cross-entropy of softmax(logits) against `label` (1 = same identity).
inline double cross_entropy(const std::array<double, 2>& z, int label) {
  const double m = std::max(z[0], z[1]);
  const double lse = m + std::log(std::exp(z[0] - m) + std::exp(z[1] - m));
  return lse - z[label ? 1 : 0];
}

inline double pair_loss(const SiameseModel& model, std::span<const double> diff, int label) {
  return cross_entropy(siamese_logits(model, diff), label);
}

/// Adds d(loss)/d(params) for one example to `grad` (same shape as `model`)
/// and returns the example's loss.
inline double accumulate_gradient(const SiameseModel& model, std::span<const double> diff, int label,
                                  SiameseModel& grad) {
  const ForwardTrace t = forward_trace(model, diff);
  const auto z = t.logits();
  const ProbPair p = softmax_pair(z, 1.0);
  std::vector<double> delta = {p.p_neg - (label ? 0.0 : 1.0), p.p_pos - (label ? 1.0 : 0.0)};
  for (std::size_t k = model.layers.size(); k-- > 0;) {
    const auto& l = model.layers[k];
    auto& g = grad.layers[k];
    const std::vector<double>& x = k == 0 ? t.input : t.post[k - 1];
    for (std::size_t o = 0; o < l.out; ++o) {
      const double d = delta[o];
      g.biases[o] += d;
      if (d == 0.0) continue;
      double* row = &g.weights[o * l.in];
      for (std::size_t i = 0; i < l.in; ++i) row[i] += d * x[i];
    }
    if (k == 0) break;
    std::vector<double> prev(l.in, 0.0);
    for (std::size_t o = 0; o < l.out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* row = &l.weights[o * l.in];
      for (std::size_t i = 0; i < l.in; ++i) prev[i] += row[i] * d;
    }
    for (std::size_t i = 0; i < l.in; ++i) {
      if (!(t.pre[k - 1][i] > 0.0)) prev[i] = 0.0;
    }
    delta = std::move(prev);
  }
  return cross_entropy(z, label);
}

inline SiameseModel loss_gradient(const SiameseModel& model, std::span<const double> diff, int label) {
  SiameseModel grad = SiameseModel::zeros(model.layer_dims());
  accumulate_gradient(model, diff, label, grad);
  return grad;
}

struct TrainResult {
  SiameseModel model;
  double final_loss = 0.0;
  double final_accuracy = 0.0;
  std::int64_t steps = 0;
  double final_lr = 0.0;
  std::vector<double> epoch_losses;
};

/// Mean loss and argmax accuracy of `model` over `pairs`.
inline std::pair<double, double> evaluate_pairs(const SiameseModel& model, std::span<const LabeledPair> pairs) {
  double loss = 0.0;
  std::size_t correct = 0;
  for (const auto& p : pairs) {
    const auto z = siamese_logits(model, p.diff);
    loss += cross_entropy(z, p.label);
    const int pred = z[1] > z[0] ? 1 : 0;
    correct += pred == p.label;
  }
  const double n = static_cast<double>(std::max<std::size_t>(pairs.size(), 1));
  return {loss / n, static_cast<double>(correct) / n};
}

/// Mini-batch training with a per-step cosine learning rate and seeded
/// shuffling each epoch. Deterministic for fixed (pairs, cfg, init_seed).
inline TrainResult train_metric(std::span<const LabeledPair> pairs, const TrainConfig& cfg, std::uint64_t init_seed,
                                Provenance provenance = {}) {
  cfg.validate();
  if (pairs.empty()) throw Error(ErrorCode::EmptyTrainingSet, "pairs");
  const std::size_t dim = pairs.front().diff.size();
  for (const auto& p : pairs) {
    if (p.diff.size() != dim) throw Error(ErrorCode::DimensionMismatch, "training pair dimension");
  }
  std::vector<std::size_t> dims{dim};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(2);

  TrainResult res;
  res.model = SiameseModel::he_init(dims, init_seed);
  res.model.provenance = provenance;
  SiameseModel& model = res.model;

  SiameseModel grad = SiameseModel::zeros(dims);
  SiameseModel m1 = SiameseModel::zeros(dims), m2 = SiameseModel::zeros(dims);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;

  const std::size_t batches = (pairs.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::int64_t total_steps = static_cast<std::int64_t>(batches) * cfg.epochs;
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::mt19937_64 rng(cfg.seed);

  std::int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t k = order.size(); k > 1; --k) {
      std::swap(order[k - 1], order[detail::uniform_below(rng, k)]);
    }
    for (std::size_t b = 0; b < batches; ++b) {
      for (auto& l : grad.layers) {
        std::fill(l.weights.begin(), l.weights.end(), 0.0);
        std::fill(l.biases.begin(), l.biases.end(), 0.0);
      }
      const std::size_t lo = b * cfg.batch_size;
      const std::size_t hi = std::min(order.size(), lo + cfg.batch_size);
      for (std::size_t k = lo; k < hi; ++k) {
        const auto& p = pairs[order[k]];
        accumulate_gradient(model, p.diff, p.label, grad);
      }
      const double inv = 1.0 / static_cast<double>(hi - lo);
      const double lr = scheduled_lr(step, total_steps, cfg);
      res.final_lr = lr;
      ++step;
      const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      auto update = [&](std::vector<double>& param, const std::vector<double>& g, std::vector<double>& s1,
                        std::vector<double>& s2) {
        for (std::size_t q = 0; q < param.size(); ++q) {
          const double gq = g[q] * inv;
          if (cfg.optimizer == Optimizer::Sgd) {
            param[q] -= lr * gq;
          } else {
            s1[q] = kBeta1 * s1[q] + (1.0 - kBeta1) * gq;
            s2[q] = kBeta2 * s2[q] + (1.0 - kBeta2) * gq * gq;
            param[q] -= lr * (s1[q] / bc1) / (std::sqrt(s2[q] / bc2) + kAdamEps);
          }
        }
      };
      for (std::size_t li = 0; li < model.layers.size(); ++li) {
        update(model.layers[li].weights, grad.layers[li].weights, m1.layers[li].weights, m2.layers[li].weights);
        update(model.layers[li].biases, grad.layers[li].biases, m1.layers[li].biases, m2.layers[li].biases);
      }
    }
    if (cfg.record_epoch_loss) res.epoch_losses.push_back(evaluate_pairs(model, pairs).first);
  }
  res.steps = step;
  std::tie(res.final_loss, res.final_accuracy) = evaluate_pairs(model, pairs);
  return res;
}

/// Largest relative error between `analytic` and central finite differences
/// of the loss, over every parameter. The denominator is floored at 1e-8.
inline double compare_gradients(const SiameseModel& model, const LabeledPair& pair, double epsilon,
                                const SiameseModel& analytic) {
  if (epsilon < 1e-6 || epsilon > 1e-3) throw Error(ErrorCode::InvalidArgument, "epsilon", "must be in [1e-6, 1e-3]");
  SiameseModel probe = model;
  double worst = 0.0;
  auto check = [&](double& param, double g) {
    const double saved = param;
    param = saved + epsilon;
    const double up = pair_loss(probe, pair.diff, pair.label);
    param = saved - epsilon;
    const double down = pair_loss(probe, pair.diff, pair.label);
    param = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double denom = std::max({std::fabs(numeric), std::fabs(g), 1e-8});
    worst = std::max(worst, std::fabs(numeric - g) / denom);
  };
  for (std::size_t li = 0; li < probe.layers.size(); ++li) {
    auto& l = probe.layers[li];
    for (std::size_t q = 0; q < l.weights.size(); ++q) check(l.weights[q], analytic.layers[li].weights[q]);
    for (std::size_t q = 0; q < l.biases.size(); ++q) check(l.biases[q], analytic.layers[li].biases[q]);
  }
  return worst;
}

inline double gradient_check(const SiameseModel& model, const LabeledPair& pair, double epsilon) {
  return compare_gradients(model, pair, epsilon, loss_gradient(model, pair.diff, pair.label));
}

}  // namespace mtmct
