// Pairwise affinity: the calibrated re-ID distance rule and the Siamese
// metric network, plus affinity-matrix assembly for association windows.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mtmct/core.hpp"

namespace mtmct {

// ---------------------------------------------------------------------------
// Distance-threshold affinity
// ---------------------------------------------------------------------------

struct ThresholdCalibration {
  double mu_p = 0.0;
  double mu_n = 0.0;
  double thres = 0.0;

  /// Negatives are expected to be farther apart than positives.
  bool inverted() const noexcept { return mu_n < mu_p; }
};

struct LabeledDistance {
  double distance = 0.0;
  bool positive = false;
};

/// thres = (mu_p + mu_n) / 2 over the supplied pair distances.
inline ThresholdCalibration calibrate_threshold(std::span<const LabeledDistance> pairs) {
  double sum_p = 0.0, sum_n = 0.0;
  std::size_t n_p = 0, n_n = 0;
  for (const auto& p : pairs) {
    if (p.positive) {
      sum_p += p.distance;
      ++n_p;
    } else {
      sum_n += p.distance;
      ++n_n;
    }
  }
  if (n_p == 0) throw Error(ErrorCode::MissingClass, "positive");
  if (n_n == 0) throw Error(ErrorCode::MissingClass, "negative");
  ThresholdCalibration cal;
  cal.mu_p = sum_p / static_cast<double>(n_p);
  cal.mu_n = sum_n / static_cast<double>(n_n);
  cal.thres = 0.5 * (cal.mu_p + cal.mu_n);
  if (!(cal.thres > 0.0)) throw Error(ErrorCode::InvalidArgument, "thres", "calibrated threshold must be positive");
  return cal;
}

/// (thres - |f_i - f_j|) / thres; -1 when either side is the flagged zero vector.
inline double reid_affinity(const FeatureVec& fi, const FeatureVec& fj, const ThresholdCalibration& cal) {
  if (fi.dim() != fj.dim()) {
    throw Error(ErrorCode::DimensionMismatch, std::to_string(fi.dim()) + " vs " + std::to_string(fj.dim()));
  }
  if (fi.is_flagged_zero() || fj.is_flagged_zero()) return -1.0;
  return (cal.thres - euclidean(fi, fj)) / cal.thres;
}

// ---------------------------------------------------------------------------
// Siamese metric network
// ---------------------------------------------------------------------------

enum class SamplingScheme { Intra, Inter, Global };

inline const char* to_string(SamplingScheme s) {
  switch (s) {
    case SamplingScheme::Intra: return "intra";
    case SamplingScheme::Inter: return "inter";
    case SamplingScheme::Global: return "global";
  }
  return "?";
}

/// Which pair population a metric was trained on. `tau` is the sampling
/// window in frames (unbounded for global sampling).
struct Provenance {
  SamplingScheme scheme = SamplingScheme::Global;
  Frame tau = kUnboundedFrames;
  bool operator==(const Provenance&) const = default;
};

/// Fully connected layer, weights stored row-major as out x in.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> biases;

  double& w(std::size_t o, std::size_t i) { return weights[o * in + i]; }
  double w(std::size_t o, std::size_t i) const { return weights[o * in + i]; }
  bool operator==(const DenseLayer&) const = default;
};

inline constexpr std::array<std::size_t, 3> kDefaultHidden = {128, 64, 32};
inline constexpr double kDefaultTemperature = 0.1;

/// Binary classifier over |f_i - f_j|: ReLU hidden layers followed by a
/// 2-way output (logit of "different", logit of "same").
struct SiameseModel {
  std::vector<DenseLayer> layers;
  double temperature = kDefaultTemperature;
  Provenance provenance;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in; }

  std::vector<std::size_t> layer_dims() const {
    std::vector<std::size_t> dims;
    if (layers.empty()) return dims;
    dims.push_back(layers.front().in);
    for (const auto& l : layers) dims.push_back(l.out);
    return dims;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.biases.size();
    return n;
  }

  /// Checks the structural invariants; throws InvalidArgument on violation.
  void validate() const {
    if (layers.size() < 2) throw Error(ErrorCode::InvalidArgument, "layers", "need hidden and output layers");
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const auto& l = layers[k];
      if (l.weights.size() != l.in * l.out || l.biases.size() != l.out) {
        throw Error(ErrorCode::InvalidArgument, "layer " + std::to_string(k), "parameter table size");
      }
      if (k > 0 && layers[k - 1].out != l.in) {
        throw Error(ErrorCode::InvalidArgument, "layer " + std::to_string(k), "dimension chain broken");
      }
    }
    if (layers.back().out != 2) throw Error(ErrorCode::InvalidArgument, "output", "must have 2 logits");
    if (!(temperature > 0.0)) throw Error(ErrorCode::InvalidArgument, "temperature", "must be positive");
  }

  bool operator==(const SiameseModel&) const = default;

  /// All-zero parameters with the given layer widths (input, hidden..., 2).
  static SiameseModel zeros(std::span<const std::size_t> dims) {
    SiameseModel m;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
      DenseLayer l;
      l.in = dims[k];
      l.out = dims[k + 1];
      l.weights.assign(l.in * l.out, 0.0);
      l.biases.assign(l.out, 0.0);
      m.layers.push_back(std::move(l));
    }
    return m;
  }

  static std::vector<std::size_t> default_dims(std::size_t feature_dim) {
    return {feature_dim, kDefaultHidden[0], kDefaultHidden[1], kDefaultHidden[2], 2};
  }

  /// He initialization (zero mean, variance 2 / fan_in), zero biases.
  static SiameseModel he_init(std::span<const std::size_t> dims, std::uint64_t seed) {
    SiameseModel m = zeros(dims);
    std::mt19937_64 rng(seed);
    for (auto& l : m.layers) {
      std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(l.in)));
      for (auto& w : l.weights) w = normal(rng);
    }
    return m;
  }
};

struct ProbPair {
  double p_neg = 0.5;
  double p_pos = 0.5;
};

/// Per-layer outputs of one forward pass. `pre[k]` is layer k's affine output;
/// `post[k]` its activation (ReLU for hidden layers, identity for the output).
struct ForwardTrace {
  std::vector<double> input;
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> post;

  std::array<double, 2> logits() const { return {post.back()[0], post.back()[1]}; }
};

inline void check_input_dim(const SiameseModel& model, std::size_t dim) {
  if (model.input_dim() != dim) {
    throw Error(ErrorCode::DimensionMismatch,
                "model " + std::to_string(model.input_dim()) + " vs input " + std::to_string(dim));
  }
}

inline ForwardTrace forward_trace(const SiameseModel& model, std::span<const double> input) {
  check_input_dim(model, input.size());
  ForwardTrace t;
  t.input.assign(input.begin(), input.end());
  const std::vector<double>* x = &t.input;
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    const auto& l = model.layers[k];
    std::vector<double> z(l.biases);
    for (std::size_t o = 0; o < l.out; ++o) {
      const double* row = &l.weights[o * l.in];
      double acc = 0.0;
      for (std::size_t i = 0; i < l.in; ++i) acc += row[i] * (*x)[i];
      z[o] += acc;
    }
    std::vector<double> a = z;
    if (k + 1 < model.layers.size()) {
      for (auto& v : a) v = v > 0.0 ? v : 0.0;
    }
    t.pre.push_back(std::move(z));
    t.post.push_back(std::move(a));
    x = &t.post.back();
  }
  return t;
}

/// Raw logits (z_neg, z_pos) without temperature.
inline std::array<double, 2> siamese_logits(const SiameseModel& model, std::span<const double> diff) {
  check_input_dim(model, diff.size());
  thread_local std::vector<double> cur, next;
  cur.assign(diff.begin(), diff.end());
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    const auto& l = model.layers[k];
    next.assign(l.out, 0.0);
    for (std::size_t o = 0; o < l.out; ++o) {
      const double* row = &l.weights[o * l.in];
      double acc = 0.0;
      for (std::size_t i = 0; i < l.in; ++i) acc += row[i] * cur[i];
      const double z = l.biases[o] + acc;
      next[o] = (k + 1 < model.layers.size() && z < 0.0) ? 0.0 : z;
    }
    std::swap(cur, next);
  }
  return {cur[0], cur[1]};
}

/// Two-way softmax of `scale * logits`, computed without overflow.
inline ProbPair softmax_pair(const std::array<double, 2>& logits, double scale) {
  const double margin = scale * (logits[1] - logits[0]);
  ProbPair p;
  if (margin >= 0.0) {
    const double e = std::exp(-margin);
    p.p_pos = 1.0 / (1.0 + e);
    p.p_neg = e / (1.0 + e);
  } else {
    const double e = std::exp(margin);
    p.p_neg = 1.0 / (1.0 + e);
    p.p_pos = e / (1.0 + e);
  }
  return p;
}

inline ProbPair siamese_forward(const SiameseModel& model, std::span<const double> diff) {
  return softmax_pair(siamese_logits(model, diff), model.temperature);
}

/// Componentwise |f_i - f_j| in double precision.
inline std::vector<double> abs_diff(const FeatureVec& fi, const FeatureVec& fj) {
  if (fi.dim() != fj.dim()) {
    throw Error(ErrorCode::DimensionMismatch, std::to_string(fi.dim()) + " vs " + std::to_string(fj.dim()));
  }
  std::vector<double> d(fi.dim());
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = std::fabs(static_cast<double>(fi.values[k]) - fj.values[k]);
  return d;
}

/// p_pos - p_neg in [-1, 1]; -1 against the flagged zero vector.
inline double siamese_affinity(const SiameseModel& model, const FeatureVec& fi, const FeatureVec& fj) {
  const auto diff = abs_diff(fi, fj);
  if (fi.is_flagged_zero() || fj.is_flagged_zero()) {
    check_input_dim(model, diff.size());
    return -1.0;
  }
  const ProbPair p = siamese_forward(model, diff);
  return p.p_pos - p.p_neg;
}

// ---------------------------------------------------------------------------
// Affinity models used by the tracker and the scope analysis
// ---------------------------------------------------------------------------

/// Ground-truth affinity: +1 for the same identity, -1 otherwise.
struct OracleAffinity {};

using AffinityModel = std::variant<ThresholdCalibration, SiameseModel, OracleAffinity>;

inline std::string describe(const AffinityModel& m) {
  if (std::holds_alternative<ThresholdCalibration>(m)) return "eq1";
  if (std::holds_alternative<OracleAffinity>(m)) return "oracle";
  const auto& s = std::get<SiameseModel>(m);
  return std::string("siamese-") + to_string(s.provenance.scheme);
}

/// Scores one pair. Labels are only consulted by the oracle, which requires
/// both of them.
inline double score_pair(const AffinityModel& model, const FeatureVec& fi, const FeatureVec& fj,
                         std::optional<IdentityId> label_i = std::nullopt,
                         std::optional<IdentityId> label_j = std::nullopt) {
  if (const auto* cal = std::get_if<ThresholdCalibration>(&model)) return reid_affinity(fi, fj, *cal);
  if (const auto* net = std::get_if<SiameseModel>(&model)) return siamese_affinity(*net, fi, fj);
  if (!label_i || !label_j || *label_i == kNoIdentity || *label_j == kNoIdentity) {
    throw Error(ErrorCode::InvalidArgument, "oracle", "oracle affinity needs ground-truth labels");
  }
  return *label_i == *label_j ? 1.0 : -1.0;
}

/// a[i][j] = scorer(items[i], items[j]) for i < j, mirrored; diagonal 0.
/// Scorer failures are rethrown with the offending pair attached.
template <class Item, class Scorer>
AffinityMatrix build_affinity_matrix(std::span<const Item> items, Scorer&& scorer) {
  if (items.empty()) throw Error(ErrorCode::InvalidArgument, "items", "need at least one item");
  AffinityMatrix a(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (std::size_t j = i + 1; j < items.size(); ++j) {
      try {
        a.set(i, j, scorer(items[i], items[j]));
      } catch (const Error& e) {
        throw Error(e.code(), e.detail(), "pair (" + std::to_string(i) + ", " + std::to_string(j) + ")");
      }
    }
  }
  return a;
}

}  // namespace mtmct
