// End-to-end helpers shared by the CLI and the benchmark: world pairs,
// calibration, metric training and tracker variants.
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "mtmct/affinity.hpp"
#include "mtmct/association.hpp"
#include "mtmct/core.hpp"
#include "mtmct/evaluation.hpp"
#include "mtmct/metric_train.hpp"
#include "mtmct/synthgen.hpp"

namespace mtmct {

/// Window lengths of one dataset profile (frames).
struct Profile {
  std::string name;
  Frame tracklet_len = 10;
  Frame sct_window = 150;
  Frame mct_window = 500;
  Frame tau_s = 150;
  Frame tau_m = 500;

  static Profile duke() { return {"duke", 40, 600, 2400, 600, 2400}; }
  static Profile cityflow() { return {"cityflow", 10, 150, 500, 150, 500}; }

  static Profile by_name(const std::string& name) {
    if (name == "duke") return duke();
    if (name == "cityflow") return cityflow();
    throw Error(ErrorCode::ConfigError, "profile", "unknown profile '" + name + "'");
  }
};

inline constexpr std::size_t kCalibrationCap = 1'000'000;

/// Labeled detection lists of independent sequences. Pairs are only ever
/// formed within one sequence.
using Sequences = std::vector<std::span<const Detection>>;

inline Sequences sequences_of(const std::vector<SynthDataset>& worlds) {
  Sequences out;
  for (const auto& w : worlds) out.emplace_back(w.detections);
  return out;
}

struct CalibrationResult {
  ThresholdCalibration calibration;
  std::size_t pairs_used = 0;
  bool capped = false;
};

/// Threshold calibration from all labeled within-sequence detection pairs,
/// or from a seeded sample when there are more than `cap`; the cap is split
/// evenly over the sequences.
inline CalibrationResult calibrate_on(const Sequences& seqs, std::uint64_t seed, std::size_t cap = kCalibrationCap) {
  if (seqs.empty()) throw Error(ErrorCode::InvalidArgument, "sequences", "need at least one sequence");
  const std::size_t per_seq = std::max<std::size_t>(1, cap / seqs.size());
  std::vector<LabeledDistance> labeled;
  CalibrationResult r;
  for (std::size_t q = 0; q < seqs.size(); ++q) {
    const auto dets = seqs[q];
    const std::size_t n = dets.size();
    const std::uint64_t total = n < 2 ? 0 : static_cast<std::uint64_t>(n) * (n - 1) / 2;
    r.capped = r.capped || total > per_seq;
    const auto pairs = scope_pair_iter(dets, ScopeSpec::reid(), detail::mix_seed(seed, 0xca, q), per_seq);
    for (const auto& p : pairs) labeled.push_back({euclidean(dets[p.i].feature, dets[p.j].feature), p.same_identity});
  }
  r.calibration = calibrate_threshold(labeled);
  r.pairs_used = labeled.size();
  return r;
}

inline CalibrationResult calibrate_on(std::span<const Detection> dets, std::uint64_t seed,
                                      std::size_t cap = kCalibrationCap) {
  return calibrate_on(Sequences{dets}, seed, cap);
}

inline std::vector<LabeledSample> labeled_samples(std::span<const Detection> dets) {
  std::vector<LabeledSample> out;
  out.reserve(dets.size());
  for (const auto& d : dets) {
    if (!d.gt_identity) throw Error(ErrorCode::InvalidArgument, "gt_identity", "training needs labeled detections");
    out.push_back({d.camera, d.frame, *d.gt_identity, d.feature});
  }
  return out;
}

/// Ground-truth tracklets as samples: each identity's detections in one
/// camera, cut into spans of `tracklet_len` frames and mean-pooled. The
/// sample time is the span's first frame.
inline std::vector<LabeledSample> tracklet_samples(std::span<const Detection> dets, Frame tracklet_len) {
  if (tracklet_len <= 0) throw Error(ErrorCode::InvalidArgument, "tracklet_len", "must be positive");
  std::map<std::tuple<IdentityId, CameraId, Frame>, std::vector<std::size_t>> spans;
  for (std::size_t k = 0; k < dets.size(); ++k) {
    const auto& d = dets[k];
    if (!d.gt_identity) throw Error(ErrorCode::InvalidArgument, "gt_identity", "training needs labeled detections");
    const Frame span = d.frame >= 0 ? d.frame / tracklet_len : -((-d.frame - 1) / tracklet_len) - 1;
    spans[{*d.gt_identity, d.camera, span}].push_back(k);
  }
  std::vector<LabeledSample> out;
  out.reserve(spans.size());
  for (const auto& [key, members] : spans) {
    std::vector<FeatureVec> feats;
    Frame first = kUnboundedFrames;
    for (std::size_t k : members) {
      feats.push_back(dets[k].feature);
      first = std::min(first, dets[k].frame);
    }
    out.push_back({std::get<1>(key), first, std::get<0>(key), pool_feature(feats)});
  }
  std::stable_sort(out.begin(), out.end(), [](const LabeledSample& a, const LabeledSample& b) {
    if (a.camera != b.camera) return a.camera < b.camera;
    return a.frame < b.frame;
  });
  return out;
}

struct MetricRecipe {
  SamplingScheme scheme = SamplingScheme::Intra;
  Frame tau = 150;
  /// Inter-camera pairs are drawn over ground-truth tracklets of this length;
  /// 0 samples detections.
  Frame tracklet_len = 0;
  std::size_t pair_count = 4096;
  std::uint64_t seed = 0;
  TrainConfig train;

  SamplerConfig sampler() const {
    SamplerConfig sc;
    sc.scheme = scheme;
    sc.tau = scheme == SamplingScheme::Global ? kUnboundedFrames : tau;
    sc.pair_count = pair_count;
    sc.seed = detail::mix_seed(seed, 0x5a, static_cast<std::uint64_t>(scheme));
    return sc;
  }
  std::uint64_t train_seed() const { return detail::mix_seed(seed, 0x7b, static_cast<std::uint64_t>(scheme)); }
  std::uint64_t init_seed() const { return detail::mix_seed(seed, 0x3c, static_cast<std::uint64_t>(scheme)); }
};

/// Samples `recipe.pair_count` pairs, split evenly over the sequences (each
/// share balanced 1:1), and concatenates them in sequence order.
inline std::vector<LabeledPair> sample_sequences(const Sequences& seqs, const MetricRecipe& recipe) {
  if (seqs.empty()) throw Error(ErrorCode::InvalidArgument, "sequences", "need at least one sequence");
  const SamplerConfig base = recipe.sampler();
  base.validate();
  const std::size_t half = base.pair_count / 2;
  std::vector<LabeledPair> out;
  out.reserve(base.pair_count);
  for (std::size_t q = 0; q < seqs.size(); ++q) {
    const std::size_t share = 2 * (half / seqs.size() + (q < half % seqs.size() ? 1 : 0));
    if (share == 0) continue;
    SamplerConfig sc = base;
    sc.pair_count = share;
    sc.seed = detail::mix_seed(base.seed, 0x51, q);
    const auto samples = recipe.scheme == SamplingScheme::Inter && recipe.tracklet_len > 0
                             ? tracklet_samples(seqs[q], recipe.tracklet_len)
                             : labeled_samples(seqs[q]);
    auto pairs = sample_pairs(samples, sc);
    for (auto& p : pairs) out.push_back(std::move(p));
  }
  return out;
}

/// Samples pairs under `recipe` and trains a Siamese metric on them.
inline TrainResult train_on(const Sequences& seqs, const MetricRecipe& recipe) {
  const auto pairs = sample_sequences(seqs, recipe);
  TrainConfig tc = recipe.train;
  tc.seed = recipe.train_seed();
  return train_metric(pairs, tc, recipe.init_seed(), recipe.sampler().provenance());
}

inline TrainResult train_on(std::span<const Detection> dets, const MetricRecipe& recipe) {
  return train_on(Sequences{dets}, recipe);
}

/// World of sequence `index` in split `split` of a benchmark. Unless the
/// config pins a network seed, every sequence has its own camera network.
inline WorldConfig sequence_world(WorldConfig cfg, std::uint64_t seed, std::uint64_t split, std::uint64_t index) {
  cfg.seed = detail::mix_seed(seed, split, index);
  return cfg;
}

inline constexpr int kDefaultTrainSequences = 96;

/// Training sequences and one held-out test sequence.
struct Benchmark {
  std::vector<SynthDataset> train;
  SynthDataset test;
};

inline Benchmark make_benchmark(const WorldConfig& cfg, std::uint64_t seed, int train_sequences = kDefaultTrainSequences) {
  if (train_sequences < 1) throw Error(ErrorCode::ConfigError, "train_sequences", "must be >= 1");
  Benchmark b;
  for (int q = 0; q < train_sequences; ++q)
    b.train.push_back(generate_world(sequence_world(cfg, seed, 1, static_cast<std::uint64_t>(q))));
  b.test = generate_world(sequence_world(cfg, seed, 2, 0));
  return b;
}

/// Intra-camera recipe at tau_s or inter-camera recipe at tau_m; global
/// sampling ignores the windows.
inline MetricRecipe recipe_for(SamplingScheme scheme, const Profile& p, std::uint64_t seed, double multiplier = 1.0) {
  MetricRecipe r;
  r.scheme = scheme;
  const Frame base = scheme == SamplingScheme::Intra ? p.tau_s : p.tau_m;
  r.tau = std::max<Frame>(1, static_cast<Frame>(std::llround(static_cast<double>(base) * multiplier)));
  r.seed = seed;
  if (scheme == SamplingScheme::Inter) r.tracklet_len = p.tracklet_len;
  return r;
}

inline TrackerConfig tracker_config(const Profile& p, AffinityModel sct, AffinityModel mct, std::uint64_t seed) {
  TrackerConfig cfg;
  cfg.tracklet_len = p.tracklet_len;
  cfg.sct_window = p.sct_window;
  cfg.mct_window = p.mct_window;
  cfg.affinity_sct = std::move(sct);
  cfg.affinity_mct = std::move(mct);
  cfg.seed = seed;
  return cfg;
}

/// Ground-truth identities of a labeled detection list.
inline std::vector<IdentityId> truth_of(std::span<const Detection> dets) {
  std::vector<IdentityId> gt;
  gt.reserve(dets.size());
  for (const auto& d : dets) gt.push_back(d.gt_identity.value_or(kNoIdentity));
  return gt;
}

/// SCT-level ID measures: each camera is scored on its own and the counts
/// are summed before forming ratios.
inline IdReport sct_id_measures(std::span<const Detection> dets, std::span<const IdentityId> hyp) {
  if (dets.size() != hyp.size()) throw Error(ErrorCode::UniverseMismatch, "hypothesis size");
  std::map<CameraId, std::pair<std::vector<IdentityId>, std::vector<IdentityId>>> per_cam;
  for (std::size_t k = 0; k < dets.size(); ++k) {
    auto& [g, h] = per_cam[dets[k].camera];
    g.push_back(dets[k].gt_identity.value_or(kNoIdentity));
    h.push_back(hyp[k]);
  }
  IdReport total;
  std::int64_t gt_n = 0, hyp_n = 0;
  for (const auto& [cam, gh] : per_cam) {
    const auto r = id_measures(gh.first, gh.second);
    total.idtp += r.idtp;
    total.idfp += r.idfp;
    total.idfn += r.idfn;
    gt_n += r.idtp + r.idfn;
    hyp_n += r.idtp + r.idfp;
  }
  if (gt_n == 0 && hyp_n == 0) return IdReport{};
  total.idp = hyp_n > 0 ? static_cast<double>(total.idtp) / static_cast<double>(hyp_n) : 0.0;
  total.idr = gt_n > 0 ? static_cast<double>(total.idtp) / static_cast<double>(gt_n) : 1.0;
  total.idf1 = 2.0 * static_cast<double>(total.idtp) / static_cast<double>(2 * total.idtp + total.idfp + total.idfn);
  return total;
}

}  // namespace mtmct
