// Seeded synthetic camera networks: targets walk between cameras with
// non-overlapping views and emit per-frame detections whose embeddings mix
// identity, camera, illumination, drift and noise terms.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mtmct/core.hpp"

namespace mtmct {

struct CameraLink {
  CameraId a = 0;
  CameraId b = 0;
  Frame travel_min = 20;
  Frame travel_max = 100;
  bool operator==(const CameraLink&) const = default;
};

inline std::vector<CameraLink> ring_links(int n_cameras, Frame travel_min, Frame travel_max) {
  if (n_cameras < 2) return {};
  if (n_cameras == 2) return {{0, 1, travel_min, travel_max}};
  std::vector<CameraLink> links;
  for (int c = 0; c < n_cameras; ++c) links.push_back({c, (c + 1) % n_cameras, travel_min, travel_max});
  return links;
}

struct WorldConfig {
  int n_cameras = 4;
  std::vector<CameraLink> links = ring_links(4, 20, 100);
  int n_targets = 20;
  Frame dwell_min = 40;
  Frame dwell_max = 120;
  int visits_min = 2;
  int visits_max = 4;
  std::size_t feature_dim = 64;
  /// Camera-bias magnitude.
  double alpha = 0.9;
  /// Temporal-drift magnitude.
  double beta = 0.5;
  /// Expected norm of the per-detection noise term.
  double sigma = 0.25;
  double dropout = 0.0;
  std::uint64_t seed = 0;

  /// Targets enter the network uniformly in [0, spawn_span).
  Frame spawn_span = 2600;
  /// Frames until a target's drift saturates.
  Frame drift_scale = 250;
  /// Share of a camera's bias that is static; the rest follows the
  /// network-wide illumination, which decorrelates over `illumination_period`.
  double static_bias_share = 0.5;
  Frame illumination_period = 500;
  /// Identity anchors are drawn around `appearance_groups` shared prototypes
  /// with relative spread `group_spread`.
  int appearance_groups = 3;
  double group_spread = 0.7;
  /// When above `group_spread`, each identity draws its spread uniformly
  /// from [group_spread, group_spread_max].
  double group_spread_max = 0.8;
  /// Seed of the camera network (biases, illumination). Worlds
  /// that share it observe the same cameras. Defaults to `seed`.
  std::optional<std::uint64_t> network_seed;

  std::uint64_t effective_network_seed() const { return network_seed.value_or(seed); }

  /// Upper bound on any frame a target can occupy.
  Frame horizon() const {
    Frame travel = 0;
    for (const auto& l : links) travel = std::max(travel, l.travel_max);
    return spawn_span + static_cast<Frame>(visits_max) * (dwell_max + travel) + 1;
  }

  void validate() const {
    auto fail = [](const char* field, const char* why) { throw Error(ErrorCode::ConfigError, field, why); };
    if (n_cameras < 1) fail("n_cameras", "must be >= 1");
    if (n_targets < 0) fail("n_targets", "must be >= 0");
    if (dwell_min < 1 || dwell_max < dwell_min) fail("dwell_range", "need 1 <= dwell_min <= dwell_max");
    if (visits_min < 1 || visits_max < visits_min) fail("visits_per_target", "need 1 <= visits_min <= visits_max");
    if (feature_dim < 1) fail("feature_dim", "must be >= 1");
    if (alpha < 0.0) fail("alpha", "must be >= 0");
    if (beta < 0.0) fail("beta", "must be >= 0");
    if (sigma < 0.0) fail("sigma", "must be >= 0");
    if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout", "must be in [0, 1)");
    if (spawn_span < 1) fail("spawn_span", "must be >= 1");
    if (drift_scale < 1) fail("drift_scale", "must be >= 1");
    if (!(static_bias_share >= 0.0 && static_bias_share <= 1.0)) fail("static_bias_share", "must be in [0, 1]");
    if (illumination_period < 1) fail("illumination_period", "must be >= 1");
    if (appearance_groups < 1) fail("appearance_groups", "must be >= 1");
    if (group_spread < 0.0) fail("group_spread", "must be >= 0");
    for (const auto& l : links) {
      if (l.a < 0 || l.b < 0 || l.a >= n_cameras || l.b >= n_cameras || l.a == l.b) fail("links", "bad camera index");
      if (l.travel_min < 0 || l.travel_max < l.travel_min) fail("links", "bad travel-time range");
    }
    // Connectivity (a single camera is trivially connected).
    std::vector<int> comp(static_cast<std::size_t>(n_cameras));
    for (int c = 0; c < n_cameras; ++c) comp[static_cast<std::size_t>(c)] = c;
    auto find = [&](int c) {
      while (comp[static_cast<std::size_t>(c)] != c) c = comp[static_cast<std::size_t>(c)];
      return c;
    };
    for (const auto& l : links) comp[static_cast<std::size_t>(find(l.a))] = find(l.b);
    for (int c = 1; c < n_cameras; ++c)
      if (find(c) != find(0)) fail("links", "camera network must be connected");
  }
};

struct GtVisit {
  CameraId camera = 0;
  Frame first = 0;
  Frame last = 0;
  bool operator==(const GtVisit&) const = default;
};

struct SynthDataset {
  std::vector<Detection> detections;
  std::map<IdentityId, std::vector<GtVisit>> gt_tracks;
  WorldConfig config;
};

namespace detail {

inline std::vector<double> random_unit(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double s = 0.0;
  do {
    s = 0.0;
    for (auto& x : v) {
      x = normal(rng);
      s += x * x;
    }
  } while (s < 1e-12);
  const double n = std::sqrt(s);
  for (auto& x : v) x /= n;
  return v;
}

inline FeatureVec to_feature(const std::vector<double>& v) { return normalized_feature(v); }

}  // namespace detail

/// Fixed properties of a camera network (static camera biases, illumination
/// keyframes) plus the appearance prototypes of the world's population.
class CameraNetwork {
 public:
  explicit CameraNetwork(const WorldConfig& cfg) : cfg_(cfg) {
    std::mt19937_64 rng(cfg.effective_network_seed() ^ 0x6E6574776F726B31ULL);
    for (int c = 0; c < cfg.n_cameras; ++c) static_bias_.push_back(detail::random_unit(cfg.feature_dim, rng));
    const Frame keys = cfg.horizon() / cfg.illumination_period + 2;
    for (Frame k = 0; k < keys; ++k) keyframes_.push_back(detail::random_unit(cfg.feature_dim, rng));
    std::mt19937_64 pop(cfg.seed ^ 0x70726F746F747970ULL);
    for (int g = 0; g < cfg.appearance_groups; ++g) prototypes_.push_back(detail::random_unit(cfg.feature_dim, pop));
  }

  /// Unit camera bias at frame t: static part plus the shared illumination,
  /// which interpolates between random keyframes every illumination period.
  FeatureVec camera_bias(CameraId cam, Frame t) const {
    const Frame period = cfg_.illumination_period;
    const auto k = static_cast<std::size_t>(std::clamp<Frame>(t / period, 0, static_cast<Frame>(keyframes_.size()) - 2));
    const double w = static_cast<double>(t - static_cast<Frame>(k) * period) / static_cast<double>(period);
    const double c0 = std::cos(0.5 * std::numbers::pi * w), c1 = std::sin(0.5 * std::numbers::pi * w);
    const double a = cfg_.static_bias_share, b = std::sqrt(std::max(0.0, 1.0 - a * a));
    std::vector<double> v(cfg_.feature_dim);
    const auto& s = static_bias_[static_cast<std::size_t>(cam)];
    for (std::size_t d = 0; d < v.size(); ++d) v[d] = a * s[d] + b * (c0 * keyframes_[k][d] + c1 * keyframes_[k + 1][d]);
    return detail::to_feature(v);
  }

  const std::vector<double>& prototype(std::size_t g) const { return prototypes_[g]; }

 private:
  WorldConfig cfg_;
  std::vector<std::vector<double>> static_bias_;
  std::vector<std::vector<double>> keyframes_;
  std::vector<std::vector<double>> prototypes_;
};

/// normalize(anchor + alpha * camera_bias + beta * d(t) * drift_dir + noise),
/// with d(t) = clamp((t - spawn_t) / drift_scale, 0, 1) and noise drawn as
/// sigma * N(0, I) / sqrt(D).
inline FeatureVec embed(const FeatureVec& identity_anchor, const FeatureVec& camera_bias, Frame t, Frame spawn_t,
                        const FeatureVec& drift_dir, const WorldConfig& cfg, std::mt19937_64& rng) {
  const std::size_t dim = identity_anchor.dim();
  if (camera_bias.dim() != dim || drift_dir.dim() != dim) throw Error(ErrorCode::DimensionMismatch, "embed inputs");
  const double drift = std::clamp(static_cast<double>(t - spawn_t) / static_cast<double>(cfg.drift_scale), 0.0, 1.0);
  const double noise_scale = cfg.sigma / std::sqrt(static_cast<double>(dim));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    double x = identity_anchor.values[d] + cfg.alpha * camera_bias.values[d] + cfg.beta * drift * drift_dir.values[d];
    if (cfg.sigma > 0.0) x += noise_scale * normal(rng);
    v[d] = x;
  }
  return detail::to_feature(v);
}

/// Generates one world. Deterministic in (config, seed, network seed).
inline SynthDataset generate_world(const WorldConfig& cfg) {
  cfg.validate();
  SynthDataset ds;
  ds.config = cfg;
  if (cfg.n_targets == 0) return ds;
  const CameraNetwork net(cfg);

  std::vector<std::vector<const CameraLink*>> adjacency(static_cast<std::size_t>(cfg.n_cameras));
  for (const auto& l : cfg.links) {
    adjacency[static_cast<std::size_t>(l.a)].push_back(&l);
    adjacency[static_cast<std::size_t>(l.b)].push_back(&l);
  }

  for (int id = 0; id < cfg.n_targets; ++id) {
    std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(id) * 0xD1B54A32D192ED03ULL + 1);
    auto uniform_int = [&](Frame lo, Frame hi) { return std::uniform_int_distribution<Frame>(lo, hi)(rng); };
    std::uniform_real_distribution<double> unit01(0.0, 1.0);

    const auto group = static_cast<std::size_t>(uniform_int(0, cfg.appearance_groups - 1));
    const auto& proto = net.prototype(group);
    const auto offset = detail::random_unit(cfg.feature_dim, rng);
    const double spread = cfg.group_spread_max > cfg.group_spread
                              ? std::uniform_real_distribution<double>(cfg.group_spread, cfg.group_spread_max)(rng)
                              : cfg.group_spread;
    std::vector<double> anchor(cfg.feature_dim);
    for (std::size_t d = 0; d < anchor.size(); ++d) anchor[d] = proto[d] + spread * offset[d];
    const FeatureVec g = detail::to_feature(anchor);
    const FeatureVec drift_dir = detail::to_feature(detail::random_unit(cfg.feature_dim, rng));

    auto cam = static_cast<CameraId>(uniform_int(0, cfg.n_cameras - 1));
    Frame t = uniform_int(0, cfg.spawn_span - 1);
    const Frame spawn = t;
    const int visits = static_cast<int>(uniform_int(cfg.visits_min, cfg.visits_max));
    for (int v = 0; v < visits; ++v) {
      const Frame dwell = uniform_int(cfg.dwell_min, cfg.dwell_max);
      const double w = static_cast<double>(uniform_int(40, 80));
      const double x0 = static_cast<double>(uniform_int(0, 1800));
      const double y0 = static_cast<double>(uniform_int(200, 700));
      const double vx = static_cast<double>(uniform_int(-3, 3));
      for (Frame f = t; f < t + dwell; ++f) {
        const bool dropped = cfg.dropout > 0.0 && unit01(rng) < cfg.dropout;
        if (dropped) continue;
        Detection det;
        det.camera = cam;
        det.frame = f;
        det.bbox = {x0 + vx * static_cast<double>(f - t), y0, w, std::round(2.5 * w)};
        det.feature = embed(g, net.camera_bias(cam, f), f, spawn, drift_dir, cfg, rng);
        det.gt_identity = id;
        ds.detections.push_back(std::move(det));
      }
      ds.gt_tracks[id].push_back({cam, t, t + dwell - 1});
      if (v + 1 == visits) break;
      const auto& options = adjacency[static_cast<std::size_t>(cam)];
      if (options.empty()) {
        t += dwell;
        continue;
      }
      const CameraLink* link = options[static_cast<std::size_t>(uniform_int(0, static_cast<Frame>(options.size()) - 1))];
      cam = link->a == cam ? link->b : link->a;
      t += dwell + uniform_int(link->travel_min, link->travel_max);
    }
  }
  std::stable_sort(ds.detections.begin(), ds.detections.end(), [](const Detection& a, const Detection& b) {
    if (a.camera != b.camera) return a.camera < b.camera;
    if (a.frame != b.frame) return a.frame < b.frame;
    return *a.gt_identity < *b.gt_identity;
  });
  return ds;
}

/// Ground-truth pair drawn for scope analysis; indices into the detection list.
struct ScopePair {
  std::size_t i = 0;
  std::size_t j = 0;
  bool same_identity = false;
};

/// Pairs eligible under `scope`. All of them when at most `max_pairs` exist,
/// otherwise `max_pairs` uniform draws (with replacement).
inline std::vector<ScopePair> scope_pair_iter(std::span<const Detection> dets, const ScopeSpec& scope,
                                              std::uint64_t seed, std::size_t max_pairs) {
  scope.validate();
  const std::size_t n = dets.size();
  for (const auto& d : dets)
    if (!d.gt_identity) throw Error(ErrorCode::InvalidArgument, "gt_identity", "scope analysis needs labeled detections");
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dets[a].frame < dets[b].frame; });

  auto make = [&](std::size_t p, std::size_t q) {
    const std::size_t i = order[p], j = order[q];
    return ScopePair{i, j, *dets[i].gt_identity == *dets[j].gt_identity};
  };
  auto admits = [&](std::size_t p, std::size_t q) {
    const auto& a = dets[order[p]];
    const auto& b = dets[order[q]];
    return scope.admits(a.camera, a.frame, b.camera, b.frame);
  };
  // For position p, eligible partners lie in (p, end[p]).
  std::vector<std::size_t> end(n, n);
  if (scope.window_len != kUnboundedFrames) {
    std::size_t e = 0;
    for (std::size_t p = 0; p < n; ++p) {
      e = std::max(e, p + 1);
      while (e < n && dets[order[e]].frame - dets[order[p]].frame <= scope.window_len) ++e;
      end[p] = e;
    }
  }
  std::vector<std::uint64_t> cum(n + 1, 0);
  for (std::size_t p = 0; p < n; ++p) {
    std::uint64_t c = 0;
    if (scope.camera_rule == CameraRule::Any) {
      c = end[p] - std::min(end[p], p + 1);
    } else {
      for (std::size_t q = p + 1; q < end[p]; ++q) c += admits(p, q);
    }
    cum[p + 1] = cum[p] + c;
  }

  std::vector<ScopePair> out;
  if (cum[n] <= max_pairs) {
    out.reserve(cum[n]);
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < end[p]; ++q)
        if (admits(p, q)) out.push_back(make(p, q));
    return out;
  }
  std::mt19937_64 rng(seed);
  out.reserve(max_pairs);
  for (std::size_t k = 0; k < max_pairs; ++k) {
    const std::uint64_t r = std::uniform_int_distribution<std::uint64_t>(0, cum[n] - 1)(rng);
    const std::size_t p = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), r) - cum.begin()) - 1;
    std::size_t q = p;
    do {
      q = std::uniform_int_distribution<std::size_t>(p + 1, end[p] - 1)(rng);
    } while (!admits(p, q));
    out.push_back(make(p, q));
  }
  return out;
}

}  // namespace mtmct
