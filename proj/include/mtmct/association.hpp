// Data association: correlation clustering over affinity matrices and the
// hierarchical tracker (detections -> tracklets -> single-camera
// trajectories -> multi-camera identities) over sliding temporal windows.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "mtmct/affinity.hpp"
#include "mtmct/core.hpp"

namespace mtmct {

// ---------------------------------------------------------------------------
// Correlation clustering
// ---------------------------------------------------------------------------

/// Clustering of n items; cluster ids are 0..k-1, numbered by first
/// occurrence. Encodes x_ij = +1 iff i and j share a cluster.
struct Partition {
  std::vector<int> assignment;

  std::size_t size() const noexcept { return assignment.size(); }

  int cluster_count() const noexcept {
    int k = 0;
    for (int c : assignment) k = std::max(k, c + 1);
    return k;
  }

  /// Relabels clusters by order of first occurrence.
  static Partition canonical(std::span<const int> labels) {
    Partition p;
    p.assignment.resize(labels.size());
    std::map<int, int> remap;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      auto [it, inserted] = remap.emplace(labels[i], static_cast<int>(remap.size()));
      p.assignment[i] = it->second;
    }
    return p;
  }

  static Partition singletons(std::size_t n) {
    Partition p;
    p.assignment.resize(n);
    std::iota(p.assignment.begin(), p.assignment.end(), 0);
    return p;
  }

  static Partition single_cluster(std::size_t n) {
    Partition p;
    p.assignment.assign(n, 0);
    return p;
  }

  std::vector<std::vector<std::size_t>> clusters() const {
    std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(cluster_count()));
    for (std::size_t i = 0; i < assignment.size(); ++i) out[static_cast<std::size_t>(assignment[i])].push_back(i);
    return out;
  }

  bool operator==(const Partition&) const = default;
};

inline constexpr std::size_t kDefaultExactCap = 12;

/// Sum over unordered pairs i < j of x_ij * a_ij.
inline double cc_objective(const AffinityMatrix& a, const Partition& p) {
  if (p.size() != a.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "partition " + std::to_string(p.size()) + " vs matrix " + std::to_string(a.size()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j)
      total += (p.assignment[i] == p.assignment[j] ? 1.0 : -1.0) * a(i, j);
  return total;
}

namespace detail {

inline constexpr double kObjectiveTol = 1e-12;

inline double total_affinity(const AffinityMatrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) s += a(i, j);
  return s;
}

/// Branch-and-bound over restricted-growth strings. Maximizes the
/// within-cluster affinity sum W (objective = 2W - total).
class ExactSearch {
 public:
  explicit ExactSearch(const AffinityMatrix& a) : a_(a), n_(a.size()), cur_(n_, 0), bound_(n_ + 1, 0.0) {
    for (std::size_t k = n_; k-- > 0;) {
      double pos = 0.0;
      for (std::size_t j = 0; j < k; ++j) pos += std::max(0.0, a_(k, j));
      bound_[k] = bound_[k + 1] + pos;
    }
    members_.resize(n_);
  }

  Partition run() {
    if (n_ == 0) return {};
    cur_[0] = 0;
    members_[0].push_back(0);
    dfs(1, 1, 0.0);
    Partition p;
    p.assignment = best_;
    return p;
  }

 private:
  void dfs(std::size_t k, int used, double w) {
    if (k == n_) {
      if (best_.empty() || w > best_w_ + kObjectiveTol ||
          (std::fabs(w - best_w_) <= kObjectiveTol && used < best_k_)) {
        best_w_ = w;
        best_k_ = used;
        best_ = cur_;
      }
      return;
    }
    if (!best_.empty() && w + bound_[k] < best_w_ - kObjectiveTol) return;
    for (int c = 0; c <= used; ++c) {
      double gain = 0.0;
      if (c < used) {
        for (std::size_t j : members_[static_cast<std::size_t>(c)]) gain += a_(k, j);
      }
      cur_[k] = c;
      members_[static_cast<std::size_t>(c)].push_back(k);
      dfs(k + 1, c == used ? used + 1 : used, w + gain);
      members_[static_cast<std::size_t>(c)].pop_back();
    }
  }

  const AffinityMatrix& a_;
  std::size_t n_;
  std::vector<int> cur_;
  std::vector<double> bound_;
  std::vector<std::vector<std::size_t>> members_;
  std::vector<int> best_;
  double best_w_ = -std::numeric_limits<double>::infinity();
  int best_k_ = 0;
};

/// Single-item relocation to a local optimum. Items are visited in `order`.
inline void relocate_until_stable(const AffinityMatrix& a, std::vector<int>& label, std::span<const std::size_t> order) {
  const std::size_t n = a.size();
  for (int pass = 0; pass < 100; ++pass) {
    bool moved = false;
    for (std::size_t i : order) {
      int k = 0;
      for (int c : label) k = std::max(k, c + 1);
      std::vector<double> to(static_cast<std::size_t>(k), 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) to[static_cast<std::size_t>(label[j])] += a(i, j);
      }
      const int own = label[i];
      double best = to[static_cast<std::size_t>(own)];
      int target = own;
      bool alone = true;
      for (std::size_t j = 0; j < n && alone; ++j) alone = (j == i) || label[j] != own;
      // Moving to an empty cluster contributes 0.
      if (!alone && 0.0 > best + kObjectiveTol) {
        best = 0.0;
        target = k;
      }
      for (int c = 0; c < k; ++c) {
        if (c != own && to[static_cast<std::size_t>(c)] > best + kObjectiveTol) {
          best = to[static_cast<std::size_t>(c)];
          target = c;
        }
      }
      if (target != own) {
        label[i] = target;
        moved = true;
      }
    }
    // Merge any cluster pair with positive inter-cluster sum.
    const auto cl = Partition::canonical(label);
    label = cl.assignment;
    const auto groups = cl.clusters();
    double best_gain = kObjectiveTol;
    std::pair<int, int> merge{-1, -1};
    for (std::size_t p = 0; p < groups.size(); ++p) {
      for (std::size_t q = p + 1; q < groups.size(); ++q) {
        double s = 0.0;
        for (std::size_t i : groups[p])
          for (std::size_t j : groups[q]) s += a(i, j);
        if (s > best_gain) {
          best_gain = s;
          merge = {static_cast<int>(p), static_cast<int>(q)};
        }
      }
    }
    if (merge.first >= 0) {
      for (auto& c : label)
        if (c == merge.second) c = merge.first;
      label = Partition::canonical(label).assignment;
      moved = true;
    }
    if (!moved) break;
  }
}

/// Greedy agglomeration: repeatedly merge the cluster pair with the largest
/// positive inter-cluster affinity sum.
inline std::vector<int> greedy_agglomerate(const AffinityMatrix& a) {
  const std::size_t n = a.size();
  std::vector<double> s(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s[i * n + j] = i == j ? 0.0 : a(i, j);
  std::vector<bool> active(n, true);
  std::vector<int> label(n);
  std::iota(label.begin(), label.end(), 0);
  for (;;) {
    double best = kObjectiveTol;
    std::size_t bp = n, bq = n;
    for (std::size_t p = 0; p < n; ++p) {
      if (!active[p]) continue;
      for (std::size_t q = p + 1; q < n; ++q) {
        if (active[q] && s[p * n + q] > best) {
          best = s[p * n + q];
          bp = p;
          bq = q;
        }
      }
    }
    if (bp == n) break;
    active[bq] = false;
    for (std::size_t r = 0; r < n; ++r) {
      if (!active[r] || r == bp) continue;
      s[bp * n + r] += s[bq * n + r];
      s[r * n + bp] = s[bp * n + r];
    }
    for (auto& c : label)
      if (c == static_cast<int>(bq)) c = static_cast<int>(bp);
  }
  return label;
}

}  // namespace detail

/// Exhaustive maximizer of cc_objective over all set partitions. Ties prefer
/// fewer clusters, then the lexicographically smallest assignment.
inline Partition solve_cc_exact(const AffinityMatrix& a, std::size_t cap = kDefaultExactCap) {
  if (a.size() > cap) {
    throw Error(ErrorCode::TooLargeForExact, "n=" + std::to_string(a.size()) + " cap=" + std::to_string(cap));
  }
  return detail::ExactSearch(a).run();
}

/// Greedy agglomeration plus relocation local search, restarted from a few
/// seeded random partitions; never worse than all-singletons or one cluster.
inline Partition solve_cc_heuristic(const AffinityMatrix& a, std::uint64_t seed, int restarts = 16) {
  const std::size_t n = a.size();
  if (n == 0) return {};
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  Partition best = Partition::singletons(n);
  double best_obj = cc_objective(a, best);
  auto consider = [&](const std::vector<int>& labels) {
    Partition p = Partition::canonical(labels);
    const double obj = cc_objective(a, p);
    if (obj > best_obj + detail::kObjectiveTol ||
        (std::fabs(obj - best_obj) <= detail::kObjectiveTol && p.cluster_count() < best.cluster_count())) {
      best = std::move(p);
      best_obj = obj;
    }
  };
  consider(Partition::single_cluster(n).assignment);

  std::vector<int> labels = detail::greedy_agglomerate(a);
  detail::relocate_until_stable(a, labels, order);
  consider(labels);

  for (int r = 0; r < restarts && n > 2; ++r) {
    std::shuffle(order.begin(), order.end(), rng);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(std::min<std::size_t>(n, 4)) - 1);
    for (auto& c : labels) c = pick(rng);
    detail::relocate_until_stable(a, labels, order);
    consider(labels);
  }
  return best;
}

/// Exact search up to `cap` items, heuristic above.
inline Partition solve_cc(const AffinityMatrix& a, std::size_t cap, std::uint64_t seed) {
  return a.size() <= cap ? solve_cc_exact(a, cap) : solve_cc_heuristic(a, seed);
}

// ---------------------------------------------------------------------------
// Hierarchical tracker
// ---------------------------------------------------------------------------

struct TrackerConfig {
  Frame tracklet_len = 10;
  Frame sct_window = 150;
  Frame mct_window = 500;
  double stride_ratio = 0.5;
  AffinityModel affinity_sct = OracleAffinity{};
  AffinityModel affinity_mct = OracleAffinity{};
  std::size_t exact_solver_cap = kDefaultExactCap;
  std::uint64_t seed = 0;

  void validate() const {
    if (tracklet_len <= 0) throw Error(ErrorCode::ConfigError, "tracklet_len", "must be positive");
    if (tracklet_len > sct_window) throw Error(ErrorCode::ConfigError, "sct_window", "must be >= tracklet_len");
    if (sct_window > mct_window) throw Error(ErrorCode::ConfigError, "mct_window", "must be >= sct_window");
    if (!(stride_ratio > 0.0 && stride_ratio <= 1.0)) {
      throw Error(ErrorCode::ConfigError, "stride_ratio", "must be in (0, 1]");
    }
  }

  static Frame stride_of(Frame window, double ratio) {
    return std::max<Frame>(1, static_cast<Frame>(std::llround(static_cast<double>(window) * ratio)));
  }
};

/// Identity per input detection, aligned with the input order.
using Hypothesis = std::vector<IdentityId>;

namespace detail {

/// Majority ground-truth label over `members` (smallest id on ties).
inline std::optional<IdentityId> majority_label(std::span<const Detection> dets, std::span<const std::size_t> members) {
  std::map<IdentityId, std::size_t> votes;
  for (std::size_t m : members) {
    if (dets[m].gt_identity) ++votes[*dets[m].gt_identity];
  }
  if (votes.empty()) return std::nullopt;
  auto best = votes.begin();
  for (auto it = votes.begin(); it != votes.end(); ++it)
    if (it->second > best->second) best = it;
  return best->first;
}

inline std::vector<std::size_t> trajectory_members(const Trajectory& t) {
  std::vector<std::size_t> m;
  for (const auto& tr : t.tracklets) m.insert(m.end(), tr.members.begin(), tr.members.end());
  return m;
}

inline Tracklet make_tracklet(std::span<const Detection> dets, std::vector<std::size_t> members) {
  std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].frame != dets[b].frame ? dets[a].frame < dets[b].frame : a < b;
  });
  Tracklet t;
  t.camera = dets[members.front()].camera;
  t.first_frame = dets[members.front()].frame;
  t.last_frame = dets[members.back()].frame;
  std::vector<FeatureVec> feats;
  feats.reserve(members.size());
  for (std::size_t m : members) feats.push_back(dets[m].feature);
  t.feature = pool_feature(feats);
  t.members = std::move(members);
  return t;
}

inline Trajectory make_trajectory(std::vector<Tracklet> tracklets) {
  std::sort(tracklets.begin(), tracklets.end(), [](const Tracklet& a, const Tracklet& b) {
    if (a.first_frame != b.first_frame) return a.first_frame < b.first_frame;
    if (a.camera != b.camera) return a.camera < b.camera;
    return a.members.front() < b.members.front();
  });
  Trajectory t;
  std::vector<FeatureVec> feats;
  for (const auto& tr : tracklets) {
    feats.push_back(tr.feature);
    t.camera_set.insert(tr.camera);
  }
  t.feature = pool_feature(feats);
  t.tracklets = std::move(tracklets);
  return t;
}

/// True when the two trajectories hold same-camera tracklets with
/// intersecting frame spans.
inline bool same_camera_overlap(const Trajectory& a, const Trajectory& b) {
  for (const auto& x : a.tracklets)
    for (const auto& y : b.tracklets)
      if (x.camera == y.camera && x.first_frame <= y.last_frame && y.first_frame <= x.last_frame) return true;
  return false;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = seed ^ (a * 0x9E3779B97F4A7C15ULL) ^ (b + 0xBF58476D1CE4E5B9ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// One iteration of windowed trajectory growth: clusters `items` and merges
/// each cluster into one trajectory. Same-camera overlapping items never
/// share a cluster.
inline std::vector<Trajectory> associate_items(std::span<const Detection> dets, std::vector<Trajectory> items,
                                               const AffinityModel& model, std::size_t cap, std::uint64_t seed) {
  const std::size_t n = items.size();
  if (n <= 1) return items;
  std::vector<std::optional<IdentityId>> labels(n);
  if (std::holds_alternative<OracleAffinity>(model)) {
    for (std::size_t i = 0; i < n; ++i) labels[i] = majority_label(dets, trajectory_members(items[i]));
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<std::vector<bool>> overlap(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) overlap[i][j] = overlap[j][i] = same_camera_overlap(items[i], items[j]);

  const AffinityMatrix a = build_affinity_matrix<std::size_t>(idx, [&](std::size_t i, std::size_t j) {
    if (overlap[i][j]) return -1.0;
    return score_pair(model, items[i].feature, items[j].feature, labels[i], labels[j]);
  });
  const Partition p = solve_cc(a, cap, seed);

  std::vector<Trajectory> out;
  for (const auto& cluster : p.clusters()) {
    // Split any cluster that still holds overlapping items: each item joins
    // the first compatible group with positive mean affinity.
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t i : cluster) {
      std::size_t chosen = groups.size();
      double chosen_score = 0.0;
      for (std::size_t g = 0; g < groups.size(); ++g) {
        bool ok = true;
        double s = 0.0;
        for (std::size_t j : groups[g]) {
          ok = ok && !overlap[i][j];
          s += a(i, j);
        }
        s /= static_cast<double>(groups[g].size());
        if (ok && s > chosen_score) {
          chosen = g;
          chosen_score = s;
        }
      }
      if (chosen == groups.size()) groups.emplace_back();
      groups[chosen].push_back(i);
    }
    for (const auto& g : groups) {
      if (g.size() == 1) {
        out.push_back(std::move(items[g.front()]));
        continue;
      }
      std::vector<Tracklet> tracklets;
      for (std::size_t i : g)
        for (auto& t : items[i].tracklets) tracklets.push_back(std::move(t));
      out.push_back(make_trajectory(std::move(tracklets)));
    }
  }
  return out;
}

/// Sliding-window growth of trajectories. `units` are the items to be
/// linked, each assigned in the first window containing its first frame;
/// earlier trajectories still active in a window are re-offered to it.
inline std::vector<Trajectory> sliding_window_link(std::span<const Detection> dets, std::vector<Trajectory> units,
                                                   Frame window, double stride_ratio, const AffinityModel& model,
                                                   std::size_t cap, std::uint64_t seed) {
  if (units.empty()) return {};
  std::stable_sort(units.begin(), units.end(),
                   [](const Trajectory& a, const Trajectory& b) { return a.first_frame() < b.first_frame(); });
  const Frame first = units.front().first_frame();
  const Frame last = units.back().first_frame();
  const auto windows = windows_over(first, last, window, TrackerConfig::stride_of(window, stride_ratio));

  std::vector<Trajectory> closed;
  std::vector<Trajectory> open;
  std::size_t next = 0;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto& win = windows[w];
    std::vector<Trajectory> items;
    for (auto& t : open) {
      if (t.last_frame() >= win.start) {
        items.push_back(std::move(t));
      } else {
        closed.push_back(std::move(t));
      }
    }
    while (next < units.size() && units[next].first_frame() < win.end()) items.push_back(std::move(units[next++]));
    open = associate_items(dets, std::move(items), model, cap, mix_seed(seed, w, 0));
  }
  while (next < units.size()) open.push_back(std::move(units[next++]));
  for (auto& t : open) closed.push_back(std::move(t));
  return closed;
}

inline std::uint64_t camera_seed(std::uint64_t seed, CameraId cam) {
  return mix_seed(seed, static_cast<std::uint64_t>(cam) + 1, 17);
}

}  // namespace detail

/// Splits each camera's timeline into consecutive tracklet_len spans and
/// clusters the detections of each span into tracklets.
inline std::vector<Tracklet> form_tracklets(std::span<const Detection> dets, const TrackerConfig& cfg,
                                            const AffinityModel& model) {
  cfg.validate();
  std::map<CameraId, std::vector<std::size_t>> by_camera;
  for (std::size_t i = 0; i < dets.size(); ++i) by_camera[dets[i].camera].push_back(i);

  std::vector<Tracklet> out;
  const bool oracle = std::holds_alternative<OracleAffinity>(model);
  for (auto& [cam, idx] : by_camera) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return dets[a].frame < dets[b].frame; });
    const Frame origin = dets[idx.front()].frame;
    std::size_t pos = 0;
    std::uint64_t span_no = 0;
    while (pos < idx.size()) {
      const Frame span_id = (dets[idx[pos]].frame - origin) / cfg.tracklet_len;
      std::vector<std::size_t> span;
      while (pos < idx.size() && (dets[idx[pos]].frame - origin) / cfg.tracklet_len == span_id) span.push_back(idx[pos++]);
      ++span_no;

      const std::size_t n = span.size();
      auto label_of = [&](std::size_t i) { return oracle ? dets[span[i]].gt_identity : std::nullopt; };
      std::vector<std::size_t> local(n);
      std::iota(local.begin(), local.end(), 0);
      const AffinityMatrix a = build_affinity_matrix<std::size_t>(local, [&](std::size_t i, std::size_t j) {
        if (dets[span[i]].frame == dets[span[j]].frame) return -1.0;
        return score_pair(model, dets[span[i]].feature, dets[span[j]].feature, label_of(i), label_of(j));
      });
      std::vector<int> label =
          n == 1 ? std::vector<int>{0}
                 : solve_cc(a, cfg.exact_solver_cap, detail::mix_seed(cfg.seed, static_cast<std::uint64_t>(cam), span_no))
                       .assignment;

      // Resolve clusters holding two detections of one frame: keep the one
      // closest to the cluster mean, move the other to its next-best cluster.
      auto cluster_score = [&](std::size_t i, int c) {
        std::vector<FeatureVec> feats;
        std::vector<std::size_t> mem;
        for (std::size_t j = 0; j < n; ++j) {
          if (label[j] == c && j != i) {
            feats.push_back(dets[span[j]].feature);
            mem.push_back(span[j]);
          }
        }
        if (feats.empty()) return -std::numeric_limits<double>::infinity();
        const auto mean_label = oracle ? detail::majority_label(dets, mem) : std::nullopt;
        return score_pair(model, dets[span[i]].feature, pool_feature(feats), label_of(i), mean_label);
      };
      for (bool changed = true; changed;) {
        changed = false;
        const int k = *std::max_element(label.begin(), label.end()) + 1;
        for (int c = 0; c < k && !changed; ++c) {
          std::map<Frame, std::vector<std::size_t>> frames;
          for (std::size_t i = 0; i < n; ++i)
            if (label[i] == c) frames[dets[span[i]].frame].push_back(i);
          for (auto& [f, members] : frames) {
            if (members.size() < 2) continue;
            std::size_t keep = members.front();
            double keep_score = cluster_score(keep, c);
            for (std::size_t i : members) {
              const double s = cluster_score(i, c);
              if (s > keep_score) {
                keep = i;
                keep_score = s;
              }
            }
            int fresh = k;
            for (std::size_t i : members) {
              if (i == keep) continue;
              int target = -1;
              double target_score = 0.0;
              for (int c2 = 0; c2 < fresh; ++c2) {
                if (c2 == c) continue;
                bool clash = false;
                for (std::size_t j = 0; j < n && !clash; ++j)
                  clash = label[j] == c2 && dets[span[j]].frame == f;
                if (clash) continue;
                const double s = cluster_score(i, c2);
                if (s > target_score) {
                  target = c2;
                  target_score = s;
                }
              }
              label[i] = target >= 0 ? target : fresh++;
            }
            changed = true;
            break;
          }
        }
      }

      const Partition p = Partition::canonical(label);
      for (const auto& cluster : p.clusters()) {
        std::vector<std::size_t> members;
        for (std::size_t i : cluster) members.push_back(span[i]);
        out.push_back(detail::make_tracklet(dets, std::move(members)));
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const Tracklet& a, const Tracklet& b) {
    if (a.camera != b.camera) return a.camera < b.camera;
    if (a.first_frame != b.first_frame) return a.first_frame < b.first_frame;
    return a.members.front() < b.members.front();
  });
  return out;
}

/// Links the tracklets of one camera into single-camera trajectories.
inline std::vector<Trajectory> sct_pass(std::span<const Detection> dets, std::span<const Tracklet> tracklets,
                                        const TrackerConfig& cfg, const AffinityModel& model) {
  cfg.validate();
  std::vector<Trajectory> units;
  units.reserve(tracklets.size());
  for (const auto& t : tracklets) units.push_back(detail::make_trajectory({t}));
  const CameraId cam = tracklets.empty() ? 0 : tracklets.front().camera;
  return detail::sliding_window_link(dets, std::move(units), cfg.sct_window, cfg.stride_ratio, model,
                                     cfg.exact_solver_cap, detail::camera_seed(cfg.seed, cam));
}

/// Links single-camera trajectories across cameras and assigns identities
/// 0..k-1 in order of first appearance.
inline std::vector<Trajectory> mct_pass(std::span<const Detection> dets, std::vector<Trajectory> trajectories,
                                        const TrackerConfig& cfg, const AffinityModel& model) {
  cfg.validate();
  auto out = detail::sliding_window_link(dets, std::move(trajectories), cfg.mct_window, cfg.stride_ratio, model,
                                         cfg.exact_solver_cap, detail::mix_seed(cfg.seed, 0xC0FFEE, 3));
  std::sort(out.begin(), out.end(), [](const Trajectory& a, const Trajectory& b) {
    if (a.first_frame() != b.first_frame()) return a.first_frame() < b.first_frame();
    return a.tracklets.front().members.front() < b.tracklets.front().members.front();
  });
  for (std::size_t k = 0; k < out.size(); ++k) out[k].identity = static_cast<IdentityId>(k);
  return out;
}

/// Full pipeline: tracklets per camera, SCT per camera, then MCT. Every input
/// detection receives exactly one identity.
inline Hypothesis run_tracker(std::span<const Detection> dets, const TrackerConfig& cfg) {
  cfg.validate();
  Hypothesis hyp(dets.size(), kNoIdentity);
  if (dets.empty()) return hyp;
  const auto tracklets = form_tracklets(dets, cfg, cfg.affinity_sct);
  std::vector<Trajectory> sct;
  std::size_t b = 0;
  while (b < tracklets.size()) {
    std::size_t e = b;
    while (e < tracklets.size() && tracklets[e].camera == tracklets[b].camera) ++e;
    auto part = sct_pass(dets, std::span<const Tracklet>(tracklets).subspan(b, e - b), cfg, cfg.affinity_sct);
    for (auto& t : part) sct.push_back(std::move(t));
    b = e;
  }
  const auto identities = mct_pass(dets, std::move(sct), cfg, cfg.affinity_mct);
  for (const auto& t : identities)
    for (const auto& tr : t.tracklets)
      for (std::size_t m : tr.members) {
        if (hyp[m] != kNoIdentity) throw Error(ErrorCode::InvalidArgument, "detection " + std::to_string(m), "assigned twice");
        hyp[m] = t.identity;
      }
  for (std::size_t m = 0; m < hyp.size(); ++m)
    if (hyp[m] == kNoIdentity) throw Error(ErrorCode::InvalidArgument, "detection " + std::to_string(m), "unassigned");
  return hyp;
}

}  // namespace mtmct
