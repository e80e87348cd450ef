// Identity-aware tracking measures (IDF1 / IDP / IDR), pairwise scope error
// analysis and affinity histograms.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "mtmct/affinity.hpp"
#include "mtmct/core.hpp"
#include "mtmct/synthgen.hpp"

namespace mtmct {

// ---------------------------------------------------------------------------
// Hungarian algorithm
// ---------------------------------------------------------------------------

/// Minimum-cost perfect assignment on a square cost table (row-major n x n).
/// Returns the column assigned to each row. O(n^3) shortest augmenting path.
template <class T>
std::vector<std::size_t> hungarian(std::span<const T> cost, std::size_t n) {
  if (cost.size() != n * n) throw Error(ErrorCode::DimensionMismatch, "cost table is not n x n");
  const T inf = std::numeric_limits<T>::max() / 4;
  std::vector<T> u(n + 1, 0), v(n + 1, 0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      T delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const T cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

// ---------------------------------------------------------------------------
// ID measures
// ---------------------------------------------------------------------------

struct IdReport {
  std::int64_t idtp = 0;
  std::int64_t idfp = 0;
  std::int64_t idfn = 0;
  double idf1 = 1.0;
  double idp = 1.0;
  double idr = 1.0;
};

/// ID measures over a shared detection universe. `gt[k]` is the true identity
/// of detection k; `hyp[k]` its computed identity or kNoIdentity when the
/// hypothesis does not cover it.
///
/// Truth and computed identities are matched one-to-one by a minimum-cost
/// assignment in which matching g to h costs the detections they disagree on
/// and dummy rows/columns absorb unmatched identities.
inline IdReport id_measures(std::span<const IdentityId> gt, std::span<const IdentityId> hyp) {
  if (gt.size() != hyp.size()) {
    throw Error(ErrorCode::UniverseMismatch, "sizes " + std::to_string(gt.size()) + " vs " + std::to_string(hyp.size()));
  }
  std::map<IdentityId, std::size_t> gt_index, hyp_index;
  for (std::size_t k = 0; k < gt.size(); ++k) {
    if (gt[k] == kNoIdentity) throw Error(ErrorCode::UniverseMismatch, "detection " + std::to_string(k), "unlabeled truth");
    gt_index.emplace(gt[k], gt_index.size());
    if (hyp[k] != kNoIdentity) hyp_index.emplace(hyp[k], hyp_index.size());
  }
  const std::size_t G = gt_index.size(), H = hyp_index.size();
  std::vector<std::int64_t> gt_size(G, 0), hyp_size(H, 0);
  std::map<std::pair<std::size_t, std::size_t>, std::int64_t> overlap;
  for (std::size_t k = 0; k < gt.size(); ++k) {
    const std::size_t g = gt_index.at(gt[k]);
    ++gt_size[g];
    if (hyp[k] == kNoIdentity) continue;
    const std::size_t h = hyp_index.at(hyp[k]);
    ++hyp_size[h];
    ++overlap[{g, h}];
  }
  std::int64_t total_gt = 0, total_hyp = 0;
  for (auto s : gt_size) total_gt += s;
  for (auto s : hyp_size) total_hyp += s;

  IdReport r;
  if (total_gt == 0 && total_hyp == 0) return r;

  // Rows: truth identities then dummies; columns: computed identities then dummies.
  const std::size_t n = G + H;
  const std::int64_t big = total_gt + total_hyp + 1;
  std::vector<std::int64_t> cost(n * n, 0);
  for (std::size_t g = 0; g < G; ++g) {
    for (std::size_t h = 0; h < H; ++h) {
      const auto it = overlap.find({g, h});
      const std::int64_t ov = it == overlap.end() ? 0 : it->second;
      cost[g * n + h] = gt_size[g] + hyp_size[h] - 2 * ov;
    }
    for (std::size_t d = 0; d < G; ++d) cost[g * n + H + d] = d == g ? gt_size[g] : big;
  }
  for (std::size_t d = 0; d < H; ++d) {
    for (std::size_t h = 0; h < H; ++h) cost[(G + d) * n + h] = d == h ? hyp_size[h] : big;
    // dummy-dummy cells stay 0
  }
  const auto assign = hungarian<std::int64_t>(cost, n);
  for (std::size_t g = 0; g < G; ++g) {
    const std::size_t h = assign[g];
    if (h < H) {
      const auto it = overlap.find({g, h});
      if (it != overlap.end()) r.idtp += it->second;
    }
  }
  r.idfn = total_gt - r.idtp;
  r.idfp = total_hyp - r.idtp;
  r.idp = total_hyp > 0 ? static_cast<double>(r.idtp) / static_cast<double>(total_hyp) : 0.0;
  r.idr = total_gt > 0 ? static_cast<double>(r.idtp) / static_cast<double>(total_gt) : 1.0;
  r.idf1 = 2.0 * static_cast<double>(r.idtp) / static_cast<double>(2 * r.idtp + r.idfp + r.idfn);
  return r;
}

/// Exact detection key used to match truth and hypothesis records.
struct DetectionKey {
  CameraId camera = 0;
  Frame frame = 0;
  BBox bbox;

  auto tie() const { return std::tuple(camera, frame, bbox.x, bbox.y, bbox.w, bbox.h); }
  bool operator<(const DetectionKey& o) const { return tie() < o.tie(); }
  bool operator==(const DetectionKey& o) const { return tie() == o.tie(); }
};

struct KeyedIdentity {
  DetectionKey key;
  IdentityId identity = kNoIdentity;
};

/// ID measures over keyed records. Every hypothesis key must exist in the
/// truth universe; truth records without a hypothesis count as misses.
inline IdReport id_measures(std::span<const KeyedIdentity> gt, std::span<const KeyedIdentity> hyp) {
  std::map<DetectionKey, std::size_t> index;
  std::vector<IdentityId> g, h;
  for (const auto& r : gt) {
    if (!index.emplace(r.key, g.size()).second) {
      throw Error(ErrorCode::UniverseMismatch, "duplicate truth key at frame " + std::to_string(r.key.frame));
    }
    g.push_back(r.identity);
  }
  h.assign(g.size(), kNoIdentity);
  for (const auto& r : hyp) {
    const auto it = index.find(r.key);
    if (it == index.end()) {
      throw Error(ErrorCode::UniverseMismatch, "camera " + std::to_string(r.key.camera) + " frame " +
                                                   std::to_string(r.key.frame), "hypothesis key not in truth");
    }
    h[it->second] = r.identity;
  }
  return id_measures(g, h);
}

/// Intersection-over-union of two boxes.
inline double iou(const BBox& a, const BBox& b) {
  const double x1 = std::max(a.x, b.x), y1 = std::max(a.y, b.y);
  const double x2 = std::min(a.x + a.w, b.x + b.w), y2 = std::min(a.y + a.h, b.y + b.h);
  const double inter = std::max(0.0, x2 - x1) * std::max(0.0, y2 - y1);
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

/// Re-keys hypothesis records onto truth keys by per-frame IoU matching
/// (threshold `min_iou`, Hungarian on 1 - IoU). Unmatched hypothesis records
/// are dropped and reported through `unmatched`.
inline std::vector<KeyedIdentity> match_by_iou(std::span<const KeyedIdentity> gt, std::span<const KeyedIdentity> hyp,
                                               double min_iou = 0.5, std::size_t* unmatched = nullptr) {
  std::map<std::pair<CameraId, Frame>, std::vector<std::size_t>> gt_at, hyp_at;
  for (std::size_t k = 0; k < gt.size(); ++k) gt_at[{gt[k].key.camera, gt[k].key.frame}].push_back(k);
  for (std::size_t k = 0; k < hyp.size(); ++k) hyp_at[{hyp[k].key.camera, hyp[k].key.frame}].push_back(k);
  std::vector<KeyedIdentity> out;
  std::size_t dropped = 0;
  for (const auto& [slot, hs] : hyp_at) {
    const auto git = gt_at.find(slot);
    if (git == gt_at.end()) {
      dropped += hs.size();
      continue;
    }
    const auto& gs = git->second;
    const std::size_t n = std::max(gs.size(), hs.size());
    std::vector<double> cost(n * n, 1.0);
    for (std::size_t a = 0; a < hs.size(); ++a)
      for (std::size_t b = 0; b < gs.size(); ++b) cost[a * n + b] = 1.0 - iou(hyp[hs[a]].key.bbox, gt[gs[b]].key.bbox);
    const auto assign = hungarian<double>(cost, n);
    for (std::size_t a = 0; a < hs.size(); ++a) {
      const std::size_t b = assign[a];
      if (b < gs.size() && 1.0 - cost[a * n + b] >= min_iou) {
        out.push_back({gt[gs[b]].key, hyp[hs[a]].identity});
      } else {
        ++dropped;
      }
    }
  }
  if (unmatched) *unmatched = dropped;
  return out;
}

// ---------------------------------------------------------------------------
// Scope error analysis
// ---------------------------------------------------------------------------

struct ScopeErrorReport {
  std::int64_t total = 0;
  std::int64_t p = 0, n = 0, tp = 0, tn = 0, fp = 0, fn = 0;
  bool empty_scope = true;

  std::int64_t true_count() const { return tp + tn; }
  std::int64_t false_count() const { return fp + fn; }
  double pct(std::int64_t c) const { return total > 0 ? 100.0 * static_cast<double>(c) / static_cast<double>(total) : 0.0; }
  double p_pct() const { return pct(p); }
  double n_pct() const { return pct(n); }
  double tp_pct() const { return pct(tp); }
  double tn_pct() const { return pct(tn); }
  double fp_pct() const { return pct(fp); }
  double fn_pct() const { return pct(fn); }
  double true_pct() const { return pct(true_count()); }
  double false_pct() const { return pct(false_count()); }
};

/// A pair counts as predicted-positive iff its affinity is > 0.
template <class Scorer>
ScopeErrorReport scope_error_analysis(std::span<const ScopePair> pairs, Scorer&& scorer) {
  ScopeErrorReport r;
  for (const auto& pr : pairs) {
    const bool predicted = scorer(pr) > 0.0;
    ++r.total;
    if (pr.same_identity) {
      ++r.p;
      ++(predicted ? r.tp : r.fn);
    } else {
      ++r.n;
      ++(predicted ? r.fp : r.tn);
    }
  }
  r.empty_scope = r.total == 0;
  return r;
}

/// Adapts an AffinityModel to the pair scorers used by the analyses.
inline auto pair_scorer(std::span<const Detection> dets, const AffinityModel& model) {
  return [dets, &model](const ScopePair& p) {
    return score_pair(model, dets[p.i].feature, dets[p.j].feature, dets[p.i].gt_identity, dets[p.j].gt_identity);
  };
}

struct HistogramRange {
  double lo = -1.0;
  double hi = 1.0;

  /// Siamese affinities live in [-1, 1].
  static HistogramRange siamese() { return {-1.0, 1.0}; }
  /// Distance affinities are unbounded below; clipped to [-3, 1].
  static HistogramRange distance() { return {-3.0, 1.0}; }
};

struct AffinityHistogram {
  std::vector<double> edges;  // n_bins + 1
  std::vector<double> pos_density;
  std::vector<double> neg_density;
  std::int64_t pos_count = 0;
  std::int64_t neg_count = 0;

  bool pos_normalized() const { return pos_count > 0; }
  bool neg_normalized() const { return neg_count > 0; }

  double mean(bool positive) const {
    const auto& d = positive ? pos_density : neg_density;
    double m = 0.0;
    for (std::size_t b = 0; b < d.size(); ++b) m += d[b] * 0.5 * (edges[b] + edges[b + 1]);
    return m;
  }
};

/// Per-class normalized histograms; bins are [lo, hi) except the last,
/// which is closed. Values outside the range are clipped into the end bins.
template <class Scorer>
AffinityHistogram affinity_histograms(std::span<const ScopePair> pairs, Scorer&& scorer, std::size_t n_bins,
                                      HistogramRange range = HistogramRange::siamese()) {
  if (n_bins < 2) throw Error(ErrorCode::InvalidArgument, "n_bins", "must be >= 2");
  AffinityHistogram h;
  h.edges.resize(n_bins + 1);
  const double width = (range.hi - range.lo) / static_cast<double>(n_bins);
  for (std::size_t b = 0; b <= n_bins; ++b) h.edges[b] = range.lo + width * static_cast<double>(b);
  h.edges[n_bins] = range.hi;
  std::vector<std::int64_t> pos(n_bins, 0), neg(n_bins, 0);
  for (const auto& pr : pairs) {
    const double v = std::clamp(scorer(pr), range.lo, range.hi);
    auto bin = static_cast<std::size_t>(std::floor((v - range.lo) / width));
    bin = std::min(bin, n_bins - 1);
    if (pr.same_identity) {
      ++pos[bin];
      ++h.pos_count;
    } else {
      ++neg[bin];
      ++h.neg_count;
    }
  }
  h.pos_density.assign(n_bins, 0.0);
  h.neg_density.assign(n_bins, 0.0);
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (h.pos_count > 0) h.pos_density[b] = static_cast<double>(pos[b]) / static_cast<double>(h.pos_count);
    if (h.neg_count > 0) h.neg_density[b] = static_cast<double>(neg[b]) / static_cast<double>(h.neg_count);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Scorer comparison
// ---------------------------------------------------------------------------

using PairScorer = std::function<double(const ScopePair&)>;

struct NamedScorer {
  std::string name;
  PairScorer score;
};

struct NamedScope {
  std::string name;
  std::vector<ScopePair> pairs;
};

struct ComparisonCell {
  std::string scope;
  std::string scorer;
  ScopeErrorReport report;
  double delta_fp_pct = 0.0;
  double delta_fn_pct = 0.0;
  double delta_false_pct = 0.0;
};

/// One report per (scope, scorer) with FP/FN deltas against the first scorer.
inline std::vector<ComparisonCell> compare_affinity_errors(std::span<const NamedScope> scopes,
                                                           std::span<const NamedScorer> scorers) {
  if (scorers.size() < 2) throw Error(ErrorCode::InvalidArgument, "scorers", "need at least two scorers");
  std::vector<ComparisonCell> out;
  for (const auto& scope : scopes) {
    ScopeErrorReport base;
    for (std::size_t s = 0; s < scorers.size(); ++s) {
      ComparisonCell cell;
      cell.scope = scope.name;
      cell.scorer = scorers[s].name;
      cell.report = scope_error_analysis(std::span<const ScopePair>(scope.pairs), scorers[s].score);
      if (s == 0) base = cell.report;
      cell.delta_fp_pct = cell.report.fp_pct() - base.fp_pct();
      cell.delta_fn_pct = cell.report.fn_pct() - base.fn_pct();
      cell.delta_false_pct = cell.report.false_pct() - base.false_pct();
      out.push_back(std::move(cell));
    }
  }
  return out;
}

}  // namespace mtmct
