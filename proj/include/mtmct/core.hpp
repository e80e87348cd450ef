// Shared domain types for the multi-camera tracking engine: features,
// detections, tracklets, trajectories, temporal windows and matching scopes.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mtmct {

enum class ErrorCode {
  EmptyPool,
  DimensionMismatch,
  InvalidWindow,
  MissingClass,
  SamplerExhausted,
  InvalidStep,
  EmptyTrainingSet,
  TooLargeForExact,
  UniverseMismatch,
  ConfigError,
  IoError,
  InvalidArgument,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidWindow: return "InvalidWindow";
    case ErrorCode::MissingClass: return "MissingClass";
    case ErrorCode::SamplerExhausted: return "SamplerExhausted";
    case ErrorCode::InvalidStep: return "InvalidStep";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::TooLargeForExact: return "TooLargeForExact";
    case ErrorCode::UniverseMismatch: return "UniverseMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Engine error. `detail()` carries the machine-readable subject of the
/// failure (the missing class, the offending config field, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string detail, const std::string& message = {})
      : std::runtime_error(std::string(to_string(code)) + "(" + detail + ")" +
                           (message.empty() ? "" : ": " + message)),
        code_(code),
        detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

using CameraId = int;
using Frame = std::int64_t;
using IdentityId = int;

inline constexpr IdentityId kNoIdentity = -1;
inline constexpr Frame kUnboundedFrames = std::numeric_limits<Frame>::max();

/// Unit-norm appearance embedding. The all-zero vector is the flagged
/// "degenerate" feature; every affinity against it is -1.
struct FeatureVec {
  std::vector<float> values;

  FeatureVec() = default;
  explicit FeatureVec(std::vector<float> v) : values(std::move(v)) {}

  std::size_t dim() const noexcept { return values.size(); }

  bool is_flagged_zero() const noexcept {
    return std::all_of(values.begin(), values.end(), [](float x) { return x == 0.0f; });
  }

  double norm() const noexcept {
    double s = 0.0;
    for (float x : values) s += static_cast<double>(x) * x;
    return std::sqrt(s);
  }

  bool operator==(const FeatureVec&) const = default;
};

/// Normalizes `v` in double precision and stores it as a FeatureVec. Vectors
/// with norm below 1e-9 become the flagged zero vector.
inline FeatureVec normalized_feature(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  const double n = std::sqrt(s);
  std::vector<float> out(v.size(), 0.0f);
  if (n >= 1e-9) {
    for (std::size_t k = 0; k < v.size(); ++k) out[k] = static_cast<float>(v[k] / n);
  }
  return FeatureVec(std::move(out));
}

inline double euclidean(const FeatureVec& a, const FeatureVec& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::DimensionMismatch, std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
  double s = 0.0;
  for (std::size_t k = 0; k < a.dim(); ++k) {
    const double d = static_cast<double>(a.values[k]) - b.values[k];
    s += d * d;
  }
  return std::sqrt(s);
}

struct BBox {
  double x = 0, y = 0, w = 1, h = 1;
  bool operator==(const BBox&) const = default;
};

struct Detection {
  CameraId camera = 0;
  Frame frame = 0;
  BBox bbox;
  FeatureVec feature;
  std::optional<IdentityId> gt_identity;
};

/// Single-camera fragment. `members` index into the detection list the
/// tracklet was built from, ordered by frame.
struct Tracklet {
  CameraId camera = 0;
  std::vector<std::size_t> members;
  Frame first_frame = 0;
  Frame last_frame = 0;
  FeatureVec feature;
};

struct Trajectory {
  std::vector<Tracklet> tracklets;
  FeatureVec feature;
  IdentityId identity = kNoIdentity;
  std::set<CameraId> camera_set;

  Frame first_frame() const {
    Frame f = kUnboundedFrames;
    for (const auto& t : tracklets) f = std::min(f, t.first_frame);
    return f;
  }
  Frame last_frame() const {
    Frame f = std::numeric_limits<Frame>::min();
    for (const auto& t : tracklets) f = std::max(f, t.last_frame);
    return f;
  }
};

/// Frames [start, start + length).
struct TemporalWindow {
  Frame start = 0;
  Frame length = 1;
  Frame stride = 1;

  Frame end() const noexcept { return start + length; }
  bool contains(Frame f) const noexcept { return f >= start && f < end(); }
  bool operator==(const TemporalWindow&) const = default;
};

enum class ScopeKind { Reid, Mct, Sct };
enum class CameraRule { Any, Cross, Same };

inline const char* to_string(ScopeKind k) {
  switch (k) {
    case ScopeKind::Reid: return "reid";
    case ScopeKind::Mct: return "mct";
    case ScopeKind::Sct: return "sct";
  }
  return "?";
}

/// Candidate set of one matching problem: which camera pairs and which frame
/// gaps are eligible.
struct ScopeSpec {
  ScopeKind kind = ScopeKind::Reid;
  Frame window_len = kUnboundedFrames;
  CameraRule camera_rule = CameraRule::Any;

  static ScopeSpec reid() { return {ScopeKind::Reid, kUnboundedFrames, CameraRule::Any}; }
  static ScopeSpec mct(Frame window) { return {ScopeKind::Mct, window, CameraRule::Cross}; }
  static ScopeSpec sct(Frame window) { return {ScopeKind::Sct, window, CameraRule::Same}; }

  void validate() const {
    if (kind == ScopeKind::Sct && camera_rule != CameraRule::Same) {
      throw Error(ErrorCode::InvalidArgument, "camera_rule", "SCT scope requires SAME_CAMERA");
    }
    if (kind == ScopeKind::Reid && window_len != kUnboundedFrames) {
      throw Error(ErrorCode::InvalidArgument, "window_len", "re-ID scope has an unbounded window");
    }
    if (window_len <= 0) throw Error(ErrorCode::InvalidArgument, "window_len", "must be positive");
  }

  bool admits(CameraId ci, Frame fi, CameraId cj, Frame fj) const noexcept {
    if (camera_rule == CameraRule::Same && ci != cj) return false;
    if (camera_rule == CameraRule::Cross && ci == cj) return false;
    if (window_len == kUnboundedFrames) return true;
    const Frame gap = fi > fj ? fi - fj : fj - fi;
    return gap <= window_len;
  }
};

/// Symmetric n x n table. The diagonal is stored as 0 and never read by any
/// objective.
class AffinityMatrix {
 public:
  AffinityMatrix() = default;
  explicit AffinityMatrix(std::size_t n) : n_(n), a_(n * n, 0.0) {}

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return a_[i * n_ + j]; }

  void set(std::size_t i, std::size_t j, double v) noexcept {
    a_[i * n_ + j] = v;
    a_[j * n_ + i] = v;
  }

  bool is_symmetric() const noexcept {
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j < n_; ++j)
        if (a_[i * n_ + j] != a_[j * n_ + i]) return false;
    return true;
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> a_;
};

/// Mean of `members`, re-normalized to unit length. A mean with norm below
/// 1e-9 yields the flagged zero vector.
inline FeatureVec pool_feature(std::span<const FeatureVec> members) {
  if (members.empty()) throw Error(ErrorCode::EmptyPool, "members");
  const std::size_t dim = members.front().dim();
  std::vector<double> sum(dim, 0.0);
  for (const auto& m : members) {
    if (m.dim() != dim) {
      throw Error(ErrorCode::DimensionMismatch, std::to_string(dim) + " vs " + std::to_string(m.dim()));
    }
    for (std::size_t k = 0; k < dim; ++k) sum[k] += m.values[k];
  }
  // Normalizing the sum is equivalent to normalizing the mean; only the
  // degeneracy test needs the mean's scale.
  double s = 0.0;
  for (double x : sum) s += x * x;
  if (std::sqrt(s) / static_cast<double>(members.size()) < 1e-9) {
    return FeatureVec(std::vector<float>(dim, 0.0f));
  }
  return normalized_feature(sum);
}

/// Windows of `length` frames starting at `first_frame` and advancing by
/// `stride` while the start does not exceed `last_frame`.
inline std::vector<TemporalWindow> windows_over(Frame first_frame, Frame last_frame, Frame length, Frame stride) {
  if (length <= 0) throw Error(ErrorCode::InvalidWindow, "length");
  if (stride <= 0) throw Error(ErrorCode::InvalidWindow, "stride");
  if (last_frame < first_frame) throw Error(ErrorCode::InvalidWindow, "range");
  std::vector<TemporalWindow> out;
  for (Frame s = first_frame; s <= last_frame; s += stride) {
    out.push_back({s, length, stride});
    if (s > kUnboundedFrames - stride) break;
  }
  return out;
}

}  // namespace mtmct
