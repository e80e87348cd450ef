// File formats: dataset directories (per-camera detection CSV, feature
// sidecar, ground truth, manifest), hypotheses, checkpoints, run configs and
// report tables.
#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtmct/affinity.hpp"
#include "mtmct/core.hpp"
#include "mtmct/evaluation.hpp"
#include "mtmct/synthgen.hpp"

namespace mtmct::io {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Text helpers
// ---------------------------------------------------------------------------

/// Shortest round-trip decimal form.
inline std::string fmt_num(double v) {
  std::array<char, 64> buf{};
  const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), r.ptr);
}

inline std::string fmt_fixed(double v, int digits) {
  std::array<char, 64> buf{};
  const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, digits);
  return std::string(buf.data(), r.ptr);
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto p = s.find(sep, start);
    out.push_back(trim(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start)));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return out;
}

template <class T>
T parse_number(std::string_view s, const std::string& what) {
  T v{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw Error(ErrorCode::ConfigError, what, "cannot parse '" + std::string(s) + "'");
  }
  return v;
}

inline std::ofstream open_out(const fs::path& path, bool binary = false) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream f(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, path.string(), "cannot open for writing");
  return f;
}

inline std::ifstream open_in(const fs::path& path, bool binary = false) {
  std::ifstream f(path, binary ? std::ios::binary : std::ios::in);
  if (!f) throw Error(ErrorCode::IoError, path.string(), "cannot open for reading");
  return f;
}

inline void write_text(const fs::path& path, const std::string& text) {
  auto f = open_out(path, true);
  f << text;
  if (!f) throw Error(ErrorCode::IoError, path.string(), "write failed");
}

inline std::string read_text(const fs::path& path) {
  auto f = open_in(path, true);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Feature sidecar: "MTAF", version byte, u32 count, u32 dim, LE float32 rows
// ---------------------------------------------------------------------------

inline constexpr std::array<char, 4> kFeatureMagic = {'M', 'T', 'A', 'F'};
inline constexpr std::uint8_t kFeatureVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace detail

inline std::string encode_features(std::span<const FeatureVec> rows, std::size_t dim) {
  std::string out(kFeatureMagic.begin(), kFeatureMagic.end());
  out.push_back(static_cast<char>(kFeatureVersion));
  detail::put_u32(out, static_cast<std::uint32_t>(rows.size()));
  detail::put_u32(out, static_cast<std::uint32_t>(dim));
  out.reserve(out.size() + rows.size() * dim * 4);
  for (const auto& r : rows) {
    if (r.dim() != dim) throw Error(ErrorCode::DimensionMismatch, "feature row has dim " + std::to_string(r.dim()));
    for (float x : r.values) detail::put_u32(out, std::bit_cast<std::uint32_t>(x));
  }
  return out;
}

inline std::vector<FeatureVec> decode_features(const std::string& bytes, const std::string& source = "features") {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 13 || std::memcmp(bytes.data(), kFeatureMagic.data(), 4) != 0) {
    throw Error(ErrorCode::IoError, source, "bad feature file header");
  }
  if (p[4] != kFeatureVersion) throw Error(ErrorCode::IoError, source, "unsupported feature version");
  const std::uint32_t count = detail::get_u32(p + 5), dim = detail::get_u32(p + 9);
  if (bytes.size() != 13 + static_cast<std::size_t>(count) * dim * 4) {
    throw Error(ErrorCode::IoError, source, "feature file size does not match header");
  }
  std::vector<FeatureVec> rows(count);
  const unsigned char* q = p + 13;
  for (auto& r : rows) {
    r.values.resize(dim);
    for (auto& x : r.values) {
      x = std::bit_cast<float>(detail::get_u32(q));
      q += 4;
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Dataset directories
// ---------------------------------------------------------------------------

inline constexpr std::string_view kDetectionHeader = "frame,target_id,x,y,w,h,conf,feature_row";
inline constexpr std::string_view kGtHeader = "target_id,camera,first_frame,last_frame";
inline constexpr std::string_view kHypothesisHeader = "camera,frame,target_id,x,y,w,h,conf,feature_row";

inline std::string camera_file(CameraId c) { return "cam_" + std::to_string(c) + ".csv"; }

inline json world_config_json(const WorldConfig& cfg) {
  json links = json::array();
  for (const auto& l : cfg.links) links.push_back({l.a, l.b, l.travel_min, l.travel_max});
  json j = {{"n_cameras", cfg.n_cameras},
            {"links", links},
            {"n_targets", cfg.n_targets},
            {"dwell_min", cfg.dwell_min},
            {"dwell_max", cfg.dwell_max},
            {"visits_min", cfg.visits_min},
            {"visits_max", cfg.visits_max},
            {"feature_dim", cfg.feature_dim},
            {"alpha", cfg.alpha},
            {"beta", cfg.beta},
            {"sigma", cfg.sigma},
            {"dropout", cfg.dropout},
            {"seed", cfg.seed},
            {"spawn_span", cfg.spawn_span},
            {"drift_scale", cfg.drift_scale},
            {"static_bias_share", cfg.static_bias_share},
            {"illumination_period", cfg.illumination_period},
            {"appearance_groups", cfg.appearance_groups},
            {"group_spread", cfg.group_spread},
            {"group_spread_max", cfg.group_spread_max}};
  j["network_seed"] = cfg.network_seed ? json(*cfg.network_seed) : json(nullptr);
  return j;
}

/// Writes `dets` (optionally labeled) into `dir`. Ground-truth spans are
/// written when `gt_tracks` is given.
inline void write_dataset(const fs::path& dir, std::span<const Detection> dets, int n_cameras,
                          const std::map<IdentityId, std::vector<GtVisit>>* gt_tracks, const json& extra = {}) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::IoError, dir.string(), "cannot create directory");
  std::size_t dim = dets.empty() ? 0 : dets.front().feature.dim();
  std::map<CameraId, std::string> csv;
  for (CameraId c = 0; c < n_cameras; ++c) csv[c] = std::string(kDetectionHeader) + "\n";
  std::vector<FeatureVec> rows;
  rows.reserve(dets.size());
  for (const auto& d : dets) {
    auto& out = csv[d.camera];
    if (out.empty()) out = std::string(kDetectionHeader) + "\n";
    out += std::to_string(d.frame) + "," + std::to_string(d.gt_identity.value_or(kNoIdentity)) + "," + fmt_num(d.bbox.x) +
           "," + fmt_num(d.bbox.y) + "," + fmt_num(d.bbox.w) + "," + fmt_num(d.bbox.h) + ",1," +
           std::to_string(rows.size()) + "\n";
    rows.push_back(d.feature);
  }
  for (const auto& [c, text] : csv) write_text(dir / camera_file(c), text);
  write_text(dir / "features.bin", encode_features(rows, dim));

  json manifest = {{"format", "mtmct-dataset"},
                   {"version", 1},
                   {"n_cameras", std::max<int>(n_cameras, csv.empty() ? 0 : csv.rbegin()->first + 1)},
                   {"n_detections", dets.size()},
                   {"feature_dim", dim},
                   {"features", "features.bin"}};
  json files = json::array();
  for (const auto& [c, text] : csv) files.push_back({{"camera", c}, {"file", camera_file(c)}});
  manifest["cameras"] = files;
  if (gt_tracks) {
    std::string gt = std::string(kGtHeader) + "\n";
    for (const auto& [id, visits] : *gt_tracks)
      for (const auto& v : visits)
        gt += std::to_string(id) + "," + std::to_string(v.camera) + "," + std::to_string(v.first) + "," +
              std::to_string(v.last) + "\n";
    write_text(dir / "gt.csv", gt);
    manifest["ground_truth"] = "gt.csv";
  }
  for (const auto& [k, v] : extra.items()) manifest[k] = v;
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline void write_dataset(const fs::path& dir, const SynthDataset& ds) {
  write_dataset(dir, ds.detections, ds.config.n_cameras, &ds.gt_tracks, {{"world", world_config_json(ds.config)}});
}

struct LoadedDataset {
  std::vector<Detection> detections;
  /// Sidecar row of each detection.
  std::vector<std::size_t> feature_rows;
  std::map<IdentityId, std::vector<GtVisit>> gt_tracks;
  int n_cameras = 0;
  std::size_t feature_dim = 0;
  json manifest;
};

inline LoadedDataset read_dataset(const fs::path& dir) {
  LoadedDataset ds;
  const auto manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw Error(ErrorCode::IoError, manifest_path.string(), "missing manifest");
  try {
    ds.manifest = json::parse(read_text(manifest_path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, manifest_path.string(), e.what());
  }
  ds.n_cameras = ds.manifest.value("n_cameras", 0);
  ds.feature_dim = ds.manifest.value("feature_dim", std::size_t{0});
  const auto rows = decode_features(read_text(dir / ds.manifest.value("features", std::string("features.bin"))),
                                    (dir / "features.bin").string());
  for (const auto& entry : ds.manifest.at("cameras")) {
    const CameraId cam = entry.at("camera").get<int>();
    const auto path = dir / entry.at("file").get<std::string>();
    auto f = open_in(path);
    std::string line;
    std::getline(f, line);
    if (trim(line) != kDetectionHeader) throw Error(ErrorCode::IoError, path.string(), "unexpected header");
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      const auto cells = split(line, ',');
      const std::string where = path.string() + ":" + std::to_string(lineno);
      if (cells.size() != 8) throw Error(ErrorCode::IoError, where, "expected 8 columns");
      Detection d;
      d.camera = cam;
      d.frame = parse_number<Frame>(cells[0], where);
      const auto id = parse_number<IdentityId>(cells[1], where);
      if (id != kNoIdentity) d.gt_identity = id;
      d.bbox = {parse_number<double>(cells[2], where), parse_number<double>(cells[3], where),
                parse_number<double>(cells[4], where), parse_number<double>(cells[5], where)};
      const auto row = parse_number<std::size_t>(cells[7], where);
      if (row >= rows.size()) throw Error(ErrorCode::IoError, where, "feature_row out of range");
      d.feature = rows[row];
      ds.detections.push_back(std::move(d));
      ds.feature_rows.push_back(row);
    }
  }
  if (fs::exists(dir / "gt.csv")) {
    auto f = open_in(dir / "gt.csv");
    std::string line;
    std::getline(f, line);
    while (std::getline(f, line)) {
      if (trim(line).empty()) continue;
      const auto cells = split(line, ',');
      if (cells.size() != 4) throw Error(ErrorCode::IoError, (dir / "gt.csv").string(), "expected 4 columns");
      const std::string where = (dir / "gt.csv").string();
      ds.gt_tracks[parse_number<IdentityId>(cells[0], where)].push_back(
          {parse_number<CameraId>(cells[1], where), parse_number<Frame>(cells[2], where),
           parse_number<Frame>(cells[3], where)});
    }
  }
  std::vector<std::size_t> order(ds.detections.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = ds.detections[a];
    const auto& y = ds.detections[b];
    if (x.camera != y.camera) return x.camera < y.camera;
    return x.frame < y.frame;
  });
  std::vector<Detection> sorted;
  std::vector<std::size_t> sorted_rows;
  sorted.reserve(order.size());
  sorted_rows.reserve(order.size());
  for (std::size_t k : order) {
    sorted.push_back(std::move(ds.detections[k]));
    sorted_rows.push_back(ds.feature_rows[k]);
  }
  ds.detections = std::move(sorted);
  ds.feature_rows = std::move(sorted_rows);
  return ds;
}

/// A directory holding several dataset directories listed in its manifest.
inline void write_collection(const fs::path& dir, const std::vector<SynthDataset>& seqs) {
  json names = json::array();
  for (std::size_t q = 0; q < seqs.size(); ++q) {
    char name[32];
    std::snprintf(name, sizeof name, "seq_%03zu", q);
    write_dataset(dir / name, seqs[q]);
    names.push_back(name);
  }
  write_text(dir / "manifest.json",
             json({{"format", "mtmct-collection"}, {"version", 1}, {"sequences", names}}).dump(2) + "\n");
}

enum class DirKind { Dataset, Collection, Benchmark };

inline json read_manifest(const fs::path& dir) {
  const auto path = dir / "manifest.json";
  if (!fs::exists(path)) throw Error(ErrorCode::IoError, path.string(), "missing manifest");
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, path.string(), e.what());
  }
}

inline DirKind dir_kind(const fs::path& dir) {
  const auto format = read_manifest(dir).value("format", std::string());
  if (format == "mtmct-dataset") return DirKind::Dataset;
  if (format == "mtmct-collection") return DirKind::Collection;
  if (format == "mtmct-benchmark") return DirKind::Benchmark;
  throw Error(ErrorCode::IoError, (dir / "manifest.json").string(), "unknown format '" + format + "'");
}

/// Training and held-out test sequences under one directory.
inline void write_benchmark(const fs::path& dir, const std::vector<SynthDataset>& train, const SynthDataset& test) {
  write_collection(dir / "train", train);
  write_dataset(dir / "test", test);
  write_text(dir / "manifest.json",
             json({{"format", "mtmct-benchmark"}, {"version", 1}, {"train", "train"}, {"test", "test"}}).dump(2) + "\n");
}

/// Datasets used for fitting: a benchmark's training split, every sequence
/// of a collection, or a single dataset.
inline std::vector<LoadedDataset> read_training_data(const fs::path& dir) {
  switch (dir_kind(dir)) {
    case DirKind::Dataset: return {read_dataset(dir)};
    case DirKind::Benchmark: return read_training_data(dir / read_manifest(dir).value("train", std::string("train")));
    case DirKind::Collection: break;
  }
  const auto manifest = read_manifest(dir);
  std::vector<LoadedDataset> out;
  for (const auto& name : manifest.at("sequences")) out.push_back(read_dataset(dir / name.get<std::string>()));
  return out;
}

/// Dataset used for tracking and evaluation: a benchmark's test split or a
/// single dataset.
inline LoadedDataset read_eval_data(const fs::path& dir) {
  switch (dir_kind(dir)) {
    case DirKind::Dataset: return read_dataset(dir);
    case DirKind::Benchmark: return read_dataset(dir / read_manifest(dir).value("test", std::string("test")));
    case DirKind::Collection: break;
  }
  throw Error(ErrorCode::ConfigError, dir.string(), "expected a dataset or benchmark directory, got a collection");
}

// ---------------------------------------------------------------------------
// Hypotheses
// ---------------------------------------------------------------------------

/// One row per detection; `feature_rows` defaults to the detection index.
inline std::string format_hypothesis(std::span<const Detection> dets, std::span<const IdentityId> ids,
                                     std::span<const std::size_t> feature_rows = {}) {
  if (dets.size() != ids.size()) throw Error(ErrorCode::UniverseMismatch, "hypothesis size");
  if (!feature_rows.empty() && feature_rows.size() != dets.size()) {
    throw Error(ErrorCode::UniverseMismatch, "feature_rows size");
  }
  std::string out = std::string(kHypothesisHeader) + "\n";
  for (std::size_t k = 0; k < dets.size(); ++k) {
    const auto& d = dets[k];
    out += std::to_string(d.camera) + "," + std::to_string(d.frame) + "," + std::to_string(ids[k]) + "," +
           fmt_num(d.bbox.x) + "," + fmt_num(d.bbox.y) + "," + fmt_num(d.bbox.w) + "," + fmt_num(d.bbox.h) + ",1," +
           std::to_string(feature_rows.empty() ? k : feature_rows[k]) + "\n";
  }
  return out;
}

inline std::vector<KeyedIdentity> read_hypothesis(const fs::path& path) {
  auto f = open_in(path);
  std::string line;
  std::getline(f, line);
  if (trim(line) != kHypothesisHeader) throw Error(ErrorCode::IoError, path.string(), "unexpected header");
  std::vector<KeyedIdentity> out;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (cells.size() != 9) throw Error(ErrorCode::IoError, where, "expected 9 columns");
    KeyedIdentity k;
    k.key.camera = parse_number<CameraId>(cells[0], where);
    k.key.frame = parse_number<Frame>(cells[1], where);
    k.identity = parse_number<IdentityId>(cells[2], where);
    k.key.bbox = {parse_number<double>(cells[3], where), parse_number<double>(cells[4], where),
                  parse_number<double>(cells[5], where), parse_number<double>(cells[6], where)};
    out.push_back(k);
  }
  return out;
}

inline std::vector<KeyedIdentity> keyed_truth(std::span<const Detection> dets) {
  std::vector<KeyedIdentity> out;
  out.reserve(dets.size());
  for (const auto& d : dets) out.push_back({{d.camera, d.frame, d.bbox}, d.gt_identity.value_or(kNoIdentity)});
  return out;
}

/// Hypothesis identity per detection of `dets` (kNoIdentity where the
/// hypothesis has no record). Keys outside `dets` are a UniverseMismatch.
inline std::vector<IdentityId> align_hypothesis(std::span<const Detection> dets, std::span<const KeyedIdentity> hyp) {
  std::map<DetectionKey, std::size_t> index;
  for (std::size_t k = 0; k < dets.size(); ++k) {
    if (!index.emplace(DetectionKey{dets[k].camera, dets[k].frame, dets[k].bbox}, k).second) {
      throw Error(ErrorCode::UniverseMismatch, "duplicate truth key at frame " + std::to_string(dets[k].frame));
    }
  }
  std::vector<IdentityId> out(dets.size(), kNoIdentity);
  for (const auto& r : hyp) {
    const auto it = index.find(r.key);
    if (it == index.end()) {
      throw Error(ErrorCode::UniverseMismatch, "camera " + std::to_string(r.key.camera) + " frame " +
                                                   std::to_string(r.key.frame), "hypothesis key not in truth");
    }
    out[it->second] = r.identity;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints and calibrations
// ---------------------------------------------------------------------------

struct CheckpointMeta {
  std::uint64_t train_seed = 0;
  std::uint64_t sampler_seed = 0;
  std::uint64_t init_seed = 0;
  std::size_t pair_count = 0;
  double final_loss = 0.0;
  double final_accuracy = 0.0;
};

inline json checkpoint_json(const SiameseModel& m, const CheckpointMeta& meta) {
  json layers = json::array();
  for (const auto& l : m.layers) {
    json w = json::array(), b = json::array();
    for (double x : l.weights) w.push_back(x);
    for (double x : l.biases) b.push_back(x);
    layers.push_back({{"in", l.in}, {"out", l.out}, {"weights", w}, {"biases", b}});
  }
  json prov = {{"scheme", to_string(m.provenance.scheme)}};
  prov["tau"] = m.provenance.tau == kUnboundedFrames ? json(nullptr) : json(m.provenance.tau);
  return {{"format", "mtmct-siamese"},
          {"version", 1},
          {"dims", m.layer_dims()},
          {"temperature", m.temperature},
          {"provenance", prov},
          {"seeds", {{"train", meta.train_seed}, {"sampler", meta.sampler_seed}, {"init", meta.init_seed}}},
          {"pair_count", meta.pair_count},
          {"final_loss", meta.final_loss},
          {"final_accuracy", meta.final_accuracy},
          {"layers", layers}};
}

inline SamplingScheme scheme_from_string(const std::string& s) {
  if (s == "intra") return SamplingScheme::Intra;
  if (s == "inter") return SamplingScheme::Inter;
  if (s == "global") return SamplingScheme::Global;
  throw Error(ErrorCode::ConfigError, "scheme", "expected intra|inter|global, got '" + s + "'");
}

inline SiameseModel checkpoint_from_json(const json& j) {
  try {
    SiameseModel m;
    m.temperature = j.at("temperature").get<double>();
    for (const auto& l : j.at("layers")) {
      DenseLayer d;
      d.in = l.at("in").get<std::size_t>();
      d.out = l.at("out").get<std::size_t>();
      d.weights = l.at("weights").get<std::vector<double>>();
      d.biases = l.at("biases").get<std::vector<double>>();
      m.layers.push_back(std::move(d));
    }
    const auto& prov = j.at("provenance");
    m.provenance.scheme = scheme_from_string(prov.at("scheme").get<std::string>());
    m.provenance.tau = prov.at("tau").is_null() ? kUnboundedFrames : prov.at("tau").get<Frame>();
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, "checkpoint", e.what());
  }
}

inline void write_checkpoint(const fs::path& path, const SiameseModel& m, const CheckpointMeta& meta) {
  write_text(path, checkpoint_json(m, meta).dump(1) + "\n");
}

inline SiameseModel read_checkpoint(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, path.string(), e.what());
  }
  return checkpoint_from_json(j);
}

inline json calibration_json(const ThresholdCalibration& c, std::size_t pairs_used, bool capped) {
  return {{"format", "mtmct-calibration"}, {"version", 1},         {"mu_p", c.mu_p},     {"mu_n", c.mu_n},
          {"thres", c.thres},              {"pairs_used", pairs_used}, {"capped", capped}};
}

inline ThresholdCalibration read_calibration(const fs::path& path) {
  try {
    const auto j = json::parse(read_text(path));
    return {j.at("mu_p").get<double>(), j.at("mu_n").get<double>(), j.at("thres").get<double>()};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, path.string(), e.what());
  }
}

// ---------------------------------------------------------------------------
// Run configuration: `key = value` lines under `[section]` headers
// ---------------------------------------------------------------------------

using ConfigSections = std::map<std::string, std::map<std::string, std::string>>;

inline const std::map<std::string, std::set<std::string>>& config_schema() {
  static const std::map<std::string, std::set<std::string>> schema = {
      {"run", {"seed", "profile"}},
      {"world",
       {"n_cameras", "links", "travel_min", "travel_max", "n_targets", "dwell_min", "dwell_max", "visits_min",
        "visits_max", "feature_dim", "alpha", "beta", "sigma", "dropout", "seed", "network_seed", "spawn_span",
        "drift_scale", "static_bias_share", "illumination_period", "appearance_groups", "group_spread",
        "group_spread_max"}},
      {"sampler", {"pair_count", "tau_s", "tau_m", "seed"}},
      {"train", {"epochs", "lr_max", "lr_min", "batch_size", "seed", "optimizer"}},
      {"tracker", {"tracklet_len", "sct_window", "mct_window", "stride_ratio", "exact_solver_cap", "seed"}},
      {"paths", {"data", "train_data", "out", "checkpoint", "calibration", "hypothesis"}},
  };
  return schema;
}

/// Parses the config text; unknown sections or keys are ConfigErrors.
inline ConfigSections parse_config(const std::string& text, const std::string& source = "config") {
  ConfigSections out;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  const auto& schema = config_schema();
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string where = source + ":" + std::to_string(lineno);
    auto line = trim(raw);
    if (const auto hash = line.find_first_of("#;"); hash != std::string_view::npos) line = trim(line.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorCode::ConfigError, where, "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (!schema.count(section)) throw Error(ErrorCode::ConfigError, where, "unknown section [" + section + "]");
      out[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCode::ConfigError, where, "expected key = value");
    if (section.empty()) throw Error(ErrorCode::ConfigError, where, "key outside of a section");
    const std::string key(trim(line.substr(0, eq)));
    if (!schema.at(section).count(key)) {
      throw Error(ErrorCode::ConfigError, section + "." + key, "unknown key at " + where);
    }
    out[section][key] = std::string(trim(line.substr(eq + 1)));
  }
  return out;
}

inline ConfigSections read_config(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::ConfigError, path.string(), "config file not found");
  std::string text;
  try {
    text = read_text(path);
  } catch (const Error&) {
    throw Error(ErrorCode::ConfigError, path.string(), "config file not readable");
  }
  return parse_config(text, path.string());
}

/// Typed lookup helper over one config section.
class SectionReader {
 public:
  SectionReader(const ConfigSections& cfg, std::string section) : section_(std::move(section)) {
    if (const auto it = cfg.find(section_); it != cfg.end()) values_ = &it->second;
  }

  template <class T>
  void get(const std::string& key, T& target) const {
    const auto v = raw(key);
    if (!v) return;
    const std::string what = section_ + "." + key;
    if constexpr (std::is_same_v<T, std::string>) {
      target = *v;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (*v == "true" || *v == "1") {
        target = true;
      } else if (*v == "false" || *v == "0") {
        target = false;
      } else {
        throw Error(ErrorCode::ConfigError, what, "expected a boolean");
      }
    } else {
      target = parse_number<T>(*v, what);
    }
  }

  template <class T>
  void get(const std::string& key, std::optional<T>& target) const {
    if (!raw(key)) return;
    T v{};
    get(key, v);
    target = v;
  }

  std::optional<std::string> raw(const std::string& key) const {
    if (!values_) return std::nullopt;
    const auto it = values_->find(key);
    if (it == values_->end()) return std::nullopt;
    return it->second;
  }

 private:
  std::string section_;
  const std::map<std::string, std::string>* values_ = nullptr;
};

/// Links are written as `a-b:min-max` entries separated by spaces or commas.
inline std::vector<CameraLink> parse_links(const std::string& text) {
  std::vector<CameraLink> links;
  std::string norm = text;
  std::replace(norm.begin(), norm.end(), ',', ' ');
  std::istringstream in(norm);
  std::string item;
  while (in >> item) {
    const auto colon = item.find(':');
    const auto cams = split(std::string_view(item).substr(0, colon), '-');
    if (cams.size() != 2) throw Error(ErrorCode::ConfigError, "world.links", "bad entry '" + item + "'");
    CameraLink l;
    l.a = parse_number<CameraId>(cams[0], "world.links");
    l.b = parse_number<CameraId>(cams[1], "world.links");
    if (colon != std::string::npos) {
      const auto range = split(std::string_view(item).substr(colon + 1), '-');
      if (range.size() != 2) throw Error(ErrorCode::ConfigError, "world.links", "bad travel range in '" + item + "'");
      l.travel_min = parse_number<Frame>(range[0], "world.links");
      l.travel_max = parse_number<Frame>(range[1], "world.links");
    }
    links.push_back(l);
  }
  return links;
}

inline WorldConfig world_from_config(const ConfigSections& cfg, WorldConfig w = {}) {
  const SectionReader r(cfg, "world");
  r.get("n_cameras", w.n_cameras);
  Frame travel_min = 20, travel_max = 100;
  r.get("travel_min", travel_min);
  r.get("travel_max", travel_max);
  w.links = ring_links(w.n_cameras, travel_min, travel_max);
  if (const auto links = r.raw("links")) w.links = parse_links(*links);
  r.get("n_targets", w.n_targets);
  r.get("dwell_min", w.dwell_min);
  r.get("dwell_max", w.dwell_max);
  r.get("visits_min", w.visits_min);
  r.get("visits_max", w.visits_max);
  r.get("feature_dim", w.feature_dim);
  r.get("alpha", w.alpha);
  r.get("beta", w.beta);
  r.get("sigma", w.sigma);
  r.get("dropout", w.dropout);
  r.get("seed", w.seed);
  r.get("network_seed", w.network_seed);
  r.get("spawn_span", w.spawn_span);
  r.get("drift_scale", w.drift_scale);
  r.get("static_bias_share", w.static_bias_share);
  r.get("illumination_period", w.illumination_period);
  r.get("appearance_groups", w.appearance_groups);
  r.get("group_spread", w.group_spread);
  r.get("group_spread_max", w.group_spread_max);
  return w;
}

// ---------------------------------------------------------------------------
// Report tables
// ---------------------------------------------------------------------------

inline std::string scope_report_header() {
  return "scope,scorer,total,p,n,tp,tn,fp,fn,true,false,p_pct,n_pct,tp_pct,tn_pct,fp_pct,fn_pct,true_pct,false_pct";
}

inline std::string scope_report_row(const std::string& scope, const std::string& scorer, const ScopeErrorReport& r) {
  std::string s = scope + "," + scorer;
  for (auto c : {r.total, r.p, r.n, r.tp, r.tn, r.fp, r.fn, r.true_count(), r.false_count()}) s += "," + std::to_string(c);
  for (double v : {r.p_pct(), r.n_pct(), r.tp_pct(), r.tn_pct(), r.fp_pct(), r.fn_pct(), r.true_pct(), r.false_pct()})
    s += "," + fmt_fixed(v, 4);
  return s;
}

inline std::string histogram_csv(const AffinityHistogram& h) {
  std::string s = "bin_lo,bin_hi,pos_density,neg_density\n";
  for (std::size_t b = 0; b + 1 < h.edges.size(); ++b)
    s += fmt_num(h.edges[b]) + "," + fmt_num(h.edges[b + 1]) + "," + fmt_num(h.pos_density[b]) + "," +
         fmt_num(h.neg_density[b]) + "\n";
  return s;
}

inline std::string id_report_header() { return "level,idf1,idp,idr,idtp,idfp,idfn"; }

inline std::string id_report_row(const std::string& level, const IdReport& r) {
  return level + "," + fmt_fixed(r.idf1, 6) + "," + fmt_fixed(r.idp, 6) + "," + fmt_fixed(r.idr, 6) + "," +
         std::to_string(r.idtp) + "," + std::to_string(r.idfp) + "," + std::to_string(r.idfn);
}

}  // namespace mtmct::io
