// mtmct: generate synthetic benchmarks, fit affinities, track and evaluate.
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mtmct/io.hpp"
#include "mtmct/pipeline.hpp"

namespace fs = std::filesystem;
using namespace mtmct;

namespace {

enum Exit : int { kOk = 0, kOther = 1, kBadConfig = 2, kIo = 3, kSampler = 4, kDim = 5, kUniverse = 6 };

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidWindow: return kBadConfig;
    case ErrorCode::IoError: return kIo;
    case ErrorCode::SamplerExhausted: return kSampler;
    case ErrorCode::DimensionMismatch: return kDim;
    case ErrorCode::UniverseMismatch: return kUniverse;
    default: return kOther;
  }
}

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string profile;
};

/// Effective settings after profile, config file and flags are applied.
struct Settings {
  io::ConfigSections sections;
  Profile profile;
  std::uint64_t seed = 0;
  WorldConfig world;
  TrainConfig train;
  std::size_t pair_count = 4096;
  std::uint64_t sampler_seed = 0;
  double stride_ratio = 0.5;
  std::size_t exact_solver_cap = kDefaultExactCap;
  std::uint64_t tracker_seed = 0;

  std::string path(const std::string& flag, const std::string& key) const {
    if (!flag.empty()) return flag;
    if (auto v = io::SectionReader(sections, "paths").raw(key)) return *v;
    throw Error(ErrorCode::ConfigError, "paths." + key, "no path given (flag or config)");
  }
};

Settings load_settings(const GlobalOptions& g) {
  Settings s;
  if (!g.config.empty()) s.sections = io::read_config(g.config);
  const io::SectionReader run(s.sections, "run");
  std::string profile = "cityflow";
  run.get("profile", profile);
  if (!g.profile.empty()) profile = g.profile;
  s.profile = Profile::by_name(profile);
  run.get("seed", s.seed);
  if (g.seed) s.seed = *g.seed;

  WorldConfig w;
  w.seed = s.seed;
  s.world = io::world_from_config(s.sections, w);
  s.world.validate();

  const io::SectionReader sampler(s.sections, "sampler");
  s.sampler_seed = s.seed;
  sampler.get("pair_count", s.pair_count);
  sampler.get("tau_s", s.profile.tau_s);
  sampler.get("tau_m", s.profile.tau_m);
  sampler.get("seed", s.sampler_seed);
  if (s.pair_count == 0 || s.pair_count % 2) throw Error(ErrorCode::ConfigError, "sampler.pair_count", "must be positive and even");
  if (s.profile.tau_s <= 0 || s.profile.tau_m <= 0) throw Error(ErrorCode::ConfigError, "sampler.tau", "must be positive");

  const io::SectionReader train(s.sections, "train");
  train.get("epochs", s.train.epochs);
  train.get("lr_max", s.train.lr_max);
  train.get("lr_min", s.train.lr_min);
  train.get("batch_size", s.train.batch_size);
  std::string optimizer = "adam";
  train.get("optimizer", optimizer);
  if (optimizer == "adam") {
    s.train.optimizer = Optimizer::Adam;
  } else if (optimizer == "sgd") {
    s.train.optimizer = Optimizer::Sgd;
  } else {
    throw Error(ErrorCode::ConfigError, "train.optimizer", "expected adam|sgd");
  }
  std::optional<std::uint64_t> train_seed;
  train.get("seed", train_seed);
  if (train_seed) s.sampler_seed = *train_seed;
  try {
    s.train.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, "train." + e.detail(), e.what());
  }

  const io::SectionReader tracker(s.sections, "tracker");
  s.tracker_seed = s.seed;
  tracker.get("tracklet_len", s.profile.tracklet_len);
  tracker.get("sct_window", s.profile.sct_window);
  tracker.get("mct_window", s.profile.mct_window);
  tracker.get("stride_ratio", s.stride_ratio);
  tracker.get("exact_solver_cap", s.exact_solver_cap);
  tracker.get("seed", s.tracker_seed);
  return s;
}

MetricRecipe recipe(const Settings& s, SamplingScheme scheme, std::optional<Frame> tau = std::nullopt) {
  MetricRecipe r = recipe_for(scheme, s.profile, s.sampler_seed);
  if (tau) r.tau = *tau;
  r.pair_count = s.pair_count;
  r.train = s.train;
  return r;
}

TrackerConfig tracker(const Settings& s, AffinityModel sct, AffinityModel mct) {
  TrackerConfig cfg = tracker_config(s.profile, std::move(sct), std::move(mct), s.tracker_seed);
  cfg.stride_ratio = s.stride_ratio;
  cfg.exact_solver_cap = s.exact_solver_cap;
  return cfg;
}

Sequences as_sequences(const std::vector<io::LoadedDataset>& data) {
  Sequences out;
  for (const auto& d : data) out.emplace_back(d.detections);
  return out;
}

CalibrationResult calibrate(const Settings& s, const std::vector<io::LoadedDataset>& data) {
  return calibrate_on(as_sequences(data), detail::mix_seed(s.seed, 0xca11b, 0));
}

/// Resolves `eq1`, `oracle` or a checkpoint path.
AffinityModel affinity_from(const std::string& name, const std::optional<ThresholdCalibration>& cal) {
  if (name == "oracle") return OracleAffinity{};
  if (name == "eq1") {
    if (!cal) throw Error(ErrorCode::ConfigError, "calibration", "eq1 needs a calibration source");
    return *cal;
  }
  return io::read_checkpoint(name);
}

std::optional<ThresholdCalibration> calibration_source(const Settings& s, const std::string& calib_flag,
                                                       const std::string& data_dir,
                                                       const std::vector<std::string>& specs) {
  bool needed = false;
  for (const auto& sp : specs) needed = needed || sp == "eq1";
  if (!needed) return std::nullopt;
  std::string file = calib_flag;
  if (file.empty()) file = io::SectionReader(s.sections, "paths").raw("calibration").value_or("");
  if (!file.empty()) return io::read_calibration(file);
  return calibrate(s, io::read_training_data(data_dir)).calibration;
}

void print_id_table(const IdReport& sct, const IdReport& mct) {
  std::printf("%-6s %8s %8s %8s %8s %8s %8s\n", "level", "IDF1", "IDP", "IDR", "IDTP", "IDFP", "IDFN");
  for (const auto& [name, r] : {std::pair<const char*, const IdReport&>{"sct", sct}, {"mct", mct}})
    std::printf("%-6s %8.4f %8.4f %8.4f %8lld %8lld %8lld\n", name, r.idf1, r.idp, r.idr,
                static_cast<long long>(r.idtp), static_cast<long long>(r.idfp), static_cast<long long>(r.idfn));
}

std::vector<double> parse_multipliers(const std::string& text) {
  std::vector<double> out;
  for (auto item : io::split(text, ',')) {
    if (item.empty()) continue;
    double v = 0.0;
    if (const auto slash = item.find('/'); slash != std::string_view::npos) {
      const double num = io::parse_number<double>(io::trim(item.substr(0, slash)), "multipliers");
      const double den = io::parse_number<double>(io::trim(item.substr(slash + 1)), "multipliers");
      if (den == 0.0) throw Error(ErrorCode::ConfigError, "multipliers", "zero denominator");
      v = num / den;
    } else {
      v = io::parse_number<double>(item, "multipliers");
    }
    if (!(v > 0.0)) throw Error(ErrorCode::ConfigError, "multipliers", "must be positive");
    out.push_back(v);
  }
  if (out.empty()) throw Error(ErrorCode::ConfigError, "multipliers", "empty list");
  return out;
}

std::string safe_name(std::string s) {
  for (auto& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical multi-camera tracking with scope-adaptive affinities"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config, "Run configuration file");
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--profile", g.profile, "Window profile")->check(CLI::IsMember({"duke", "cityflow"}));

  std::string out, data, scheme, sct_name = "eq1", mct_name = "eq1", calib, hyp, multipliers = "1/8,1,8";
  std::optional<Frame> tau;
  bool benchmark = false;
  int train_sequences = kDefaultTrainSequences;
  std::vector<std::string> scorers;
  std::size_t max_pairs = 20000, bins = 40;

  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset or benchmark");
  gen->add_option("--out", out, "Output directory");
  gen->add_flag("--benchmark", benchmark, "Write training sequences plus a held-out test sequence");
  gen->add_option("--train-sequences", train_sequences, "Training sequences of a benchmark")->check(CLI::PositiveNumber);

  auto* cal = app.add_subcommand("calibrate", "Fit the distance threshold on labeled pairs");
  cal->add_option("--data", data, "Dataset, collection or benchmark directory");
  cal->add_option("--out", out, "Calibration JSON");

  auto* train = app.add_subcommand("train", "Train a Siamese metric");
  train->add_option("--data", data, "Dataset, collection or benchmark directory");
  train->add_option("--scheme", scheme, "Pair sampling scheme")->required()->check(CLI::IsMember({"intra", "inter", "global"}));
  train->add_option("--tau", tau, "Sampling window override (frames)");
  train->add_option("--out", out, "Checkpoint JSON");

  auto* track = app.add_subcommand("track", "Run the hierarchical tracker");
  track->add_option("--data", data, "Dataset or benchmark directory");
  track->add_option("--sct", sct_name, "SCT affinity: eq1, oracle or a checkpoint path");
  track->add_option("--mct", mct_name, "MCT affinity: eq1, oracle or a checkpoint path");
  track->add_option("--calibration", calib, "Calibration JSON for eq1 (default: fit on the training data)");
  track->add_option("--out", out, "Hypothesis CSV");

  auto* eval = app.add_subcommand("eval", "Score a hypothesis against ground truth");
  eval->add_option("--data", data, "Dataset or benchmark directory holding the truth");
  eval->add_option("--hyp", hyp, "Hypothesis CSV");
  eval->add_option("--out", out, "Report CSV");

  auto* scopes = app.add_subcommand("scopes", "Pairwise error analysis per matching scope");
  scopes->add_option("--data", data, "Dataset or benchmark directory");
  scopes->add_option("--scorer", scorers, "Scorer: eq1, oracle or a checkpoint path (repeatable; first is the baseline)")
      ->required();
  scopes->add_option("--calibration", calib, "Calibration JSON for eq1");
  scopes->add_option("--max-pairs", max_pairs, "Pair sample cap per scope")->check(CLI::PositiveNumber);
  scopes->add_option("--bins", bins, "Histogram bins")->check(CLI::Range(2, 100000));
  scopes->add_option("--out", out, "Output directory");

  auto* sweep = app.add_subcommand("sweep", "Tracking accuracy versus sampling window length");
  sweep->add_option("--data", data, "Benchmark or dataset directory");
  sweep->add_option("--scheme", scheme, "Stage whose metric is swept")->required()->check(CLI::IsMember({"intra", "inter"}));
  sweep->add_option("--multipliers", multipliers, "Comma-separated window multipliers, fractions allowed");
  sweep->add_option("--out", out, "Sweep CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kBadConfig;
  }

  try {
    const Settings s = load_settings(g);

    if (*gen) {
      const fs::path dir = s.path(out, "out");
      if (benchmark) {
        const auto b = make_benchmark(s.world, s.seed, train_sequences);
        io::write_benchmark(dir, b.train, b.test);
        std::printf("benchmark: %d training sequences, test sequence with %zu detections -> %s\n", train_sequences,
                    b.test.detections.size(), dir.string().c_str());
      } else {
        const auto ds = generate_world(s.world);
        io::write_dataset(dir, ds);
        std::printf("dataset: %d cameras, %zu identities, %zu detections -> %s\n", s.world.n_cameras,
                    ds.gt_tracks.size(), ds.detections.size(), dir.string().c_str());
      }
    } else if (*cal) {
      const auto r = calibrate(s, io::read_training_data(s.path(data, "data")));
      const fs::path file = s.path(out, "calibration");
      io::write_text(file, io::calibration_json(r.calibration, r.pairs_used, r.capped).dump(2) + "\n");
      std::printf("mu_p %.6f  mu_n %.6f  thres %.6f  pairs %zu\n", r.calibration.mu_p, r.calibration.mu_n,
                  r.calibration.thres, r.pairs_used);
      if (r.capped) std::printf("note: pair population exceeds %zu; calibrated on a seeded sample\n", kCalibrationCap);
    } else if (*train) {
      const auto datasets = io::read_training_data(s.path(data, "data"));
      const auto rc = recipe(s, io::scheme_from_string(scheme), tau);
      const auto result = train_on(as_sequences(datasets), rc);
      io::CheckpointMeta meta{rc.train_seed(), rc.sampler().seed, rc.init_seed(), rc.pair_count, result.final_loss,
                              result.final_accuracy};
      io::write_checkpoint(s.path(out, "checkpoint"), result.model, meta);
      std::printf("scheme %s  tau %s  pairs %zu  loss %.6f  accuracy %.4f\n", scheme.c_str(),
                  rc.sampler().tau == kUnboundedFrames ? "inf" : std::to_string(rc.sampler().tau).c_str(),
                  rc.pair_count, result.final_loss, result.final_accuracy);
    } else if (*track) {
      const std::string dir = s.path(data, "data");
      const auto ds = io::read_eval_data(dir);
      const auto source = calibration_source(s, calib, dir, {sct_name, mct_name});
      const auto cfg = tracker(s, affinity_from(sct_name, source), affinity_from(mct_name, source));
      const auto h = run_tracker(ds.detections, cfg);
      io::write_text(s.path(out, "hypothesis"), io::format_hypothesis(ds.detections, h, ds.feature_rows));
      std::set<IdentityId> ids(h.begin(), h.end());
      std::printf("tracked %zu detections into %zu identities (sct %s, mct %s)\n", h.size(), ids.size(),
                  describe(cfg.affinity_sct).c_str(), describe(cfg.affinity_mct).c_str());
    } else if (*eval) {
      const auto ds = io::read_eval_data(s.path(data, "data"));
      const auto records = io::read_hypothesis(s.path(hyp, "hypothesis"));
      const auto aligned = io::align_hypothesis(ds.detections, records);
      const auto truth = truth_of(ds.detections);
      const auto sct = sct_id_measures(ds.detections, aligned);
      const auto mct = id_measures(truth, aligned);
      print_id_table(sct, mct);
      io::write_text(s.path(out, "out"), io::id_report_header() + "\n" + io::id_report_row("sct", sct) + "\n" +
                                             io::id_report_row("mct", mct) + "\n");
    } else if (*scopes) {
      const std::string dir = s.path(data, "data");
      const auto ds = io::read_eval_data(dir);
      const auto source = calibration_source(s, calib, dir, scorers);
      std::vector<AffinityModel> models;
      std::vector<NamedScorer> named;
      models.reserve(scorers.size());
      for (const auto& name : scorers) models.push_back(affinity_from(name, source));
      std::set<std::string> used;
      for (std::size_t k = 0; k < scorers.size(); ++k) {
        std::string name = scorers[k] == "eq1" || scorers[k] == "oracle" ? scorers[k] : fs::path(scorers[k]).stem().string();
        name = safe_name(name);
        while (!used.insert(name).second) name += "_" + std::to_string(k);
        named.push_back({name, pair_scorer(ds.detections, models[k])});
      }
      const std::vector<NamedScope> scope_list = {
          {"reid", scope_pair_iter(ds.detections, ScopeSpec::reid(), detail::mix_seed(s.seed, 0x5c0, 0), max_pairs)},
          {"mct", scope_pair_iter(ds.detections, ScopeSpec::mct(s.profile.mct_window), detail::mix_seed(s.seed, 0x5c0, 1),
                                  max_pairs)},
          {"sct", scope_pair_iter(ds.detections, ScopeSpec::sct(s.profile.sct_window), detail::mix_seed(s.seed, 0x5c0, 2),
                                  max_pairs)}};
      std::vector<ComparisonCell> cells;
      if (named.size() >= 2) {
        cells = compare_affinity_errors(scope_list, named);
      } else {
        for (const auto& sc : scope_list)
          cells.push_back({sc.name, named[0].name, scope_error_analysis(std::span<const ScopePair>(sc.pairs), named[0].score)});
      }
      const fs::path out_dir = s.path(out, "out");
      std::string table = io::scope_report_header() + ",delta_fp_pct,delta_fn_pct,delta_false_pct\n";
      std::printf("%-5s %-20s %9s %8s %8s %8s %8s\n", "scope", "scorer", "pairs", "FP%", "FN%", "dFP", "dFN");
      for (const auto& c : cells) {
        const auto row = io::scope_report_row(c.scope, c.scorer, c.report);
        io::write_text(out_dir / (c.scope + "_" + c.scorer + ".csv"), io::scope_report_header() + "\n" + row + "\n");
        table += row + "," + io::fmt_fixed(c.delta_fp_pct, 4) + "," + io::fmt_fixed(c.delta_fn_pct, 4) + "," +
                 io::fmt_fixed(c.delta_false_pct, 4) + "\n";
        const auto scorer_it = std::find_if(named.begin(), named.end(), [&](const NamedScorer& n) { return n.name == c.scorer; });
        const auto scope_it = std::find_if(scope_list.begin(), scope_list.end(), [&](const NamedScope& n) { return n.name == c.scope; });
        const auto& model = models[static_cast<std::size_t>(scorer_it - named.begin())];
        const auto range = std::holds_alternative<ThresholdCalibration>(model) ? HistogramRange::distance()
                                                                                : HistogramRange::siamese();
        const auto hist = affinity_histograms(std::span<const ScopePair>(scope_it->pairs), scorer_it->score, bins, range);
        io::write_text(out_dir / (c.scope + "_" + c.scorer + "_hist.csv"), io::histogram_csv(hist));
        std::printf("%-5s %-20s %9lld %8.3f %8.3f %8.3f %8.3f\n", c.scope.c_str(), c.scorer.c_str(),
                    static_cast<long long>(c.report.total), c.report.fp_pct(), c.report.fn_pct(), c.delta_fp_pct,
                    c.delta_fn_pct);
      }
      io::write_text(out_dir / "scopes.csv", table);
    } else if (*sweep) {
      const auto mult = parse_multipliers(multipliers);
      const std::string dir = s.path(data, "data");
      const auto train_data = io::read_training_data(dir);
      const auto test = io::read_eval_data(dir);
      const auto seqs = as_sequences(train_data);
      const bool intra = scheme == "intra";
      // The stage that is not swept keeps its matched-window metric.
      const auto fixed = train_on(seqs, recipe(s, intra ? SamplingScheme::Inter : SamplingScheme::Intra,
                                               intra ? s.profile.mct_window : s.profile.sct_window));
      const auto truth = truth_of(test.detections);
      std::string csv = "multiplier,scheme,tau,sct_idf1,mct_idf1\n";
      std::printf("%10s %8s %8s %8s\n", "multiplier", "tau", "SCT", "MCT");
      for (double m : mult) {
        const Frame window = intra ? s.profile.sct_window : s.profile.mct_window;
        const Frame t = std::max<Frame>(1, static_cast<Frame>(std::llround(static_cast<double>(window) * m)));
        const auto swept = train_on(seqs, recipe(s, intra ? SamplingScheme::Intra : SamplingScheme::Inter, t));
        const auto cfg = intra ? tracker(s, swept.model, fixed.model) : tracker(s, fixed.model, swept.model);
        const auto h = run_tracker(test.detections, cfg);
        const auto sct = sct_id_measures(test.detections, h);
        const auto mct = id_measures(truth, h);
        csv += io::fmt_num(m) + "," + scheme + "," + std::to_string(t) + "," + io::fmt_fixed(sct.idf1, 6) + "," +
               io::fmt_fixed(mct.idf1, 6) + "\n";
        std::printf("%10.4g %8lld %8.4f %8.4f\n", m, static_cast<long long>(t), sct.idf1, mct.idf1);
      }
      io::write_text(s.path(out, "out"), csv);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kOther;
  }
  return kOk;
}
