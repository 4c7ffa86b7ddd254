#include "mmgesture/experiment.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "mmgesture/dataset_io.hpp"
#include "mmgesture/errors.hpp"
#include "mmgesture/nn/serialize.hpp"
#include "mmgesture/random.hpp"
#include "mmgesture/report.hpp"

namespace mmgesture {

namespace fs = std::filesystem;

StageSeeds derive_stage_seeds(std::uint64_t base) {
  return {derive_seed(base, 1), derive_seed(base, 2), derive_seed(base, 3), derive_seed(base, 4),
          derive_seed(base, 5)};
}

void ExperimentConfig::set_seed(std::uint64_t base) {
  seed = base;
  seeds = derive_stage_seeds(base);
}

bool ExperimentConfig::thresholds_are_default() const {
  return ground_truth_threshold_db == kGroundTruthThresholdDb &&
         pool_thresholds_db == kPoolThresholdsDb;
}

void ExperimentConfig::validate() const {
  radar.validate();
  if (!override_thresholds && !thresholds_are_default()) {
    throw InvalidArgument(
        "threshold values differ from the defaults (-90 / -95, -100 dB); set "
        "override_thresholds=true to use them");
  }
  for (double t : {ground_truth_threshold_db, pool_thresholds_db[0], pool_thresholds_db[1]}) {
    if (!std::isfinite(t)) throw InvalidArgument("thresholds must be finite");
  }
  if (pool_size_per_threshold == 0) throw InvalidArgument("pool_size_per_threshold must be positive");
  if (dataset_size_per_gesture == 0) throw InvalidArgument("dataset_size_per_gesture must be positive");
  if (frames_per_gesture < 2) throw InvalidArgument("frames_per_gesture must be at least 2");
  if (!std::isfinite(pool_snr_db) || !std::isfinite(gesture_snr_db)) {
    throw InvalidArgument("SNR values must be finite");
  }
  if (!(residual_epsilon > 0.0 && residual_epsilon < 1.0)) {
    throw InvalidArgument("residual_epsilon must lie in (0, 1)");
  }
  if (denoiser.height != radar.doppler_bins() || denoiser.width != radar.range_bins() ||
      classifier.height != radar.doppler_bins() || classifier.width != radar.range_bins()) {
    throw InvalidArgument("model input sizes must match the radar map (" +
                          std::to_string(radar.doppler_bins()) + "x" +
                          std::to_string(radar.range_bins()) + ")");
  }
  denoiser.validate();
  classifier.validate();
  if (output_dir.empty()) throw InvalidArgument("output_dir must not be empty");
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream is(value);
  T out{};
  is >> out;
  if (!is || !(is >> std::ws).eof()) {
    throw InvalidArgument("invalid value '" + value + "' for key '" + key + "'");
  }
  if constexpr (std::is_unsigned_v<T>) {
    if (value.find('-') != std::string::npos) {
      throw InvalidArgument("key '" + key + "' must be non-negative");
    }
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw InvalidArgument("invalid boolean '" + value + "' for key '" + key + "'");
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

std::string num_str(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

bool apply_experiment_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
  using u64 = std::uint64_t;
  using sz = std::size_t;
  if (apply_radar_key(c.radar, key, value)) {
    // Model inputs follow the map size.
    c.denoiser.height = c.classifier.height = c.radar.doppler_bins();
    c.denoiser.width = c.classifier.width = c.radar.range_bins();
    return true;
  }
  if (key == "pool_size_per_threshold") c.pool_size_per_threshold = parse_number<sz>(key, value);
  else if (key == "dataset_size_per_gesture") c.dataset_size_per_gesture = parse_number<sz>(key, value);
  else if (key == "frames_per_gesture") c.frames_per_gesture = parse_number<sz>(key, value);
  else if (key == "ground_truth_threshold_db") c.ground_truth_threshold_db = parse_number<double>(key, value);
  else if (key == "pool_thresholds_db") {
    const auto comma = value.find(',');
    if (comma == std::string::npos) {
      throw InvalidArgument("pool_thresholds_db expects two comma-separated values");
    }
    c.pool_thresholds_db = {parse_number<double>(key, value.substr(0, comma)),
                            parse_number<double>(key, value.substr(comma + 1))};
  } else if (key == "override_thresholds") c.override_thresholds = parse_bool(key, value);
  else if (key == "pool_snr_db") c.pool_snr_db = parse_number<double>(key, value);
  else if (key == "gesture_snr_db") c.gesture_snr_db = parse_number<double>(key, value);
  else if (key == "noise_enabled") c.noise_enabled = parse_bool(key, value);
  else if (key == "combine_rule") {
    if (value == "linear_power") c.combine_rule = CombineRule::LinearPower;
    else if (value == "db_max") c.combine_rule = CombineRule::DbMax;
    else throw InvalidArgument("combine_rule must be linear_power or db_max");
  } else if (key == "grouped_depthwise") c.classifier.grouped_depthwise = parse_bool(key, value);
  else if (key == "denoiser_epochs") c.denoiser_training.max_epochs = parse_number<sz>(key, value);
  else if (key == "classifier_epochs") c.classifier_training.max_epochs = parse_number<sz>(key, value);
  else if (key == "batch_size") {
    c.denoiser_training.batch_size = c.classifier_training.batch_size = parse_number<sz>(key, value);
  } else if (key == "learning_rate") {
    c.denoiser_training.adam.learning_rate = c.classifier_training.adam.learning_rate =
        parse_number<double>(key, value);
  } else if (key == "patience") {
    c.denoiser_training.patience = c.classifier_training.patience = parse_number<sz>(key, value);
  } else if (key == "seed") c.set_seed(parse_number<u64>(key, value));
  else if (key == "profile_seed") c.seeds.profile = parse_number<u64>(key, value);
  else if (key == "pool_seed") c.seeds.pool = parse_number<u64>(key, value);
  else if (key == "dataset_seed") c.seeds.dataset = parse_number<u64>(key, value);
  else if (key == "denoiser_seed") c.seeds.denoiser = parse_number<u64>(key, value);
  else if (key == "classifier_seed") c.seeds.classifier = parse_number<u64>(key, value);
  else if (key == "residual_epsilon") c.residual_epsilon = parse_number<double>(key, value);
  else if (key == "output_dir") c.output_dir = value;
  else return false;
  return true;
}

ExperimentConfig experiment_config_from(const std::map<std::string, std::string>& kv) {
  ExperimentConfig c;
  if (auto it = kv.find("seed"); it != kv.end()) apply_experiment_key(c, it->first, it->second);
  for (const auto& [k, v] : kv) {
    if (k == "seed") continue;
    if (!apply_experiment_key(c, k, v)) throw InvalidArgument("unknown configuration key '" + k + "'");
  }
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return experiment_config_from(read_key_value_file(path));
}

std::string describe(const ExperimentConfig& c) {
  std::ostringstream os;
  os << to_key_value(c.radar);
  os << "pool_size_per_threshold=" << c.pool_size_per_threshold << '\n'
     << "dataset_size_per_gesture=" << c.dataset_size_per_gesture << '\n'
     << "frames_per_gesture=" << c.frames_per_gesture << '\n'
     << "ground_truth_threshold_db=" << num_str(c.ground_truth_threshold_db) << '\n'
     << "pool_thresholds_db=" << num_str(c.pool_thresholds_db[0]) << ','
     << num_str(c.pool_thresholds_db[1]) << '\n'
     << "override_thresholds=" << bool_str(c.override_thresholds) << '\n'
     << "pool_snr_db=" << num_str(c.pool_snr_db) << '\n'
     << "gesture_snr_db=" << num_str(c.gesture_snr_db) << '\n'
     << "noise_enabled=" << bool_str(c.noise_enabled) << '\n'
     << "combine_rule=" << (c.combine_rule == CombineRule::LinearPower ? "linear_power" : "db_max")
     << '\n'
     << "grouped_depthwise=" << bool_str(c.classifier.grouped_depthwise) << '\n'
     << "denoiser_epochs=" << c.denoiser_training.max_epochs << '\n'
     << "classifier_epochs=" << c.classifier_training.max_epochs << '\n'
     << "batch_size=" << c.classifier_training.batch_size << '\n'
     << "learning_rate=" << num_str(c.classifier_training.adam.learning_rate) << '\n'
     << "patience=" << c.classifier_training.patience << '\n'
     << "seed=" << c.seed << '\n'
     << "profile_seed=" << c.seeds.profile << '\n'
     << "pool_seed=" << c.seeds.pool << '\n'
     << "dataset_seed=" << c.seeds.dataset << '\n'
     << "denoiser_seed=" << c.seeds.denoiser << '\n'
     << "classifier_seed=" << c.seeds.classifier << '\n'
     << "residual_epsilon=" << num_str(c.residual_epsilon) << '\n'
     << "output_dir=" << c.output_dir << '\n';
  return os.str();
}

std::vector<std::string> provenance_lines(const ExperimentConfig& c) {
  std::vector<std::string> lines;
  std::istringstream is(describe(c));
  for (std::string line; std::getline(is, line);) {
    // The output location does not affect results; keep it out so reruns elsewhere compare equal.
    if (line.rfind("output_dir=", 0) == 0) continue;
    lines.push_back(line);
  }
  lines.push_back(std::string("thresholds=") +
                  (c.thresholds_are_default() ? "default" : "OVERRIDDEN"));
  lines.push_back("denoiser=" + c.denoiser.describe());
  lines.push_back("classifier=" + c.classifier.describe());
  return lines;
}

void ensure_writable_directory(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IOError("cannot create output directory '" + dir + "'");
  const fs::path probe = fs::path(dir) / ".write-probe";
  {
    std::ofstream os(probe);
    if (!os || !(os << "ok")) throw IOError("output directory '" + dir + "' is not writable");
  }
  fs::remove(probe, ec);
}

namespace {

template <typename Fn>
auto run_stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::vector<AntennaNoiseProfile> make_profiles(const ExperimentConfig& c) {
  std::vector<AntennaNoiseProfile> profiles;
  for (std::size_t a = 0; a < c.radar.n_antennas; ++a) {
    profiles.push_back(antenna_noise_profile(a, c.radar, c.seeds.profile));
  }
  return profiles;
}

LabeledImages subset(const std::vector<ImageGrid>& images, const Dataset& ds,
                     const std::vector<std::size_t>& idx) {
  LabeledImages out;
  for (std::size_t i : idx) {
    out.images.push_back(images.at(i));
    out.labels.push_back(ds.pairs.at(i).label);
  }
  return out;
}

}  // namespace

NoisePool stage_noise_pool(const ExperimentConfig& c) {
  return run_stage("noise-pool", [&] {
    c.validate();
    PoolOptions opts;
    opts.thresholds_db = c.pool_thresholds_db;
    opts.snr_db = c.pool_snr_db;
    opts.noise_enabled = c.noise_enabled;
    const auto profiles = make_profiles(c);
    return build_noise_pool(c.pool_size_per_threshold, c.radar, profiles, c.seeds.pool, opts);
  });
}

Dataset stage_dataset(const ExperimentConfig& c, const NoisePool& pool) {
  return run_stage("dataset", [&] {
    DatasetOptions opts;
    opts.frames_per_gesture = c.frames_per_gesture;
    opts.gesture_snr_db = c.gesture_snr_db;
    opts.profile_seed = c.seeds.profile;
    opts.synthesis.rule = c.combine_rule;
    opts.synthesis.clean_threshold_db = c.ground_truth_threshold_db;
    return generate_dataset(c.dataset_size_per_gesture, pool, c.radar, c.seeds.dataset, opts);
  });
}

TrainedModel<float> stage_train_denoiser(const ExperimentConfig& c, const Dataset& ds) {
  return run_stage("train-denoiser",
                   [&] { return train_denoiser(ds, c.denoiser, c.denoiser_training, c.seeds.denoiser); });
}

std::vector<ImageGrid> noisy_images(const Dataset& ds) {
  std::vector<ImageGrid> out;
  out.reserve(ds.pairs.size());
  for (const auto& p : ds.pairs) out.push_back(p.noisy);
  return out;
}

std::vector<ImageGrid> stage_denoise(const ExperimentConfig& c, const Dataset& ds,
                                     const nn::ModelWeights<float>& denoiser) {
  return run_stage("denoise", [&] {
    const auto noisy = noisy_images(ds);
    return denoise_all(c.denoiser, denoiser, noisy);
  });
}

TrainedModel<float> stage_train_classifier(const ExperimentConfig& c, const Dataset& ds,
                                           const std::vector<ImageGrid>& images,
                                           const std::string& stage_name) {
  return run_stage(stage_name, [&] {
    if (images.size() != ds.pairs.size()) {
      throw InvalidArgument("image count does not match the dataset");
    }
    return train_classifier(subset(images, ds, ds.split.train),
                            subset(images, ds, ds.split.validation), c.classifier,
                            c.classifier_training, c.seeds.classifier);
  });
}

MetricsReport stage_evaluate(const ExperimentConfig& c, const Dataset& ds,
                             const std::vector<ImageGrid>& denoised,
                             const nn::ModelWeights<float>& classifier,
                             const nn::ModelWeights<float>& baseline) {
  return run_stage("evaluate", [&] {
    const auto& test = ds.split.test;
    if (test.empty()) throw StateError("held-out test split is empty");
    if (denoised.size() != ds.pairs.size()) throw InvalidArgument("denoised image count mismatch");

    std::vector<ImageGrid> test_denoised, test_noisy;
    for (std::size_t i : test) {
      test_denoised.push_back(denoised[i]);
      test_noisy.push_back(ds.pairs[i].noisy);
    }
    const auto pred = classify_all(c.classifier, classifier, test_denoised);
    const auto base = classify_all(c.classifier, baseline, test_noisy);

    MetricsReport r;
    r.residual_epsilon = c.residual_epsilon;
    r.train_count = ds.split.train.size();
    r.validation_count = ds.split.validation.size();
    r.test_count = test.size();
    double psnr_noisy = 0.0, psnr_denoised = 0.0, res_noisy = 0.0, res_denoised = 0.0;
    for (std::size_t k = 0; k < test.size(); ++k) {
      const auto& pair = ds.pairs[test[k]];
      r.confusion.add(pair.label, pred[k].label);
      r.baseline_confusion.add(pair.label, base[k].label);
      psnr_noisy += psnr(pair.clean, pair.noisy);
      psnr_denoised += psnr(pair.clean, test_denoised[k]);
      res_noisy += residual_noise_fraction(pair.noisy, pair.clean, c.residual_epsilon);
      res_denoised += residual_noise_fraction(test_denoised[k], pair.clean, c.residual_epsilon);
      r.samples.push_back({test[k], pair.label, pred[k].label, base[k].label, pair.clean, pair.noisy,
                           test_denoised[k]});
    }
    const double n = static_cast<double>(test.size());
    r.accuracy = r.confusion.accuracy();
    r.baseline_accuracy = r.baseline_confusion.accuracy();
    r.mean_psnr_noisy_db = psnr_noisy / n;
    r.mean_psnr_denoised_db = psnr_denoised / n;
    r.residual_noisy = res_noisy / n;
    r.residual_denoised = res_denoised / n;
    r.provenance = provenance_lines(c);
    return r;
  });
}

MetricsReport run_experiment(const ExperimentConfig& config) {
  run_stage("config", [&] { config.validate(); });
  ensure_writable_directory(config.output_dir);
  const fs::path out(config.output_dir);
  const auto prov = provenance_lines(config);

  std::map<std::string, double> runtimes;
  auto timed = [&](const std::string& name, auto&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    auto result = fn();
    runtimes[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
  };

  const NoisePool pool = timed("noise-pool", [&] { return stage_noise_pool(config); });
  const Dataset ds = timed("dataset", [&] { return stage_dataset(config, pool); });
  auto den = timed("train-denoiser", [&] { return stage_train_denoiser(config, ds); });
  const auto denoised = timed("denoise", [&] { return stage_denoise(config, ds, den.weights); });
  auto clf = timed("train-classifier",
                   [&] { return stage_train_classifier(config, ds, denoised, "train-classifier"); });
  auto base = timed("train-baseline", [&] {
    return stage_train_classifier(config, ds, noisy_images(ds), "train-baseline");
  });
  MetricsReport report = timed(
      "evaluate", [&] { return stage_evaluate(config, ds, denoised, clf.weights, base.weights); });

  run_stage("export", [&] {
    den.report.weights_path = artifact::kDenoiserWeights;
    clf.report.weights_path = artifact::kClassifierWeights;
    base.report.weights_path = artifact::kBaselineWeights;
    // Saved so eval/export can be rerun on the same directory.
    nlohmann::json prov_json = nlohmann::json::array();
    for (const auto& line : prov) prov_json.push_back(line);
    save_dataset(ds, (out / artifact::kDatasetManifest).string(), prov_json);
    nn::save_weights((out / artifact::kDenoiserWeights).string(), den.weights);
    nn::save_weights((out / artifact::kClassifierWeights).string(), clf.weights);
    nn::save_weights((out / artifact::kBaselineWeights).string(), base.weights);
    write_train_report((out / artifact::kDenoiserCurve).string(), den.report, prov);
    write_train_report((out / artifact::kClassifierCurve).string(), clf.report, prov);
    write_train_report((out / artifact::kBaselineCurve).string(), base.report, prov);
    report.denoiser_report = den.report;
    report.classifier_report = clf.report;
    report.baseline_report = base.report;
    report.runtimes_s = runtimes;
    export_report(report, config.output_dir);
  });
  return report;
}

}  // namespace mmgesture
