#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mmgesture/metrics.hpp"
#include "mmgesture/models.hpp"
#include "mmgesture/noise_synthesis.hpp"
#include "mmgesture/radar_config.hpp"

namespace mmgesture {

inline constexpr std::uint64_t kDefaultSeed = 7;

struct StageSeeds {
  std::uint64_t profile = 0;
  std::uint64_t pool = 0;
  std::uint64_t dataset = 0;
  std::uint64_t denoiser = 0;
  // Shared by the denoised-input classifier and the raw-input baseline.
  std::uint64_t classifier = 0;
  bool operator==(const StageSeeds&) const = default;
};

// Every stage seed derived from one base seed.
StageSeeds derive_stage_seeds(std::uint64_t base);

struct ExperimentConfig {
  RadarConfig radar{};
  std::size_t pool_size_per_threshold = 500;
  std::size_t dataset_size_per_gesture = 250;
  std::size_t frames_per_gesture = 16;

  double ground_truth_threshold_db = kGroundTruthThresholdDb;
  std::array<double, 2> pool_thresholds_db = kPoolThresholdsDb;
  // Thresholds other than the defaults are rejected unless this is set.
  bool override_thresholds = false;

  double pool_snr_db = kDefaultPoolSnrDb;
  double gesture_snr_db = kDefaultGestureSnrDb;
  // false runs the noise-free control: pool captures carry no receiver noise.
  bool noise_enabled = true;
  CombineRule combine_rule = CombineRule::LinearPower;

  DenoiserSpec denoiser{};
  ClassifierSpec classifier{};
  TrainConfig denoiser_training = default_denoiser_training();
  TrainConfig classifier_training = default_classifier_training();

  std::uint64_t seed = kDefaultSeed;
  StageSeeds seeds = derive_stage_seeds(kDefaultSeed);

  double residual_epsilon = 0.1;
  std::string output_dir = "mmgesture-out";

  // Sets `seed` and re-derives every stage seed from it.
  void set_seed(std::uint64_t base);
  bool thresholds_are_default() const;
  // Throws InvalidArgument on inconsistent values or unflagged threshold overrides.
  void validate() const;
};

// Applies one key=value setting (radar keys included). Returns false for unknown keys;
// throws InvalidArgument for malformed values.
bool apply_experiment_key(ExperimentConfig& config, const std::string& key, const std::string& value);

// `seed` is applied before the per-stage seed keys regardless of file order.
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig experiment_config_from(const std::map<std::string, std::string>& kv);

// key=value echo of every setting, one per line.
std::string describe(const ExperimentConfig& config);

struct SampleRecord {
  std::size_t index = 0;  // position in the dataset
  GestureLabel label = GestureLabel::Left;
  GestureLabel predicted = GestureLabel::Left;
  GestureLabel baseline_predicted = GestureLabel::Left;
  ImageGrid clean;
  ImageGrid noisy;
  ImageGrid denoised;
};

struct MetricsReport {
  double accuracy = 0.0;           // denoise -> classify pipeline
  double baseline_accuracy = 0.0;  // classifier trained and tested on raw noisy images
  ConfusionMatrix confusion;
  ConfusionMatrix baseline_confusion;
  double mean_psnr_noisy_db = 0.0;
  double mean_psnr_denoised_db = 0.0;
  double residual_noisy = 0.0;
  double residual_denoised = 0.0;
  double residual_epsilon = 0.1;
  std::size_t train_count = 0;
  std::size_t validation_count = 0;
  std::size_t test_count = 0;

  TrainReport denoiser_report;
  TrainReport classifier_report;
  TrainReport baseline_report;
  std::vector<SampleRecord> samples;  // held-out test set
  std::map<std::string, double> runtimes_s;

  // Header lines (config echo) written at the top of every CSV.
  std::vector<std::string> provenance;
};

// Artifact filenames inside ExperimentConfig::output_dir.
namespace artifact {
inline constexpr const char* kDatasetManifest = "dataset.json";
inline constexpr const char* kDenoiserWeights = "denoiser.nnw";
inline constexpr const char* kClassifierWeights = "classifier.nnw";
inline constexpr const char* kBaselineWeights = "baseline.nnw";
inline constexpr const char* kDenoiserCurve = "denoiser_curve.csv";
inline constexpr const char* kClassifierCurve = "classifier_curve.csv";
inline constexpr const char* kBaselineCurve = "baseline_curve.csv";
}  // namespace artifact

// Individual stages. Errors are rethrown as StageError tagged with the stage name.
NoisePool stage_noise_pool(const ExperimentConfig& config);
Dataset stage_dataset(const ExperimentConfig& config, const NoisePool& pool);
TrainedModel<float> stage_train_denoiser(const ExperimentConfig& config, const Dataset& dataset);
std::vector<ImageGrid> stage_denoise(const ExperimentConfig& config, const Dataset& dataset,
                                     const nn::ModelWeights<float>& denoiser);
// Trains on dataset.split.train of `images`, validates on dataset.split.validation.
TrainedModel<float> stage_train_classifier(const ExperimentConfig& config, const Dataset& dataset,
                                           const std::vector<ImageGrid>& images,
                                           const std::string& stage_name);
MetricsReport stage_evaluate(const ExperimentConfig& config, const Dataset& dataset,
                             const std::vector<ImageGrid>& denoised,
                             const nn::ModelWeights<float>& classifier,
                             const nn::ModelWeights<float>& baseline);

std::vector<ImageGrid> noisy_images(const Dataset& dataset);

// Full sequence in memory: pool, dataset, denoiser, classifier, baseline, evaluation.
// Writes weights, curves and the report into config.output_dir.
MetricsReport run_experiment(const ExperimentConfig& config);

// Throws IOError unless `dir` exists (created if needed) and accepts a file.
void ensure_writable_directory(const std::string& dir);

std::vector<std::string> provenance_lines(const ExperimentConfig& config);

}  // namespace mmgesture
