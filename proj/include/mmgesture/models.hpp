#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mmgesture/noise_synthesis.hpp"
#include "mmgesture/nn/network.hpp"
#include "mmgesture/nn/optim.hpp"
#include "mmgesture/radar_sim.hpp"
#include "mmgesture/rdm.hpp"

namespace mmgesture {

// Two-level U-Net: conv-ReLU x2 per encoder level, maxpool between levels,
// one bottleneck conv, nearest upsample + conv on the way back, skip concat,
// conv-ReLU x2 per decoder level, 1x1 head with sigmoid.
struct DenoiserSpec {
  std::size_t height = 32;
  std::size_t width = 32;
  std::array<std::size_t, 2> level_channels = {8, 16};
  std::size_t bottleneck_channels = 32;
  // Starting bias of the head. Clean maps are mostly empty cells (pixel
  // 5/55), so the output starts near logit(1/11) instead of sigmoid(0) = 0.5.
  double head_bias = -2.3;

  void validate() const;
  std::string describe() const;
  bool operator==(const DenoiserSpec&) const = default;
};

// Compact inverted-bottleneck classifier: stride-2 stem, three MBConv blocks
// (1x1 expand, grouped 3x3 stride 2, optional squeeze-excite, 1x1 project),
// global average pool, dense logits.
struct ClassifierSpec {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t stem_channels = 8;
  std::array<std::size_t, 3> block_channels = {8, 16, 24};
  std::array<bool, 3> squeeze_excite = {false, true, true};
  std::size_t expand_ratio = 4;
  std::size_t se_reduction = 4;
  // false swaps the grouped 3x3 for a full convolution.
  bool grouped_depthwise = true;
  std::size_t n_classes = kNumGestures;

  void validate() const;
  std::string describe() const;
  bool operator==(const ClassifierSpec&) const = default;
};

template <typename T>
nn::Network<T> build_denoiser(const DenoiserSpec& spec);
template <typename T>
nn::Network<T> build_classifier(const ClassifierSpec& spec);

// Seeded He-uniform weights plus the head bias from the spec.
template <typename T>
void initialize_denoiser(nn::Network<T>& net, const DenoiserSpec& spec, std::uint64_t seed);

inline constexpr const char* kClassifierHeadName = "head";

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  // Classifier only; NaN for the denoiser.
  double val_accuracy = 0.0;
};

struct TrainConfig {
  nn::AdamConfig adam{};
  std::size_t batch_size = 16;
  std::size_t max_epochs = 30;
  // Stop after this many epochs without a better validation score (0 disables).
  std::size_t patience = 8;
  // Called after every epoch (progress output); does not affect training.
  std::function<void(const EpochRecord&)> on_epoch;
};

TrainConfig default_denoiser_training();
TrainConfig default_classifier_training();

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::string weights_path;

  // Wall time is excluded; everything else is a function of the inputs.
  bool same_trajectory(const TrainReport& other) const;
};

template <typename T>
struct TrainedModel {
  nn::ModelWeights<T> weights;
  TrainReport report;
};

nn::Tensor<float> to_tensor(const ImageGrid& img);
ImageGrid to_image_grid(const nn::Tensor<float>& t, const ImageGrid& like);

// Regresses clean from noisy over dataset.split.train, scores dataset.split.validation.
// Returns the best-validation weights.
TrainedModel<float> train_denoiser(const Dataset& dataset, const DenoiserSpec& spec,
                                   const TrainConfig& config, std::uint64_t seed);

ImageGrid denoise(const DenoiserSpec& spec, const nn::ModelWeights<float>& weights,
                  const ImageGrid& noisy);
// Same as denoise() for many images; builds the network once.
std::vector<ImageGrid> denoise_all(const DenoiserSpec& spec, const nn::ModelWeights<float>& weights,
                                   std::span<const ImageGrid> noisy);

struct LabeledImages {
  std::vector<ImageGrid> images;
  std::vector<GestureLabel> labels;

  std::size_t size() const noexcept { return images.size(); }
};

TrainedModel<float> train_classifier(const LabeledImages& train, const LabeledImages& validation,
                                     const ClassifierSpec& spec, const TrainConfig& config,
                                     std::uint64_t seed);

struct Classification {
  std::array<double, kNumGestures> probabilities{};
  GestureLabel label = GestureLabel::Left;
};

Classification classify(const ClassifierSpec& spec, const nn::ModelWeights<float>& weights,
                        const ImageGrid& image);
std::vector<Classification> classify_all(const ClassifierSpec& spec,
                                         const nn::ModelWeights<float>& weights,
                                         std::span<const ImageGrid> images);

// Zeroes the dense head so every input maps to uniform probabilities.
template <typename T>
void zero_classifier_head(nn::ModelWeights<T>& weights);

// Freshly initialized weights for a spec (seeded He-uniform).
nn::ModelWeights<float> initial_denoiser_weights(const DenoiserSpec& spec, std::uint64_t seed);
nn::ModelWeights<float> initial_classifier_weights(const ClassifierSpec& spec, std::uint64_t seed);

}  // namespace mmgesture
