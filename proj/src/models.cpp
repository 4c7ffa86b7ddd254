#include "mmgesture/models.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "mmgesture/errors.hpp"
#include "mmgesture/nn/loss.hpp"
#include "mmgesture/random.hpp"

namespace mmgesture {

using nn::LayerKind;
using nn::LayerSpec;
using nn::NodeId;

void DenoiserSpec::validate() const {
  if (height == 0 || width == 0 || height % 4 != 0 || width % 4 != 0) {
    throw InvalidArgument("denoiser input " + std::to_string(height) + "x" +
                          std::to_string(width) + " must be non-empty and divisible by 4");
  }
  if (level_channels[0] == 0 || level_channels[1] == 0 || bottleneck_channels == 0) {
    throw InvalidArgument("denoiser channel counts must be positive");
  }
}

std::string DenoiserSpec::describe() const {
  std::ostringstream os;
  os << "unet in=1x" << height << "x" << width << " levels=" << level_channels[0] << ","
     << level_channels[1] << " bottleneck=" << bottleneck_channels << " upsample=nearest+conv3";
  return os.str();
}

void ClassifierSpec::validate() const {
  if (height < 16 || width < 16 || height % 16 != 0 || width % 16 != 0) {
    throw InvalidArgument("classifier input must be a multiple of 16 on each side");
  }
  if (stem_channels == 0 || expand_ratio == 0 || se_reduction == 0 || n_classes < 2) {
    throw InvalidArgument("classifier spec has a zero-sized component");
  }
  std::size_t in = stem_channels;
  for (std::size_t b = 0; b < 3; ++b) {
    if (block_channels[b] == 0) throw InvalidArgument("classifier block channels must be positive");
    if (squeeze_excite[b] && (in * expand_ratio) / se_reduction == 0) {
      throw InvalidArgument("squeeze-excite reduction leaves no channels");
    }
    in = block_channels[b];
  }
}

std::string ClassifierSpec::describe() const {
  std::ostringstream os;
  os << "mbconv in=1x" << height << "x" << width << " stem=" << stem_channels << " blocks="
     << block_channels[0] << "," << block_channels[1] << "," << block_channels[2]
     << " expand=" << expand_ratio << " se=" << squeeze_excite[0] << squeeze_excite[1]
     << squeeze_excite[2] << "/" << se_reduction
     << " depthwise=" << (grouped_depthwise ? "grouped" : "full") << " classes=" << n_classes;
  return os.str();
}

namespace {

template <typename T>
NodeId conv_relu(nn::Network<T>& net, NodeId from, std::size_t in, std::size_t out,
                 const std::string& name) {
  const NodeId c = net.add(LayerSpec::conv(in, out, 3), {from}, name);
  return net.add(LayerSpec::of(LayerKind::ReLU), {c}, name + ".relu");
}

}  // namespace

template <typename T>
nn::Network<T> build_denoiser(const DenoiserSpec& spec) {
  spec.validate();
  const std::size_t c1 = spec.level_channels[0], c2 = spec.level_channels[1];
  const std::size_t cb = spec.bottleneck_channels;
  nn::Network<T> net({1, spec.height, spec.width});

  NodeId x = conv_relu(net, net.input(), 1, c1, "enc1a");
  const NodeId skip1 = conv_relu(net, x, c1, c1, "enc1b");
  x = net.add(LayerSpec::of(LayerKind::MaxPool2x2), {skip1}, "pool1");
  x = conv_relu(net, x, c1, c2, "enc2a");
  const NodeId skip2 = conv_relu(net, x, c2, c2, "enc2b");
  x = net.add(LayerSpec::of(LayerKind::MaxPool2x2), {skip2}, "pool2");
  x = conv_relu(net, x, c2, cb, "bottleneck");

  x = net.add(LayerSpec::of(LayerKind::Upsample2x), {x}, "up2");
  x = conv_relu(net, x, cb, c2, "up2conv");
  x = net.add(LayerSpec::of(LayerKind::Concat), {x, skip2}, "cat2");
  x = conv_relu(net, x, 2 * c2, c2, "dec2a");
  x = conv_relu(net, x, c2, c2, "dec2b");

  x = net.add(LayerSpec::of(LayerKind::Upsample2x), {x}, "up1");
  x = conv_relu(net, x, c2, c1, "up1conv");
  x = net.add(LayerSpec::of(LayerKind::Concat), {x, skip1}, "cat1");
  x = conv_relu(net, x, 2 * c1, c1, "dec1a");
  x = conv_relu(net, x, c1, c1, "dec1b");

  x = net.add(LayerSpec::conv(c1, 1, 1), {x}, "head");
  net.add(LayerSpec::of(LayerKind::Sigmoid), {x}, "out");
  return net;
}

template <typename T>
nn::Network<T> build_classifier(const ClassifierSpec& spec) {
  spec.validate();
  nn::Network<T> net({1, spec.height, spec.width});

  NodeId x = net.add(LayerSpec::conv(1, spec.stem_channels, 3, 2), {net.input()}, "stem");
  x = net.add(LayerSpec::batch_channel_scale(spec.stem_channels), {x}, "stem.bcs");
  x = net.add(LayerSpec::of(LayerKind::ReLU), {x}, "stem.relu");

  std::size_t in = spec.stem_channels;
  for (std::size_t b = 0; b < 3; ++b) {
    const std::string p = "block" + std::to_string(b + 1);
    const std::size_t wide = in * spec.expand_ratio;
    const std::size_t out = spec.block_channels[b];

    x = net.add(LayerSpec::conv(in, wide, 1), {x}, p + ".expand");
    x = net.add(LayerSpec::of(LayerKind::ReLU), {x}, p + ".expand.relu");
    const std::size_t groups = spec.grouped_depthwise ? wide : 1;
    x = net.add(LayerSpec::conv(wide, wide, 3, 2, groups), {x}, p + ".depthwise");
    x = net.add(LayerSpec::of(LayerKind::ReLU), {x}, p + ".depthwise.relu");
    if (spec.squeeze_excite[b]) {
      const std::size_t squeezed = wide / spec.se_reduction;
      NodeId s = net.add(LayerSpec::of(LayerKind::GlobalAvgPool), {x}, p + ".se.pool");
      s = net.add(LayerSpec::dense(wide, squeezed), {s}, p + ".se.reduce");
      s = net.add(LayerSpec::of(LayerKind::ReLU), {s}, p + ".se.relu");
      s = net.add(LayerSpec::dense(squeezed, wide), {s}, p + ".se.expand");
      s = net.add(LayerSpec::of(LayerKind::Sigmoid), {s}, p + ".se.sigmoid");
      x = net.add(LayerSpec::of(LayerKind::ChannelGate), {x, s}, p + ".se.gate");
    }
    x = net.add(LayerSpec::conv(wide, out, 1), {x}, p + ".project");
    in = out;
  }

  x = net.add(LayerSpec::of(LayerKind::GlobalAvgPool), {x}, "pool");
  net.add(LayerSpec::dense(in, spec.n_classes), {x}, kClassifierHeadName);
  return net;
}

template <typename T>
void initialize_denoiser(nn::Network<T>& net, const DenoiserSpec& spec, std::uint64_t seed) {
  net.initialize(derive_seed(seed, 1));
  auto& bias = net.weights().at("head.bias");
  std::fill(bias.values.begin(), bias.values.end(), static_cast<T>(spec.head_bias));
}

template void initialize_denoiser(nn::Network<float>&, const DenoiserSpec&, std::uint64_t);
template void initialize_denoiser(nn::Network<double>&, const DenoiserSpec&, std::uint64_t);
template nn::Network<float> build_denoiser(const DenoiserSpec&);
template nn::Network<double> build_denoiser(const DenoiserSpec&);
template nn::Network<float> build_classifier(const ClassifierSpec&);
template nn::Network<double> build_classifier(const ClassifierSpec&);

TrainConfig default_denoiser_training() {
  TrainConfig c;
  c.max_epochs = 30;
  return c;
}

TrainConfig default_classifier_training() {
  TrainConfig c;
  c.max_epochs = 40;
  return c;
}

bool TrainReport::same_trajectory(const TrainReport& o) const {
  if (epochs.size() != o.epochs.size() || best_epoch != o.best_epoch || seed != o.seed) return false;
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    const auto& a = epochs[i];
    const auto& b = o.epochs[i];
    const bool acc_eq = (std::isnan(a.val_accuracy) && std::isnan(b.val_accuracy)) ||
                        a.val_accuracy == b.val_accuracy;
    if (a.epoch != b.epoch || a.train_loss != b.train_loss || a.val_loss != b.val_loss || !acc_eq) {
      return false;
    }
  }
  return true;
}

nn::Tensor<float> to_tensor(const ImageGrid& img) {
  nn::Tensor<float> t({1, img.height, img.width});
  for (std::size_t i = 0; i < img.pixels.size(); ++i) t.values[i] = static_cast<float>(img.pixels[i]);
  return t;
}

ImageGrid to_image_grid(const nn::Tensor<float>& t, const ImageGrid& like) {
  if (nn::shape_size(t.shape) != like.pixels.size()) {
    throw ShapeError("tensor " + nn::shape_string(t.shape) + " does not fit image " +
                     std::to_string(like.height) + "x" + std::to_string(like.width));
  }
  ImageGrid out;
  out.height = like.height;
  out.width = like.width;
  out.source = like.source;
  out.pixels.assign(t.values.begin(), t.values.end());
  return out;
}

namespace {

void check_image(const ImageGrid& img, std::size_t h, std::size_t w, const char* what) {
  if (img.height != h || img.width != w || img.pixels.size() != h * w) {
    throw ShapeError(std::string(what) + ": image " + std::to_string(img.height) + "x" +
                     std::to_string(img.width) + " does not match model input " +
                     std::to_string(h) + "x" + std::to_string(w));
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Shared mini-batch loop. `sample_step(net, i)` runs forward + backward for
// training sample i with its loss gradient pre-scaled and returns the loss.
// `evaluate(net)` returns {val_loss, val_accuracy} and a score (higher is better).
struct Validation {
  double loss = 0.0;
  double accuracy = std::numeric_limits<double>::quiet_NaN();
  double score = 0.0;
};

template <typename StepFn, typename EvalFn>
TrainedModel<float> fit(nn::Network<float>& net, std::size_t n_train, const TrainConfig& config,
                        std::uint64_t seed, StepFn&& sample_step, EvalFn&& evaluate) {
  if (config.batch_size == 0 || config.max_epochs == 0) {
    throw InvalidArgument("batch size and epoch count must be positive");
  }
  const auto t0 = std::chrono::steady_clock::now();

  TrainedModel<float> best{net.weights(), {}};
  best.report.seed = seed;
  double best_score = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  std::vector<std::size_t> order(n_train);
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(derive_seed(seed, 2), epoch);
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n_train; start += config.batch_size) {
      const std::size_t stop = std::min(n_train, start + config.batch_size);
      const float scale = 1.0f / static_cast<float>(stop - start);
      net.weights().zero_grad();
      for (std::size_t k = start; k < stop; ++k) loss_sum += sample_step(net, order[k], scale);
      nn::adam_step(net.weights(), config.adam);
    }

    const Validation v = evaluate(net);
    best.report.epochs.push_back({epoch, loss_sum / static_cast<double>(n_train), v.loss, v.accuracy});
    if (config.on_epoch) config.on_epoch(best.report.epochs.back());
    if (v.score > best_score) {
      best_score = v.score;
      best.weights = net.weights();
      best.report.best_epoch = epoch;
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }
  best.report.wall_seconds = seconds_since(t0);
  return best;
}

}  // namespace

TrainedModel<float> train_denoiser(const Dataset& dataset, const DenoiserSpec& spec,
                                   const TrainConfig& config, std::uint64_t seed) {
  spec.validate();
  const auto& train = dataset.split.train;
  const auto& val = dataset.split.validation;
  if (dataset.pairs.empty() || train.empty()) throw InvalidArgument("denoiser dataset is empty");
  if (val.empty()) throw InvalidArgument("denoiser dataset has no validation samples");
  for (const auto& p : dataset.pairs) {
    check_image(p.noisy, spec.height, spec.width, "train_denoiser");
    check_image(p.clean, spec.height, spec.width, "train_denoiser");
  }

  std::vector<nn::Tensor<float>> noisy, clean;
  noisy.reserve(dataset.pairs.size());
  clean.reserve(dataset.pairs.size());
  for (const auto& p : dataset.pairs) {
    noisy.push_back(to_tensor(p.noisy));
    clean.push_back(to_tensor(p.clean));
  }

  auto net = build_denoiser<float>(spec);
  initialize_denoiser(net, spec, seed);
  auto step = [&](nn::Network<float>& n, std::size_t k, float scale) {
    const std::size_t i = train[k];
    const auto& y = n.forward(noisy[i], true);
    auto l = nn::mse_loss(y, clean[i]);
    for (auto& g : l.grad.values) g *= scale;
    n.backward(l.grad);
    return static_cast<double>(l.loss);
  };
  auto evaluate = [&](nn::Network<float>& n) {
    double sum = 0.0;
    for (std::size_t i : val) sum += nn::mse_loss(n.forward(noisy[i], false), clean[i]).loss;
    Validation v;
    v.loss = sum / static_cast<double>(val.size());
    v.score = -v.loss;
    return v;
  };
  return fit(net, train.size(), config, seed, step, evaluate);
}

std::vector<ImageGrid> denoise_all(const DenoiserSpec& spec, const nn::ModelWeights<float>& weights,
                                   std::span<const ImageGrid> noisy) {
  auto net = build_denoiser<float>(spec);
  net.weights().assign_values_from(weights);
  std::vector<ImageGrid> out;
  out.reserve(noisy.size());
  for (const auto& img : noisy) {
    check_image(img, spec.height, spec.width, "denoise");
    out.push_back(to_image_grid(net.forward(to_tensor(img), false), img));
  }
  return out;
}

ImageGrid denoise(const DenoiserSpec& spec, const nn::ModelWeights<float>& weights,
                  const ImageGrid& noisy) {
  return denoise_all(spec, weights, std::span<const ImageGrid>(&noisy, 1)).front();
}

TrainedModel<float> train_classifier(const LabeledImages& train, const LabeledImages& validation,
                                     const ClassifierSpec& spec, const TrainConfig& config,
                                     std::uint64_t seed) {
  spec.validate();
  if (train.size() == 0) throw InvalidArgument("classifier training set is empty");
  if (validation.size() == 0) throw InvalidArgument("classifier validation set is empty");
  for (const auto* set : {&train, &validation}) {
    if (set->images.size() != set->labels.size()) {
      throw InvalidArgument("classifier images and labels differ in count");
    }
    for (const auto& img : set->images) check_image(img, spec.height, spec.width, "train_classifier");
    for (auto l : set->labels) {
      if (!is_valid(l)) throw InvalidArgument("classifier label out of range");
    }
  }
  std::set<GestureLabel> classes(train.labels.begin(), train.labels.end());
  if (classes.size() < 2) throw InvalidArgument("classifier training set has a single class");

  std::vector<nn::Tensor<float>> xs, vs;
  for (const auto& img : train.images) xs.push_back(to_tensor(img));
  for (const auto& img : validation.images) vs.push_back(to_tensor(img));

  auto net = build_classifier<float>(spec);
  net.initialize(derive_seed(seed, 1));
  auto step = [&](nn::Network<float>& n, std::size_t i, float scale) {
    const auto& logits = n.forward(xs[i], true);
    auto ce = nn::softmax_cross_entropy(logits, class_index(train.labels[i]));
    for (auto& g : ce.grad.values) g *= scale;
    n.backward(ce.grad);
    return static_cast<double>(ce.loss);
  };
  auto evaluate = [&](nn::Network<float>& n) {
    double loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < vs.size(); ++i) {
      const auto& logits = n.forward(vs[i], false);
      const std::size_t label = class_index(validation.labels[i]);
      auto ce = nn::softmax_cross_entropy(logits, label);
      loss += ce.loss;
      if (nn::argmax<float>(logits.values) == label) ++correct;
    }
    Validation v;
    v.loss = loss / static_cast<double>(vs.size());
    v.accuracy = static_cast<double>(correct) / static_cast<double>(vs.size());
    // Accuracy first; validation loss breaks ties.
    v.score = v.accuracy - 1e-6 * std::min(v.loss, 1e3);
    return v;
  };
  return fit(net, xs.size(), config, seed, step, evaluate);
}

std::vector<Classification> classify_all(const ClassifierSpec& spec,
                                         const nn::ModelWeights<float>& weights,
                                         std::span<const ImageGrid> images) {
  auto net = build_classifier<float>(spec);
  net.weights().assign_values_from(weights);
  std::vector<Classification> out;
  out.reserve(images.size());
  for (const auto& img : images) {
    check_image(img, spec.height, spec.width, "classify");
    const auto& logits = net.forward(to_tensor(img), false);
    std::vector<double> z(logits.values.begin(), logits.values.end());
    const auto p = nn::softmax<double>(z);
    Classification c;
    std::copy_n(p.begin(), kNumGestures, c.probabilities.begin());
    c.label = gesture_from_class_index(nn::argmax<double>(p));
    out.push_back(c);
  }
  return out;
}

Classification classify(const ClassifierSpec& spec, const nn::ModelWeights<float>& weights,
                        const ImageGrid& image) {
  return classify_all(spec, weights, std::span<const ImageGrid>(&image, 1)).front();
}

template <typename T>
void zero_classifier_head(nn::ModelWeights<T>& weights) {
  const std::string head = kClassifierHeadName;
  for (const char* suffix : {".weight", ".bias"}) {
    auto& t = weights.at(head + suffix);
    std::fill(t.values.begin(), t.values.end(), T{});
  }
}

template void zero_classifier_head(nn::ModelWeights<float>&);
template void zero_classifier_head(nn::ModelWeights<double>&);

nn::ModelWeights<float> initial_denoiser_weights(const DenoiserSpec& spec, std::uint64_t seed) {
  auto net = build_denoiser<float>(spec);
  initialize_denoiser(net, spec, seed);
  return net.weights();
}

nn::ModelWeights<float> initial_classifier_weights(const ClassifierSpec& spec, std::uint64_t seed) {
  auto net = build_classifier<float>(spec);
  net.initialize(derive_seed(seed, 1));
  return net.weights();
}

}  // namespace mmgesture
