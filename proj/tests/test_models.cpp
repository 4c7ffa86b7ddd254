#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>

#include "mmgesture/errors.hpp"
#include "mmgesture/models.hpp"
#include "test_support.hpp"

using namespace mmgesture;

namespace {

constexpr std::size_t kSide = 16;
constexpr double kBackground = 1.0 / 11.0;

// Dark background with a few gaussian blobs, roughly like a gesture map.
ImageGrid blob_image(Rng& rng, std::size_t side = kSide) {
  ImageGrid img;
  img.height = img.width = side;
  img.pixels.assign(side * side, kBackground);
  img.source = NormalizationWindow{};
  const int blobs = 1 + static_cast<int>(rng() % 3);
  for (int b = 0; b < blobs; ++b) {
    const double cy = uniform(rng, 2, side - 3.0), cx = uniform(rng, 2, side - 3.0);
    const double amp = uniform(rng, 0.3, 0.8), sig = uniform(rng, 0.8, 2.0);
    for (std::size_t r = 0; r < side; ++r)
      for (std::size_t c = 0; c < side; ++c) {
        const double d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
        img.at(r, c) = std::min(1.0, img.at(r, c) + amp * std::exp(-d2 / (2 * sig * sig)));
      }
  }
  return img;
}

Dataset identity_dataset(std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  Dataset ds;
  for (std::size_t i = 0; i < n; ++i) {
    SyntheticNoisyPair p;
    p.clean = blob_image(rng);
    p.noisy = p.clean;
    p.label = dataset_label(i);
    ds.pairs.push_back(p);
  }
  ds.split = make_split(n, seed);
  return ds;
}

// One bright square per quadrant, class = quadrant, plus light noise.
LabeledImages prototypes(std::size_t per_class, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  LabeledImages out;
  for (std::size_t i = 0; i < per_class * 4; ++i) {
    const std::size_t q = i % 4;
    ImageGrid img;
    img.height = img.width = kSide;
    img.pixels.resize(kSide * kSide);
    for (auto& p : img.pixels) p = uniform(rng, 0.0, 0.15);
    const std::size_t r0 = (q / 2) * 8 + 2, c0 = (q % 2) * 8 + 2;
    for (std::size_t r = r0; r < r0 + 4; ++r)
      for (std::size_t c = c0; c < c0 + 4; ++c) img.at(r, c) = uniform(rng, 0.7, 1.0);
    out.images.push_back(img);
    out.labels.push_back(gesture_from_class_index(q));
  }
  return out;
}

DenoiserSpec small_denoiser() {
  DenoiserSpec s;
  s.height = s.width = kSide;
  return s;
}

ClassifierSpec small_classifier() {
  ClassifierSpec s;
  s.height = s.width = kSide;
  return s;
}

double mean_val_mse(const Dataset& ds, const DenoiserSpec& spec, const nn::ModelWeights<float>& w) {
  double sum = 0.0;
  for (std::size_t i : ds.split.validation) {
    const auto out = denoise(spec, w, ds.pairs[i].noisy);
    for (std::size_t k = 0; k < out.pixels.size(); ++k) {
      const double d = out.pixels[k] - ds.pairs[i].clean.pixels[k];
      sum += d * d;
    }
  }
  return sum / static_cast<double>(ds.split.validation.size() * kSide * kSide);
}

}  // namespace

TEST_CASE("spec validation") {
  DenoiserSpec d;
  CHECK_NOTHROW(d.validate());
  d.height = 30;
  CHECK_THROWS_AS(d.validate(), InvalidArgument);
  ClassifierSpec c;
  CHECK_NOTHROW(c.validate());
  c.width = 24;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = ClassifierSpec{};
  c.block_channels = {8, 16, 0};
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("denoiser shapes and output range") {
  const DenoiserSpec spec;
  auto net = build_denoiser<float>(spec);
  CHECK(net.input_shape() == nn::Shape{1, 32, 32});
  CHECK(net.output_shape() == nn::Shape{1, 32, 32});
  const auto w = initial_denoiser_weights(spec, 3);
  CHECK(w.at("head.bias").values[0] == doctest::Approx(-2.3));
  Rng rng = make_rng(1);
  for (int i = 0; i < 3; ++i) {
    const auto out = denoise(spec, w, blob_image(rng, 32));
    CHECK(out.height == 32);
    CHECK(out.source.has_value());
    for (double p : out.pixels) {
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
    }
  }
  ImageGrid zero;
  zero.height = zero.width = 32;
  zero.pixels.assign(32 * 32, 0.0);
  for (double p : denoise(spec, w, zero).pixels) CHECK(std::isfinite(p));
  ImageGrid wrong = zero;
  wrong.width = 16;
  wrong.pixels.resize(32 * 16);
  CHECK_THROWS_AS(denoise(spec, w, wrong), ShapeError);
}

TEST_CASE("denoiser learns the identity map") {
  const auto ds = identity_dataset(96, 3);
  const auto spec = small_denoiser();
  const double before = mean_val_mse(ds, spec, initial_denoiser_weights(spec, 5));

  auto cfg = default_denoiser_training();
  cfg.max_epochs = 1;
  const auto one = train_denoiser(ds, spec, cfg, 5);
  CHECK(one.report.epochs.front().val_loss <= before);

  cfg.max_epochs = 40;
  cfg.patience = 0;
  const auto m = train_denoiser(ds, spec, cfg, 5);
  CHECK(m.report.epochs.size() == 40);
  const auto& best = m.report.epochs[m.report.best_epoch - 1];
  for (const auto& e : m.report.epochs) CHECK(best.val_loss <= e.val_loss);
  CHECK(best.val_loss < 1e-3);
  // the returned weights are the best-validation ones
  CHECK(mean_val_mse(ds, spec, m.weights) == doctest::Approx(best.val_loss).epsilon(1e-3));
}

TEST_CASE("denoiser training is deterministic") {
  const auto ds = identity_dataset(32, 4);
  auto cfg = default_denoiser_training();
  cfg.max_epochs = 3;
  const auto a = train_denoiser(ds, small_denoiser(), cfg, 9);
  const auto b = train_denoiser(ds, small_denoiser(), cfg, 9);
  CHECK(a.report.same_trajectory(b.report));
  for (std::size_t i = 0; i < a.weights.size(); ++i)
    CHECK(a.weights.entry(i).tensor.values == b.weights.entry(i).tensor.values);
  const auto c = train_denoiser(ds, small_denoiser(), cfg, 10);
  CHECK_FALSE(a.report.same_trajectory(c.report));
}

TEST_CASE("denoiser training errors") {
  auto cfg = default_denoiser_training();
  cfg.max_epochs = 1;
  CHECK_THROWS_AS(train_denoiser(Dataset{}, small_denoiser(), cfg, 1), InvalidArgument);
  auto ds = identity_dataset(20, 1);
  CHECK_THROWS_AS(train_denoiser(ds, DenoiserSpec{}, cfg, 1), ShapeError);
  ds.split.validation.clear();
  CHECK_THROWS_AS(train_denoiser(ds, small_denoiser(), cfg, 1), InvalidArgument);
  cfg.batch_size = 0;
  CHECK_THROWS_AS(train_denoiser(identity_dataset(20, 1), small_denoiser(), cfg, 1), InvalidArgument);
}

TEST_CASE("classifier separates four prototypes") {
  const auto train = prototypes(80, 1), val = prototypes(20, 2);
  auto cfg = default_classifier_training();
  cfg.max_epochs = 20;
  std::vector<EpochRecord> seen;
  cfg.on_epoch = [&](const EpochRecord& e) { seen.push_back(e); };
  const auto m = train_classifier(train, val, small_classifier(), cfg, 3);
  CHECK(seen.size() == m.report.epochs.size());
  double best_acc = 0.0;
  for (const auto& e : m.report.epochs) best_acc = std::max(best_acc, e.val_accuracy);
  CHECK(best_acc == 1.0);
  const auto res = classify_all(small_classifier(), m.weights, val.images);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < res.size(); ++i) {
    ok += res[i].label == val.labels[i];
    const double s = std::accumulate(res[i].probabilities.begin(), res[i].probabilities.end(), 0.0);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(ok == res.size());
}

TEST_CASE("classifier with a full 3x3 instead of the grouped one") {
  auto spec = small_classifier();
  spec.grouped_depthwise = false;
  const auto train = prototypes(30, 1), val = prototypes(10, 2);
  auto cfg = default_classifier_training();
  cfg.max_epochs = 15;
  const auto m = train_classifier(train, val, spec, cfg, 3);
  double best_acc = 0.0;
  for (const auto& e : m.report.epochs) best_acc = std::max(best_acc, e.val_accuracy);
  CHECK(best_acc >= 0.95);
}

TEST_CASE("zeroed head gives uniform probabilities and the first label") {
  const ClassifierSpec spec;
  auto w = initial_classifier_weights(spec, 1);
  zero_classifier_head(w);
  Rng rng = make_rng(2);
  const auto c = classify(spec, w, blob_image(rng, 32));
  for (double p : c.probabilities) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(c.label == GestureLabel::Left);
}

TEST_CASE("classifier errors") {
  const auto spec = small_classifier();
  auto cfg = default_classifier_training();
  cfg.max_epochs = 1;
  const auto good = prototypes(4, 1);
  CHECK_THROWS_AS(train_classifier(LabeledImages{}, good, spec, cfg, 1), InvalidArgument);
  CHECK_THROWS_AS(train_classifier(good, LabeledImages{}, spec, cfg, 1), InvalidArgument);
  LabeledImages single = good;
  std::fill(single.labels.begin(), single.labels.end(), GestureLabel::Away);
  CHECK_THROWS_AS(train_classifier(single, good, spec, cfg, 1), InvalidArgument);
  LabeledImages miscount = good;
  miscount.labels.pop_back();
  CHECK_THROWS_AS(train_classifier(miscount, good, spec, cfg, 1), InvalidArgument);
  CHECK_THROWS_AS(train_classifier(good, good, ClassifierSpec{}, cfg, 1), ShapeError);
  const auto w = initial_classifier_weights(spec, 1);
  CHECK_THROWS_AS(classify(ClassifierSpec{}, w, good.images[0]), ShapeError);
}

TEST_CASE("tensor conversion") {
  Rng rng = make_rng(4);
  const auto img = blob_image(rng);
  const auto t = to_tensor(img);
  CHECK(t.shape == nn::Shape{1, kSide, kSide});
  const auto back = to_image_grid(t, img);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    CHECK(back.pixels[i] == static_cast<double>(static_cast<float>(img.pixels[i])));
  CHECK_THROWS_AS(to_image_grid(nn::Tensor<float>({1, 4, 4}), img), ShapeError);
}
