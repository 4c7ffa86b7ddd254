#include "mmgesture/metrics.hpp"

#include <cmath>
#include <string>

#include "mmgesture/errors.hpp"

namespace mmgesture {

namespace {

void require_same_shape(const ImageGrid& a, const ImageGrid& b, const char* what) {
  if (!a.same_shape(b) || a.pixels.size() != b.pixels.size()) {
    throw ShapeError(std::string(what) + ": " + std::to_string(a.height) + "x" +
                     std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                     std::to_string(b.width));
  }
}

}  // namespace

double psnr(const ImageGrid& reference, const ImageGrid& test) {
  require_same_shape(reference, test, "psnr");
  if (reference.pixels.empty()) throw ShapeError("psnr: empty images");
  double sse = 0.0;
  for (std::size_t i = 0; i < reference.pixels.size(); ++i) {
    const double d = reference.pixels[i] - test.pixels[i];
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(reference.pixels.size());
  if (mse == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / mse));
}

double residual_noise_fraction(const ImageGrid& img, const ImageGrid& clean, double epsilon) {
  require_same_shape(img, clean, "residual_noise_fraction");
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw InvalidArgument("residual_noise_fraction: epsilon must lie in (0, 1)");
  }
  if (img.pixels.empty()) throw ShapeError("residual_noise_fraction: empty images");
  std::size_t spurious = 0;
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    if (clean.pixels[i] < epsilon && img.pixels[i] >= epsilon) ++spurious;
  }
  return static_cast<double>(spurious) / static_cast<double>(img.pixels.size());
}

void ConfusionMatrix::add(GestureLabel truth, GestureLabel predicted) {
  ++counts[class_index(truth)][class_index(predicted)];
}

std::size_t ConfusionMatrix::total() const {
  std::size_t t = 0;
  for (const auto& row : counts) for (auto c : row) t += c;
  return t;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t t = 0;
  for (std::size_t i = 0; i < kNumGestures; ++i) t += counts[i][i];
  return t;
}

std::size_t ConfusionMatrix::row_total(std::size_t true_class) const {
  std::size_t t = 0;
  for (auto c : counts.at(true_class)) t += c;
  return t;
}

double ConfusionMatrix::accuracy() const {
  const std::size_t n = total();
  if (n == 0) throw StateError("confusion matrix is empty");
  return static_cast<double>(trace()) / static_cast<double>(n);
}

}  // namespace mmgesture
