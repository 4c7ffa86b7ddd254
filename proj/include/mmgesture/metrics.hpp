#pragma once

#include <array>
#include <cstddef>

#include "mmgesture/radar_sim.hpp"
#include "mmgesture/rdm.hpp"

namespace mmgesture {

// Returned when the images are identical.
inline constexpr double kPsnrCapDb = 99.0;

// 10*log10(1 / MSE) with peak 1.0, capped at kPsnrCapDb. Throws ShapeError on mismatch.
double psnr(const ImageGrid& reference, const ImageGrid& test);

// Fraction of pixels with clean < epsilon but img >= epsilon. epsilon in (0, 1).
double residual_noise_fraction(const ImageGrid& img, const ImageGrid& clean, double epsilon);

// rows = true class, columns = predicted class, both in class-index order.
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kNumGestures>, kNumGestures> counts{};

  void add(GestureLabel truth, GestureLabel predicted);
  std::size_t total() const;
  std::size_t trace() const;
  std::size_t row_total(std::size_t true_class) const;
  // trace / total; throws StateError when empty.
  double accuracy() const;
  bool operator==(const ConfusionMatrix&) const = default;
};

}  // namespace mmgesture
