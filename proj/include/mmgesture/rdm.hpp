#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmgesture/radar_config.hpp"
#include "mmgesture/radar_sim.hpp"

namespace mmgesture {

// Magnitude offset before taking the log, so empty cells map to -240 dB.
inline constexpr double kMagnitudeEpsilon = 1e-12;

// Normalization window shared by every image that enters the networks. The
// floor sits 5 dB under the ground-truth threshold so an empty clean cell maps
// to 5/55 (dark, but not the unreachable sigmoid limit of 0).
inline constexpr double kImageFloorDb = -95.0;
inline constexpr double kImageCeilingDb = -40.0;

enum class Window { Rect, Hann };

std::vector<double> window_coefficients(Window window, std::size_t n);

// dB magnitude grid laid out [doppler][range]. Doppler bin doppler_bins/2 is
// zero velocity; bins above it are approaching targets.
struct RangeDopplerMap {
  std::size_t doppler_bins = 0;
  std::size_t range_bins = 0;
  std::vector<double> values_db;
  std::optional<double> threshold_db;
  RadarConfig config;
  std::size_t antenna_id = 0;

  double& at(std::size_t doppler, std::size_t range) {
    return values_db[doppler * range_bins + range];
  }
  double at(std::size_t doppler, std::size_t range) const {
    return values_db[doppler * range_bins + range];
  }
  double max_db() const;
  double min_db() const;
  bool operator==(const RangeDopplerMap&) const = default;
};

struct NormalizationWindow {
  double floor_db = kImageFloorDb;
  double ceiling_db = kImageCeilingDb;
  bool operator==(const NormalizationWindow&) const = default;
};

// Unit-interval image [height][width]; height follows Doppler, width follows range.
struct ImageGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;
  std::optional<NormalizationWindow> source;

  double& at(std::size_t row, std::size_t col) { return pixels[row * width + col]; }
  double at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
  bool same_shape(const ImageGrid& other) const noexcept {
    return height == other.height && width == other.width;
  }
  bool operator==(const ImageGrid&) const = default;
};

// 2-D spectrum [doppler][range] with 1/sqrt(N) normalization on both axes and
// the Doppler axis fftshifted. With one_sided the negative range frequencies are
// dropped; otherwise all samples_per_chirp bins are kept (used for Parseval).
std::vector<std::complex<double>> range_doppler_spectrum(const ComplexFrame& frame,
                                                         std::size_t antenna_id,
                                                         Window window, bool one_sided = true);

RangeDopplerMap range_doppler(const ComplexFrame& frame, std::size_t antenna_id,
                              Window window = Window::Hann);

RangeDopplerMap threshold_mask(const RangeDopplerMap& rdm, double threshold_db);

ImageGrid to_image(const RangeDopplerMap& rdm, double floor_db = kImageFloorDb,
                   double ceiling_db = kImageCeilingDb);

RangeDopplerMap from_image(const ImageGrid& img);

// RDM1: 32-byte little-endian header then doppler*range float32 values.
void write_rdm(const std::string& path, const RangeDopplerMap& rdm);
RangeDopplerMap read_rdm(const std::string& path);

// Binary P5 greyscale, pixel = round(255 * value).
void write_pgm(const std::string& path, const ImageGrid& img);
// Side-by-side panels separated by a 2-pixel white gutter.
void write_pgm_strip(const std::string& path, std::span<const ImageGrid> panels);
ImageGrid read_pgm(const std::string& path);

}  // namespace mmgesture
