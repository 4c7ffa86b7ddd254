#include "mmgesture/rdm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "mmgesture/binary_io.hpp"
#include "mmgesture/errors.hpp"
#include "mmgesture/fft.hpp"

namespace mmgesture {

std::vector<double> window_coefficients(Window window, std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (window == Window::Hann && n > 1) {
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                   static_cast<double>(n - 1)));
    }
  }
  return w;
}

double RangeDopplerMap::max_db() const {
  return *std::max_element(values_db.begin(), values_db.end());
}

double RangeDopplerMap::min_db() const {
  return *std::min_element(values_db.begin(), values_db.end());
}

std::vector<std::complex<double>> range_doppler_spectrum(const ComplexFrame& frame,
                                                         std::size_t antenna_id,
                                                         Window window, bool one_sided) {
  if (antenna_id >= frame.antennas()) {
    throw InvalidArgument("range_doppler: antenna_id " + std::to_string(antenna_id) +
                          " out of range");
  }
  const std::size_t n_chirps = frame.chirps();
  const std::size_t n_samples = frame.samples();
  const std::size_t n_range = one_sided ? n_samples / 2 : n_samples;
  const auto fast_window = window_coefficients(window, n_samples);
  const auto slow_window = window_coefficients(window, n_chirps);
  const double fast_norm = 1.0 / std::sqrt(static_cast<double>(n_samples));
  const double slow_norm = 1.0 / std::sqrt(static_cast<double>(n_chirps));

  // Range FFT per chirp.
  std::vector<std::complex<double>> range_profiles(n_chirps * n_range);
  std::vector<std::complex<double>> row(n_samples);
  for (std::size_t m = 0; m < n_chirps; ++m) {
    for (std::size_t s = 0; s < n_samples; ++s) {
      row[s] = frame.at(m, s, antenna_id) * (fast_window[s] * slow_window[m]);
    }
    fft_inplace(row);
    for (std::size_t r = 0; r < n_range; ++r) range_profiles[m * n_range + r] = row[r] * fast_norm;
  }

  // Doppler FFT per range bin.
  std::vector<std::complex<double>> out(n_chirps * n_range);
  std::vector<std::complex<double>> column(n_chirps);
  for (std::size_t r = 0; r < n_range; ++r) {
    for (std::size_t m = 0; m < n_chirps; ++m) column[m] = range_profiles[m * n_range + r];
    fft_inplace(column);
    fftshift(column);
    for (std::size_t d = 0; d < n_chirps; ++d) out[d * n_range + r] = column[d] * slow_norm;
  }
  return out;
}

RangeDopplerMap range_doppler(const ComplexFrame& frame, std::size_t antenna_id, Window window) {
  const auto spectrum = range_doppler_spectrum(frame, antenna_id, window, true);
  RangeDopplerMap rdm;
  rdm.doppler_bins = frame.chirps();
  rdm.range_bins = frame.samples() / 2;
  rdm.config = frame.config();
  rdm.antenna_id = antenna_id;
  rdm.values_db.resize(spectrum.size());
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    rdm.values_db[i] = 20.0 * std::log10(std::abs(spectrum[i]) + kMagnitudeEpsilon);
  }
  return rdm;
}

RangeDopplerMap threshold_mask(const RangeDopplerMap& rdm, double threshold_db) {
  if (!std::isfinite(threshold_db)) throw InvalidArgument("threshold_mask: threshold must be finite");
  RangeDopplerMap out = rdm;
  for (double& v : out.values_db) v = std::max(v, threshold_db);
  out.threshold_db = threshold_db;
  return out;
}

ImageGrid to_image(const RangeDopplerMap& rdm, double floor_db, double ceiling_db) {
  if (!(ceiling_db > floor_db)) {
    throw InvalidArgument("to_image: ceiling_db must exceed floor_db");
  }
  ImageGrid img;
  img.height = rdm.doppler_bins;
  img.width = rdm.range_bins;
  img.source = NormalizationWindow{floor_db, ceiling_db};
  img.pixels.resize(rdm.values_db.size());
  const double span = ceiling_db - floor_db;
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    img.pixels[i] = std::clamp((rdm.values_db[i] - floor_db) / span, 0.0, 1.0);
  }
  return img;
}

RangeDopplerMap from_image(const ImageGrid& img) {
  if (!img.source) throw InvalidArgument("from_image: image carries no normalization window");
  const auto [floor_db, ceiling_db] = *img.source;
  RangeDopplerMap rdm;
  rdm.doppler_bins = img.height;
  rdm.range_bins = img.width;
  rdm.config.chirps_per_frame = img.height;
  rdm.config.samples_per_chirp = img.width * 2;
  rdm.values_db.resize(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    rdm.values_db[i] = floor_db + img.pixels[i] * (ceiling_db - floor_db);
  }
  return rdm;
}

void write_rdm(const std::string& path, const RangeDopplerMap& rdm) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IOError("cannot open for writing: " + path);
  binio::write_magic(os, "RDM1");
  binio::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(rdm.doppler_bins));
  binio::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(rdm.range_bins));
  binio::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(rdm.antenna_id));
  binio::write_le<std::uint32_t>(os, rdm.threshold_db ? 1U : 0U);
  binio::write_le<double>(os, rdm.threshold_db.value_or(0.0));
  binio::write_le<std::uint32_t>(os, 0U);  // reserved
  for (double v : rdm.values_db) binio::write_le<float>(os, static_cast<float>(v));
  if (!os) throw IOError("write failed: " + path);
}

RangeDopplerMap read_rdm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IOError("cannot open: " + path);
  binio::expect_magic(is, "RDM1", path);
  RangeDopplerMap rdm;
  rdm.doppler_bins = binio::read_le<std::uint32_t>(is);
  rdm.range_bins = binio::read_le<std::uint32_t>(is);
  rdm.antenna_id = binio::read_le<std::uint32_t>(is);
  const auto flags = binio::read_le<std::uint32_t>(is);
  const auto threshold = binio::read_le<double>(is);
  binio::read_le<std::uint32_t>(is);
  if (flags & 1U) rdm.threshold_db = threshold;
  rdm.config.chirps_per_frame = rdm.doppler_bins;
  rdm.config.samples_per_chirp = rdm.range_bins * 2;
  rdm.values_db.resize(rdm.doppler_bins * rdm.range_bins);
  for (double& v : rdm.values_db) v = binio::read_le<float>(is);
  return rdm;
}

namespace {

unsigned char to_byte(double v) {
  return static_cast<unsigned char>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
}

}  // namespace

void write_pgm(const std::string& path, const ImageGrid& img) {
  write_pgm_strip(path, std::span<const ImageGrid>(&img, 1));
}

void write_pgm_strip(const std::string& path, std::span<const ImageGrid> panels) {
  if (panels.empty()) throw InvalidArgument("write_pgm_strip: no panels");
  constexpr std::size_t kGutter = 2;
  const std::size_t h = panels.front().height;
  std::size_t w = 0;
  for (const auto& p : panels) {
    if (p.height != h) throw ShapeError("write_pgm_strip: panel heights differ");
    w += p.width;
  }
  w += kGutter * (panels.size() - 1);

  std::vector<unsigned char> raster(w * h, 255);
  std::size_t x0 = 0;
  for (const auto& p : panels) {
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < p.width; ++c) raster[r * w + x0 + c] = to_byte(p.at(r, c));
    }
    x0 += p.width + kGutter;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IOError("cannot open for writing: " + path);
  os << "P5\n" << w << ' ' << h << "\n255\n";
  os.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (!os) throw IOError("write failed: " + path);
}

ImageGrid read_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IOError("cannot open: " + path);
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  is >> magic >> w >> h >> maxval;
  if (magic != "P5" || maxval != 255) throw IOError(path + ": not an 8-bit P5 image");
  is.get();
  std::vector<unsigned char> raster(w * h);
  if (!is.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()))) {
    throw IOError(path + ": truncated raster");
  }
  ImageGrid img;
  img.height = h;
  img.width = w;
  img.pixels.resize(w * h);
  for (std::size_t i = 0; i < raster.size(); ++i) img.pixels[i] = raster[i] / 255.0;
  return img;
}

}  // namespace mmgesture
