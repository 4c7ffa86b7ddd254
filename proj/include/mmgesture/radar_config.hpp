#pragma once

#include <cstddef>
#include <map>
#include <string>

namespace mmgesture {

inline constexpr double kSpeedOfLight = 299'792'458.0;

// Geometry of the simulated FMCW sensor. Defaults describe a 57.5-63.5 GHz
// device sampled at 64 x 32 per frame with three receive antennas.
struct RadarConfig {
  double f_low = 57.5e9;
  double f_high = 63.5e9;
  std::size_t samples_per_chirp = 64;
  std::size_t chirps_per_frame = 32;
  double chirp_duration = 200e-6;  // s
  double sample_rate = 320e3;      // Hz
  double max_range = 0.8;          // m
  std::size_t n_antennas = 3;

  double bandwidth() const noexcept { return f_high - f_low; }
  double center_frequency() const noexcept { return 0.5 * (f_low + f_high); }
  double wavelength() const noexcept { return kSpeedOfLight / center_frequency(); }

  // Beat frequency of a point scatterer at `range_m` (stop-and-hop dechirp).
  double beat_frequency(double range_m) const noexcept {
    return 2.0 * range_m * bandwidth() / (kSpeedOfLight * chirp_duration);
  }
  double range_resolution() const noexcept { return kSpeedOfLight / (2.0 * bandwidth()); }
  // Radial velocity spanned by one Doppler bin.
  double velocity_resolution() const noexcept {
    return wavelength() / (2.0 * static_cast<double>(chirps_per_frame) * chirp_duration);
  }
  std::size_t range_bins() const noexcept { return samples_per_chirp / 2; }
  std::size_t doppler_bins() const noexcept { return chirps_per_frame; }

  // Throws InvalidArgument when an invariant does not hold.
  void validate() const;

  bool operator==(const RadarConfig&) const = default;
};

// Applies one `key=value` radar setting. Returns false for unknown keys.
bool apply_radar_key(RadarConfig& config, const std::string& key, const std::string& value);

// Parses a plain-text key=value file ('#' comments, blank lines allowed).
// Duplicate keys are an error.
std::map<std::string, std::string> read_key_value_file(const std::string& path);

// Loads a RadarConfig; unknown keys are rejected.
RadarConfig load_radar_config(const std::string& path);

std::string to_key_value(const RadarConfig& config);

}  // namespace mmgesture
