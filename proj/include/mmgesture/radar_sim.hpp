#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "mmgesture/radar_config.hpp"

namespace mmgesture {

// Label values follow the data-collection ordering: 1 left, 2 right,
// 3 away from the radar, 4 towards the radar.
enum class GestureLabel : int { Left = 1, Right = 2, Away = 3, Toward = 4 };

inline constexpr std::size_t kNumGestures = 4;
inline constexpr std::array<GestureLabel, kNumGestures> kAllGestures = {
    GestureLabel::Left, GestureLabel::Right, GestureLabel::Away, GestureLabel::Toward};

std::string_view to_string(GestureLabel g);
// Zero-based class index (Left -> 0 ... Toward -> 3).
std::size_t class_index(GestureLabel g);
GestureLabel gesture_from_class_index(std::size_t index);
// Accepts 1..4; anything else throws InvalidArgument.
GestureLabel gesture_from_value(int value);
bool is_valid(GestureLabel g) noexcept;

// Amplitude of a unit-reflectivity scatterer at kReferenceRange.
inline constexpr double kReferenceAmplitude = 1e-4;
inline constexpr double kReferenceRange = 0.3;  // m
// Time between consecutive frames of a gesture track.
inline constexpr double kFramePeriod = 0.02;  // s

struct TrackPoint {
  double range = 0.0;        // radial range, m
  double cross_range = 0.0;  // m
  bool operator==(const TrackPoint&) const = default;
};

// One point of the hand relative to the track centre.
struct ScattererOffset {
  double range_offset = 0.0;     // m
  double velocity_offset = 0.0;  // m/s
  double relative_amplitude = 1.0;
  bool operator==(const ScattererOffset&) const = default;
};

// Per-frame kinematics of a hand. Range rate sign: approaching is negative.
struct ScattererTrack {
  GestureLabel gesture = GestureLabel::Left;
  std::vector<TrackPoint> positions;
  std::vector<double> radial_velocities;  // m/s
  std::vector<double> amplitudes;         // reflectivity, unitless
  std::vector<ScattererOffset> scatterers{ScattererOffset{}};
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return positions.size(); }
  double mean_radial_velocity() const;
  // Least-squares slope of cross range against frame index (m/frame).
  double cross_range_slope() const;
  void validate(const RadarConfig& config) const;
  bool operator==(const ScattererTrack&) const = default;
};

// Raw IQ cube laid out [chirp][sample][antenna].
class ComplexFrame {
 public:
  explicit ComplexFrame(const RadarConfig& config);

  const RadarConfig& config() const noexcept { return config_; }
  std::size_t chirps() const noexcept { return config_.chirps_per_frame; }
  std::size_t samples() const noexcept { return config_.samples_per_chirp; }
  std::size_t antennas() const noexcept { return config_.n_antennas; }

  std::complex<double>& at(std::size_t chirp, std::size_t sample, std::size_t antenna) {
    return data_[(chirp * samples() + sample) * antennas() + antenna];
  }
  const std::complex<double>& at(std::size_t chirp, std::size_t sample,
                                 std::size_t antenna) const {
    return data_[(chirp * samples() + sample) * antennas() + antenna];
  }
  std::span<const std::complex<double>> data() const noexcept { return data_; }
  std::span<std::complex<double>> data() noexcept { return data_; }

  double energy() const;
  bool all_finite() const;

 private:
  RadarConfig config_;
  std::vector<std::complex<double>> data_;
};

struct AntennaNoiseProfile {
  std::size_t antenna_id = 0;
  double noise_power_scale = 1.0;  // linear, > 0
  double spectral_tilt = 0.0;      // dB per range bin
  std::uint64_t seed_offset = 0;
  bool operator==(const AntennaNoiseProfile&) const = default;
};

inline constexpr double kMinNoiseScale = 0.5;
inline constexpr double kMaxNoiseScale = 2.0;

ScattererTrack gesture_trajectory(GestureLabel gesture, const RadarConfig& config,
                                  std::size_t n_frames, std::uint64_t seed);

AntennaNoiseProfile antenna_noise_profile(std::size_t antenna_id, const RadarConfig& config,
                                          std::uint64_t seed);

// Dechirped beat signal of the track at `frame_idx` plus receiver noise. The
// noise variance per complex sample is
//   noise_power_scale * kReferenceAmplitude^2 * 10^(-snr_db/10),
// so snr_db is the SNR of a unit scatterer at kReferenceRange per sample.
// Every antenna uses the same profile with its own noise stream.
ComplexFrame synthesize_frame(const ScattererTrack& track, std::size_t frame_idx,
                              const RadarConfig& config, const AntennaNoiseProfile& profile,
                              double snr_db, std::uint64_t seed);

// Pure noise frame (no scatterers).
ComplexFrame synthesize_noise_frame(const RadarConfig& config,
                                    const AntennaNoiseProfile& profile, double snr_db,
                                    std::uint64_t seed);

}  // namespace mmgesture
