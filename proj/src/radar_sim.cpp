#include "mmgesture/radar_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "mmgesture/errors.hpp"
#include "mmgesture/fft.hpp"
#include "mmgesture/random.hpp"

namespace mmgesture {

namespace {

constexpr double kPi = std::numbers::pi;

// Kinematic envelope, expressed for the default 0.8 m sensor and scaled by
// max_range / 0.8 for other geometries.
constexpr double kNominalMaxRange = 0.8;

// Radial gestures: half-sine speed profile, peak speed in m/s.
constexpr double kRadialPeakSpeedMin = 1.8;
constexpr double kRadialPeakSpeedMax = 2.4;
// Lateral arcs: full-sine radial component, peak in m/s, and lateral half-width in m.
constexpr double kLateralRadialPeakMin = 0.45;
constexpr double kLateralRadialPeakMax = 0.7;
constexpr double kLateralHalfWidthMin = 0.12;
constexpr double kLateralHalfWidthMax = 0.2;

constexpr double kAmplitudeMin = 0.35;
constexpr double kAmplitudeMax = 1.0;

}  // namespace

std::string_view to_string(GestureLabel g) {
  switch (g) {
    case GestureLabel::Left: return "left";
    case GestureLabel::Right: return "right";
    case GestureLabel::Away: return "away";
    case GestureLabel::Toward: return "toward";
  }
  throw InvalidArgument("unknown gesture label " + std::to_string(static_cast<int>(g)));
}

bool is_valid(GestureLabel g) noexcept {
  const int v = static_cast<int>(g);
  return v >= 1 && v <= 4;
}

std::size_t class_index(GestureLabel g) {
  if (!is_valid(g)) {
    throw InvalidArgument("unknown gesture label " + std::to_string(static_cast<int>(g)));
  }
  return static_cast<std::size_t>(static_cast<int>(g) - 1);
}

GestureLabel gesture_from_class_index(std::size_t index) {
  if (index >= kNumGestures) {
    throw InvalidArgument("class index out of range: " + std::to_string(index));
  }
  return kAllGestures[index];
}

GestureLabel gesture_from_value(int value) {
  if (value < 1 || value > 4) {
    throw InvalidArgument("gesture label must be 1..4, got " + std::to_string(value));
  }
  return static_cast<GestureLabel>(value);
}

double ScattererTrack::mean_radial_velocity() const {
  if (radial_velocities.empty()) return 0.0;
  double sum = 0.0;
  for (double v : radial_velocities) sum += v;
  return sum / static_cast<double>(radial_velocities.size());
}

double ScattererTrack::cross_range_slope() const {
  const std::size_t n = positions.size();
  if (n < 2) return 0.0;
  const double mean_k = 0.5 * static_cast<double>(n - 1);
  double mean_x = 0.0;
  for (const auto& p : positions) mean_x += p.cross_range;
  mean_x /= static_cast<double>(n);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double dk = static_cast<double>(k) - mean_k;
    num += dk * (positions[k].cross_range - mean_x);
    den += dk * dk;
  }
  return num / den;
}

void ScattererTrack::validate(const RadarConfig& config) const {
  if (positions.size() != radial_velocities.size() || positions.size() != amplitudes.size()) {
    throw InvalidArgument("ScattererTrack: per-frame vectors differ in length");
  }
  for (const auto& p : positions) {
    if (!(p.range > 0.0 && p.range < config.max_range)) {
      throw InvalidArgument("ScattererTrack: range outside (0, max_range)");
    }
  }
}

ComplexFrame::ComplexFrame(const RadarConfig& config)
    : config_(config),
      data_(config.chirps_per_frame * config.samples_per_chirp * config.n_antennas) {}

double ComplexFrame::energy() const {
  double e = 0.0;
  for (const auto& z : data_) e += std::norm(z);
  return e;
}

bool ComplexFrame::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](const std::complex<double>& z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
  });
}

ScattererTrack gesture_trajectory(GestureLabel gesture, const RadarConfig& config,
                                  std::size_t n_frames, std::uint64_t seed) {
  if (!is_valid(gesture)) {
    throw InvalidArgument("gesture_trajectory: unknown gesture label");
  }
  if (n_frames < 2) throw InvalidArgument("gesture_trajectory: n_frames must be >= 2");
  config.validate();

  Rng rng = make_rng(seed, static_cast<std::uint64_t>(gesture));
  const double scale = config.max_range / kNominalMaxRange;
  const double n = static_cast<double>(n_frames);
  // Distances travelled scale with the sensor; the frame period is fixed, so
  // speeds scale too.
  const double dt = kFramePeriod;

  ScattererTrack track;
  track.gesture = gesture;
  track.seed = seed;
  track.positions.resize(n_frames);
  track.radial_velocities.resize(n_frames);
  track.amplitudes.resize(n_frames);

  // Integrated half-sine profile travels peak * dt * sum(sin) ~= peak * dt * 2n/pi.
  double start_range = 0.0;
  double cross0 = 0.0;
  double half_width = 0.0;
  double peak = 0.0;
  switch (gesture) {
    case GestureLabel::Toward:
    case GestureLabel::Away: {
      // Cap the peak so the whole sweep stays inside [0.15, 0.85] * max_range.
      const double span = 0.7 * config.max_range;
      const double travel_per_peak = dt * 2.0 * n / kPi;
      peak = std::min(uniform(rng, kRadialPeakSpeedMin, kRadialPeakSpeedMax) * scale,
                      span / travel_per_peak);
      const double travel = peak * travel_per_peak;
      const double slack = span - travel;
      const double lo = 0.15 * config.max_range + uniform(rng, 0.0, 1.0) * slack;
      start_range = gesture == GestureLabel::Toward ? lo + travel : lo;
      cross0 = uniform(rng, -0.05, 0.05) * scale;
      break;
    }
    case GestureLabel::Left:
    case GestureLabel::Right:
      peak = uniform(rng, kLateralRadialPeakMin, kLateralRadialPeakMax) * scale;
      half_width = uniform(rng, kLateralHalfWidthMin, kLateralHalfWidthMax) * scale;
      start_range = uniform(rng, 0.35, 0.5) * config.max_range;
      break;
  }
  const double drift = uniform(rng, -0.002, 0.002) * scale;  // m/frame for radial gestures
  const double base_amplitude = uniform(rng, kAmplitudeMin, kAmplitudeMax);

  double range = start_range;
  for (std::size_t k = 0; k < n_frames; ++k) {
    const double kk = static_cast<double>(k);
    double v = 0.0;
    double cross = 0.0;
    switch (gesture) {
      case GestureLabel::Toward:
        v = -peak * std::sin(kPi * (kk + 0.5) / n);
        cross = cross0 + drift * kk;
        break;
      case GestureLabel::Away:
        v = peak * std::sin(kPi * (kk + 0.5) / n);
        cross = cross0 + drift * kk;
        break;
      case GestureLabel::Left:
        // Sweeps from +w to -w while first receding, then approaching.
        v = peak * std::sin(2.0 * kPi * (kk + 0.5) / n);
        cross = half_width * std::cos(kPi * kk / (n - 1.0));
        break;
      case GestureLabel::Right:
        v = -peak * std::sin(2.0 * kPi * (kk + 0.5) / n);
        cross = -half_width * std::cos(kPi * kk / (n - 1.0));
        break;
    }
    track.positions[k] = TrackPoint{range, cross};
    track.radial_velocities[k] = v;
    track.amplitudes[k] = base_amplitude * uniform(rng, 0.9, 1.1);
    range += v * dt;
  }

  // 1-3 points on the hand: a dominant palm return plus weaker finger returns.
  const auto extra = static_cast<std::size_t>(rng() % 3);
  for (std::size_t i = 0; i < extra; ++i) {
    const double sign = (rng() & 1U) ? 1.0 : -1.0;
    track.scatterers.push_back(ScattererOffset{
        sign * uniform(rng, 0.01, 0.04) * scale,
        uniform(rng, -0.1, 0.1) * scale,
        uniform(rng, 0.3, 0.7),
    });
  }

  track.validate(config);
  return track;
}

AntennaNoiseProfile antenna_noise_profile(std::size_t antenna_id, const RadarConfig& config,
                                          std::uint64_t seed) {
  if (antenna_id >= config.n_antennas) {
    throw InvalidArgument("antenna_noise_profile: antenna_id " + std::to_string(antenna_id) +
                          " >= n_antennas " + std::to_string(config.n_antennas));
  }
  Rng rng = make_rng(seed, 0x616e74ULL + antenna_id);
  AntennaNoiseProfile profile;
  profile.antenna_id = antenna_id;
  // Log-uniform on [0.5, 2].
  profile.noise_power_scale =
      std::exp(uniform(rng, std::log(kMinNoiseScale), std::log(kMaxNoiseScale)));
  profile.spectral_tilt = uniform(rng, -0.3, 0.1);
  profile.seed_offset = derive_seed(seed, 1000 + antenna_id);
  return profile;
}

namespace {

// Adds circular complex Gaussian noise to one antenna channel. The noise is drawn
// per range-frequency bin with power 10^(tilt * |bin| / 10), normalized to unit
// mean, and brought to the time domain by a unitary inverse DFT; zero tilt gives
// white noise of variance `variance`.
void add_receiver_noise(ComplexFrame& frame, std::size_t antenna, double variance,
                        double tilt_db_per_bin, Rng& rng) {
  const std::size_t n = frame.samples();
  std::vector<double> gain(n);
  double mean_gain = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double dist = static_cast<double>(std::min(k, n - k));
    gain[k] = std::pow(10.0, tilt_db_per_bin * dist / 10.0);
    mean_gain += gain[k];
  }
  mean_gain /= static_cast<double>(n);

  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::complex<double>> spectrum(n);
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t chirp = 0; chirp < frame.chirps(); ++chirp) {
    for (std::size_t k = 0; k < n; ++k) {
      // Each of re/im carries half the bin power.
      const double sigma = std::sqrt(0.5 * variance * gain[k] / mean_gain);
      const double re = normal(rng);
      const double im = normal(rng);
      spectrum[k] = {sigma * re, sigma * im};
    }
    fft_inplace(spectrum, FftDirection::Inverse);
    for (std::size_t s = 0; s < n; ++s) frame.at(chirp, s, antenna) += spectrum[s] * inv_sqrt_n;
  }
}

void add_noise(ComplexFrame& frame, const AntennaNoiseProfile& profile, double snr_db,
               std::uint64_t seed) {
  if (!std::isfinite(snr_db)) throw InvalidArgument("synthesize_frame: snr_db must be finite");
  if (!(profile.noise_power_scale >= 0.0)) {
    throw InvalidArgument("synthesize_frame: noise_power_scale must be non-negative");
  }
  const double variance = profile.noise_power_scale * kReferenceAmplitude *
                          kReferenceAmplitude * std::pow(10.0, -snr_db / 10.0);
  if (variance == 0.0) return;
  for (std::size_t a = 0; a < frame.antennas(); ++a) {
    Rng rng = make_rng(seed ^ profile.seed_offset, a);
    add_receiver_noise(frame, a, variance, profile.spectral_tilt, rng);
  }
}

}  // namespace

ComplexFrame synthesize_frame(const ScattererTrack& track, std::size_t frame_idx,
                              const RadarConfig& config, const AntennaNoiseProfile& profile,
                              double snr_db, std::uint64_t seed) {
  config.validate();
  if (frame_idx >= track.size()) {
    throw InvalidArgument("synthesize_frame: frame_idx " + std::to_string(frame_idx) +
                          " out of range for track of " + std::to_string(track.size()));
  }
  if (track.radial_velocities.size() != track.size() || track.amplitudes.size() != track.size()) {
    throw InvalidArgument("synthesize_frame: malformed track");
  }
  ComplexFrame frame(config);

  const double fc = config.center_frequency();
  const double tc = config.chirp_duration;
  const double fs = config.sample_rate;
  const TrackPoint& centre = track.positions[frame_idx];

  for (const auto& sc : track.scatterers) {
    const double range = centre.range + sc.range_offset;
    const double velocity = track.radial_velocities[frame_idx] + sc.velocity_offset;
    const double amplitude = track.amplitudes[frame_idx] * sc.relative_amplitude;
    if (amplitude == 0.0) continue;
    if (!(range > 0.0)) throw InvalidArgument("synthesize_frame: scatterer range must be > 0");
    const double path_gain = (kReferenceRange / range) * (kReferenceRange / range);
    const double a = amplitude * kReferenceAmplitude * path_gain;
    const double fb = config.beat_frequency(range);
    for (std::size_t m = 0; m < config.chirps_per_frame; ++m) {
      // Stop-and-hop: the range seen by chirp m; the beat frequency stays fixed.
      const double r_m = range + velocity * static_cast<double>(m) * tc;
      const double carrier_phase = -4.0 * kPi * fc * r_m / kSpeedOfLight;
      for (std::size_t s = 0; s < config.samples_per_chirp; ++s) {
        const double phase = 2.0 * kPi * fb * static_cast<double>(s) / fs + carrier_phase;
        const std::complex<double> z = std::polar(a, phase);
        for (std::size_t ant = 0; ant < config.n_antennas; ++ant) frame.at(m, s, ant) += z;
      }
    }
  }

  add_noise(frame, profile, snr_db, seed);
  return frame;
}

ComplexFrame synthesize_noise_frame(const RadarConfig& config,
                                    const AntennaNoiseProfile& profile, double snr_db,
                                    std::uint64_t seed) {
  config.validate();
  ComplexFrame frame(config);
  add_noise(frame, profile, snr_db, seed);
  return frame;
}

}  // namespace mmgesture
