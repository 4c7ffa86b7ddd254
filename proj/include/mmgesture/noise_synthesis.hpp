#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "mmgesture/radar_sim.hpp"
#include "mmgesture/random.hpp"
#include "mmgesture/rdm.hpp"

namespace mmgesture {

// Threshold at which ground-truth gesture maps are sensed.
inline constexpr double kGroundTruthThresholdDb = -90.0;
// Thresholds at which noise-only maps are collected for the pool.
inline constexpr std::array<double, 2> kPoolThresholdsDb = {-95.0, -100.0};

// Per-sample SNR (see synthesize_frame) of noise captures and gesture captures.
inline constexpr double kDefaultPoolSnrDb = -8.0;
inline constexpr double kDefaultGestureSnrDb = 30.0;

enum class CombineRule { LinearPower, DbMax };

// Fuses two dB cells. LinearPower adds powers: 10*log10(10^(a/10) + 10^(b/10)).
double combine_db(double a_db, double b_db, CombineRule rule = CombineRule::LinearPower);

struct NoisePoolEntry {
  RangeDopplerMap map;
  double origin_threshold_db = 0.0;
};

struct PoolOptions {
  std::array<double, 2> thresholds_db = kPoolThresholdsDb;
  double snr_db = kDefaultPoolSnrDb;
  // When false the captures carry no receiver noise (control runs).
  bool noise_enabled = true;
};

class NoisePool {
 public:
  NoisePool() = default;
  explicit NoisePool(std::vector<NoisePoolEntry> entries);

  std::span<const NoisePoolEntry> entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t count_for(double threshold_db) const;
  // Uniform draw over the whole mixed pool.
  std::size_t sample_index(Rng& rng) const;
  const NoisePoolEntry& operator[](std::size_t i) const { return entries_.at(i); }

 private:
  std::vector<NoisePoolEntry> entries_;
};

// First n_per_threshold entries are floored at thresholds_db[0], the rest at
// thresholds_db[1]. Profiles are cycled round-robin; each entry is read from
// its profile's antenna.
NoisePool build_noise_pool(std::size_t n_per_threshold, const RadarConfig& config,
                           std::span<const AntennaNoiseProfile> profiles, std::uint64_t seed,
                           const PoolOptions& options = {});

struct SyntheticNoisyPair {
  ImageGrid noisy;
  ImageGrid clean;
  GestureLabel label = GestureLabel::Left;
  double noise_origin_db = 0.0;
  std::size_t noise_index = 0;
  std::uint64_t seed = 0;
  bool operator==(const SyntheticNoisyPair&) const = default;
};

struct SynthesisOptions {
  CombineRule rule = CombineRule::LinearPower;
  NormalizationWindow window{};
  double clean_threshold_db = kGroundTruthThresholdDb;
};

// Cell-wise fusion of two equally sized maps.
RangeDopplerMap combine_maps(const RangeDopplerMap& signal, const RangeDopplerMap& noise,
                             CombineRule rule = CombineRule::LinearPower);

// Draws one pool entry with `seed` and fuses it with the ground-truth map.
// The label is left at its default; generate_dataset fills it in.
SyntheticNoisyPair synthesize_noisy(const RangeDopplerMap& clean, const NoisePool& pool,
                                    std::uint64_t seed, const SynthesisOptions& options = {});

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

// 70/15/15 partition of a seeded permutation of 0..n-1.
DatasetSplit make_split(std::size_t n, std::uint64_t seed);

struct DatasetOptions {
  std::size_t frames_per_gesture = 16;
  double gesture_snr_db = kDefaultGestureSnrDb;
  std::uint64_t profile_seed = 0;
  SynthesisOptions synthesis{};
};

struct Dataset {
  std::vector<SyntheticNoisyPair> pairs;
  DatasetSplit split;
  std::uint64_t seed = 0;
};

// Ground-truth map of sample `index` (trajectory -> frame -> RDM on antenna 0
// -> ground-truth threshold). Exposed so a pair can be regenerated from its ids.
RangeDopplerMap gesture_ground_truth(std::size_t index, const RadarConfig& config,
                                     std::uint64_t seed, const DatasetOptions& options);
GestureLabel dataset_label(std::size_t index);
std::uint64_t pair_seed(std::uint64_t dataset_seed, std::size_t index);

// Balanced over the four gestures (labels interleaved), deterministic per seed.
// Pixel values are rounded to float32 precision so the packed file round-trips.
Dataset generate_dataset(std::size_t n_per_gesture, const NoisePool& pool,
                         const RadarConfig& config, std::uint64_t seed,
                         const DatasetOptions& options = {});

}  // namespace mmgesture
