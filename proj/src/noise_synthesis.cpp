#include "mmgesture/noise_synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "mmgesture/errors.hpp"

namespace mmgesture {

double combine_db(double a_db, double b_db, CombineRule rule) {
  if (rule == CombineRule::DbMax) return std::max(a_db, b_db);
  // Factor out the larger term so neither power underflows.
  const double hi = std::max(a_db, b_db);
  const double lo = std::min(a_db, b_db);
  return hi + 10.0 * std::log10(1.0 + std::pow(10.0, (lo - hi) / 10.0));
}

NoisePool::NoisePool(std::vector<NoisePoolEntry> entries) : entries_(std::move(entries)) {
  for (const auto& e : entries_) {
    if (!e.map.threshold_db || *e.map.threshold_db != e.origin_threshold_db) {
      throw InvalidArgument("NoisePool: entry threshold does not match its origin tag");
    }
  }
}

std::size_t NoisePool::count_for(double threshold_db) const {
  return static_cast<std::size_t>(std::count_if(
      entries_.begin(), entries_.end(),
      [&](const NoisePoolEntry& e) { return e.origin_threshold_db == threshold_db; }));
}

std::size_t NoisePool::sample_index(Rng& rng) const {
  if (entries_.empty()) throw InvalidArgument("NoisePool: cannot sample an empty pool");
  std::uniform_int_distribution<std::size_t> pick(0, entries_.size() - 1);
  return pick(rng);
}

NoisePool build_noise_pool(std::size_t n_per_threshold, const RadarConfig& config,
                           std::span<const AntennaNoiseProfile> profiles, std::uint64_t seed,
                           const PoolOptions& options) {
  if (n_per_threshold == 0) throw InvalidArgument("build_noise_pool: n_per_threshold must be >= 1");
  if (profiles.empty()) throw InvalidArgument("build_noise_pool: no antenna profiles");
  for (const auto& p : profiles) {
    if (p.antenna_id >= config.n_antennas) {
      throw InvalidArgument("build_noise_pool: profile antenna_id out of range");
    }
  }
  std::vector<NoisePoolEntry> entries;
  entries.reserve(2 * n_per_threshold);
  for (std::size_t e = 0; e < 2 * n_per_threshold; ++e) {
    const double threshold = options.thresholds_db[e < n_per_threshold ? 0 : 1];
    AntennaNoiseProfile profile = profiles[e % profiles.size()];
    if (!options.noise_enabled) profile.noise_power_scale = 0.0;
    const auto frame = synthesize_noise_frame(config, profile, options.snr_db, derive_seed(seed, e));
    entries.push_back({threshold_mask(range_doppler(frame, profile.antenna_id), threshold), threshold});
  }
  return NoisePool(std::move(entries));
}

RangeDopplerMap combine_maps(const RangeDopplerMap& signal, const RangeDopplerMap& noise,
                             CombineRule rule) {
  if (signal.doppler_bins != noise.doppler_bins || signal.range_bins != noise.range_bins) {
    throw ShapeError("combine_maps: map dimensions differ (" +
                     std::to_string(signal.doppler_bins) + "x" + std::to_string(signal.range_bins) +
                     " vs " + std::to_string(noise.doppler_bins) + "x" +
                     std::to_string(noise.range_bins) + ")");
  }
  RangeDopplerMap out = signal;
  out.threshold_db.reset();
  for (std::size_t i = 0; i < out.values_db.size(); ++i) {
    out.values_db[i] = combine_db(signal.values_db[i], noise.values_db[i], rule);
  }
  return out;
}

SyntheticNoisyPair synthesize_noisy(const RangeDopplerMap& clean, const NoisePool& pool,
                                    std::uint64_t seed, const SynthesisOptions& options) {
  if (pool.empty()) throw InvalidArgument("synthesize_noisy: empty noise pool");
  if (!clean.threshold_db || *clean.threshold_db != options.clean_threshold_db) {
    throw InvalidArgument("synthesize_noisy: ground-truth map must be floored at " +
                          std::to_string(options.clean_threshold_db) + " dB");
  }
  Rng rng = make_rng(seed);
  const std::size_t index = pool.sample_index(rng);
  const NoisePoolEntry& noise = pool[index];
  const RangeDopplerMap noisy = combine_maps(clean, noise.map, options.rule);

  SyntheticNoisyPair pair;
  pair.noisy = to_image(noisy, options.window.floor_db, options.window.ceiling_db);
  pair.clean = to_image(clean, options.window.floor_db, options.window.ceiling_db);
  pair.noise_origin_db = noise.origin_threshold_db;
  pair.noise_index = index;
  pair.seed = seed;
  return pair;
}

DatasetSplit make_split(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(seed, 0x73706c6974ULL);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_train = n * 70 / 100;
  const std::size_t n_val = n * 15 / 100;
  DatasetSplit split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                          order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return split;
}

GestureLabel dataset_label(std::size_t index) { return kAllGestures[index % kNumGestures]; }

std::uint64_t pair_seed(std::uint64_t dataset_seed, std::size_t index) {
  return derive_seed(dataset_seed, 0x70616972ULL + index);
}

RangeDopplerMap gesture_ground_truth(std::size_t index, const RadarConfig& config,
                                     std::uint64_t seed, const DatasetOptions& options) {
  const GestureLabel label = dataset_label(index);
  const std::uint64_t sample_seed = derive_seed(seed, index);
  const auto track = gesture_trajectory(label, config, options.frames_per_gesture, sample_seed);
  // A frame near the first quarter of the gesture, where lateral arcs carry
  // their strongest radial component.
  Rng rng = make_rng(sample_seed, 7);
  const std::size_t quarter = std::max<std::size_t>(options.frames_per_gesture / 4, 1);
  const std::size_t frame_idx =
      std::min(quarter - 1 + static_cast<std::size_t>(rng() & 1U), options.frames_per_gesture - 1);
  const auto profile = antenna_noise_profile(0, config, options.profile_seed);
  const auto frame = synthesize_frame(track, frame_idx, config, profile, options.gesture_snr_db,
                                      derive_seed(sample_seed, 1));
  return threshold_mask(range_doppler(frame, 0), options.synthesis.clean_threshold_db);
}

namespace {

void round_to_float(ImageGrid& img) {
  for (double& p : img.pixels) p = static_cast<double>(static_cast<float>(p));
}

}  // namespace

Dataset generate_dataset(std::size_t n_per_gesture, const NoisePool& pool,
                         const RadarConfig& config, std::uint64_t seed,
                         const DatasetOptions& options) {
  if (n_per_gesture == 0) throw InvalidArgument("generate_dataset: n_per_gesture must be >= 1");
  if (pool.empty()) throw InvalidArgument("generate_dataset: empty noise pool");
  const std::size_t n = n_per_gesture * kNumGestures;
  Dataset ds;
  ds.seed = seed;
  ds.pairs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto clean = gesture_ground_truth(i, config, seed, options);
    auto pair = synthesize_noisy(clean, pool, pair_seed(seed, i), options.synthesis);
    pair.label = dataset_label(i);
    round_to_float(pair.noisy);
    round_to_float(pair.clean);
    ds.pairs.push_back(std::move(pair));
  }
  ds.split = make_split(n, seed);
  return ds;
}

}  // namespace mmgesture
