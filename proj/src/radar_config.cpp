#include "mmgesture/radar_config.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mmgesture/errors.hpp"

namespace mmgesture {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument("config key '" + key + "': not a number: '" + value + "'");
  }
}

std::size_t parse_count(const std::string& key, const std::string& value) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw InvalidArgument("config key '" + key + "': not a count: '" + value + "'");
  }
  return v;
}

}  // namespace

void RadarConfig::validate() const {
  if (!(std::isfinite(f_low) && std::isfinite(f_high)) || !(f_high - f_low > 0.0)) {
    throw InvalidArgument("RadarConfig: bandwidth must be positive (f_high > f_low)");
  }
  if (!std::has_single_bit(samples_per_chirp) || samples_per_chirp < 2) {
    throw InvalidArgument("RadarConfig: samples_per_chirp must be a power of two >= 2");
  }
  if (!std::has_single_bit(chirps_per_frame) || chirps_per_frame < 2) {
    throw InvalidArgument("RadarConfig: chirps_per_frame must be a power of two >= 2");
  }
  if (!(chirp_duration > 0.0) || !(sample_rate > 0.0)) {
    throw InvalidArgument("RadarConfig: chirp_duration and sample_rate must be positive");
  }
  // Small slack for decimal round-off in the product.
  if (sample_rate * chirp_duration < static_cast<double>(samples_per_chirp) * (1.0 - 1e-12)) {
    throw InvalidArgument("RadarConfig: sample_rate * chirp_duration < samples_per_chirp");
  }
  if (!(max_range > 0.0)) throw InvalidArgument("RadarConfig: max_range must be positive");
  if (n_antennas == 0) throw InvalidArgument("RadarConfig: n_antennas must be >= 1");
}

bool apply_radar_key(RadarConfig& c, const std::string& key, const std::string& value) {
  if (key == "f_low") c.f_low = parse_double(key, value);
  else if (key == "f_high") c.f_high = parse_double(key, value);
  else if (key == "samples_per_chirp") c.samples_per_chirp = parse_count(key, value);
  else if (key == "chirps_per_frame") c.chirps_per_frame = parse_count(key, value);
  else if (key == "chirp_duration") c.chirp_duration = parse_double(key, value);
  else if (key == "sample_rate") c.sample_rate = parse_double(key, value);
  else if (key == "max_range") c.max_range = parse_double(key, value);
  else if (key == "n_antennas") c.n_antennas = parse_count(key, value);
  else return false;
  return true;
}

std::map<std::string, std::string> read_key_value_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open config file: " + path);
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw InvalidArgument(path + ":" + std::to_string(lineno) + ": empty key");
    if (!out.emplace(key, value).second) {
      throw InvalidArgument(path + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
  }
  return out;
}

RadarConfig load_radar_config(const std::string& path) {
  RadarConfig config;
  for (const auto& [key, value] : read_key_value_file(path)) {
    if (!apply_radar_key(config, key, value)) {
      throw InvalidArgument("unknown radar config key '" + key + "' in " + path);
    }
  }
  config.validate();
  return config;
}

std::string to_key_value(const RadarConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "f_low=" << c.f_low << '\n'
     << "f_high=" << c.f_high << '\n'
     << "samples_per_chirp=" << c.samples_per_chirp << '\n'
     << "chirps_per_frame=" << c.chirps_per_frame << '\n'
     << "chirp_duration=" << c.chirp_duration << '\n'
     << "sample_rate=" << c.sample_rate << '\n'
     << "max_range=" << c.max_range << '\n'
     << "n_antennas=" << c.n_antennas << '\n';
  return os.str();
}

}  // namespace mmgesture
