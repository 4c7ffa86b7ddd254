#pragma once

#include <string>

#include "json.hpp"
#include "mmgesture/noise_synthesis.hpp"

namespace mmgesture {

// Writes `<stem>.json` (manifest) and `<stem>.bin` (packed float32 noisy/clean
// image pairs, little-endian). `provenance` is stored verbatim in the manifest.
void save_dataset(const Dataset& dataset, const std::string& manifest_path,
                  const nlohmann::json& provenance = nlohmann::json::object());

Dataset load_dataset(const std::string& manifest_path);

nlohmann::json load_manifest_provenance(const std::string& manifest_path);

}  // namespace mmgesture
