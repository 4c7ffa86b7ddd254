#include "mmgesture/dataset_io.hpp"

#include <filesystem>
#include <fstream>

#include "mmgesture/binary_io.hpp"
#include "mmgesture/errors.hpp"

namespace mmgesture {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestFormat = "mmgesture-dataset-1";

fs::path binary_path_for(const fs::path& manifest) {
  fs::path bin = manifest;
  bin.replace_extension(".bin");
  return bin;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IOError("cannot open manifest: " + path);
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw IOError("malformed manifest " + path + ": " + e.what());
  }
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::string& manifest_path,
                  const nlohmann::json& provenance) {
  if (dataset.pairs.empty()) throw InvalidArgument("save_dataset: empty dataset");
  const auto& first = dataset.pairs.front();
  const NormalizationWindow window = first.clean.source.value_or(NormalizationWindow{});
  const fs::path bin_path = binary_path_for(manifest_path);

  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw IOError("cannot open for writing: " + bin_path.string());

  nlohmann::json manifest;
  manifest["format"] = kManifestFormat;
  manifest["height"] = first.clean.height;
  manifest["width"] = first.clean.width;
  manifest["floor_db"] = window.floor_db;
  manifest["ceiling_db"] = window.ceiling_db;
  manifest["seed"] = dataset.seed;
  manifest["binary"] = bin_path.filename().string();
  manifest["provenance"] = provenance;

  std::uint64_t offset = 0;
  const std::uint64_t image_bytes = first.clean.pixels.size() * sizeof(float);
  auto pairs = nlohmann::json::array();
  for (const auto& p : dataset.pairs) {
    if (!p.noisy.same_shape(first.clean) || !p.clean.same_shape(first.clean)) {
      throw ShapeError("save_dataset: pair dimensions differ");
    }
    for (double v : p.noisy.pixels) binio::write_le<float>(bin, static_cast<float>(v));
    for (double v : p.clean.pixels) binio::write_le<float>(bin, static_cast<float>(v));
    pairs.push_back({{"label", static_cast<int>(p.label)},
                     {"seed", p.seed},
                     {"noise_origin_db", p.noise_origin_db},
                     {"noise_index", p.noise_index},
                     {"noisy_offset", offset},
                     {"clean_offset", offset + image_bytes}});
    offset += 2 * image_bytes;
  }
  if (!bin) throw IOError("write failed: " + bin_path.string());
  manifest["pairs"] = std::move(pairs);
  manifest["split"] = {{"train", dataset.split.train},
                       {"validation", dataset.split.validation},
                       {"test", dataset.split.test}};

  std::ofstream os(manifest_path);
  if (!os) throw IOError("cannot open for writing: " + manifest_path);
  os << manifest.dump(1) << '\n';
  if (!os) throw IOError("write failed: " + manifest_path);
}

Dataset load_dataset(const std::string& manifest_path) {
  const nlohmann::json manifest = read_json(manifest_path);
  try {
    if (manifest.at("format") != kManifestFormat) {
      throw IOError(manifest_path + ": unsupported dataset format");
    }
    const std::size_t h = manifest.at("height");
    const std::size_t w = manifest.at("width");
    const NormalizationWindow window{manifest.at("floor_db"), manifest.at("ceiling_db")};
    const fs::path bin_path =
        fs::path(manifest_path).parent_path() / manifest.at("binary").get<std::string>();
    std::ifstream bin(bin_path, std::ios::binary);
    if (!bin) throw IOError("cannot open dataset binary: " + bin_path.string());

    auto read_image = [&](std::uint64_t offset) {
      bin.seekg(static_cast<std::streamoff>(offset));
      ImageGrid img;
      img.height = h;
      img.width = w;
      img.source = window;
      img.pixels.resize(h * w);
      for (double& v : img.pixels) v = binio::read_le<float>(bin);
      return img;
    };

    Dataset ds;
    ds.seed = manifest.at("seed");
    for (const auto& entry : manifest.at("pairs")) {
      SyntheticNoisyPair p;
      p.label = gesture_from_value(entry.at("label").get<int>());
      p.seed = entry.at("seed");
      p.noise_origin_db = entry.at("noise_origin_db");
      p.noise_index = entry.at("noise_index");
      p.noisy = read_image(entry.at("noisy_offset"));
      p.clean = read_image(entry.at("clean_offset"));
      ds.pairs.push_back(std::move(p));
    }
    const auto& split = manifest.at("split");
    ds.split.train = split.at("train").get<std::vector<std::size_t>>();
    ds.split.validation = split.at("validation").get<std::vector<std::size_t>>();
    ds.split.test = split.at("test").get<std::vector<std::size_t>>();
    for (const auto* part : {&ds.split.train, &ds.split.validation, &ds.split.test}) {
      for (auto i : *part) {
        if (i >= ds.pairs.size()) throw IOError(manifest_path + ": split index out of range");
      }
    }
    return ds;
  } catch (const nlohmann::json::exception& e) {
    throw IOError("malformed manifest " + manifest_path + ": " + e.what());
  }
}

nlohmann::json load_manifest_provenance(const std::string& manifest_path) {
  return read_json(manifest_path).value("provenance", nlohmann::json::object());
}

}  // namespace mmgesture
