#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>

#include "mmgesture/dataset_io.hpp"
#include "mmgesture/errors.hpp"
#include "mmgesture/rdm.hpp"
#include "test_support.hpp"

using namespace mmgesture;
namespace fs = std::filesystem;

TEST_CASE("RDM1 round trip") {
  const auto dir = testing::scratch_dir("rdm1");
  const auto path = (dir / "a.rdm").string();
  const auto rdm = threshold_mask(range_doppler(testing::random_frame(RadarConfig{}, 2), 1), -90.0);
  write_rdm(path, rdm);
  CHECK(fs::file_size(path) == 32 + 32 * 32 * 4);
  const auto back = read_rdm(path);
  CHECK(back.doppler_bins == 32);
  CHECK(back.range_bins == 32);
  CHECK(back.antenna_id == 1);
  REQUIRE(back.threshold_db.has_value());
  CHECK(*back.threshold_db == -90.0);
  for (std::size_t i = 0; i < rdm.values_db.size(); ++i) {
    CHECK(back.values_db[i] == static_cast<double>(static_cast<float>(rdm.values_db[i])));
  }
  // no threshold survives as no threshold
  auto raw = rdm;
  raw.threshold_db.reset();
  write_rdm(path, raw);
  CHECK_FALSE(read_rdm(path).threshold_db.has_value());

  { std::ofstream(path, std::ios::binary) << "RDM2xxxxxxxxxxxxxxxxxxxxxxxxxxxx"; }
  CHECK_THROWS_AS(read_rdm(path), IOError);
  write_rdm(path, rdm);
  fs::resize_file(path, 100);
  CHECK_THROWS_AS(read_rdm(path), IOError);
  CHECK_THROWS_AS(read_rdm((dir / "none.rdm").string()), IOError);
}

TEST_CASE("PGM round trip") {
  const auto dir = testing::scratch_dir("pgm");
  ImageGrid img;
  img.height = 3;
  img.width = 4;
  for (int i = 0; i < 12; ++i) img.pixels.push_back(i / 11.0);
  write_pgm((dir / "a.pgm").string(), img);
  const auto back = read_pgm((dir / "a.pgm").string());
  CHECK(back.height == 3);
  CHECK(back.width == 4);
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(back.pixels[i] == std::lround(255.0 * img.pixels[i]) / 255.0);
  }

  const ImageGrid panels[] = {img, img};
  write_pgm_strip((dir / "s.pgm").string(), panels);
  const auto strip = read_pgm((dir / "s.pgm").string());
  CHECK(strip.width == 10);
  CHECK(strip.at(1, 4) == 1.0);  // white gutter
  CHECK(strip.at(1, 6 + 1) == back.at(1, 1));

  ImageGrid other = img;
  other.height = 2;
  other.pixels.resize(8);
  const ImageGrid mismatched[] = {img, other};
  CHECK_THROWS_AS(write_pgm_strip((dir / "m.pgm").string(), mismatched), ShapeError);
  CHECK_THROWS_AS(write_pgm_strip((dir / "m.pgm").string(), std::span<const ImageGrid>{}), InvalidArgument);
  { std::ofstream(dir / "bad.pgm") << "P2\n1 1\n255\n0"; }
  CHECK_THROWS_AS(read_pgm((dir / "bad.pgm").string()), IOError);
  { std::ofstream(dir / "short.pgm") << "P5\n4 4\n255\nab"; }
  CHECK_THROWS_AS(read_pgm((dir / "short.pgm").string()), IOError);
}

TEST_CASE("dataset round trip") {
  const RadarConfig c;
  std::vector<AntennaNoiseProfile> prof;
  for (std::size_t a = 0; a < 3; ++a) prof.push_back(antenna_noise_profile(a, c, 1));
  const auto pool = build_noise_pool(3, c, prof, 2);
  const auto ds = generate_dataset(6, pool, c, 3);

  const auto dir = testing::scratch_dir("dataset");
  const auto manifest = (dir / "dataset.json").string();
  save_dataset(ds, manifest, nlohmann::json::array({"seed=3"}));
  CHECK(fs::exists(dir / "dataset.bin"));
  const auto back = load_dataset(manifest);
  CHECK(back.seed == ds.seed);
  CHECK(back.split.train == ds.split.train);
  CHECK(back.split.validation == ds.split.validation);
  CHECK(back.split.test == ds.split.test);
  REQUIRE(back.pairs.size() == ds.pairs.size());
  for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
    CHECK(back.pairs[i] == ds.pairs[i]);  // pixels are float-rounded, so this is exact
  }
  CHECK(load_manifest_provenance(manifest) == nlohmann::json::array({"seed=3"}));

  CHECK_THROWS_AS(save_dataset(Dataset{}, manifest), InvalidArgument);
  fs::resize_file(dir / "dataset.bin", 10);
  CHECK_THROWS_AS(load_dataset(manifest), IOError);
  { std::ofstream(manifest) << "{not json"; }
  CHECK_THROWS_AS(load_dataset(manifest), IOError);
  CHECK_THROWS_AS(load_dataset((dir / "none.json").string()), IOError);
}
