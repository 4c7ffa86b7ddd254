#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mmgesture/errors.hpp"
#include "mmgesture/experiment.hpp"
#include "mmgesture/metrics.hpp"
#include "mmgesture/report.hpp"
#include "test_support.hpp"

using namespace mmgesture;
namespace fs = std::filesystem;

namespace {

ImageGrid filled(double v, std::size_t n = 4) {
  ImageGrid img;
  img.height = img.width = n;
  img.pixels.assign(n * n, v);
  return img;
}

ExperimentConfig tiny_config(const std::string& out) {
  ExperimentConfig c;
  c.pool_size_per_threshold = 10;
  c.dataset_size_per_gesture = 20;
  c.denoiser_training.max_epochs = 2;
  c.classifier_training.max_epochs = 3;
  c.output_dir = out;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(MMG_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("psnr") {
  CHECK(psnr(filled(0.3), filled(0.3)) == kPsnrCapDb);
  CHECK(psnr(filled(0.0), filled(0.1)) == doctest::Approx(20.0));
  CHECK(psnr(filled(0.0), filled(1.0)) == doctest::Approx(0.0));
  CHECK_THROWS_AS(psnr(filled(0.0, 4), filled(0.0, 5)), ShapeError);
  CHECK_THROWS_AS(psnr(ImageGrid{}, ImageGrid{}), ShapeError);
}

TEST_CASE("residual noise fraction") {
  CHECK(residual_noise_fraction(filled(0.05), filled(0.05), 0.1) == 0.0);
  CHECK(residual_noise_fraction(filled(1.0), filled(0.0), 0.1) == 1.0);
  // clean cells above epsilon never count
  CHECK(residual_noise_fraction(filled(1.0), filled(0.5), 0.1) == 0.0);
  auto img = filled(0.0);
  img.pixels[0] = 0.1;  // exactly at epsilon counts
  img.pixels[1] = 0.0999;
  CHECK(residual_noise_fraction(img, filled(0.0), 0.1) == doctest::Approx(1.0 / 16.0));
  CHECK_THROWS_AS(residual_noise_fraction(img, filled(0.0), 0.0), InvalidArgument);
  CHECK_THROWS_AS(residual_noise_fraction(img, filled(0.0), 1.0), InvalidArgument);
  CHECK_THROWS_AS(residual_noise_fraction(img, filled(0.0, 3), 0.1), ShapeError);
}

TEST_CASE("confusion matrix") {
  ConfusionMatrix m;
  CHECK_THROWS_AS(m.accuracy(), StateError);
  Rng rng = make_rng(3);
  std::size_t agree = 0;
  for (int i = 0; i < 200; ++i) {
    const auto t = gesture_from_class_index(rng() % 4), p = gesture_from_class_index(rng() % 4);
    m.add(t, p);
    agree += t == p;
  }
  CHECK(m.total() == 200);
  CHECK(m.trace() == agree);
  CHECK(m.accuracy() == doctest::Approx(agree / 200.0));
  std::size_t rows = 0;
  for (std::size_t r = 0; r < 4; ++r) rows += m.row_total(r);
  CHECK(rows == 200);
}

TEST_CASE("stage seeds") {
  const auto a = derive_stage_seeds(7), b = derive_stage_seeds(8);
  CHECK(a == derive_stage_seeds(7));
  CHECK(a.pool != b.pool);
  CHECK(a.pool != a.dataset);
  CHECK(a.denoiser != a.classifier);
  ExperimentConfig c;
  CHECK(c.seeds == a);
  c.set_seed(8);
  CHECK(c.seeds == b);
}

TEST_CASE("experiment configuration keys") {
  // `seed` is applied first, so an explicit stage seed wins regardless of order
  const auto c = experiment_config_from({{"pool_seed", "5"}, {"seed", "3"}, {"learning_rate", "0.01"},
                                         {"denoiser_epochs", "4"}, {"samples_per_chirp", "64"}});
  CHECK(c.seed == 3);
  CHECK(c.seeds.pool == 5);
  CHECK(c.seeds.dataset == derive_stage_seeds(3).dataset);
  CHECK(c.denoiser_training.adam.learning_rate == doctest::Approx(0.01));
  CHECK(c.classifier_training.adam.learning_rate == doctest::Approx(0.01));
  CHECK(c.denoiser_training.max_epochs == 4);

  CHECK_THROWS_AS(experiment_config_from({{"bogus", "1"}}), InvalidArgument);
  CHECK_THROWS_AS(experiment_config_from({{"noise_enabled", "maybe"}}), InvalidArgument);
  CHECK_THROWS_AS(experiment_config_from({{"combine_rule", "sum"}}), InvalidArgument);
  CHECK_THROWS_AS(experiment_config_from({{"pool_thresholds_db", "-95"}}), InvalidArgument);

  const auto dir = testing::scratch_dir("cfg");
  { std::ofstream(dir / "e.cfg") << "# run\nseed=11\ncombine_rule=db_max\n"; }
  const auto f = load_experiment_config((dir / "e.cfg").string());
  CHECK(f.seed == 11);
  CHECK(f.combine_rule == CombineRule::DbMax);
}

TEST_CASE("thresholds need an explicit override") {
  ExperimentConfig c;
  CHECK(c.thresholds_are_default());
  CHECK_NOTHROW(c.validate());
  c.ground_truth_threshold_db = -85.0;
  CHECK_FALSE(c.thresholds_are_default());
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c.override_thresholds = true;
  CHECK_NOTHROW(c.validate());
  bool flagged = false;
  for (const auto& line : provenance_lines(c)) flagged |= line == "thresholds=OVERRIDDEN";
  CHECK(flagged);

  ExperimentConfig p;
  p.pool_thresholds_db = {-95.0, -105.0};
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
}

TEST_CASE("model sizes follow the radar") {
  const auto c = experiment_config_from({{"samples_per_chirp", "32"}, {"chirps_per_frame", "16"}});
  CHECK(c.denoiser.height == 16);
  CHECK(c.denoiser.width == 16);
  CHECK(c.classifier.width == 16);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("format_value and csv round trip") {
  CHECK(format_value(0.5) == "0.5");
  CHECK(format_value(std::nan("")).empty());
  const auto dir = testing::scratch_dir("csv");
  Rng rng = make_rng(8);
  std::vector<double> values;
  {
    std::ofstream os(dir / "m.csv");
    os << "# note\nmetric,value\n";
    for (int i = 0; i < 50; ++i) {
      values.push_back(std::exp(uniform(rng, -20.0, 20.0)) * (i % 2 ? -1 : 1));
      os << "m" << i << "," << format_value(values.back()) << "\n";
    }
  }
  const auto read = read_metrics_csv((dir / "m.csv").string());
  for (int i = 0; i < 50; ++i) {
    const double v = read.at("m" + std::to_string(i));
    CHECK(v == doctest::Approx(values[static_cast<std::size_t>(i)]).epsilon(5e-6));
    CHECK(format_value(v) == format_value(values[static_cast<std::size_t>(i)]));
  }
  const auto table = read_csv((dir / "m.csv").string());
  CHECK(table.comments == std::vector<std::string>{"note"});
  CHECK(table.header == std::vector<std::string>{"metric", "value"});
  CHECK(table.rows.size() == 50);
}

TEST_CASE("train report round trip") {
  const auto dir = testing::scratch_dir("curve");
  TrainReport r;
  r.seed = 42;
  r.best_epoch = 2;
  r.weights_path = "x.nnw";
  r.epochs = {{1, 0.5, 0.6, 0.25}, {2, 0.25, 0.3, 0.5}, {3, 0.125, 0.35, std::nan("")}};
  write_train_report((dir / "c.csv").string(), r, {"a=1"});
  const auto back = read_train_report((dir / "c.csv").string());
  CHECK(back.same_trajectory(r));
  CHECK(back.weights_path == "x.nnw");
}

TEST_CASE("end-to-end run is deterministic and complete") {
  const auto base = testing::scratch_dir("e2e");
  const auto a = run_experiment(tiny_config((base / "a").string()));
  const auto b = run_experiment(tiny_config((base / "b").string()));
  CHECK(slurp(base / "a" / "metrics.csv") == slurp(base / "b" / "metrics.csv"));
  CHECK(slurp(base / "a" / "confusion.csv") == slurp(base / "b" / "confusion.csv"));
  CHECK(slurp(base / "a" / "curves.csv") == slurp(base / "b" / "curves.csv"));
  CHECK(slurp(base / "a" / "denoiser.nnw") == slurp(base / "b" / "denoiser.nnw"));
  CHECK(a.accuracy == b.accuracy);

  CHECK(a.train_count + a.validation_count + a.test_count == 80);
  CHECK(a.samples.size() == a.test_count);
  CHECK(a.confusion.total() == a.test_count);
  CHECK(a.confusion.accuracy() == doctest::Approx(a.accuracy));
  std::size_t pgm = 0;
  for (const auto& e : fs::directory_iterator(base / "a" / "triptychs")) pgm += e.path().extension() == ".pgm";
  CHECK(pgm == a.test_count);
  const auto strip = read_pgm((base / "a" / "triptychs" / triptych_filename(a.samples[0])).string());
  CHECK(strip.height == 32);
  CHECK(strip.width == 3 * 32 + 2 * 2);

  const auto m = read_metrics_csv((base / "a" / "metrics.csv").string());
  CHECK(m.at("accuracy_denoised") == doctest::Approx(a.accuracy).epsilon(1e-5));
  CHECK(m.at("test_samples") == a.test_count);
  CHECK(m.at("psnr_gain_db") ==
        doctest::Approx(a.mean_psnr_denoised_db - a.mean_psnr_noisy_db).epsilon(1e-4));
  for (const char* f : {"dataset.json", "denoiser.nnw", "classifier.nnw", "baseline.nnw", "timing.csv"}) {
    CHECK(fs::exists(base / "a" / f));
  }
  // provenance heads every metrics file
  const auto table = read_csv((base / "a" / "metrics.csv").string());
  bool seeded = false;
  for (const auto& line : table.comments) seeded |= line.find("seed=7") != std::string::npos;
  CHECK(seeded);
}

TEST_CASE("evaluation on an empty test split fails in its stage") {
  auto c = tiny_config((testing::scratch_dir("empty") / "out").string());
  const auto pool = stage_noise_pool(c);
  auto ds = stage_dataset(c, pool);
  ds.split.test.clear();
  const auto w = initial_classifier_weights(c.classifier, 1);
  const std::vector<ImageGrid> imgs = noisy_images(ds);
  try {
    stage_evaluate(c, ds, imgs, w, w);
    FAIL("expected a stage error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "evaluate");
  }
}

TEST_CASE("unwritable output directory is an io error") {
  const auto dir = testing::scratch_dir("unwritable");
  { std::ofstream(dir / "file") << "x"; }
  CHECK_THROWS_AS(ensure_writable_directory((dir / "file" / "sub").string()), IOError);
  auto c = tiny_config((dir / "file" / "sub").string());
  CHECK_THROWS_AS(run_experiment(c), IOError);
}

TEST_CASE("noise-free control") {
  // Without receiver noise the pool maps sit at their floors, so noisy and
  // denoised inputs carry the same information and both pipelines agree.
  auto c = tiny_config((testing::scratch_dir("control") / "out").string());
  c.noise_enabled = false;
  c.dataset_size_per_gesture = 60;
  c.denoiser_training.max_epochs = 6;
  c.classifier_training.max_epochs = 25;
  const auto r = run_experiment(c);
  CAPTURE(r.accuracy);
  CAPTURE(r.baseline_accuracy);
  CHECK(r.baseline_accuracy >= 0.9);
  CHECK(r.accuracy >= 0.9);
  CHECK(std::abs(r.accuracy - r.baseline_accuracy) <= 0.01);
}

TEST_CASE("command line") {
  const auto dir = testing::scratch_dir("cli");
  const std::string out = " -o " + (dir / "run").string();
  const std::string small = " --pool-size 5 --pairs-per-gesture 8 --denoiser-epochs 1 --classifier-epochs 2";

  CHECK(run_cli("generate" + out + small, dir / "gen.log") == 0);
  CHECK(fs::exists(dir / "run" / "dataset.json"));
  CHECK(run_cli("train-denoiser" + out + small, dir / "td.log") == 0);
  CHECK(run_cli("train-classifier --input both" + out + small, dir / "tc.log") == 0);
  CHECK(run_cli("eval" + out + small, dir / "ev.log") == 0);
  CHECK(slurp(dir / "ev.log").find("accuracy") != std::string::npos);
  CHECK(run_cli("export" + out + small, dir / "ex.log") == 0);
  CHECK(fs::exists(dir / "run" / "metrics.csv"));

  // stage failures exit with 2 and name the stage
  CHECK(run_cli("eval -o " + (dir / "nothing").string(), dir / "missing.log") == 2);
  CHECK(slurp(dir / "missing.log").find("[load-dataset]") != std::string::npos);
  CHECK(run_cli("generate --gt-threshold -85" + out, dir / "guard.log") == 2);
  CHECK(slurp(dir / "guard.log").find("override") != std::string::npos);
  CHECK(run_cli("generate --set bogus=1" + out, dir / "bogus.log") == 2);
  CHECK(run_cli("run-all --set pool_size_per_threshold=0" + out, dir / "zero.log") == 2);
  CHECK(run_cli("no-such-command", dir / "usage.log") != 0);
}
