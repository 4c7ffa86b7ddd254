#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mmgesture/dataset_io.hpp"
#include "mmgesture/errors.hpp"
#include "mmgesture/experiment.hpp"
#include "mmgesture/nn/serialize.hpp"
#include "mmgesture/report.hpp"

using namespace mmgesture;
namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
  std::vector<std::string> settings;
  std::optional<std::size_t> pool_size;
  std::optional<std::size_t> pairs_per_gesture;
  std::optional<std::size_t> denoiser_epochs;
  std::optional<std::size_t> classifier_epochs;
  std::optional<double> gt_threshold;
  std::optional<std::string> pool_thresholds;
  bool override_thresholds = false;
  bool no_noise = false;
  std::string which = "both";
  bool verbose = false;
};

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

ExperimentConfig build_config(const Options& o) {
  return stage("config", [&] {
    ExperimentConfig c = o.config_path.empty() ? ExperimentConfig{} : load_experiment_config(o.config_path);
    auto set = [&](const std::string& k, const std::string& v) {
      if (!apply_experiment_key(c, k, v)) throw InvalidArgument("unknown configuration key '" + k + "'");
    };
    for (const auto& kv : o.settings) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw InvalidArgument("--set expects key=value, got '" + kv + "'");
      set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (o.pool_size) c.pool_size_per_threshold = *o.pool_size;
    if (o.pairs_per_gesture) c.dataset_size_per_gesture = *o.pairs_per_gesture;
    if (o.denoiser_epochs) c.denoiser_training.max_epochs = *o.denoiser_epochs;
    if (o.classifier_epochs) c.classifier_training.max_epochs = *o.classifier_epochs;
    if (o.gt_threshold) c.ground_truth_threshold_db = *o.gt_threshold;
    if (o.pool_thresholds) set("pool_thresholds_db", *o.pool_thresholds);
    if (o.override_thresholds) c.override_thresholds = true;
    if (o.no_noise) c.noise_enabled = false;
    if (o.output) c.output_dir = *o.output;
    if (o.seed) c.set_seed(*o.seed);
    if (o.verbose) {
      auto log = [](const char* what) {
        return [what](const EpochRecord& e) {
          std::fprintf(stderr, "%s epoch %zu: train %s val %s acc %s\n", what, e.epoch,
                       format_value(e.train_loss).c_str(), format_value(e.val_loss).c_str(),
                       format_value(e.val_accuracy).c_str());
        };
      };
      c.denoiser_training.on_epoch = log("denoiser");
      c.classifier_training.on_epoch = log("classifier");
    }
    c.validate();
    return c;
  });
}

std::string in_out(const ExperimentConfig& c, const char* name) {
  return (fs::path(c.output_dir) / name).string();
}

Dataset load_ds(const ExperimentConfig& c) {
  return stage("load-dataset", [&] { return load_dataset(in_out(c, artifact::kDatasetManifest)); });
}

nn::ModelWeights<float> load_model(const ExperimentConfig& c, const char* file, bool denoiser) {
  return stage("load-weights", [&] {
    auto w = denoiser ? initial_denoiser_weights(c.denoiser, 0) : initial_classifier_weights(c.classifier, 0);
    nn::load_weights(in_out(c, file), w);
    return w;
  });
}

void print_summary(const MetricsReport& r) {
  std::printf("test samples          %zu\n", r.test_count);
  std::printf("accuracy (denoised)   %s\n", format_value(r.accuracy).c_str());
  std::printf("accuracy (baseline)   %s\n", format_value(r.baseline_accuracy).c_str());
  std::printf("PSNR noisy/denoised   %s / %s dB\n", format_value(r.mean_psnr_noisy_db).c_str(),
              format_value(r.mean_psnr_denoised_db).c_str());
  std::printf("residual noisy/denoised %s / %s (eps %s)\n", format_value(r.residual_noisy).c_str(),
              format_value(r.residual_denoised).c_str(), format_value(r.residual_epsilon).c_str());
}

void cmd_generate(const ExperimentConfig& c) {
  ensure_writable_directory(c.output_dir);
  const auto pool = stage_noise_pool(c);
  const auto ds = stage_dataset(c, pool);
  stage("save-dataset", [&] {
    nlohmann::json prov = nlohmann::json::array();
    for (const auto& line : provenance_lines(c)) prov.push_back(line);
    save_dataset(ds, in_out(c, artifact::kDatasetManifest), prov);
  });
  std::printf("wrote %zu pairs (%zu train / %zu validation / %zu test) to %s\n", ds.pairs.size(),
              ds.split.train.size(), ds.split.validation.size(), ds.split.test.size(),
              in_out(c, artifact::kDatasetManifest).c_str());
}

void cmd_train_denoiser(const ExperimentConfig& c) {
  const auto ds = load_ds(c);
  auto m = stage_train_denoiser(c, ds);
  m.report.weights_path = artifact::kDenoiserWeights;
  stage("save", [&] {
    nn::save_weights(in_out(c, artifact::kDenoiserWeights), m.weights);
    write_train_report(in_out(c, artifact::kDenoiserCurve), m.report, provenance_lines(c));
  });
  std::printf("denoiser: best epoch %zu of %zu, %.1f s\n", m.report.best_epoch, m.report.epochs.size(),
              m.report.wall_seconds);
}

void cmd_train_classifier(const ExperimentConfig& c, const std::string& which) {
  if (which != "both" && which != "denoised" && which != "baseline") {
    throw StageError("config", "--input must be denoised, baseline or both");
  }
  const auto ds = load_ds(c);
  auto train_one = [&](const std::vector<ImageGrid>& images, const char* stage_name,
                       const char* weights_file, const char* curve_file) {
    auto m = stage_train_classifier(c, ds, images, stage_name);
    m.report.weights_path = weights_file;
    stage("save", [&] {
      nn::save_weights(in_out(c, weights_file), m.weights);
      write_train_report(in_out(c, curve_file), m.report, provenance_lines(c));
    });
    std::printf("%s: best epoch %zu of %zu, val accuracy %s, %.1f s\n", stage_name, m.report.best_epoch,
                m.report.epochs.size(),
                format_value(m.report.epochs.at(m.report.best_epoch - 1).val_accuracy).c_str(),
                m.report.wall_seconds);
  };
  if (which != "baseline") {
    const auto den = load_model(c, artifact::kDenoiserWeights, true);
    train_one(stage_denoise(c, ds, den), "train-classifier", artifact::kClassifierWeights,
              artifact::kClassifierCurve);
  }
  if (which != "denoised") {
    train_one(noisy_images(ds), "train-baseline", artifact::kBaselineWeights, artifact::kBaselineCurve);
  }
}

MetricsReport evaluate_saved(const ExperimentConfig& c) {
  const auto ds = load_ds(c);
  const auto den = load_model(c, artifact::kDenoiserWeights, true);
  const auto clf = load_model(c, artifact::kClassifierWeights, false);
  const auto base = load_model(c, artifact::kBaselineWeights, false);
  auto r = stage_evaluate(c, ds, stage_denoise(c, ds, den), clf, base);
  stage("load-curves", [&] {
    r.denoiser_report = read_train_report(in_out(c, artifact::kDenoiserCurve));
    r.classifier_report = read_train_report(in_out(c, artifact::kClassifierCurve));
    r.baseline_report = read_train_report(in_out(c, artifact::kBaselineCurve));
  });
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mmWave hand-gesture pipeline: synthetic noise, U-Net denoiser, compact classifier"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "key=value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "base seed; overrides every stage seed");
    sub->add_option("--output,-o", o.output, "output directory");
    sub->add_option("--set", o.settings, "extra key=value setting (repeatable)");
    sub->add_option("--pool-size", o.pool_size, "noise captures per pool threshold");
    sub->add_option("--pairs-per-gesture", o.pairs_per_gesture, "synthetic pairs per gesture");
    sub->add_option("--denoiser-epochs", o.denoiser_epochs, "maximum denoiser epochs");
    sub->add_option("--classifier-epochs", o.classifier_epochs, "maximum classifier epochs");
    sub->add_option("--gt-threshold", o.gt_threshold, "ground-truth threshold in dB (needs --override-thresholds)");
    sub->add_option("--pool-thresholds", o.pool_thresholds, "two pool thresholds 'a,b' in dB (needs --override-thresholds)");
    sub->add_flag("--override-thresholds", o.override_thresholds, "allow non-default thresholds");
    sub->add_flag("--no-noise", o.no_noise, "noise-free control run");
    sub->add_flag("--verbose,-v", o.verbose, "print per-epoch losses to stderr");
  };

  auto* gen = app.add_subcommand("generate", "build the noise pool and the synthetic dataset");
  auto* tden = app.add_subcommand("train-denoiser", "train the denoiser on the saved dataset");
  auto* tclf = app.add_subcommand("train-classifier", "train the classifier (denoised) and/or the raw baseline");
  auto* ev = app.add_subcommand("eval", "evaluate saved models on the held-out split");
  auto* all = app.add_subcommand("run-all", "run every stage and export the report");
  auto* exp = app.add_subcommand("export", "evaluate saved models and write CSV reports and triptychs");
  for (auto* s : {gen, tden, tclf, ev, all, exp}) add_common(s);
  tclf->add_option("--input", o.which, "denoised, baseline or both")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    const ExperimentConfig c = build_config(o);
    if (gen->parsed()) {
      cmd_generate(c);
    } else if (tden->parsed()) {
      cmd_train_denoiser(c);
    } else if (tclf->parsed()) {
      cmd_train_classifier(c, o.which);
    } else if (ev->parsed()) {
      print_summary(evaluate_saved(c));
    } else if (exp->parsed()) {
      const auto r = evaluate_saved(c);
      const auto files = stage("export", [&] { return export_report(r, c.output_dir); });
      std::printf("wrote %zu files under %s\n", files.size(), c.output_dir.c_str());
    } else if (all->parsed()) {
      const auto r = run_experiment(c);
      print_summary(r);
      std::printf("report written to %s\n", c.output_dir.c_str());
    }
  } catch (const StageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: [io] %s\n", e.what());
    return 1;
  }
  return 0;
}
