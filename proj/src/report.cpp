#include "mmgesture/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "mmgesture/errors.hpp"

namespace mmgesture {

namespace fs = std::filesystem;

std::string format_value(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw IOError("cannot write '" + path.string() + "'");
  return os;
}

void finish(std::ofstream& os, const fs::path& path) {
  os.flush();
  if (!os) throw IOError("write failed for '" + path.string() + "'");
}

void write_comments(std::ostream& os, const std::vector<std::string>& lines) {
  for (const auto& l : lines) os << "# " << l << '\n';
}

std::string class_name(std::size_t i) { return std::string(to_string(gesture_from_class_index(i))); }

void write_confusion(std::ostream& os, const char* model, const ConfusionMatrix& m) {
  for (std::size_t t = 0; t < kNumGestures; ++t) {
    os << model << ',' << class_name(t);
    for (std::size_t p = 0; p < kNumGestures; ++p) os << ',' << m.counts[t][p];
    os << '\n';
  }
}

void write_curve_rows(std::ostream& os, const char* model, const TrainReport& r) {
  for (const auto& e : r.epochs) {
    os << model << ',' << e.epoch << ',' << format_value(e.train_loss) << ','
       << format_value(e.val_loss) << ',' << format_value(e.val_accuracy) << '\n';
  }
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_field(const std::string& s, const std::string& where) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IOError(where + ": not a number: '" + s + "'");
  }
}

}  // namespace

std::string triptych_filename(const SampleRecord& s) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "test_%05zu_%s.pgm", s.index, std::string(to_string(s.label)).c_str());
  return buf;
}

std::vector<std::string> export_report(const MetricsReport& r, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "triptychs", ec);
  if (ec) throw IOError("cannot create '" + dir + "/triptychs': " + ec.message());
  std::vector<std::string> written;

  {
    const fs::path p = fs::path(dir) / "metrics.csv";
    auto os = open_out(p);
    write_comments(os, r.provenance);
    os << "metric,value\n";
    const std::pair<const char*, double> rows[] = {
        {"accuracy_denoised", r.accuracy},
        {"accuracy_baseline", r.baseline_accuracy},
        {"accuracy_gain", r.accuracy - r.baseline_accuracy},
        {"psnr_noisy_db", r.mean_psnr_noisy_db},
        {"psnr_denoised_db", r.mean_psnr_denoised_db},
        {"psnr_gain_db", r.mean_psnr_denoised_db - r.mean_psnr_noisy_db},
        {"residual_noise_noisy", r.residual_noisy},
        {"residual_noise_denoised", r.residual_denoised},
        {"residual_epsilon", r.residual_epsilon},
        {"train_samples", static_cast<double>(r.train_count)},
        {"validation_samples", static_cast<double>(r.validation_count)},
        {"test_samples", static_cast<double>(r.test_count)},
        {"denoiser_best_epoch", static_cast<double>(r.denoiser_report.best_epoch)},
        {"classifier_best_epoch", static_cast<double>(r.classifier_report.best_epoch)},
        {"baseline_best_epoch", static_cast<double>(r.baseline_report.best_epoch)},
    };
    for (const auto& [k, v] : rows) os << k << ',' << format_value(v) << '\n';
    finish(os, p);
    written.push_back(p.string());
  }
  {
    const fs::path p = fs::path(dir) / "confusion.csv";
    auto os = open_out(p);
    write_comments(os, r.provenance);
    os << "# rows: true class, columns: predicted class\n";
    os << "model,true";
    for (std::size_t c = 0; c < kNumGestures; ++c) os << ',' << class_name(c);
    os << '\n';
    write_confusion(os, "denoised", r.confusion);
    write_confusion(os, "baseline", r.baseline_confusion);
    finish(os, p);
    written.push_back(p.string());
  }
  {
    const fs::path p = fs::path(dir) / "curves.csv";
    auto os = open_out(p);
    write_comments(os, r.provenance);
    os << "model,epoch,train_loss,val_loss,val_accuracy\n";
    write_curve_rows(os, "denoiser", r.denoiser_report);
    write_curve_rows(os, "classifier", r.classifier_report);
    write_curve_rows(os, "baseline", r.baseline_report);
    finish(os, p);
    written.push_back(p.string());
  }
  {
    const fs::path p = fs::path(dir) / "timing.csv";
    auto os = open_out(p);
    os << "stage,seconds\n";
    for (const auto& [k, v] : r.runtimes_s) os << k << ',' << format_value(v) << '\n';
    finish(os, p);
    written.push_back(p.string());
  }
  for (const auto& s : r.samples) {
    const fs::path p = fs::path(dir) / "triptychs" / triptych_filename(s);
    const ImageGrid panels[] = {s.clean, s.noisy, s.denoised};
    write_pgm_strip(p.string(), panels);
    written.push_back(p.string());
  }
  return written;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IOError("cannot open '" + path + "'");
  CsvTable t;
  bool have_header = false;
  for (std::string line; std::getline(is, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      t.comments.push_back(line.size() > 2 ? line.substr(2) : std::string());
      continue;
    }
    auto fields = split_fields(line);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
    } else {
      if (fields.size() != t.header.size()) {
        throw IOError(path + ": row has " + std::to_string(fields.size()) + " fields, header has " +
                      std::to_string(t.header.size()));
      }
      t.rows.push_back(std::move(fields));
    }
  }
  if (!have_header) throw IOError(path + ": no header row");
  return t;
}

std::map<std::string, double> read_metrics_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  if (t.header != std::vector<std::string>{"metric", "value"}) {
    throw IOError(path + ": expected header 'metric,value'");
  }
  std::map<std::string, double> out;
  for (const auto& row : t.rows) out[row[0]] = parse_field(row[1], path);
  return out;
}

void write_train_report(const std::string& path, const TrainReport& r,
                        const std::vector<std::string>& provenance) {
  auto os = open_out(path);
  write_comments(os, provenance);
  os << "# train_seed=" << r.seed << '\n';
  os << "# best_epoch=" << r.best_epoch << '\n';
  os << "# weights=" << r.weights_path << '\n';
  os << "epoch,train_loss,val_loss,val_accuracy\n";
  for (const auto& e : r.epochs) {
    os << e.epoch << ',' << format_value(e.train_loss) << ',' << format_value(e.val_loss) << ','
       << format_value(e.val_accuracy) << '\n';
  }
  finish(os, path);
}

TrainReport read_train_report(const std::string& path) {
  const CsvTable t = read_csv(path);
  if (t.header != std::vector<std::string>{"epoch", "train_loss", "val_loss", "val_accuracy"}) {
    throw IOError(path + ": unexpected curve header");
  }
  TrainReport r;
  for (const auto& c : t.comments) {
    if (c.rfind("train_seed=", 0) == 0) r.seed = std::stoull(c.substr(11));
    else if (c.rfind("best_epoch=", 0) == 0) r.best_epoch = std::stoull(c.substr(11));
    else if (c.rfind("weights=", 0) == 0) r.weights_path = c.substr(8);
  }
  for (const auto& row : t.rows) {
    r.epochs.push_back({static_cast<std::size_t>(parse_field(row[0], path)), parse_field(row[1], path),
                        parse_field(row[2], path), parse_field(row[3], path)});
  }
  return r;
}

}  // namespace mmgesture
