#pragma once

#include <map>
#include <string>
#include <vector>

#include "mmgesture/experiment.hpp"

namespace mmgesture {

// Six significant digits ("%.6g"); NaN becomes an empty field.
std::string format_value(double v);

// Writes metrics.csv, confusion.csv, curves.csv, timing.csv and one PGM
// triptych (clean | noisy | denoised) per test sample under triptychs/.
// Returns the written paths in a stable order. Wall-clock runtimes go to
// timing.csv only, so metrics.csv depends on the configuration alone.
std::vector<std::string> export_report(const MetricsReport& report, const std::string& dir);

std::string triptych_filename(const SampleRecord& sample);

struct CsvTable {
  std::vector<std::string> comments;  // '#' lines without the marker
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path);

// metric -> value from metrics.csv.
std::map<std::string, double> read_metrics_csv(const std::string& path);

// Per-epoch curve of one model (epoch, train_loss, val_loss, val_accuracy).
void write_train_report(const std::string& path, const TrainReport& report,
                        const std::vector<std::string>& provenance);
TrainReport read_train_report(const std::string& path);

}  // namespace mmgesture
