#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmgesture/nn/network.hpp"

namespace mmgesture::nn {

struct GradCheckOptions {
  double step = 1e-5;
  // 0 checks every element; otherwise a seeded sample of this many per tensor.
  std::size_t max_checks_per_tensor = 0;
  std::uint64_t seed = 1;
  bool check_input = true;
  // Skip elements whose +/- step switches any ReLU: the difference quotient
  // straddles a kink there and says nothing about the derivative.
  bool skip_kinks = true;
};

struct GradCheckEntry {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;
  bool passed = false;

  double max_error() const;
  std::size_t checked() const;
  std::size_t skipped() const;
  std::string summary() const;
};

// Compares backward() against central differences of the scalar probe loss
// L = sum_i r_i * y_i (r fixed by the seed). Relative error per element is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-6). Runs in inference
// mode so running estimates stay frozen.
GradCheckReport gradient_check(Network<double>& net, const Tensor<double>& input,
                               double tolerance, const GradCheckOptions& options = {});

}  // namespace mmgesture::nn
