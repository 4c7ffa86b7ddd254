#include "mmgesture/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>

#include "mmgesture/random.hpp"

namespace mmgesture::nn {

double GradCheckReport::max_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.max_relative_error);
  return m;
}

std::size_t GradCheckReport::checked() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.checked;
  return n;
}

std::size_t GradCheckReport::skipped() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.skipped;
  return n;
}

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << (passed ? "PASS" : "FAIL") << " (tolerance " << tolerance << ")\n";
  for (const auto& e : entries) {
    os << "  " << e.name << ": max rel err " << e.max_relative_error << " over " << e.checked
       << " elements";
    if (e.skipped > 0) os << " (" << e.skipped << " skipped at ReLU kinks)";
    os << '\n';
  }
  return os.str();
}

namespace {

double probe_loss(const Tensor<double>& y, const std::vector<double>& r) {
  double l = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) l += r[i] * y.values[i];
  return l;
}

std::vector<std::size_t> pick_indices(std::size_t n, std::size_t limit, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (limit == 0 || limit >= n) return idx;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace

GradCheckReport gradient_check(Network<double>& net, const Tensor<double>& input,
                               double tolerance, const GradCheckOptions& options) {
  Rng rng = make_rng(options.seed);
  const Tensor<double>& y0 = net.forward(input, false);
  std::vector<double> r(y0.size());
  for (auto& v : r) v = uniform(rng, -1.0, 1.0);
  Tensor<double> grad_out(y0.shape, r);

  net.weights().zero_grad();
  net.backward(grad_out);
  const Tensor<double> input_grad = net.input_grad();

  std::vector<NodeId> relus;
  for (NodeId id = 1; id < net.node_count(); ++id) {
    if (net.node_kind(id) == LayerKind::ReLU) relus.push_back(id);
  }
  auto relu_pattern = [&] {
    std::vector<bool> p;
    for (NodeId id : relus) {
      for (double v : net.activation(id).values) p.push_back(v > 0.0);
    }
    return p;
  };

  const double h = options.step;
  GradCheckReport report;
  report.tolerance = tolerance;
  Tensor<double> x = input;

  // Central difference on one slot. Returns nullopt when a ReLU switches
  // between the two probes: the loss has a kink inside [-h, h] there.
  auto numeric = [&](double& slot) -> std::optional<double> {
    const double saved = slot;
    slot = saved + h;
    const double lp = probe_loss(net.forward(x, false), r);
    const auto pattern_p = options.skip_kinks ? relu_pattern() : std::vector<bool>{};
    slot = saved - h;
    const double lm = probe_loss(net.forward(x, false), r);
    slot = saved;
    if (options.skip_kinks && relu_pattern() != pattern_p) return std::nullopt;
    return (lp - lm) / (2.0 * h);
  };
  auto check = [&](GradCheckEntry& entry, double& slot, double analytic) {
    const auto n = numeric(slot);
    if (!n) {
      ++entry.skipped;
      return;
    }
    entry.max_relative_error = std::max(entry.max_relative_error, relative_error(analytic, *n));
    ++entry.checked;
  };

  for (auto& e : net.weights().entries()) {
    if (!e.trainable) continue;
    GradCheckEntry entry{e.name, 0.0, 0, 0};
    for (std::size_t i : pick_indices(e.tensor.size(), options.max_checks_per_tensor, rng)) {
      check(entry, e.tensor.values[i], e.tensor.grad[i]);
    }
    report.entries.push_back(entry);
  }

  if (options.check_input) {
    GradCheckEntry entry{"input", 0.0, 0, 0};
    for (std::size_t i : pick_indices(x.size(), options.max_checks_per_tensor, rng)) {
      check(entry, x.values[i], input_grad.values[i]);
    }
    report.entries.push_back(entry);
  }

  report.passed = std::all_of(report.entries.begin(), report.entries.end(),
                              [&](const GradCheckEntry& e) { return e.max_relative_error < tolerance; });
  return report;
}

}  // namespace mmgesture::nn
