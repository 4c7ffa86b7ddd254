#include "mmgesture/nn/optim.hpp"

#include <cmath>

#include "mmgesture/errors.hpp"

namespace mmgesture::nn {

template <typename T>
void adam_step(ModelWeights<T>& weights, const AdamConfig& config) {
  if (!weights.gradients_ready()) throw StateError("adam_step: no gradients populated");
  weights.advance_step();
  const double t = static_cast<double>(weights.step());
  const T lr_t = static_cast<T>(config.learning_rate);
  const T b1 = static_cast<T>(config.beta1);
  const T b2 = static_cast<T>(config.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(config.beta1, t));
  const T c2 = static_cast<T>(1.0 - std::pow(config.beta2, t));
  const T eps = static_cast<T>(config.epsilon);
  auto& ms = weights.first_moments();
  auto& vs = weights.second_moments();
  for (std::size_t k = 0; k < weights.size(); ++k) {
    auto& e = weights.entry(k);
    if (!e.trainable) continue;
    if (!e.tensor.has_grad()) throw StateError("adam_step: missing gradient for '" + e.name + "'");
    auto& m = ms[k];
    auto& v = vs[k];
    auto& w = e.tensor.values;
    const auto& g = e.tensor.grad;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (T{1} - b1) * g[i];
      v[i] = b2 * v[i] + (T{1} - b2) * g[i] * g[i];
      const T m_hat = m[i] / c1;
      const T v_hat = v[i] / c2;
      w[i] -= lr_t * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

template void adam_step(ModelWeights<float>&, const AdamConfig&);
template void adam_step(ModelWeights<double>&, const AdamConfig&);

}  // namespace mmgesture::nn
