#pragma once

#include "mmgesture/nn/tensor.hpp"

namespace mmgesture::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam over trainable parameters. Throws StateError when no
// gradients have been accumulated since the last zero_grad().
template <typename T>
void adam_step(ModelWeights<T>& weights, const AdamConfig& config);

}  // namespace mmgesture::nn
