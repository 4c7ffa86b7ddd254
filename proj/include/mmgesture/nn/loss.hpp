#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mmgesture/nn/tensor.hpp"

namespace mmgesture::nn {

template <typename T>
struct LossResult {
  T loss{};
  Tensor<T> grad;  // dLoss/dInput, same shape as the prediction
};

// Mean squared error averaged over all elements.
template <typename T>
LossResult<T> mse_loss(const Tensor<T>& prediction, const Tensor<T>& target);

template <typename T>
struct SoftmaxCrossEntropy {
  T loss{};
  std::vector<T> probabilities;
  Tensor<T> grad;  // probabilities - onehot(label)
};

// Max-subtracted softmax; loss = -log p[label]. Label out of range throws InvalidArgument.
template <typename T>
SoftmaxCrossEntropy<T> softmax_cross_entropy(const Tensor<T>& logits, std::size_t label);

template <typename T>
std::vector<T> softmax(std::span<const T> logits);

// Index of the largest value; ties go to the lowest index.
template <typename T>
std::size_t argmax(std::span<const T> values);

}  // namespace mmgesture::nn
