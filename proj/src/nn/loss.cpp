#include "mmgesture/nn/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mmgesture/errors.hpp"

namespace mmgesture::nn {

template <typename T>
LossResult<T> mse_loss(const Tensor<T>& prediction, const Tensor<T>& target) {
  if (prediction.shape != target.shape) {
    throw ShapeError("mse_loss: prediction " + shape_string(prediction.shape) + " vs target " +
                     shape_string(target.shape));
  }
  LossResult<T> r;
  r.grad = Tensor<T>(prediction.shape);
  const T n = static_cast<T>(prediction.size());
  T sum{};
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const T d = prediction.values[i] - target.values[i];
    sum += d * d;
    r.grad.values[i] = T{2} * d / n;
  }
  r.loss = sum / n;
  return r;
}

template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
  if (logits.empty()) throw InvalidArgument("softmax: empty logits");
  const T mx = *std::max_element(logits.begin(), logits.end());
  std::vector<T> p(logits.size());
  T sum{};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

template <typename T>
SoftmaxCrossEntropy<T> softmax_cross_entropy(const Tensor<T>& logits, std::size_t label) {
  if (label >= logits.size()) {
    throw InvalidArgument("softmax_cross_entropy: label " + std::to_string(label) +
                          " out of range for " + std::to_string(logits.size()) + " classes");
  }
  for (T v : logits.values) {
    if (!std::isfinite(v)) throw InvalidArgument("softmax_cross_entropy: non-finite logit");
  }
  SoftmaxCrossEntropy<T> r;
  r.probabilities = softmax<T>(logits.values);
  // log-sum-exp form keeps the loss exact when p[label] underflows.
  const T mx = *std::max_element(logits.values.begin(), logits.values.end());
  T sum{};
  for (T v : logits.values) sum += std::exp(v - mx);
  r.loss = std::log(sum) - (logits.values[label] - mx);
  r.grad = Tensor<T>(logits.shape);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    r.grad.values[i] = r.probabilities[i] - (i == label ? T{1} : T{0});
  }
  return r;
}

template <typename T>
std::size_t argmax(std::span<const T> values) {
  if (values.empty()) throw InvalidArgument("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

template LossResult<float> mse_loss(const Tensor<float>&, const Tensor<float>&);
template LossResult<double> mse_loss(const Tensor<double>&, const Tensor<double>&);
template SoftmaxCrossEntropy<float> softmax_cross_entropy(const Tensor<float>&, std::size_t);
template SoftmaxCrossEntropy<double> softmax_cross_entropy(const Tensor<double>&, std::size_t);
template std::vector<float> softmax(std::span<const float>);
template std::vector<double> softmax(std::span<const double>);
template std::size_t argmax(std::span<const float>);
template std::size_t argmax(std::span<const double>);

}  // namespace mmgesture::nn
