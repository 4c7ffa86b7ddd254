#include "mmgesture/nn/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "mmgesture/errors.hpp"

namespace mmgesture::nn {

std::size_t shape_size(const Shape& shape) noexcept {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename T>
Tensor<T>::Tensor(Shape s, std::vector<T> v) : shape(std::move(s)), values(std::move(v)) {
  if (values.size() != shape_size(shape)) {
    throw ShapeError("Tensor: " + std::to_string(values.size()) + " values for shape " +
                     shape_string(shape));
  }
}

template <typename T>
bool Tensor<T>::all_finite() const {
  auto finite = [](T x) { return std::isfinite(x); };
  return std::all_of(values.begin(), values.end(), finite) &&
         std::all_of(grad.begin(), grad.end(), finite);
}

template <typename T>
std::size_t ModelWeights<T>::add(std::string name, Shape shape, bool trainable, T fill) {
  if (find(name) != nullptr) throw InvalidArgument("ModelWeights: duplicate parameter '" + name + "'");
  const std::size_t n = shape_size(shape);
  entries_.push_back({std::move(name), Tensor<T>(std::move(shape), fill), trainable});
  m_.emplace_back(n, T{});
  v_.emplace_back(n, T{});
  return entries_.size() - 1;
}

template <typename T>
Tensor<T>* ModelWeights<T>::find(const std::string& name) {
  for (auto& e : entries_) {
    if (e.name == name) return &e.tensor;
  }
  return nullptr;
}

template <typename T>
const Tensor<T>* ModelWeights<T>::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return &e.tensor;
  }
  return nullptr;
}

template <typename T>
Tensor<T>& ModelWeights<T>::at(const std::string& name) {
  if (auto* t = find(name)) return *t;
  throw InvalidArgument("ModelWeights: no parameter named '" + name + "'");
}

template <typename T>
const Tensor<T>& ModelWeights<T>::at(const std::string& name) const {
  if (const auto* t = find(name)) return *t;
  throw InvalidArgument("ModelWeights: no parameter named '" + name + "'");
}

template <typename T>
void ModelWeights<T>::zero_grad() {
  for (auto& e : entries_) {
    if (e.trainable) e.tensor.zero_grad();
  }
  gradients_ready_ = false;
}

template <typename T>
std::size_t ModelWeights<T>::trainable_count() const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    if (e.trainable) n += e.tensor.size();
  }
  return n;
}

template struct Tensor<float>;
template struct Tensor<double>;
template class ModelWeights<float>;
template class ModelWeights<double>;

}  // namespace mmgesture::nn
