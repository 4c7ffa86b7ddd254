#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mmgesture/errors.hpp"

namespace mmgesture::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

// Dense row-major tensor with an optional gradient buffer of the same shape.
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> values;
  std::vector<T> grad;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T{}) : shape(std::move(s)), values(shape_size(shape), fill) {}
  Tensor(Shape s, std::vector<T> v);

  std::size_t size() const noexcept { return values.size(); }
  bool has_grad() const noexcept { return !grad.empty(); }
  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), T{});
  }
  void zero_grad() { grad.assign(values.size(), T{}); }
  bool all_finite() const;

  T& operator[](std::size_t i) { return values[i]; }
  const T& operator[](std::size_t i) const { return values[i]; }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.values.assign(values.begin(), values.end());
    return out;
  }
};

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
  bool trainable = true;
};

// Named parameters plus Adam moments. Names are unique; shapes are fixed once added.
template <typename T>
class ModelWeights {
 public:
  std::size_t add(std::string name, Shape shape, bool trainable = true, T fill = T{});

  std::size_t size() const noexcept { return entries_.size(); }
  NamedTensor<T>& entry(std::size_t i) { return entries_.at(i); }
  const NamedTensor<T>& entry(std::size_t i) const { return entries_.at(i); }
  std::span<NamedTensor<T>> entries() noexcept { return entries_; }
  std::span<const NamedTensor<T>> entries() const noexcept { return entries_; }

  // nullptr when absent.
  Tensor<T>* find(const std::string& name);
  const Tensor<T>* find(const std::string& name) const;
  Tensor<T>& at(const std::string& name);
  const Tensor<T>& at(const std::string& name) const;

  void zero_grad();
  std::size_t trainable_count() const noexcept;

  // Set by a backward pass, cleared by zero_grad.
  bool gradients_ready() const noexcept { return gradients_ready_; }
  void mark_gradients_ready() noexcept { gradients_ready_ = true; }

  std::uint64_t step() const noexcept { return step_; }
  std::vector<std::vector<T>>& first_moments() { return m_; }
  std::vector<std::vector<T>>& second_moments() { return v_; }
  void advance_step() noexcept { ++step_; }

  // Copies parameter values (not moments) from weights of another precision.
  template <typename U>
  void assign_values_from(const ModelWeights<U>& other);

 private:
  std::vector<NamedTensor<T>> entries_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  std::uint64_t step_ = 0;
  bool gradients_ready_ = false;
};

template <typename T>
template <typename U>
void ModelWeights<T>::assign_values_from(const ModelWeights<U>& other) {
  for (auto& e : entries_) {
    const Tensor<U>* src = other.find(e.name);
    if (src == nullptr || src->shape != e.tensor.shape) {
      throw ShapeError("assign_values_from: missing or mismatched parameter '" + e.name + "'");
    }
    e.tensor.values.assign(src->values.begin(), src->values.end());
  }
}

}  // namespace mmgesture::nn
