#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmgesture/nn/tensor.hpp"

namespace mmgesture::nn {

enum class LayerKind {
  Conv2D,
  Upsample2x,  // nearest neighbour
  MaxPool2x2,
  ReLU,
  Sigmoid,
  BatchChannelScale,
  Concat,  // along channels
  Dense,
  GlobalAvgPool,
  ChannelGate,  // [C,H,W] * [C], used by squeeze-excite
};

std::string_view to_string(LayerKind kind);

// Hyperparameters of one layer. Feature maps are [C, H, W] (one sample).
struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t groups = 1;
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  double momentum = 0.01;  // BatchChannelScale running-estimate update rate
  double epsilon = 1e-5;

  // "Same" zero padding (kernel/2) unless overridden.
  static LayerSpec conv(std::size_t in, std::size_t out, std::size_t kernel = 3,
                        std::size_t stride = 1, std::size_t groups = 1);
  static LayerSpec dense(std::size_t in, std::size_t out);
  static LayerSpec batch_channel_scale(std::size_t channels);
  static LayerSpec of(LayerKind kind);

  // Throws InvalidArgument when inconsistent with `kind`.
  void validate() const;
};

enum class Init { Zeros, Ones, HeUniform };

struct ParamSpec {
  std::string suffix;
  Shape shape;
  Init init = Init::Zeros;
  std::size_t fan_in = 0;
  bool trainable = true;
};

template <typename T>
struct ForwardArgs {
  std::span<const Tensor<T>* const> inputs;
  std::span<Tensor<T>* const> params;
  Tensor<T>& output;
  bool training;
};

// Gradients are accumulated (+=) into grad_inputs[i] (sized like inputs[i])
// and into params[j]->grad.
template <typename T>
struct BackwardArgs {
  std::span<const Tensor<T>* const> inputs;
  std::span<Tensor<T>* const> params;
  const Tensor<T>& output;
  const Tensor<T>& grad_output;
  std::span<Tensor<T>* const> grad_inputs;
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  virtual std::size_t arity() const { return 1; }
  virtual std::vector<ParamSpec> parameters() const { return {}; }
  // Throws ShapeError when the inputs are not acceptable.
  virtual Shape output_shape(std::span<const Shape> inputs) const = 0;
  virtual void forward(const ForwardArgs<T>& args) = 0;
  virtual void backward(const BackwardArgs<T>& args) = 0;
};

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec);

// Output extent of a strided window: floor((n + 2p - k) / s) + 1.
std::size_t conv_output_extent(std::size_t n, std::size_t kernel, std::size_t stride,
                               std::size_t padding);

}  // namespace mmgesture::nn
