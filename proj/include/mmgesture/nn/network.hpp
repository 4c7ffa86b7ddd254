#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mmgesture/nn/layers.hpp"
#include "mmgesture/nn/tensor.hpp"

namespace mmgesture::nn {

using NodeId = std::size_t;

// Static feed-forward graph evaluated in insertion order. Node 0 is the input.
// forward() records every activation; backward() replays the tape in reverse
// and accumulates parameter gradients. A tape is consumed by one backward().
template <typename T>
class Network {
 public:
  explicit Network(Shape input_shape);

  NodeId input() const noexcept { return 0; }
  NodeId add(const LayerSpec& spec, std::vector<NodeId> inputs, std::string name = {});
  NodeId add(std::unique_ptr<Layer<T>> layer, std::vector<NodeId> inputs, std::string name = {});
  // Convenience for a layer fed by the most recently added node.
  NodeId then(const LayerSpec& spec, std::string name = {});

  // He-uniform weights, zero biases, unit scales. Deterministic per seed.
  void initialize(std::uint64_t seed);

  // Throws ShapeError naming the input when `input` does not match.
  const Tensor<T>& forward(const Tensor<T>& input, bool training = false);
  // Throws StateError if there is no tape from a preceding forward().
  void backward(const Tensor<T>& grad_output);

  const Tensor<T>& output() const { return activations_.back(); }
  const Tensor<T>& activation(NodeId id) const { return activations_.at(id); }
  // Gradient w.r.t. the network input from the last backward().
  const Tensor<T>& input_grad() const { return grads_.front(); }

  const Shape& input_shape() const noexcept { return shapes_.front(); }
  const Shape& output_shape() const noexcept { return shapes_.back(); }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  const std::string& node_name(NodeId id) const { return nodes_.at(id).name; }
  LayerKind node_kind(NodeId id) const { return nodes_.at(id).layer->kind(); }

  ModelWeights<T>& weights() noexcept { return weights_; }
  const ModelWeights<T>& weights() const noexcept { return weights_; }

  // One line per node: name, kind, output shape.
  std::string describe() const;

 private:
  struct Node {
    std::string name;
    std::unique_ptr<Layer<T>> layer;  // null for the input node
    std::vector<NodeId> inputs;
    std::vector<std::size_t> params;  // indices into weights_
    std::vector<ParamSpec> param_specs;
  };

  std::vector<Node> nodes_;
  std::vector<Shape> shapes_;
  std::vector<Tensor<T>> activations_;
  std::vector<Tensor<T>> grads_;
  ModelWeights<T> weights_;
  bool tape_valid_ = false;
};

}  // namespace mmgesture::nn
