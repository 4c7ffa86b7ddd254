#include "mmgesture/nn/network.hpp"

#include <cmath>
#include <sstream>

#include "mmgesture/errors.hpp"
#include "mmgesture/random.hpp"

namespace mmgesture::nn {

template <typename T>
Network<T>::Network(Shape input_shape) {
  nodes_.push_back(Node{"input", nullptr, {}, {}, {}});
  shapes_.push_back(std::move(input_shape));
}

template <typename T>
NodeId Network<T>::add(const LayerSpec& spec, std::vector<NodeId> inputs, std::string name) {
  return add(make_layer<T>(spec), std::move(inputs), std::move(name));
}

template <typename T>
NodeId Network<T>::add(std::unique_ptr<Layer<T>> layer, std::vector<NodeId> inputs,
                       std::string name) {
  const NodeId id = nodes_.size();
  if (name.empty()) name = std::string(to_string(layer->kind())) + std::to_string(id);
  if (inputs.size() != layer->arity()) {
    throw InvalidArgument(name + ": expected " + std::to_string(layer->arity()) + " inputs");
  }
  std::vector<Shape> in_shapes;
  for (NodeId i : inputs) {
    if (i >= id) throw InvalidArgument(name + ": input node " + std::to_string(i) + " does not exist");
    in_shapes.push_back(shapes_[i]);
  }
  Shape out;
  try {
    out = layer->output_shape(in_shapes);
  } catch (const ShapeError& e) {
    throw ShapeError("layer '" + name + "': " + e.what());
  }

  Node node{name, std::move(layer), std::move(inputs), {}, {}};
  node.param_specs = node.layer->parameters();
  for (const auto& ps : node.param_specs) {
    node.params.push_back(weights_.add(name + "." + ps.suffix, ps.shape, ps.trainable));
  }
  nodes_.push_back(std::move(node));
  shapes_.push_back(std::move(out));
  tape_valid_ = false;
  return id;
}

template <typename T>
NodeId Network<T>::then(const LayerSpec& spec, std::string name) {
  return add(spec, {nodes_.size() - 1}, std::move(name));
}

template <typename T>
void Network<T>::initialize(std::uint64_t seed) {
  std::uint64_t stream = 0;
  for (auto& node : nodes_) {
    for (std::size_t j = 0; j < node.params.size(); ++j) {
      const ParamSpec& ps = node.param_specs[j];
      auto& tensor = weights_.entry(node.params[j]).tensor;
      Rng rng = make_rng(seed, stream++);
      switch (ps.init) {
        case Init::Zeros: std::fill(tensor.values.begin(), tensor.values.end(), T{0}); break;
        case Init::Ones: std::fill(tensor.values.begin(), tensor.values.end(), T{1}); break;
        case Init::HeUniform: {
          const double limit = std::sqrt(6.0 / static_cast<double>(ps.fan_in));
          for (auto& v : tensor.values) v = static_cast<T>(uniform(rng, -limit, limit));
          break;
        }
      }
    }
  }
}

template <typename T>
const Tensor<T>& Network<T>::forward(const Tensor<T>& input, bool training) {
  if (input.shape != shapes_.front()) {
    throw ShapeError("network input: expected " + shape_string(shapes_.front()) + ", got " +
                     shape_string(input.shape));
  }
  activations_.resize(nodes_.size());
  activations_[0].shape = input.shape;
  activations_[0].values = input.values;
  std::vector<const Tensor<T>*> ins;
  std::vector<Tensor<T>*> ps;
  for (NodeId id = 1; id < nodes_.size(); ++id) {
    Node& node = nodes_[id];
    ins.clear();
    for (NodeId i : node.inputs) ins.push_back(&activations_[i]);
    ps.clear();
    for (std::size_t p : node.params) ps.push_back(&weights_.entry(p).tensor);
    Tensor<T>& out = activations_[id];
    if (out.shape != shapes_[id]) out = Tensor<T>(shapes_[id]);
    node.layer->forward(ForwardArgs<T>{ins, ps, out, training});
  }
  tape_valid_ = true;
  return activations_.back();
}

template <typename T>
void Network<T>::backward(const Tensor<T>& grad_output) {
  if (!tape_valid_) throw StateError("backward called without a preceding forward");
  if (grad_output.shape != shapes_.back()) {
    throw ShapeError("backward: gradient shape " + shape_string(grad_output.shape) +
                     " does not match output " + shape_string(shapes_.back()));
  }
  grads_.resize(nodes_.size());
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (grads_[id].shape != shapes_[id]) {
      grads_[id] = Tensor<T>(shapes_[id]);
    } else {
      std::fill(grads_[id].values.begin(), grads_[id].values.end(), T{});
    }
  }
  grads_.back().values = grad_output.values;
  for (auto& e : weights_.entries()) {
    if (e.trainable) e.tensor.ensure_grad();
  }

  std::vector<const Tensor<T>*> ins;
  std::vector<Tensor<T>*> ps;
  std::vector<Tensor<T>*> gins;
  for (NodeId id = nodes_.size() - 1; id >= 1; --id) {
    Node& node = nodes_[id];
    ins.clear();
    gins.clear();
    for (NodeId i : node.inputs) {
      ins.push_back(&activations_[i]);
      gins.push_back(&grads_[i]);
    }
    ps.clear();
    for (std::size_t p : node.params) ps.push_back(&weights_.entry(p).tensor);
    node.layer->backward(BackwardArgs<T>{ins, ps, activations_[id], grads_[id], gins});
  }
  weights_.mark_gradients_ready();
  tape_valid_ = false;
}

template <typename T>
std::string Network<T>::describe() const {
  std::ostringstream os;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    os << nodes_[id].name << ' '
       << (nodes_[id].layer ? std::string(to_string(nodes_[id].layer->kind())) : "input") << ' '
       << shape_string(shapes_[id]);
    if (!nodes_[id].inputs.empty()) {
      os << " <-";
      for (NodeId i : nodes_[id].inputs) os << ' ' << nodes_[i].name;
    }
    os << '\n';
  }
  return os.str();
}

template class Network<float>;
template class Network<double>;

}  // namespace mmgesture::nn
