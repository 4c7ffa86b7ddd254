#include "mmgesture/nn/serialize.hpp"

#include <fstream>
#include <set>

#include "mmgesture/binary_io.hpp"
#include "mmgesture/errors.hpp"

namespace mmgesture::nn {

namespace {

template <typename T>
constexpr std::uint8_t dtype_tag() {
  return sizeof(T) == 4 ? 0 : 1;
}

}  // namespace

template <typename T>
void save_weights(const std::string& path, const ModelWeights<T>& weights) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IOError("cannot open for writing: " + path);
  binio::write_magic(os, "NNW1");
  binio::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(weights.size()));
  for (const auto& e : weights.entries()) {
    binio::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    binio::write_le<std::uint8_t>(os, dtype_tag<T>());
    binio::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(e.tensor.shape.size()));
    for (auto d : e.tensor.shape) binio::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
    for (T v : e.tensor.values) binio::write_le<T>(os, v);
  }
  if (!os) throw IOError("write failed: " + path);
}

template <typename T>
void load_weights(const std::string& path, ModelWeights<T>& weights) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IOError("cannot open: " + path);
  binio::expect_magic(is, "NNW1", path);
  const auto count = binio::read_le<std::uint32_t>(is);
  std::set<std::string> seen;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = binio::read_le<std::uint32_t>(is);
    if (len > 4096) throw IOError(path + ": implausible tensor name length");
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw IOError(path + ": truncated name");
    const auto dtype = binio::read_le<std::uint8_t>(is);
    if (dtype > 1) throw IOError(path + ": unknown dtype tag for '" + name + "'");
    const auto rank = binio::read_le<std::uint32_t>(is);
    Shape shape(rank);
    for (auto& d : shape) d = binio::read_le<std::uint32_t>(is);

    Tensor<T>* target = weights.find(name);
    if (target == nullptr) throw ShapeError(path + ": model has no parameter '" + name + "'");
    if (target->shape != shape) {
      throw ShapeError(path + ": parameter '" + name + "' stored as " + shape_string(shape) +
                       ", model expects " + shape_string(target->shape));
    }
    for (auto& v : target->values) {
      v = dtype == 0 ? static_cast<T>(binio::read_le<float>(is))
                     : static_cast<T>(binio::read_le<double>(is));
    }
    seen.insert(name);
  }
  for (const auto& e : weights.entries()) {
    if (!seen.count(e.name)) throw ShapeError(path + ": missing parameter '" + e.name + "'");
  }
}

template void save_weights(const std::string&, const ModelWeights<float>&);
template void save_weights(const std::string&, const ModelWeights<double>&);
template void load_weights(const std::string&, ModelWeights<float>&);
template void load_weights(const std::string&, ModelWeights<double>&);

}  // namespace mmgesture::nn
