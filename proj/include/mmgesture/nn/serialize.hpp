#pragma once

#include <string>

#include "mmgesture/nn/tensor.hpp"

namespace mmgesture::nn {

// NNW1 little-endian layout:
//   "NNW1", u32 count, then per tensor:
//   u32 name_len, name bytes, u8 dtype (0 = f32, 1 = f64), u32 rank, u32 dims[rank], raw values.
template <typename T>
void save_weights(const std::string& path, const ModelWeights<T>& weights);

// Fills `weights` (already laid out by a model spec) from disk. Every stored
// tensor must exist with an identical shape and every model tensor must be present.
template <typename T>
void load_weights(const std::string& path, ModelWeights<T>& weights);

}  // namespace mmgesture::nn
