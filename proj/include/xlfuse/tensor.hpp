// Copyright (c) 2026 The xlfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "xlfuse/graph.hpp"

namespace xlfuse {

/// Row-major [channel][row][column], 32-bit float.
struct Tensor {
    TensorShape shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(TensorShape s) : shape(s), data(static_cast<size_t>(s.elements()), 0.0f) {}

    float& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * shape.height + y) * shape.width + x];
    }
    float at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * shape.height + y) * shape.width + x];
    }
};

struct LayerWeights {
    std::vector<float> filter; // [out_ch][in_ch/group][kh][kw]
    std::vector<float> bias;   // [out_ch], empty when has_bias is false
};

struct WeightSet {
    std::map<std::string, LayerWeights> by_layer;
};

/// Deterministic stream of floats uniform in [-0.5, 0.5). The generator
/// and the float mapping are fixed here so streams are identical across
/// platforms and standard libraries.
class SeededStream {
public:
    explicit SeededStream(std::uint64_t seed);
    float next();

private:
    std::uint64_t state_;
};

/// Seeded input tensors (graph-input order) and per-conv-layer weights
/// (layer order, filter then bias).
std::map<std::string, Tensor> seeded_inputs(const Graph& g, std::uint64_t seed);
WeightSet seeded_weights(const Graph& g, std::uint64_t seed);

/// Weight file: little-endian float32 stream, tensors in manifest order
/// (per conv layer: filter then bias). The manifest is written next to
/// the stream as `<path>.manifest`.
void save_weights(const std::string& path, const Graph& g, const WeightSet& w);
WeightSet load_weights(const std::string& path, const Graph& g);

} // namespace xlfuse
