// Copyright (c) 2026 The xlfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace xlfuse {

/// [channels, height, width]; batch is fixed at 1 throughout.
struct TensorShape {
    int channels = 0;
    int height = 0;
    int width = 0;

    std::int64_t elements() const {
        return static_cast<std::int64_t>(channels) * height * width;
    }
    bool operator==(const TensorShape&) const = default;
};

enum class Activation { none, relu };

struct ConvParams {
    int out_channels = 0;
    int in_channels = 0; // derived from the producer during shape inference
    int kernel_h = 1;
    int kernel_w = 1;
    int pad = 0;
    int stride = 1;
    int group = 1;
    bool has_bias = true;
    Activation activation = Activation::none;

    std::int64_t weight_count() const {
        return static_cast<std::int64_t>(out_channels) * (in_channels / group) * kernel_h * kernel_w;
    }
    std::int64_t bias_count() const { return has_bias ? out_channels : 0; }
    /// Multiply-accumulates per output element.
    std::int64_t macs_per_output() const {
        return static_cast<std::int64_t>(kernel_h) * kernel_w * (in_channels / group);
    }
};

enum class PoolKind { max, avg };

struct PoolParams {
    PoolKind kind = PoolKind::max;
    int kernel = 1;
    int stride = 1;
    int pad = 0;
};

enum class LayerKind { conv, pool, relu, add, concat };

struct Layer {
    std::string name;
    LayerKind kind = LayerKind::conv;
    std::vector<std::string> inputs;
    std::optional<ConvParams> conv;
    std::optional<PoolParams> pool;
    std::optional<TensorShape> out_shape; // set by infer_shapes
    int line = 0;                         // source locus when parsed from a file
};

struct GraphInput {
    std::string name;
    TensorShape shape;
};

struct Graph {
    std::string name;
    std::vector<GraphInput> inputs;
    std::vector<Layer> layers;
    std::vector<std::string> outputs;

    const Layer* find_layer(const std::string& n) const;
    Layer* find_layer(const std::string& n);
    const GraphInput* find_input(const std::string& n) const;
    bool shapes_inferred() const;
    /// Output shape of a layer or graph input by name; requires inference.
    TensorShape shape_of(const std::string& n) const;
    /// Names of layers consuming `n`, in layer order.
    std::vector<std::string> consumers_of(const std::string& n) const;
};

struct Violation {
    std::string where; // layer or input name, empty for graph-level
    std::string message;
};

const char* to_string(LayerKind k);
const char* to_string(Activation a);
const char* to_string(PoolKind k);

/// Parses a graph document. Errors carry the source line. The result is
/// validated structurally (names resolve, arities hold, graph is acyclic)
/// but has no inferred shapes yet.
Graph parse_graph(const std::string& text);
Graph load_graph(const std::string& path);

std::string serialize_graph(const Graph& g);

/// Conv/pool output arithmetic: floor((in + 2*pad - kernel)/stride) + 1.
int conv_out_dim(int in, int kernel, int pad, int stride);

/// Annotates every layer with its output shape. Throws Error{validation}
/// on the first inconsistency (add shape mismatch, group constraint
/// violation, non-positive output dimension).
Graph infer_shapes(const Graph& g);

/// Collects every invariant violation instead of stopping at the first.
/// Structural problems are reported alongside shape inconsistencies.
std::vector<Violation> validate_graph(const Graph& g);

/// Layers in a valid topological order (stable: preserves file order).
std::vector<const Layer*> topo_order(const Graph& g);

} // namespace xlfuse
