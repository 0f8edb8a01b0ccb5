// Copyright (c) 2026 The xlfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "xlfuse/cost_model.hpp"
#include "xlfuse/device.hpp"
#include "xlfuse/fusion.hpp"
#include "xlfuse/graph.hpp"
#include "xlfuse/reference.hpp"
#include "xlfuse/tensor.hpp"
#include "xlfuse/tiling.hpp"

namespace xlfuse {

struct SimOptions {
    /// Execute tiles in reverse linear order. Tiles write disjoint
    /// regions, so the result must be bit-identical.
    bool reverse_tiles = false;
};

struct SimulationResult {
    std::map<std::string, Tensor> values;                // every layer output
    std::map<std::string, CounterReport> block_reports;  // fused blocks only
};

/// Executes one fused block exactly as the generated kernel would: per
/// tile, stage the producer outputs into modeled shared buffers (zero
/// borders, bank-padded pitch), barrier, run the consumer stage(s) from
/// the buffers, store block outputs to global tensors. Tiles run in
/// parallel (they write disjoint regions); counters are pure sums.
CounterReport run_fused_block(const Graph& g, const FusionBlock& block, const TilingPlan& plan,
                              const DeviceSpec& device, std::map<std::string, Tensor>& values,
                              const WeightSet& w, const SimOptions& opts = {});

/// Executes the whole schedule: fused blocks through their plans,
/// unfused singletons through the reference layer kernels.
SimulationResult simulate_graph(const Graph& g, const std::vector<FusionBlock>& blocks,
                                const std::map<std::string, TilingPlan>& plans,
                                const std::map<std::string, Tensor>& inputs, const WeightSet& w,
                                const DeviceSpec& device, const SimOptions& opts = {});

} // namespace xlfuse
