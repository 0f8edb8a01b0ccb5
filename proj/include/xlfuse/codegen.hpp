// Copyright (c) 2026 The xlfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xlfuse/device.hpp"
#include "xlfuse/fusion.hpp"
#include "xlfuse/graph.hpp"
#include "xlfuse/tiling.hpp"

namespace xlfuse {

struct KernelManifest {
    std::string kernel_symbol;
    std::string graph_name;
    std::string block_id;
    FusionMode mode = FusionMode::straight;
    std::int64_t shared_bytes = 0;
    int barrier_count = 0;
    int grid_x = 1, grid_y = 1;   // grid_x spans width
    int block_x = 1, block_y = 1;
    int loop_x = 1, loop_y = 1;
    WeightPlacement weights = WeightPlacement::constant_memory;
    std::vector<std::pair<std::string, std::int64_t>> constants; // symbol, elements
    std::vector<std::string> loads;  // staged source tensors
    std::vector<std::string> stores; // tensors written to global
};

struct KernelSource {
    std::string kernel;        // device code text
    std::string host;          // launch stub text
    std::string manifest_text; // structured text form of `manifest`
    KernelManifest manifest;
};

/// Emits the fused kernel for one block: a single staging section per
/// producer (window reads from global through the read-only path), one
/// barrier between the stages, bank-padded shared buffers whose borders
/// are zero-filled in place, branch-free consumer loops (the only `if`s
/// are coordinate range guards, each tagged), and one global store per
/// externally visible tensor. Identical inputs produce byte-identical
/// text.
KernelSource emit_kernel(const Graph& g, const FusionBlock& block, const TilingPlan& plan,
                         const DeviceSpec& device);

/// Machine-verifies the emit_kernel postconditions: barrier count,
/// declared shared sizes against the manifest and the plan, staging and
/// store section counts, launch geometry, and the absence of untagged
/// branch tokens. Violations are data, not failures.
std::vector<std::string> structural_check(const KernelSource& src, const TilingPlan& plan);

KernelManifest parse_manifest(const std::string& text);

} // namespace xlfuse
