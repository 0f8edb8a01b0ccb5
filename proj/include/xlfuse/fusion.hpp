// Copyright (c) 2026 The xlfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "xlfuse/graph.hpp"

namespace xlfuse {

enum class FusionMode { straight, split, merge, unfused };

const char* to_string(FusionMode m);

/// A two-stage subgraph whose intermediate tensor lives in shared memory.
/// Producers are always convs; the consumer stage is one or two convs
/// (straight/split) or an element-wise add sink (merge). Unfused blocks
/// are singletons.
struct FusionBlock {
    std::string id;
    FusionMode mode = FusionMode::unfused;
    std::vector<std::string> members;        // producers first, then consumers
    std::vector<std::string> producer_stage; // layers computed into shared memory
    std::vector<std::string> consumer_stage; // layers reading it
    /// True when a producer's output is also consumed outside the block;
    /// the fused kernel must then store the intermediate to global memory.
    bool stores_intermediate = false;

    bool fused() const { return mode != FusionMode::unfused; }
    int stage_count() const { return fused() ? 2 : 1; }
};

/// Absorbs relu nodes into their producing conv's activation attribute.
/// A relu folds when its sole input is a conv and that conv feeds only
/// the relu; consumers of the relu (and graph outputs naming it) are
/// rewired to the conv. Other relu nodes are left standalone.
Graph fold_elementwise(const Graph& g);

struct ModeResult {
    bool accepted = false;
    FusionMode mode = FusionMode::unfused;
    bool escaping_intermediate = false;
    std::string reject_reason;
};

/// Classifies a candidate two-stage subgraph (layer names drawn from a
/// folded, shape-inferred graph). A producer whose output is also read
/// outside the candidate is accepted with escaping_intermediate set.
ModeResult classify_mode(const Graph& g, const std::vector<std::string>& candidate);

/// Greedy first-fit partition in topological order. Within the node
/// under consideration merge and split are preferred over straight;
/// pooling and concat layers are always unfused singletons.
std::vector<FusionBlock> detect_fusion_blocks(const Graph& g);

/// Text report mapping layer -> block id -> mode (CLI `plan` output).
std::string block_assignment_report(const Graph& g, const std::vector<FusionBlock>& blocks);

} // namespace xlfuse
