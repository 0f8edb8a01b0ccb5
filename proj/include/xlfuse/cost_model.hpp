// Copyright (c) 2026 The xlfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "xlfuse/device.hpp"
#include "xlfuse/fusion.hpp"
#include "xlfuse/graph.hpp"
#include "xlfuse/tiling.hpp"

namespace xlfuse {

/// Modeled memory counters for one kernel (fused block or single layer).
///
/// Traffic accounting is region-based: a kernel launch moves each staged
/// region element once over the global bus, so fused blocks pay halo
/// replication while an unfused layer reads its input once. Consumer-stage
/// window reads hit shared memory and are amortized across output
/// channels (one load per staged word per consuming output pixel).
/// Weight reads go through constant memory or the read-only cache and do
/// not enter global_load_tx.
struct CounterReport {
    std::int64_t global_load_tx = 0;
    std::int64_t global_store_tx = 0;
    std::int64_t shared_load_ops = 0;
    std::int64_t shared_store_ops = 0;
    std::int64_t ldst_executed = 0;
    int bank_conflict_degree = 1;
    std::int64_t macs_total = 0;
    std::int64_t macs_redundant = 0;
};

/// Coalesced transactions needed to move `elements` 4-byte words.
std::int64_t transactions_for(std::int64_t elements, const DeviceSpec& device);

/// Tensors a fused block writes to global memory: every consumer-stage
/// output plus escaping intermediates. Returns (tensor name, elements).
std::vector<std::pair<std::string, std::int64_t>> stored_tensors(const Graph& g,
                                                                 const FusionBlock& block);

/// Modeled global store transactions of the fused block.
std::int64_t global_store_tx_fused(const Graph& g, const FusionBlock& block,
                                   const DeviceSpec& device);

/// Modeled global store transactions of the same layers run one kernel
/// per layer: every layer's output is stored.
std::int64_t global_store_tx_unfused(const Graph& g, const std::vector<std::string>& layers,
                                     const DeviceSpec& device);

/// Conflict serialization factor for a warp accessing word addresses
/// {t*stride}: gcd(stride, banks). Degree 1 is conflict-free.
int bank_conflict_degree(int stride_words, const DeviceSpec& device);

/// Conflict degree of the 2-D pattern a thread block produces when lane
/// t reads (t / row_words, t % row_words) from a buffer with the given
/// row pitch. Counted by brute-force bank occupancy over one warp.
int warp_conflict_degree(int pitch_words, int row_words, const DeviceSpec& device);

/// Cost terms feeding estimate_block_time.
struct BlockCost {
    std::int64_t flops = 0; // 2*macs + element-wise ops
    std::int64_t macs = 0;
    std::int64_t macs_redundant = 0;
    std::int64_t global_load_elements = 0;
    std::int64_t global_store_elements = 0;
    std::int64_t shared_load_ops = 0;
    std::int64_t shared_store_ops = 0;
    int conflict_degree = 1;
    int blocks_per_sm = 2;
};

BlockCost block_cost(const Graph& g, const FusionBlock& block, const TilingPlan& plan,
                     const DeviceSpec& device);

/// Model-side counter report for a fused block (the simulator must agree
/// on global_store_tx; both use stored_tensors and transactions_for).
CounterReport fused_counter_report(const Graph& g, const FusionBlock& block,
                                   const TilingPlan& plan, const DeviceSpec& device);

/// max(compute, memory) with a latency penalty when only one thread
/// block fits per SM: effective FLOPs scale by min(1, blocks_per_sm/2).
double estimate_block_time(const BlockCost& cost, const DeviceSpec& device);

/// One kernel running one layer at full occupancy.
double estimate_layer_time(const Graph& g, const Layer& layer, const DeviceSpec& device);

/// Sum of per-layer kernel times (sequential launches).
double estimate_unfused_time(const Graph& g, const std::vector<std::string>& layers,
                             const DeviceSpec& device);

struct TuneCandidate {
    TileGeometry geometry;
    bool feasible = false;
    std::string reason; // infeasibility reason
    double time_s = 0;
    std::int64_t shared_bytes = 0;
};

struct TuneResult {
    TilingPlan best;
    std::vector<TuneCandidate> candidates;
};

/// Evaluates estimate_block_time over the enumerated tile geometries
/// (full tile when the search space is empty), skipping infeasible
/// candidates. Ties break deterministically: smaller shared bytes, then
/// larger grid, then lexicographic geometry. Throws Error{infeasible}
/// with per-candidate reasons when nothing fits.
TuneResult tune(const Graph& g, const FusionBlock& block, const DeviceSpec& device,
                const PlanOptions& opts = {});

} // namespace xlfuse
