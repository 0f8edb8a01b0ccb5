// Copyright (c) 2026 The xlfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xlfuse/device.hpp"
#include "xlfuse/fusion.hpp"
#include "xlfuse/graph.hpp"

namespace xlfuse {

/// Output-space tile and grid. The last tile per dimension may be
/// partial; out-of-range points are masked by the executor.
struct TileGeometry {
    int tile_h = 1, tile_w = 1;
    int grid_h = 1, grid_w = 1;
    /// Per-thread loop trips when the tile exceeds the thread-block limit.
    int loop_h = 1, loop_w = 1;

    bool operator==(const TileGeometry&) const = default;
};

/// One stage of a receptive-field chain. For an output tile starting at
/// row r, the stage's input region starts at r*scale + offset and spans
/// `extent` rows (columns analogous); cells outside the stage's input
/// tensor are zero padding.
struct HaloStage {
    std::string layer; // empty for anonymous chains
    int kernel_h = 1, kernel_w = 1;
    int stride = 1, pad = 0;
    int channels_out = 0;           // 0 when unknown
    std::int64_t macs_per_cell = 0; // kernel_h*kernel_w*(in_channels/group)
    int extent_h = 0, extent_w = 0;
    int scale_h = 1, scale_w = 1;
    int offset_h = 0, offset_w = 0;
};

struct HaloExtent {
    std::vector<HaloStage> stages; // [0] is the chain-input side
};

/// Receptive-field recursion r_k = (r_{k+1} - 1)*stride_k + kernel_k,
/// seeded with the output tile. stages[i].extent is the input region of
/// chain[i]; a 1x1 stage adds no halo.
HaloExtent halo_extent(int tile_h, int tile_w, const std::vector<ConvParams>& chain);

struct RedundancyReport {
    std::int64_t staged_input_elements = 0; // Σ over tiles of valid staged cells × channels
    std::int64_t unique_input_elements = 0;
    std::int64_t replicated_elements = 0;      // staged − unique
    std::int64_t intermediate_staged_cells = 0; // Σ over tiles of valid intermediate cells × channels
    std::int64_t intermediate_unique_cells = 0;
    std::int64_t recomputed_cells = 0; // intermediate cells computed by more than one tile
    std::int64_t redundant_macs = 0;
};

/// Counts halo replication by marking every input (and intermediate)
/// cell each tile stages. Partial tiles are clipped. Zero for any
/// all-1x1 chain at any geometry.
RedundancyReport redundancy_count(const TileGeometry& geometry, const HaloExtent& halo,
                                  const TensorShape& input);

/// Tuner search space: combinations of the common factors of the output
/// extent, excluding tile 1 and tile == extent. A prime extent is
/// factored through the smallest composite above it and the last tile is
/// partial. Square outputs produce square tiles; non-square outputs
/// factor each dimension independently. May be empty (caller falls back
/// to full_tile_geometry).
std::vector<TileGeometry> enumerate_tilings(int out_h, int out_w);

TileGeometry full_tile_geometry(int out_h, int out_w);

enum class WeightPlacement { constant_memory, readonly_cached_global };

const char* to_string(WeightPlacement w);

/// Shared staging buffer holding one producer-stage output region.
/// logical_h/w is the region net of the zero border; the border width
/// equals the consumer-stage padding so the consumer reads without
/// bounds checks. pad_rows/pad_cols are bank padding (allocation only).
struct SharedLayout {
    std::string name;  // buffer symbol, e.g. "s0"
    std::string stage; // producer layer whose output it holds
    int channels = 0;
    int logical_h = 0, logical_w = 0;
    int border = 0;
    int pad_rows = 0, pad_cols = 1;
    int stride = 1; // consumer stride: region origin = tile_origin*stride - border

    int data_h() const { return logical_h + 2 * border; }
    int data_w() const { return logical_w + 2 * border; }
    int pitch() const { return data_w() + pad_cols; }
    int rows() const { return data_h() + pad_rows; }
    std::int64_t physical_elements() const {
        return static_cast<std::int64_t>(channels) * rows() * pitch();
    }
};

struct TilingPlan {
    std::string graph_name;
    std::string block_id;
    FusionMode mode = FusionMode::straight;
    std::vector<std::string> producers;
    std::vector<std::string> consumers;
    bool stores_intermediate = false;
    /// Merge producers with identical input and window read one staged
    /// region; global loads are counted once.
    bool shared_input_staging = false;
    TileGeometry geometry;
    int block_dim_x = 1, block_dim_y = 1;
    HaloExtent halo;                  // producer input regions, then consumer read regions
    std::vector<SharedLayout> buffers; // parallel to producers
    WeightPlacement weights = WeightPlacement::constant_memory;
    std::int64_t replicated_elements = 0;
    std::int64_t redundant_macs = 0;
    std::int64_t shared_bytes = 0;
    std::string device_name;
};

struct PlanOptions {
    bool row_bank_padding = false; // pad rows in addition to columns
};

/// Computes the full tiling plan for a fused block: halo chain, shared
/// layouts with bank padding and zero borders, thread-block dims (one
/// thread per output point, looping past the device limit), weight
/// placement by constant-capacity check, redundancy counts. Throws
/// Error{infeasible} when the staging buffers exceed the per-block
/// shared-memory limit.
TilingPlan plan_tiling(const Graph& g, const FusionBlock& block, const TileGeometry& geometry,
                       const DeviceSpec& device, const PlanOptions& opts = {});

struct OccupancyReport {
    int blocks_per_sm = 0;
    double shared_fraction = 0; // of per-SM capacity
    std::vector<std::string> warnings;
};

/// blocks-per-SM = floor(per-SM shared / plan shared), clamped by the
/// device block limit. Warns past 1/3 of per-SM shared capacity and
/// flags occupancy 1 as a latency-hiding risk.
OccupancyReport check_resources(const TilingPlan& plan, const DeviceSpec& device);

TilingPlan parse_plan(const std::string& text);
std::string serialize_plan(const TilingPlan& plan);
TilingPlan load_plan(const std::string& path);

} // namespace xlfuse
