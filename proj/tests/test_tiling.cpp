// Copyright (c) 2026 The xlfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <set>

#include "test_util.hpp"
#include "xlfuse/error.hpp"
#include "xlfuse/tiling.hpp"

using namespace xlfuse;

namespace {

ConvParams cp(int k, int stride = 1, int pad = 0) {
    ConvParams c;
    c.kernel_h = c.kernel_w = k;
    c.stride = stride;
    c.pad = pad;
    c.out_channels = 1;
    c.in_channels = 1;
    return c;
}

std::set<std::pair<int, int>> as_pairs(const std::vector<TileGeometry>& geos) {
    std::set<std::pair<int, int>> out;
    for (const auto& g : geos) out.insert({g.tile_h, g.grid_h});
    return out;
}

} // namespace

TEST_CASE("halo recursion on single and chained stages") {
    HaloExtent h = halo_extent(3, 3, {cp(3)});
    CHECK(h.stages[0].extent_h == 5);

    h = halo_extent(4, 4, {cp(1), cp(5)});
    CHECK(h.stages[1].extent_h == 8); // stage-2 input region
    CHECK(h.stages[0].extent_h == 8); // 1x1 adds no halo

    h = halo_extent(1, 1, {cp(3), cp(3)});
    CHECK(h.stages[1].extent_h == 3);
    CHECK(h.stages[0].extent_h == 5);
}

TEST_CASE("halo recursion is associative over chain concatenation") {
    const std::vector<ConvParams> A{cp(3, 1, 1), cp(5, 2, 2)};
    const std::vector<ConvParams> B{cp(3, 2, 0), cp(1)};
    std::vector<ConvParams> AB = A;
    AB.insert(AB.end(), B.begin(), B.end());
    for (int t = 1; t <= 6; ++t) {
        HaloExtent whole = halo_extent(t, t, AB);
        HaloExtent back = halo_extent(t, t, B);
        HaloExtent front = halo_extent(back.stages[0].extent_h, back.stages[0].extent_w, A);
        CHECK(whole.stages[0].extent_h == front.stages[0].extent_h);
        CHECK(whole.stages[0].extent_w == front.stages[0].extent_w);
    }
}

TEST_CASE("tuner search space for output (12,12)") {
    auto geos = enumerate_tilings(12, 12);
    CHECK(as_pairs(geos) ==
          std::set<std::pair<int, int>>{{4, 3}, {2, 6}, {3, 4}, {6, 2}});
}

TEST_CASE("output (2,2) has no nontrivial factorization") {
    CHECK(enumerate_tilings(2, 2).empty());
    TileGeometry full = full_tile_geometry(2, 2);
    CHECK(full.tile_h == 2);
    CHECK(full.grid_h == 1);
}

TEST_CASE("prime outputs factor through the next composite with a partial last tile") {
    auto geos = enumerate_tilings(13, 13);
    CHECK(as_pairs(geos) == std::set<std::pair<int, int>>{{7, 2}, {2, 7}});
    for (const auto& g : geos) {
        CHECK(g.tile_h * g.grid_h >= 13);
        CHECK(g.tile_h * (g.grid_h - 1) < 13); // last tile nonempty (may be partial)
    }
}

TEST_CASE("tiles cover each output exactly once for every candidate") {
    for (int h = 2; h <= 9; ++h) {
        auto geos = enumerate_tilings(h, h);
        geos.push_back(full_tile_geometry(h, h));
        for (const auto& geo : geos) {
            std::vector<int> hits(static_cast<size_t>(h) * h, 0);
            for (int ty = 0; ty < geo.grid_h; ++ty)
                for (int tx = 0; tx < geo.grid_w; ++tx)
                    for (int y = ty * geo.tile_h; y < std::min((ty + 1) * geo.tile_h, h); ++y)
                        for (int x = tx * geo.tile_w; x < std::min((tx + 1) * geo.tile_w, h); ++x)
                            ++hits[static_cast<size_t>(y) * h + x];
            for (int v : hits) CHECK(v == 1);
        }
    }
}

TEST_CASE("all-1x1 chains have zero redundancy at any geometry") {
    for (int t : {1, 2, 4}) {
        TileGeometry geo;
        geo.tile_h = geo.tile_w = t;
        geo.grid_h = geo.grid_w = (8 + t - 1) / t;
        RedundancyReport r =
            redundancy_count(geo, halo_extent(t, t, {cp(1), cp(1)}), {3, 8, 8});
        CHECK(r.replicated_elements == 0);
        CHECK(r.redundant_macs == 0);
    }
}

TEST_CASE("overlapping 3x3 regions on a 5x5 input stage 36 elements for 25 unique") {
    // 2x2 grid of 1x1 output tiles, kernel 3, stride 2: input regions
    // [0..2] and [2..4] per dimension overlap by one row/column.
    TileGeometry geo;
    geo.tile_h = geo.tile_w = 1;
    geo.grid_h = geo.grid_w = 2;
    RedundancyReport r = redundancy_count(geo, halo_extent(1, 1, {cp(3, 2, 0)}), {1, 5, 5});
    CHECK(r.staged_input_elements == 36);
    CHECK(r.unique_input_elements == 25);
    CHECK(r.replicated_elements == 11);
    CHECK(r.redundant_macs == 0);
}

TEST_CASE("a single full tile replicates nothing") {
    TileGeometry geo = full_tile_geometry(6, 6);
    RedundancyReport r = redundancy_count(geo, halo_extent(6, 6, {cp(3, 1, 1)}), {2, 6, 6});
    CHECK(r.replicated_elements == 0);
    CHECK(r.redundant_macs == 0);
}

TEST_CASE("k>=3 chains with grid>1 replicate strictly") {
    TileGeometry geo;
    geo.tile_h = geo.tile_w = 4;
    geo.grid_h = geo.grid_w = 2;
    RedundancyReport r =
        redundancy_count(geo, halo_extent(4, 4, {cp(1), cp(3, 1, 1)}), {2, 8, 8});
    CHECK(r.replicated_elements > 0);
    CHECK(r.redundant_macs > 0);
}

TEST_CASE("a.1 plan: staging buffer carries a zero border of 2") {
    Graph g = test::load_fixture_graph("a1.graph");
    auto blocks = detect_fusion_blocks(g);
    const FusionBlock* b = test::find_block_containing(blocks, "conv1");
    DeviceSpec dev = titan_xp_spec();
    TileGeometry geo;
    geo.tile_h = geo.tile_w = 14;
    geo.grid_h = geo.grid_w = 2;
    TilingPlan plan = plan_tiling(g, *b, geo, dev);
    REQUIRE(plan.buffers.size() == 1);
    CHECK(plan.buffers[0].border == 2); // consumer pad
    CHECK(plan.buffers[0].channels == 16);
    CHECK(plan.buffers[0].logical_h == 14);
    CHECK(plan.buffers[0].data_h() == 18);
    CHECK(plan.buffers[0].pad_cols == 1);
    CHECK(plan.weights == WeightPlacement::constant_memory);
    CHECK(plan.shared_bytes == 16 * 18 * 19 * 4);
}

TEST_CASE("b.1 plan: 1x1 producer has zero input halo, buffer is 16 x tile area") {
    Graph g = test::load_fixture_graph("b1.graph");
    auto blocks = detect_fusion_blocks(g);
    const FusionBlock* b = test::find_block_containing(blocks, "squeeze");
    DeviceSpec dev = titan_xp_spec();
    TileGeometry geo;
    geo.tile_h = geo.tile_w = 14;
    geo.grid_h = geo.grid_w = 4;
    TilingPlan plan = plan_tiling(g, *b, geo, dev);
    REQUIRE(plan.buffers.size() == 1);
    CHECK(plan.buffers[0].channels == 16);
    CHECK(plan.buffers[0].border == 1);        // 3x3 expand pad
    CHECK(plan.buffers[0].logical_h == 14);    // tile area net of the border
    // The 1x1 producer reads exactly the staged extent: no growth.
    CHECK(plan.halo.stages[0].extent_h == plan.buffers[0].data_h());
    CHECK(plan.replicated_elements > 0); // halo on the 64-channel input
}

TEST_CASE("plans exceeding the per-block shared limit are infeasible") {
    Graph g = test::load_fixture_graph("c1.graph");
    auto blocks = detect_fusion_blocks(g);
    const FusionBlock* b = test::find_block_containing(blocks, "join");
    DeviceSpec dev = titan_xp_spec();
    TileGeometry geo;
    geo.tile_h = geo.tile_w = 14;
    geo.grid_h = geo.grid_w = 4;
    try {
        plan_tiling(g, *b, geo, dev);
        FAIL("expected infeasibility");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::infeasible);
        CHECK(std::string(e.what()).find("shared") != std::string::npos);
    }
}

TEST_CASE("occupancy report follows the 1/3 heuristic and latency flag") {
    DeviceSpec dev = titan_xp_spec();
    TilingPlan plan;
    plan.shared_bytes = dev.shared_per_sm / 4;
    OccupancyReport r = check_resources(plan, dev);
    CHECK(r.blocks_per_sm == 4);
    CHECK(r.warnings.empty());

    plan.shared_bytes = static_cast<std::int64_t>(dev.shared_per_sm * 0.4);
    r = check_resources(plan, dev);
    CHECK(r.blocks_per_sm == 2);
    REQUIRE(r.warnings.size() == 1);
    CHECK(r.warnings[0].find("1/3") != std::string::npos);

    plan.shared_bytes = static_cast<std::int64_t>(dev.shared_per_sm * 0.6);
    r = check_resources(plan, dev);
    CHECK(r.blocks_per_sm == 1);
    CHECK(r.warnings.size() == 2);
}

TEST_CASE("plan files round-trip") {
    Graph g = test::load_fixture_graph("a1.graph");
    auto blocks = detect_fusion_blocks(g);
    const FusionBlock* b = test::find_block_containing(blocks, "conv1");
    TileGeometry geo;
    geo.tile_h = geo.tile_w = 7;
    geo.grid_h = geo.grid_w = 4;
    TilingPlan plan = plan_tiling(g, *b, geo, titan_xp_spec());
    TilingPlan back = parse_plan(serialize_plan(plan));
    CHECK(back.block_id == plan.block_id);
    CHECK(back.geometry == plan.geometry);
    CHECK(back.shared_bytes == plan.shared_bytes);
    CHECK(back.buffers.size() == plan.buffers.size());
    CHECK(back.buffers[0].physical_elements() == plan.buffers[0].physical_elements());
    CHECK(serialize_plan(back) == serialize_plan(plan));
}
