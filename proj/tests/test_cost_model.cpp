// Copyright (c) 2026 The xlfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <numeric>
#include <set>

#include "test_util.hpp"
#include "xlfuse/cost_model.hpp"
#include "xlfuse/error.hpp"

using namespace xlfuse;

namespace {

const FusionBlock* fused_block(const std::vector<FusionBlock>& blocks) {
    for (const auto& b : blocks)
        if (b.fused()) return &b;
    return nullptr;
}

} // namespace

TEST_CASE("fused store transactions reproduce the profiling table") {
    DeviceSpec dev = titan_xp_spec();
    struct Row {
        const char* fixture;
        std::int64_t fused_tx;
    };
    for (const Row& row : {Row{"a1.graph", 6272}, Row{"a2.graph", 25600}, Row{"b1.graph", 100352}}) {
        Graph g = test::load_fixture_graph(row.fixture);
        auto blocks = detect_fusion_blocks(g);
        const FusionBlock* b = fused_block(blocks);
        REQUIRE(b != nullptr);
        CHECK(global_store_tx_fused(g, *b, dev) == row.fused_tx);
    }
}

TEST_CASE("unfused schedules store every layer output") {
    DeviceSpec dev = titan_xp_spec();
    Graph g = test::load_fixture_graph("a1.graph");
    auto blocks = detect_fusion_blocks(g);
    const FusionBlock* b = fused_block(blocks);
    CHECK(global_store_tx_unfused(g, b->members, dev) == 3136 + 6272);
}

TEST_CASE("fused stores are strictly below unfused for every 2-stage block") {
    DeviceSpec dev = titan_xp_spec();
    for (const char* f : {"a1.graph", "a2.graph", "b1.graph", "c1.graph", "squeezenet.graph",
                          "inception.graph", "residual.graph"}) {
        Graph g = test::load_fixture_graph(f);
        for (const auto& b : detect_fusion_blocks(g)) {
            if (!b.fused() || b.stores_intermediate) continue;
            CHECK(global_store_tx_fused(g, b, dev) < global_store_tx_unfused(g, b.members, dev));
        }
    }
}

TEST_CASE("fused store count is invariant under tile geometry") {
    DeviceSpec dev = titan_xp_spec();
    Graph g = test::load_fixture_graph("b1.graph");
    auto blocks = detect_fusion_blocks(g);
    const FusionBlock* b = fused_block(blocks);
    const std::int64_t expected = global_store_tx_fused(g, *b, dev);
    TensorShape out = g.shape_of(b->consumer_stage[0]);
    for (const auto& geo : enumerate_tilings(out.height, out.width)) {
        try {
            TilingPlan plan = plan_tiling(g, *b, geo, dev);
            CounterReport r = fused_counter_report(g, *b, plan, dev);
            CHECK(r.global_store_tx == expected);
        } catch (const Error&) {
            // infeasible geometries carry no counters
        }
    }
}

TEST_CASE("store transactions respect the output floor") {
    DeviceSpec dev = titan_xp_spec();
    Graph g = test::load_fixture_graph("c1.graph");
    auto blocks = detect_fusion_blocks(g);
    const FusionBlock* b = fused_block(blocks);
    std::int64_t floor_tx = transactions_for(g.shape_of(b->consumer_stage[0]).elements(), dev);
    CHECK(global_store_tx_fused(g, *b, dev) >= floor_tx);
}

TEST_CASE("bank conflict degree is gcd with the bank count") {
    DeviceSpec dev = titan_xp_spec();
    CHECK(bank_conflict_degree(32, dev) == 32);
    CHECK(bank_conflict_degree(33, dev) == 1); // padded column
    CHECK(bank_conflict_degree(1, dev) == 1);
    CHECK(bank_conflict_degree(16, dev) == 16);
    for (int s = 1; s <= 64; ++s) {
        CHECK(bank_conflict_degree(s + dev.banks, dev) == bank_conflict_degree(s, dev));
        CHECK(dev.banks % bank_conflict_degree(s, dev) == 0);
    }
}

TEST_CASE("warp pattern degree is 1 for padded pitches at warp-wide rows") {
    DeviceSpec dev = titan_xp_spec();
    CHECK(warp_conflict_degree(33, 32, dev) == 1);
    CHECK(warp_conflict_degree(32, 16, dev) == 2); // two rows of 16 collide
}

TEST_CASE("estimate_block_time of an empty plan is zero") {
    CHECK(estimate_block_time(BlockCost{}, titan_xp_spec()) == 0.0);
}

TEST_CASE("doubling global bandwidth halves a memory-bound estimate") {
    DeviceSpec dev = titan_xp_spec();
    BlockCost cost;
    cost.global_load_elements = 1 << 20;
    cost.global_store_elements = 1 << 20;
    double t1 = estimate_block_time(cost, dev);
    dev.global_bw *= 2;
    double t2 = estimate_block_time(cost, dev);
    CHECK(t2 == doctest::Approx(t1 / 2));
}

TEST_CASE("estimates are monotone in peak flops and bandwidth") {
    DeviceSpec dev = titan_xp_spec();
    Graph g = test::load_fixture_graph("a1.graph");
    auto blocks = detect_fusion_blocks(g);
    const FusionBlock* b = fused_block(blocks);
    TuneResult tr = tune(g, *b, dev);
    BlockCost cost = block_cost(g, *b, tr.best, dev);
    double base = estimate_block_time(cost, dev);
    for (double f : {1.5, 2.0, 8.0}) {
        DeviceSpec fast = dev;
        fast.peak_flops *= f;
        CHECK(estimate_block_time(cost, fast) <= base);
        DeviceSpec wide = dev;
        wide.global_bw *= f;
        CHECK(estimate_block_time(cost, wide) <= base);
    }
}

TEST_CASE("fused a.1 estimate beats the unfused sum on TITAN Xp") {
    DeviceSpec dev = titan_xp_spec();
    Graph g = test::load_fixture_graph("a1.graph");
    auto blocks = detect_fusion_blocks(g);
    const FusionBlock* b = fused_block(blocks);
    TuneResult tr = tune(g, *b, dev);
    double fused = estimate_block_time(block_cost(g, *b, tr.best, dev), dev);
    double unfused = estimate_unfused_time(g, b->members, dev);
    CHECK(fused < unfused);
}

TEST_CASE("tune over a (12,12) output evaluates the 4-candidate space") {
    Graph g = infer_shapes(parse_graph(
        "name t12\ninput {\n  name d\n  shape [8, 12, 12]\n}\n"
        "layer {\n  name c1\n  kind conv\n  inputs [d]\n  out_channels 8\n  kernel [1, 1]\n}\n"
        "layer {\n  name c2\n  kind conv\n  inputs [c1]\n  out_channels 8\n  kernel [3, 3]\n  pad 1\n}\n"
        "output c2\n"));
    auto blocks = detect_fusion_blocks(g);
    const FusionBlock* b = fused_block(blocks);
    TuneResult tr = tune(g, *b, titan_xp_spec());
    CHECK(tr.candidates.size() == 4);
    std::set<std::pair<int, int>> seen;
    for (const auto& c : tr.candidates) seen.insert({c.geometry.tile_h, c.geometry.grid_h});
    CHECK(seen == std::set<std::pair<int, int>>{{4, 3}, {2, 6}, {3, 4}, {6, 2}});
}

TEST_CASE("all-1x1 blocks tie-break to the smallest shared footprint") {
    Graph g = test::load_fixture_graph("c1.graph");
    auto blocks = detect_fusion_blocks(g);
    const FusionBlock* b = fused_block(blocks);
    TuneResult tr = tune(g, *b, titan_xp_spec());
    std::int64_t best_bytes = tr.best.shared_bytes;
    for (const auto& c : tr.candidates)
        if (c.feasible) CHECK(best_bytes <= c.shared_bytes);
}

TEST_CASE("a device with a tiny shared limit makes every candidate infeasible") {
    DeviceSpec dev = titan_xp_spec();
    dev.shared_per_block_max = 64;
    Graph g = test::load_fixture_graph("a1.graph");
    auto blocks = detect_fusion_blocks(g);
    const FusionBlock* b = fused_block(blocks);
    try {
        tune(g, *b, dev);
        FAIL("expected infeasibility");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::infeasible);
        // Per-candidate reasons are embedded in the message.
        CHECK(std::string(e.what()).find("2x2") != std::string::npos);
    }
}
