// Copyright (c) 2026 The xlfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <set>

#include "test_util.hpp"
#include "xlfuse/fusion.hpp"
#include "xlfuse/reference.hpp"
#include "xlfuse/tensor.hpp"

using namespace xlfuse;

namespace {

Graph tiny(const std::string& body) {
    return infer_shapes(parse_graph("name t\ninput {\n  name d\n  shape [2, 8, 8]\n}\n" + body));
}

int count_mode(const std::vector<FusionBlock>& blocks, FusionMode m) {
    int n = 0;
    for (const auto& b : blocks) n += b.mode == m;
    return n;
}

} // namespace

TEST_CASE("conv-relu chain folds into the conv activation") {
    Graph g = tiny(
        "layer {\n  name c\n  kind conv\n  inputs [d]\n  out_channels 2\n  kernel [3, 3]\n  pad 1\n}\n"
        "layer {\n  name r\n  kind relu\n  inputs [c]\n}\noutput r\n");
    Graph f = fold_elementwise(g);
    REQUIRE(f.layers.size() == 1);
    CHECK(f.layers[0].conv->activation == Activation::relu);
    CHECK(f.outputs[0] == "c");
}

TEST_CASE("relu with fan-out folds when the conv feeds only the relu") {
    Graph g = tiny(
        "layer {\n  name c\n  kind conv\n  inputs [d]\n  out_channels 2\n  kernel [1, 1]\n}\n"
        "layer {\n  name r\n  kind relu\n  inputs [c]\n}\n"
        "layer {\n  name p\n  kind pool\n  inputs [r]\n  pool max\n  kernel 2\n  stride 2\n}\n"
        "layer {\n  name q\n  kind pool\n  inputs [r]\n  pool avg\n  kernel 2\n  stride 2\n}\n"
        "output p\noutput q\n");
    Graph f = fold_elementwise(g);
    CHECK(f.find_layer("r") == nullptr);
    CHECK(f.find_layer("p")->inputs[0] == "c");
    CHECK(f.find_layer("q")->inputs[0] == "c");

    // Semantics unchanged: the oracle agrees bit for bit before and after.
    auto inputs = seeded_inputs(g, 7);
    auto w = seeded_weights(g, 7);
    auto before = run_reference(g, inputs, w);
    auto after = run_reference(infer_shapes(f), inputs, w);
    for (const auto& o : g.outputs) {
        CompareReport r = compare(before.at(o), after.at(o == "r" ? "c" : o), 0.0);
        CHECK(r.max_abs == 0.0);
    }
}

TEST_CASE("relu on a graph input stays standalone") {
    Graph g = tiny("layer {\n  name r\n  kind relu\n  inputs [d]\n}\noutput r\n");
    Graph f = fold_elementwise(g);
    CHECK(f.find_layer("r") != nullptr);
}

TEST_CASE("relu is not folded when the conv output is needed raw") {
    Graph g = tiny(
        "layer {\n  name c\n  kind conv\n  inputs [d]\n  out_channels 2\n  kernel [1, 1]\n}\n"
        "layer {\n  name r\n  kind relu\n  inputs [c]\n}\n"
        "layer {\n  name s\n  kind add\n  inputs [c, r]\n}\noutput s\n");
    Graph f = fold_elementwise(g);
    CHECK(f.find_layer("r") != nullptr);
}

TEST_CASE("classify_mode recognizes the three modes") {
    Graph a1 = test::load_fixture_graph("a1.graph");
    ModeResult r = classify_mode(a1, {"conv1", "conv2"});
    CHECK(r.accepted);
    CHECK(r.mode == FusionMode::straight);

    Graph b1 = test::load_fixture_graph("b1.graph");
    r = classify_mode(b1, {"squeeze", "expand1", "expand3"});
    CHECK(r.accepted);
    CHECK(r.mode == FusionMode::split);

    Graph c1 = test::load_fixture_graph("c1.graph");
    r = classify_mode(c1, {"branch_a", "branch_b", "join"});
    CHECK(r.accepted);
    CHECK(r.mode == FusionMode::merge);
}

TEST_CASE("classify_mode rejects three-stage chains and unsupported kinds") {
    Graph res = test::load_fixture_graph("residual.graph");
    ModeResult r = classify_mode(res, {"conv1", "conv2", "conv3"});
    CHECK_FALSE(r.accepted);
    CHECK(r.reject_reason.find("depth") != std::string::npos);

    Graph b1 = test::load_fixture_graph("b1.graph");
    r = classify_mode(b1, {"expand1", "expand3", "fire_out"});
    CHECK_FALSE(r.accepted);
    CHECK(r.reject_reason.find("unsupported") != std::string::npos);
}

TEST_CASE("squeezenet yields exactly 8 split blocks") {
    Graph g = test::load_fixture_graph("squeezenet.graph");
    auto blocks = detect_fusion_blocks(g);
    CHECK(count_mode(blocks, FusionMode::split) == 8);
    CHECK(count_mode(blocks, FusionMode::straight) == 0);
    CHECK(count_mode(blocks, FusionMode::merge) == 0);

    // Partition covers every layer exactly once.
    std::set<std::string> seen;
    size_t total = 0;
    for (const auto& b : blocks) {
        total += b.members.size();
        for (const auto& m : b.members) CHECK(seen.insert(m).second);
    }
    CHECK(total == g.layers.size());
}

TEST_CASE("inception fixture yields one straight and one split block") {
    Graph g = test::load_fixture_graph("inception.graph");
    auto blocks = detect_fusion_blocks(g);
    CHECK(count_mode(blocks, FusionMode::split) == 1);
    CHECK(count_mode(blocks, FusionMode::straight) == 1);
    const FusionBlock* split = test::find_block_containing(blocks, "conv1");
    REQUIRE(split != nullptr);
    CHECK(split->mode == FusionMode::split);
    CHECK(split->consumer_stage == std::vector<std::string>{"conv2", "conv3"});
}

TEST_CASE("residual fixture: straight block, merge block, trailing singleton") {
    Graph g = test::load_fixture_graph("residual.graph");
    auto blocks = detect_fusion_blocks(g);
    CHECK(count_mode(blocks, FusionMode::straight) == 1);
    CHECK(count_mode(blocks, FusionMode::merge) == 1);
    const FusionBlock* merge = test::find_block_containing(blocks, "join");
    REQUIRE(merge != nullptr);
    CHECK(merge->producer_stage == std::vector<std::string>{"conv3", "conv4"});
    const FusionBlock* tail = test::find_block_containing(blocks, "conv5");
    CHECK(tail->mode == FusionMode::unfused);
}

TEST_CASE("single conv graph becomes one unfused singleton") {
    Graph g = tiny(
        "layer {\n  name c\n  kind conv\n  inputs [d]\n  out_channels 2\n  kernel [3, 3]\n  pad 1\n}\n"
        "output c\n");
    auto blocks = detect_fusion_blocks(g);
    REQUIRE(blocks.size() == 1);
    CHECK(blocks[0].mode == FusionMode::unfused);
}

TEST_CASE("escaping intermediate is flagged when a producer feeds outside the block") {
    Graph g = tiny(
        "layer {\n  name c1\n  kind conv\n  inputs [d]\n  out_channels 2\n  kernel [1, 1]\n}\n"
        "layer {\n  name c2\n  kind conv\n  inputs [c1]\n  out_channels 2\n  kernel [3, 3]\n  pad 1\n}\n"
        "layer {\n  name p\n  kind pool\n  inputs [c1]\n  pool max\n  kernel 2\n  stride 2\n}\n"
        "output c2\noutput p\n");
    auto blocks = detect_fusion_blocks(g);
    const FusionBlock* b = test::find_block_containing(blocks, "c1");
    REQUIRE(b != nullptr);
    CHECK(b->mode == FusionMode::straight);
    CHECK(b->stores_intermediate);
}

TEST_CASE("block replay through the oracle reproduces the whole-graph outputs") {
    for (const char* f : {"b1.graph", "residual.graph", "inception.graph"}) {
        Graph g = test::load_fixture_graph(f);
        auto blocks = detect_fusion_blocks(g);
        auto inputs = seeded_inputs(g, 11);
        auto w = seeded_weights(g, 11);
        auto whole = run_reference(g, inputs, w);

        // Replay per block, in topological order of first members.
        std::map<std::string, size_t> topo;
        size_t i = 0;
        for (const Layer* l : topo_order(g)) topo[l->name] = i++;
        std::vector<const FusionBlock*> order;
        for (const auto& b : blocks) order.push_back(&b);
        std::sort(order.begin(), order.end(), [&](auto* a, auto* b) {
            size_t ia = topo.size(), ib = topo.size();
            for (const auto& m : a->members) ia = std::min(ia, topo.at(m));
            for (const auto& m : b->members) ib = std::min(ib, topo.at(m));
            return ia < ib;
        });
        std::map<std::string, Tensor> values = inputs;
        for (const FusionBlock* b : order) {
            for (const auto& mname : b->members) {
                const Layer* l = g.find_layer(mname);
                std::vector<const Tensor*> ins;
                for (const auto& in : l->inputs) ins.push_back(&values.at(in));
                values.emplace(mname, run_layer(g, *l, ins, w));
            }
        }
        for (const auto& o : g.outputs) CHECK(compare(whole.at(o), values.at(o), 0.0).max_abs == 0.0);
    }
}
