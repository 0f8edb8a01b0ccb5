// Copyright (c) 2026 The xlfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "test_util.hpp"
#include "xlfuse/error.hpp"
#include "xlfuse/graph.hpp"

using namespace xlfuse;

TEST_CASE("a.1 fixture parses into two conv layers") {
    Graph g = parse_graph(test::read_file(test::fixture_path("graphs/a1.graph")));
    CHECK(g.name == "a1");
    REQUIRE(g.layers.size() == 2);
    CHECK(g.inputs[0].shape == TensorShape{192, 28, 28});
    CHECK(g.layers[0].kind == LayerKind::conv);
    CHECK(g.layers[1].conv->kernel_h == 5);
}

TEST_CASE("degenerate graph: no layers, output names an input") {
    Graph g = parse_graph("name empty\ninput {\n  name d\n  shape [1, 4, 4]\n}\noutput d\n");
    CHECK(g.layers.empty());
    CHECK(validate_graph(g).empty());
}

TEST_CASE("dangling producer reference is a parse error") {
    const std::string doc =
        "name bad\ninput {\n  name d\n  shape [4, 8, 8]\n}\n"
        "layer {\n  name c\n  kind conv\n  inputs [x]\n  out_channels 4\n  kernel [1, 1]\n}\n"
        "output c\n";
    try {
        parse_graph(doc);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("missing producer 'x'") != std::string::npos);
    }
}

TEST_CASE("duplicate layer names and unknown kinds are rejected") {
    const std::string dup =
        "name bad\ninput {\n  name d\n  shape [4, 8, 8]\n}\n"
        "layer {\n  name c\n  kind relu\n  inputs [d]\n}\n"
        "layer {\n  name c\n  kind relu\n  inputs [d]\n}\noutput c\n";
    CHECK_THROWS_AS(parse_graph(dup), Error);
    const std::string unk =
        "name bad\ninput {\n  name d\n  shape [4, 8, 8]\n}\n"
        "layer {\n  name c\n  kind softmax\n  inputs [d]\n}\noutput c\n";
    CHECK_THROWS_AS(parse_graph(unk), Error);
}

TEST_CASE("shape inference matches the bundled layer tables") {
    Graph a1 = infer_shapes(parse_graph(test::read_file(test::fixture_path("graphs/a1.graph"))));
    CHECK(a1.shape_of("conv1") == TensorShape{16, 28, 28});
    CHECK(a1.shape_of("conv2") == TensorShape{32, 28, 28});

    Graph a2 = infer_shapes(parse_graph(test::read_file(test::fixture_path("graphs/a2.graph"))));
    CHECK(a2.shape_of("pw") == TensorShape{16, 80, 80});

    Graph b1 = infer_shapes(parse_graph(test::read_file(test::fixture_path("graphs/b1.graph"))));
    CHECK(b1.shape_of("squeeze") == TensorShape{16, 56, 56});
    CHECK(b1.shape_of("fire_out") == TensorShape{128, 56, 56});

    Graph c1 = infer_shapes(parse_graph(test::read_file(test::fixture_path("graphs/c1.graph"))));
    CHECK(c1.shape_of("join") == TensorShape{256, 56, 56});
    CHECK(c1.shape_of("proj") == TensorShape{64, 56, 56});
}

TEST_CASE("conv arithmetic: kernel 3, pad 0, stride 1 on height 3 gives 1") {
    CHECK(conv_out_dim(3, 3, 0, 1) == 1);
    CHECK(conv_out_dim(56, 1, 0, 1) == 56);
    CHECK(conv_out_dim(28, 5, 2, 1) == 28);
    CHECK(conv_out_dim(224, 7, 0, 2) == 109);
}

TEST_CASE("infer_shapes is idempotent") {
    Graph g = infer_shapes(parse_graph(test::read_file(test::fixture_path("graphs/b1.graph"))));
    Graph g2 = infer_shapes(g);
    for (const auto& l : g.layers) CHECK(g2.shape_of(l.name) == g.shape_of(l.name));
}

TEST_CASE("validate reports add shape mismatch as one violation") {
    const std::string doc =
        "name bad\ninput {\n  name d\n  shape [16, 28, 28]\n}\n"
        "layer {\n  name p\n  kind pool\n  inputs [d]\n  pool max\n  kernel 2\n  stride 2\n}\n"
        "layer {\n  name s\n  kind add\n  inputs [d, p]\n}\noutput s\n";
    Graph g = parse_graph(doc);
    auto violations = validate_graph(g);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].where == "s");
    CHECK(violations[0].message.find("different shapes") != std::string::npos);
}

TEST_CASE("cyclic graphs are reported") {
    Graph g;
    g.name = "cyc";
    g.inputs.push_back({"d", {1, 4, 4}});
    Layer a, b;
    a.name = "a";
    a.kind = LayerKind::relu;
    a.inputs = {"b"};
    b.name = "b";
    b.kind = LayerKind::relu;
    b.inputs = {"a"};
    g.layers = {a, b};
    g.outputs = {"a"};
    auto violations = validate_graph(g);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].message == "graph contains a cycle");
}

TEST_CASE("group constraint violations surface during inference") {
    const std::string doc =
        "name bad\ninput {\n  name d\n  shape [16, 8, 8]\n}\n"
        "layer {\n  name c\n  kind conv\n  inputs [d]\n  out_channels 6\n  kernel [1, 1]\n"
        "  group 3\n}\noutput c\n";
    Graph g = parse_graph(doc);
    CHECK_THROWS_AS(infer_shapes(g), Error);
    CHECK(validate_graph(g).size() == 1);
}

TEST_CASE("non-positive output dimensions are rejected") {
    const std::string doc =
        "name bad\ninput {\n  name d\n  shape [1, 3, 3]\n}\n"
        "layer {\n  name c\n  kind conv\n  inputs [d]\n  out_channels 1\n  kernel [5, 5]\n}\n"
        "output c\n";
    CHECK_THROWS_AS(infer_shapes(parse_graph(doc)), Error);
}

TEST_CASE("parse-serialize-parse is a fixed point on every fixture") {
    for (const char* f : {"a1.graph", "a2.graph", "b1.graph", "c1.graph", "squeezenet.graph",
                          "inception.graph", "residual.graph"}) {
        Graph g = parse_graph(test::read_file(test::fixture_path(std::string("graphs/") + f)));
        std::string s1 = serialize_graph(g);
        Graph g2 = parse_graph(s1);
        CHECK(serialize_graph(g2) == s1);
    }
}
