// Copyright (c) 2026 The xlfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "xlfuse/fusion.hpp"
#include "xlfuse/graph.hpp"

namespace xlfuse::test {

inline std::string fixture_path(const std::string& rel) {
    return std::string(XLFUSE_FIXTURE_DIR) + "/" + rel;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Parse + infer + fold a bundled fixture graph.
inline Graph load_fixture_graph(const std::string& name) {
    Graph g = parse_graph(read_file(fixture_path("graphs/" + name)));
    return fold_elementwise(infer_shapes(g));
}

inline const FusionBlock* find_block_containing(const std::vector<FusionBlock>& blocks,
                                                const std::string& layer) {
    for (const auto& b : blocks)
        for (const auto& m : b.members)
            if (m == layer) return &b;
    return nullptr;
}

} // namespace xlfuse::test
