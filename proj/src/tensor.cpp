// Copyright (c) 2026 The xlfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlfuse/tensor.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "xlfuse/error.hpp"
#include "xlfuse/textdoc.hpp"

namespace xlfuse {

namespace td = textdoc;

SeededStream::SeededStream(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

float SeededStream::next() {
    // splitmix64; top 24 bits give a uniform float in [0, 1).
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z = z ^ (z >> 31);
    return static_cast<float>(z >> 40) * (1.0f / 16777216.0f) - 0.5f;
}

std::map<std::string, Tensor> seeded_inputs(const Graph& g, std::uint64_t seed) {
    SeededStream rng(seed);
    std::map<std::string, Tensor> out;
    for (const auto& in : g.inputs) {
        Tensor t(in.shape);
        for (auto& v : t.data) v = rng.next();
        out.emplace(in.name, std::move(t));
    }
    return out;
}

WeightSet seeded_weights(const Graph& g, std::uint64_t seed) {
    // Separate stream so weights do not depend on input shapes.
    SeededStream rng(seed ^ 0xabcdef1234567890ULL);
    WeightSet w;
    for (const auto& l : g.layers) {
        if (l.kind != LayerKind::conv) continue;
        const ConvParams& c = *l.conv;
        if (c.in_channels <= 0)
            throw Error(ErrorKind::internal,
                        "seeded_weights: run infer_shapes first (layer '" + l.name + "')");
        LayerWeights lw;
        lw.filter.resize(static_cast<size_t>(c.weight_count()));
        for (auto& v : lw.filter) v = rng.next();
        if (c.has_bias) {
            lw.bias.resize(static_cast<size_t>(c.out_channels));
            for (auto& v : lw.bias) v = rng.next();
        }
        w.by_layer.emplace(l.name, std::move(lw));
    }
    return w;
}

void save_weights(const std::string& path, const Graph& g, const WeightSet& w) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write '" + path + "'");

    td::Document manifest;
    manifest.entries.push_back(td::scalar("graph", g.name));
    for (const auto& l : g.layers) {
        if (l.kind != LayerKind::conv) continue;
        auto it = w.by_layer.find(l.name);
        if (it == w.by_layer.end())
            throw Error(ErrorKind::internal, "save_weights: no weights for '" + l.name + "'");
        const ConvParams& c = *l.conv;
        out.write(reinterpret_cast<const char*>(it->second.filter.data()),
                  static_cast<std::streamsize>(it->second.filter.size() * 4));
        td::Node fn = td::section("tensor");
        fn.children.push_back(td::scalar("layer", l.name));
        fn.children.push_back(td::scalar("role", std::string("filter")));
        fn.children.push_back(td::int_list(
            "dims", {c.out_channels, c.in_channels / c.group, c.kernel_h, c.kernel_w}));
        manifest.entries.push_back(std::move(fn));
        if (c.has_bias) {
            out.write(reinterpret_cast<const char*>(it->second.bias.data()),
                      static_cast<std::streamsize>(it->second.bias.size() * 4));
            td::Node bn = td::section("tensor");
            bn.children.push_back(td::scalar("layer", l.name));
            bn.children.push_back(td::scalar("role", std::string("bias")));
            bn.children.push_back(td::int_list("dims", {c.out_channels}));
            manifest.entries.push_back(std::move(bn));
        }
    }
    td::write_file(path + ".manifest", td::serialize(manifest));
}

WeightSet load_weights(const std::string& path, const Graph& g) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open '" + path + "'");
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::int64_t expected = 0;
    for (const auto& l : g.layers)
        if (l.kind == LayerKind::conv) expected += l.conv->weight_count() + l.conv->bias_count();
    if (static_cast<std::int64_t>(bytes.size()) != expected * 4)
        throw Error(ErrorKind::validation,
                    "weight file '" + path + "' holds " + std::to_string(bytes.size()) +
                        " bytes, graph '" + g.name + "' needs " + std::to_string(expected * 4));

    WeightSet w;
    size_t off = 0;
    auto take = [&](size_t count) {
        std::vector<float> v(count);
        std::memcpy(v.data(), bytes.data() + off, count * 4);
        off += count * 4;
        return v;
    };
    for (const auto& l : g.layers) {
        if (l.kind != LayerKind::conv) continue;
        const ConvParams& c = *l.conv;
        LayerWeights lw;
        lw.filter = take(static_cast<size_t>(c.weight_count()));
        if (c.has_bias) lw.bias = take(static_cast<size_t>(c.out_channels));
        w.by_layer.emplace(l.name, std::move(lw));
    }
    return w;
}

} // namespace xlfuse
