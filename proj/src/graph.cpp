// Copyright (c) 2026 The xlfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlfuse/graph.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "xlfuse/error.hpp"
#include "xlfuse/textdoc.hpp"

namespace xlfuse {

namespace td = textdoc;

const char* to_string(LayerKind k) {
    switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::pool: return "pool";
    case LayerKind::relu: return "relu";
    case LayerKind::add: return "add";
    case LayerKind::concat: return "concat";
    }
    return "?";
}

const char* to_string(Activation a) {
    return a == Activation::relu ? "relu" : "none";
}

const char* to_string(PoolKind k) {
    return k == PoolKind::max ? "max" : "avg";
}

const Layer* Graph::find_layer(const std::string& n) const {
    for (const auto& l : layers)
        if (l.name == n) return &l;
    return nullptr;
}

Layer* Graph::find_layer(const std::string& n) {
    for (auto& l : layers)
        if (l.name == n) return &l;
    return nullptr;
}

const GraphInput* Graph::find_input(const std::string& n) const {
    for (const auto& i : inputs)
        if (i.name == n) return &i;
    return nullptr;
}

bool Graph::shapes_inferred() const {
    return std::all_of(layers.begin(), layers.end(),
                       [](const Layer& l) { return l.out_shape.has_value(); });
}

TensorShape Graph::shape_of(const std::string& n) const {
    if (const GraphInput* in = find_input(n)) return in->shape;
    const Layer* l = find_layer(n);
    if (!l || !l->out_shape)
        throw Error(ErrorKind::internal, "no inferred shape for '" + n + "'");
    return *l->out_shape;
}

std::vector<std::string> Graph::consumers_of(const std::string& n) const {
    std::vector<std::string> out;
    for (const auto& l : layers)
        for (const auto& in : l.inputs)
            if (in == n) { out.push_back(l.name); break; }
    return out;
}

int conv_out_dim(int in, int kernel, int pad, int stride) {
    return (in + 2 * pad - kernel) / stride + 1;
}

namespace {

LayerKind parse_kind(const td::Node& n) {
    const std::string v = n.as_string();
    if (v == "conv") return LayerKind::conv;
    if (v == "pool") return LayerKind::pool;
    if (v == "relu") return LayerKind::relu;
    if (v == "add") return LayerKind::add;
    if (v == "concat") return LayerKind::concat;
    throw Error(ErrorKind::parse, "unknown layer kind '" + v + "'", n.line);
}

Activation parse_activation(const td::Node& n) {
    const std::string v = n.as_string();
    if (v == "none") return Activation::none;
    if (v == "relu") return Activation::relu;
    throw Error(ErrorKind::parse, "unknown activation '" + v + "'", n.line);
}

TensorShape parse_shape(const td::Node& n) {
    auto xs = n.as_int_list();
    if (xs.size() != 3)
        throw Error(ErrorKind::parse, "shape must be [channels, height, width]", n.line);
    TensorShape s{static_cast<int>(xs[0]), static_cast<int>(xs[1]), static_cast<int>(xs[2])};
    if (s.channels < 1 || s.height < 1 || s.width < 1)
        throw Error(ErrorKind::parse, "shape dimensions must be >= 1", n.line);
    return s;
}

ConvParams parse_conv_params(const td::Node& sec) {
    ConvParams p;
    p.out_channels = static_cast<int>(sec.require("out_channels").as_int());
    auto k = sec.require("kernel").as_int_list();
    if (k.size() == 1) {
        p.kernel_h = p.kernel_w = static_cast<int>(k[0]);
    } else if (k.size() == 2) {
        p.kernel_h = static_cast<int>(k[0]);
        p.kernel_w = static_cast<int>(k[1]);
    } else {
        throw Error(ErrorKind::parse, "conv kernel must be [kh, kw]", sec.line);
    }
    p.pad = static_cast<int>(sec.get_int("pad", 0));
    p.stride = static_cast<int>(sec.get_int("stride", 1));
    p.group = static_cast<int>(sec.get_int("group", 1));
    p.has_bias = sec.get_bool("bias", true);
    if (const td::Node* a = sec.find("activation")) p.activation = parse_activation(*a);
    if (p.out_channels < 1)
        throw Error(ErrorKind::parse, "out_channels must be >= 1", sec.line);
    if (p.kernel_h < 1 || p.kernel_w < 1)
        throw Error(ErrorKind::parse, "kernel dimensions must be >= 1", sec.line);
    if (p.stride < 1) throw Error(ErrorKind::parse, "stride must be >= 1", sec.line);
    if (p.pad < 0) throw Error(ErrorKind::parse, "pad must be >= 0", sec.line);
    if (p.group < 1) throw Error(ErrorKind::parse, "group must be >= 1", sec.line);
    return p;
}

PoolParams parse_pool_params(const td::Node& sec) {
    PoolParams p;
    const std::string kind = sec.require("pool").as_string();
    if (kind == "max") p.kind = PoolKind::max;
    else if (kind == "avg") p.kind = PoolKind::avg;
    else throw Error(ErrorKind::parse, "pool kind must be max or avg", sec.line);
    p.kernel = static_cast<int>(sec.require("kernel").as_int());
    p.stride = static_cast<int>(sec.get_int("stride", 1));
    p.pad = static_cast<int>(sec.get_int("pad", 0));
    if (p.kernel < 1 || p.stride < 1 || p.pad < 0)
        throw Error(ErrorKind::parse, "bad pool parameters", sec.line);
    return p;
}

// Structural checks shared by parse_graph (throwing) and validate_graph
// (collecting). Returns all violations found.
std::vector<Violation> structural_violations(const Graph& g) {
    std::vector<Violation> out;
    std::set<std::string> names;
    for (const auto& in : g.inputs) {
        if (!names.insert(in.name).second)
            out.push_back({in.name, "duplicate name"});
    }
    for (const auto& l : g.layers) {
        if (!names.insert(l.name).second)
            out.push_back({l.name, "duplicate layer name"});
    }
    for (const auto& l : g.layers) {
        for (const auto& in : l.inputs) {
            if (!g.find_input(in) && !g.find_layer(in))
                out.push_back({l.name, "references missing producer '" + in + "'"});
        }
        size_t arity = l.inputs.size();
        switch (l.kind) {
        case LayerKind::conv:
        case LayerKind::pool:
        case LayerKind::relu:
            if (arity != 1)
                out.push_back({l.name, std::string(to_string(l.kind)) + " requires exactly 1 input"});
            break;
        case LayerKind::add:
            if (arity != 2) out.push_back({l.name, "add requires exactly 2 inputs"});
            break;
        case LayerKind::concat:
            if (arity < 2) out.push_back({l.name, "concat requires >= 2 inputs"});
            break;
        }
        if (l.kind == LayerKind::conv && !l.conv)
            out.push_back({l.name, "conv layer is missing conv parameters"});
        if (l.kind == LayerKind::pool && !l.pool)
            out.push_back({l.name, "pool layer is missing pool parameters"});
        if (l.conv && l.conv->out_channels % l.conv->group != 0)
            out.push_back({l.name, "out_channels not divisible by group"});
    }
    for (const auto& o : g.outputs) {
        if (!g.find_layer(o) && !g.find_input(o))
            out.push_back({o, "output references missing layer"});
    }

    // Cycle detection: Kahn's algorithm over resolvable references.
    std::unordered_map<std::string, int> indeg;
    for (const auto& l : g.layers) {
        int d = 0;
        for (const auto& in : l.inputs)
            if (g.find_layer(in)) ++d;
        indeg[l.name] = d;
    }
    std::vector<const Layer*> ready;
    for (const auto& l : g.layers)
        if (indeg[l.name] == 0) ready.push_back(&l);
    size_t seen = 0;
    for (size_t i = 0; i < ready.size(); ++i) {
        ++seen;
        for (const auto& l : g.layers) {
            bool consumes = std::find(l.inputs.begin(), l.inputs.end(), ready[i]->name) != l.inputs.end();
            if (consumes && --indeg[l.name] == 0) ready.push_back(&l);
        }
    }
    if (seen != g.layers.size())
        out.push_back({"", "graph contains a cycle"});
    return out;
}

} // namespace

Graph parse_graph(const std::string& text) {
    td::Document doc = td::parse(text);
    Graph g;
    g.name = doc.require("name").as_string();
    for (const td::Node* in : doc.find_all("input")) {
        GraphInput gi;
        gi.name = in->require("name").as_string();
        gi.shape = parse_shape(in->require("shape"));
        g.inputs.push_back(std::move(gi));
    }
    if (g.inputs.empty())
        throw Error(ErrorKind::parse, "graph declares no inputs");
    for (const td::Node* ln : doc.find_all("layer")) {
        Layer l;
        l.line = ln->line;
        l.name = ln->require("name").as_string();
        l.kind = parse_kind(ln->require("kind"));
        l.inputs = ln->require("inputs").values;
        if (l.kind == LayerKind::conv) l.conv = parse_conv_params(*ln);
        if (l.kind == LayerKind::pool) l.pool = parse_pool_params(*ln);
        g.layers.push_back(std::move(l));
    }
    for (const td::Node* on : doc.find_all("output"))
        g.outputs.push_back(on->as_string());
    if (g.outputs.empty())
        throw Error(ErrorKind::parse, "graph declares no outputs");

    auto violations = structural_violations(g);
    if (!violations.empty()) {
        const Layer* l = g.find_layer(violations[0].where);
        throw Error(ErrorKind::parse,
                    (violations[0].where.empty() ? "" : violations[0].where + ": ") + violations[0].message,
                    l ? l->line : 0);
    }
    return g;
}

Graph load_graph(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_graph(ss.str());
}

std::string serialize_graph(const Graph& g) {
    td::Document doc;
    doc.entries.push_back(td::scalar("name", g.name));
    for (const auto& in : g.inputs) {
        td::Node sec = td::section("input");
        sec.children.push_back(td::scalar("name", in.name));
        sec.children.push_back(td::int_list("shape", {in.shape.channels, in.shape.height, in.shape.width}));
        doc.entries.push_back(std::move(sec));
    }
    for (const auto& l : g.layers) {
        td::Node sec = td::section("layer");
        sec.children.push_back(td::scalar("name", l.name));
        sec.children.push_back(td::scalar("kind", std::string(to_string(l.kind))));
        sec.children.push_back(td::list("inputs", l.inputs));
        if (l.conv) {
            const ConvParams& c = *l.conv;
            sec.children.push_back(td::scalar("out_channels", static_cast<long long>(c.out_channels)));
            sec.children.push_back(td::int_list("kernel", {c.kernel_h, c.kernel_w}));
            sec.children.push_back(td::scalar("pad", static_cast<long long>(c.pad)));
            sec.children.push_back(td::scalar("stride", static_cast<long long>(c.stride)));
            sec.children.push_back(td::scalar("group", static_cast<long long>(c.group)));
            sec.children.push_back(td::scalar("bias", std::string(c.has_bias ? "true" : "false")));
            sec.children.push_back(td::scalar("activation", std::string(to_string(c.activation))));
        }
        if (l.pool) {
            const PoolParams& p = *l.pool;
            sec.children.push_back(td::scalar("pool", std::string(to_string(p.kind))));
            sec.children.push_back(td::scalar("kernel", static_cast<long long>(p.kernel)));
            sec.children.push_back(td::scalar("stride", static_cast<long long>(p.stride)));
            sec.children.push_back(td::scalar("pad", static_cast<long long>(p.pad)));
        }
        doc.entries.push_back(std::move(sec));
    }
    for (const auto& o : g.outputs) doc.entries.push_back(td::scalar("output", o));
    return td::serialize(doc);
}

std::vector<const Layer*> topo_order(const Graph& g) {
    std::unordered_map<std::string, int> indeg;
    for (const auto& l : g.layers) {
        int d = 0;
        for (const auto& in : l.inputs)
            if (g.find_layer(in)) ++d;
        indeg[l.name] = d;
    }
    std::vector<const Layer*> order;
    std::vector<bool> emitted(g.layers.size(), false);
    // Stable Kahn: repeatedly take the first file-order layer with indegree 0.
    for (size_t pass = 0; pass < g.layers.size(); ++pass) {
        bool progressed = false;
        for (size_t i = 0; i < g.layers.size(); ++i) {
            if (emitted[i] || indeg[g.layers[i].name] != 0) continue;
            emitted[i] = true;
            order.push_back(&g.layers[i]);
            for (const auto& l : g.layers) {
                bool consumes = std::find(l.inputs.begin(), l.inputs.end(), g.layers[i].name) != l.inputs.end();
                if (consumes) --indeg[l.name];
            }
            progressed = true;
            break;
        }
        if (!progressed) break;
    }
    if (order.size() != g.layers.size())
        throw Error(ErrorKind::validation, "graph contains a cycle");
    return order;
}

namespace {

// Shape rule for a single layer; producer shapes must be available.
TensorShape infer_one(const Graph& g, const Layer& l,
                      const std::unordered_map<std::string, TensorShape>& shapes,
                      ConvParams* resolved_conv) {
    auto shape_in = [&](const std::string& n) -> TensorShape {
        if (const GraphInput* gi = g.find_input(n)) return gi->shape;
        auto it = shapes.find(n);
        if (it == shapes.end())
            throw Error(ErrorKind::validation, l.name + ": producer '" + n + "' has no shape", l.line);
        return it->second;
    };

    switch (l.kind) {
    case LayerKind::conv: {
        TensorShape in = shape_in(l.inputs[0]);
        ConvParams c = *l.conv;
        c.in_channels = in.channels;
        if (c.in_channels % c.group != 0)
            throw Error(ErrorKind::validation,
                        l.name + ": input channels " + std::to_string(c.in_channels) +
                            " not divisible by group " + std::to_string(c.group), l.line);
        if (c.out_channels % c.group != 0)
            throw Error(ErrorKind::validation,
                        l.name + ": out_channels not divisible by group", l.line);
        int h = conv_out_dim(in.height, c.kernel_h, c.pad, c.stride);
        int w = conv_out_dim(in.width, c.kernel_w, c.pad, c.stride);
        if (h < 1 || w < 1)
            throw Error(ErrorKind::validation,
                        l.name + ": non-positive output dimension (" + std::to_string(h) + "x" +
                            std::to_string(w) + ")", l.line);
        if (resolved_conv) *resolved_conv = c;
        return {c.out_channels, h, w};
    }
    case LayerKind::pool: {
        TensorShape in = shape_in(l.inputs[0]);
        const PoolParams& p = *l.pool;
        int h = conv_out_dim(in.height, p.kernel, p.pad, p.stride);
        int w = conv_out_dim(in.width, p.kernel, p.pad, p.stride);
        if (h < 1 || w < 1)
            throw Error(ErrorKind::validation, l.name + ": non-positive output dimension", l.line);
        return {in.channels, h, w};
    }
    case LayerKind::relu:
        return shape_in(l.inputs[0]);
    case LayerKind::add: {
        TensorShape a = shape_in(l.inputs[0]);
        TensorShape b = shape_in(l.inputs[1]);
        if (!(a == b))
            throw Error(ErrorKind::validation, l.name + ": add inputs have different shapes", l.line);
        return a;
    }
    case LayerKind::concat: {
        TensorShape first = shape_in(l.inputs[0]);
        int channels = 0;
        for (const auto& in : l.inputs) {
            TensorShape s = shape_in(in);
            if (s.height != first.height || s.width != first.width)
                throw Error(ErrorKind::validation,
                            l.name + ": concat inputs differ in height/width", l.line);
            channels += s.channels;
        }
        return {channels, first.height, first.width};
    }
    }
    throw Error(ErrorKind::internal, "unreachable");
}

} // namespace

Graph infer_shapes(const Graph& g) {
    Graph out = g;
    std::unordered_map<std::string, TensorShape> shapes;
    for (const Layer* l : topo_order(out)) {
        ConvParams resolved;
        TensorShape s = infer_one(out, *l, shapes, l->conv ? &resolved : nullptr);
        shapes[l->name] = s;
        Layer* mut = out.find_layer(l->name);
        mut->out_shape = s;
        if (mut->conv) mut->conv = resolved;
    }
    return out;
}

std::vector<Violation> validate_graph(const Graph& g) {
    std::vector<Violation> out = structural_violations(g);
    bool cyclic = std::any_of(out.begin(), out.end(), [](const Violation& v) {
        return v.message == "graph contains a cycle";
    });
    if (cyclic || !out.empty()) {
        // Shape checks below assume resolvable producers; only run them
        // when the structure is sound enough to walk.
        bool walkable = !cyclic &&
            std::none_of(out.begin(), out.end(), [](const Violation& v) {
                return v.message.find("missing producer") != std::string::npos;
            });
        if (!walkable) return out;
    }

    std::unordered_map<std::string, TensorShape> shapes;
    for (const Layer* l : topo_order(g)) {
        try {
            shapes[l->name] = infer_one(g, *l, shapes, nullptr);
        } catch (const Error& e) {
            out.push_back({l->name, e.what()});
            // Keep walking: give the layer a placeholder so downstream
            // checks report their own violations instead of cascading.
            if (!l->inputs.empty()) {
                auto it = shapes.find(l->inputs[0]);
                if (const GraphInput* gi = g.find_input(l->inputs[0]))
                    shapes[l->name] = gi->shape;
                else if (it != shapes.end())
                    shapes[l->name] = it->second;
                else
                    shapes[l->name] = {1, 1, 1};
            } else {
                shapes[l->name] = {1, 1, 1};
            }
        }
    }
    return out;
}

} // namespace xlfuse
