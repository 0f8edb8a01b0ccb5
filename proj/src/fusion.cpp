// Copyright (c) 2026 The xlfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlfuse/fusion.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "xlfuse/error.hpp"

namespace xlfuse {

const char* to_string(FusionMode m) {
    switch (m) {
    case FusionMode::straight: return "straight";
    case FusionMode::split: return "split";
    case FusionMode::merge: return "merge";
    case FusionMode::unfused: return "unfused";
    }
    return "?";
}

Graph fold_elementwise(const Graph& g) {
    Graph out = g;
    bool changed = true;
    while (changed) {
        changed = false;
        for (size_t i = 0; i < out.layers.size(); ++i) {
            const Layer& relu = out.layers[i];
            if (relu.kind != LayerKind::relu) continue;
            const std::string producer_name = relu.inputs[0];
            Layer* producer = out.find_layer(producer_name);
            if (!producer || producer->kind != LayerKind::conv) continue;
            // The conv's raw output must not be needed anywhere else.
            if (out.consumers_of(producer_name).size() != 1) continue;

            producer->conv->activation = Activation::relu;
            const std::string relu_name = relu.name;
            out.layers.erase(out.layers.begin() + static_cast<long>(i));
            for (auto& l : out.layers)
                for (auto& in : l.inputs)
                    if (in == relu_name) in = producer_name;
            for (auto& o : out.outputs)
                if (o == relu_name) o = producer_name;
            changed = true;
            break;
        }
    }
    return out;
}

ModeResult classify_mode(const Graph& g, const std::vector<std::string>& candidate) {
    ModeResult r;
    auto reject = [&](const std::string& why) {
        r.accepted = false;
        r.reject_reason = why;
        return r;
    };

    std::set<std::string> inside(candidate.begin(), candidate.end());
    std::vector<const Layer*> layers;
    for (const auto& n : candidate) {
        const Layer* l = g.find_layer(n);
        if (!l) return reject("unknown layer '" + n + "'");
        if (l->kind == LayerKind::pool || l->kind == LayerKind::concat ||
            l->kind == LayerKind::relu)
            return reject("unsupported layer kind '" + std::string(to_string(l->kind)) +
                          "' inside candidate");
        layers.push_back(l);
    }

    // Stage structure: producers are members whose output is read by
    // another member; consumers are the readers.
    std::vector<const Layer*> producers, consumers;
    for (const Layer* l : layers) {
        bool feeds_inside = false;
        for (const auto& c : g.consumers_of(l->name))
            if (inside.count(c)) feeds_inside = true;
        bool reads_inside = false;
        for (const auto& in : l->inputs)
            if (inside.count(in)) reads_inside = true;
        if (feeds_inside && reads_inside)
            return reject("reuse depth would exceed 2 stages");
        if (feeds_inside) producers.push_back(l);
        else if (reads_inside) consumers.push_back(l);
        else if (layers.size() > 1)
            return reject("'" + l->name + "' is disconnected from the candidate");
    }

    if (producers.empty() || consumers.empty())
        return reject("candidate has no producer/consumer pair");
    for (const Layer* p : producers)
        if (p->kind != LayerKind::conv)
            return reject("producer stage must be a conv");

    for (const Layer* p : producers) {
        for (const auto& c : g.consumers_of(p->name))
            if (!inside.count(c)) r.escaping_intermediate = true;
        if (std::find(g.outputs.begin(), g.outputs.end(), p->name) != g.outputs.end())
            r.escaping_intermediate = true;
    }

    if (producers.size() == 1 && consumers.size() == 1 &&
        consumers[0]->kind == LayerKind::conv) {
        r.accepted = true;
        r.mode = FusionMode::straight;
        return r;
    }
    if (producers.size() == 1 && consumers.size() == 2 &&
        consumers[0]->kind == LayerKind::conv && consumers[1]->kind == LayerKind::conv) {
        r.accepted = true;
        r.mode = FusionMode::split;
        return r;
    }
    if (producers.size() == 2 && consumers.size() == 1 &&
        consumers[0]->kind == LayerKind::add) {
        // Both add operands must come from the producer stage.
        for (const auto& in : consumers[0]->inputs)
            if (!inside.count(in))
                return reject("merge consumer reads outside the candidate");
        r.accepted = true;
        r.mode = FusionMode::merge;
        return r;
    }
    return reject("no fusion mode matches " + std::to_string(producers.size()) +
                  " producer(s) feeding " + std::to_string(consumers.size()) + " consumer(s)");
}

namespace {

FusionBlock make_block(int id, FusionMode mode, std::vector<std::string> producers,
                       std::vector<std::string> consumers, bool escaping) {
    FusionBlock b;
    b.id = "b" + std::to_string(id);
    b.mode = mode;
    b.producer_stage = producers;
    b.consumer_stage = consumers;
    b.members = std::move(producers);
    b.members.insert(b.members.end(), consumers.begin(), consumers.end());
    b.stores_intermediate = escaping;
    return b;
}

} // namespace

std::vector<FusionBlock> detect_fusion_blocks(const Graph& g) {
    if (!g.shapes_inferred())
        throw Error(ErrorKind::internal, "detect_fusion_blocks requires inferred shapes");

    std::vector<FusionBlock> blocks;
    std::set<std::string> assigned;
    int next_id = 0;

    auto is_unassigned_conv = [&](const std::string& n) {
        const Layer* l = g.find_layer(n);
        return l && l->kind == LayerKind::conv && !assigned.count(n);
    };
    auto is_graph_output = [&](const std::string& n) {
        return std::find(g.outputs.begin(), g.outputs.end(), n) != g.outputs.end();
    };

    for (const Layer* l : topo_order(g)) {
        if (assigned.count(l->name) || l->kind != LayerKind::conv) continue;
        const auto cons = g.consumers_of(l->name);

        // Merge: this conv and a sibling conv both feed one add.
        bool fused = false;
        for (const auto& cname : cons) {
            const Layer* c = g.find_layer(cname);
            if (!c || c->kind != LayerKind::add || assigned.count(cname)) continue;
            const std::string& a = c->inputs[0];
            const std::string& b = c->inputs[1];
            if (a == b) continue; // one producer, not two
            if (!is_unassigned_conv(a) || !is_unassigned_conv(b)) continue;
            bool escaping = g.consumers_of(a).size() > 1 || g.consumers_of(b).size() > 1 ||
                            is_graph_output(a) || is_graph_output(b);
            blocks.push_back(make_block(next_id++, FusionMode::merge, {a, b}, {cname}, escaping));
            for (const auto& m : blocks.back().members) assigned.insert(m);
            fused = true;
            break;
        }
        if (fused) continue;

        // Split: two unassigned conv consumers sharing this producer.
        std::vector<std::string> eligible;
        for (const auto& cname : cons)
            if (is_unassigned_conv(cname)) eligible.push_back(cname);

        if (eligible.size() >= 2) {
            const Layer* c1 = g.find_layer(eligible[0]);
            const Layer* c2 = g.find_layer(eligible[1]);
            // Consumers must agree on stride and output extent so one tile
            // geometry covers both.
            bool compatible = c1->conv->stride == c2->conv->stride &&
                              c1->out_shape->height == c2->out_shape->height &&
                              c1->out_shape->width == c2->out_shape->width;
            if (compatible) {
                bool escaping = cons.size() > 2 || is_graph_output(l->name);
                blocks.push_back(make_block(next_id++, FusionMode::split, {l->name},
                                            {eligible[0], eligible[1]}, escaping));
                for (const auto& m : blocks.back().members) assigned.insert(m);
                continue;
            }
        }
        if (!eligible.empty()) {
            bool escaping = cons.size() > 1 || is_graph_output(l->name);
            blocks.push_back(make_block(next_id++, FusionMode::straight, {l->name},
                                        {eligible[0]}, escaping));
            for (const auto& m : blocks.back().members) assigned.insert(m);
            continue;
        }
        // Producer with nothing fusable downstream: left for the singleton pass.
    }

    for (const Layer* l : topo_order(g)) {
        if (assigned.count(l->name)) continue;
        FusionBlock b;
        b.id = "b" + std::to_string(next_id++);
        b.mode = FusionMode::unfused;
        b.members = {l->name};
        blocks.push_back(std::move(b));
        assigned.insert(l->name);
    }
    return blocks;
}

std::string block_assignment_report(const Graph& g, const std::vector<FusionBlock>& blocks) {
    std::ostringstream os;
    int straight = 0, split = 0, merge = 0, unfused = 0;
    for (const auto& b : blocks) {
        switch (b.mode) {
        case FusionMode::straight: ++straight; break;
        case FusionMode::split: ++split; break;
        case FusionMode::merge: ++merge; break;
        case FusionMode::unfused: ++unfused; break;
        }
    }
    os << "graph " << g.name << "\n";
    os << "blocks " << blocks.size() << " (straight " << straight << ", split " << split
       << ", merge " << merge << ", unfused " << unfused << ")\n";
    for (const auto& b : blocks) {
        os << "block " << b.id << " mode " << to_string(b.mode);
        if (b.stores_intermediate) os << " stores-intermediate";
        os << "\n";
        for (const auto& m : b.members) {
            const Layer* l = g.find_layer(m);
            os << "  layer " << m << " -> " << b.id << " (" << to_string(b.mode) << ")";
            if (l && l->out_shape)
                os << "  [" << l->out_shape->channels << "," << l->out_shape->height << ","
                   << l->out_shape->width << "]";
            os << "\n";
        }
    }
    return os.str();
}

} // namespace xlfuse
