// Copyright (c) 2026 The xlfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlfuse/cost_model.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "xlfuse/error.hpp"

namespace xlfuse {

std::int64_t transactions_for(std::int64_t elements, const DeviceSpec& device) {
    if (elements <= 0) return 0;
    const std::int64_t bytes = elements * 4;
    return (bytes + device.transaction_bytes - 1) / device.transaction_bytes;
}

std::vector<std::pair<std::string, std::int64_t>> stored_tensors(const Graph& g,
                                                                 const FusionBlock& block) {
    std::vector<std::pair<std::string, std::int64_t>> out;
    if (!block.fused()) {
        for (const auto& m : block.members) out.emplace_back(m, g.shape_of(m).elements());
        return out;
    }
    for (const auto& c : block.consumer_stage) out.emplace_back(c, g.shape_of(c).elements());
    if (block.stores_intermediate)
        for (const auto& p : block.producer_stage) {
            // Only intermediates visible outside the block escape.
            bool escapes = std::find(g.outputs.begin(), g.outputs.end(), p) != g.outputs.end();
            for (const auto& c : g.consumers_of(p)) {
                bool inside = std::find(block.members.begin(), block.members.end(), c) !=
                              block.members.end();
                if (!inside) escapes = true;
            }
            if (escapes) out.emplace_back(p, g.shape_of(p).elements());
        }
    return out;
}

std::int64_t global_store_tx_fused(const Graph& g, const FusionBlock& block,
                                   const DeviceSpec& device) {
    std::int64_t tx = 0;
    for (const auto& [name, elems] : stored_tensors(g, block)) tx += transactions_for(elems, device);
    return tx;
}

std::int64_t global_store_tx_unfused(const Graph& g, const std::vector<std::string>& layers,
                                     const DeviceSpec& device) {
    std::int64_t tx = 0;
    for (const auto& n : layers) tx += transactions_for(g.shape_of(n).elements(), device);
    return tx;
}

int bank_conflict_degree(int stride_words, const DeviceSpec& device) {
    if (stride_words < 1) throw Error(ErrorKind::internal, "stride must be >= 1");
    return static_cast<int>(std::gcd(stride_words, device.banks));
}

int warp_conflict_degree(int pitch_words, int row_words, const DeviceSpec& device) {
    std::vector<std::set<int>> words_per_bank(static_cast<size_t>(device.banks));
    for (int lane = 0; lane < device.warp_size; ++lane) {
        int y = row_words > 0 ? lane / row_words : 0;
        int x = row_words > 0 ? lane % row_words : lane;
        int addr = y * pitch_words + x;
        words_per_bank[static_cast<size_t>(addr % device.banks)].insert(addr);
    }
    size_t degree = 1;
    for (const auto& s : words_per_bank) degree = std::max(degree, s.size());
    return static_cast<int>(degree);
}

namespace {

struct FusedTraffic {
    std::int64_t global_load_elements = 0;
    std::int64_t global_store_elements = 0;
    std::int64_t shared_load_ops = 0;
    std::int64_t shared_store_ops = 0;
    std::int64_t macs = 0;
    std::int64_t macs_redundant = 0;
    std::int64_t elementwise_ops = 0;
};

FusedTraffic fused_traffic(const Graph& g, const FusionBlock& block, const TilingPlan& plan) {
    FusedTraffic t;
    t.macs_redundant = plan.redundant_macs;

    // Producer stage: staged input regions from global, results to shared.
    std::set<std::string> staged_keys;
    for (size_t pi = 0; pi < block.producer_stage.size(); ++pi) {
        const Layer* p = g.find_layer(block.producer_stage[pi]);
        const ConvParams& pc = *p->conv;
        const TensorShape in_shape = g.shape_of(p->inputs[0]);
        const SharedLayout& buf = plan.buffers[pi];

        ConvParams pseudo;
        pseudo.kernel_h = buf.data_h() - (plan.geometry.tile_h - 1) * buf.stride;
        pseudo.kernel_w = buf.data_w() - (plan.geometry.tile_w - 1) * buf.stride;
        pseudo.pad = buf.border;
        pseudo.stride = buf.stride;
        pseudo.out_channels = pc.out_channels;
        std::vector<ConvParams> chain{pc, pseudo};
        HaloExtent h = halo_extent(plan.geometry.tile_h, plan.geometry.tile_w, chain);
        h.stages[0].channels_out = pc.out_channels;
        h.stages[0].macs_per_cell = pc.macs_per_output();
        RedundancyReport rr = redundancy_count(plan.geometry, h, in_shape);

        std::string key = p->inputs[0] + "/" + std::to_string(pc.kernel_h) + "x" +
                          std::to_string(pc.kernel_w) + "/" + std::to_string(pc.stride) + "/" +
                          std::to_string(pc.pad);
        if (!staged_keys.count(key)) {
            staged_keys.insert(key);
            t.global_load_elements += rr.staged_input_elements;
        }
        t.shared_store_ops += rr.intermediate_staged_cells;
        t.macs += rr.intermediate_staged_cells * pc.macs_per_output();
    }

    // Consumer stage: window reads from shared, outputs to global.
    for (const auto& cname : block.consumer_stage) {
        const Layer* c = g.find_layer(cname);
        const TensorShape out = g.shape_of(cname);
        if (c->kind == LayerKind::add) {
            t.shared_load_ops += 2 * out.elements();
            t.elementwise_ops += out.elements();
        } else {
            const ConvParams& cc = *c->conv;
            const TensorShape interm = g.shape_of(c->inputs[0]);
            t.shared_load_ops += static_cast<std::int64_t>(out.height) * out.width * cc.kernel_h *
                                 cc.kernel_w * interm.channels;
            t.macs += out.elements() * cc.macs_per_output();
        }
    }

    for (const auto& [name, elems] : stored_tensors(g, block)) t.global_store_elements += elems;
    return t;
}

} // namespace

BlockCost block_cost(const Graph& g, const FusionBlock& block, const TilingPlan& plan,
                     const DeviceSpec& device) {
    FusedTraffic t = fused_traffic(g, block, plan);
    BlockCost c;
    c.macs = t.macs;
    c.macs_redundant = t.macs_redundant;
    c.flops = 2 * t.macs + t.elementwise_ops;
    c.global_load_elements = t.global_load_elements;
    c.global_store_elements = t.global_store_elements;
    c.shared_load_ops = t.shared_load_ops;
    c.shared_store_ops = t.shared_store_ops;
    int degree = 1;
    for (const auto& b : plan.buffers)
        degree = std::max(degree, warp_conflict_degree(b.pitch(), plan.block_dim_x, device));
    c.conflict_degree = degree;
    c.blocks_per_sm = check_resources(plan, device).blocks_per_sm;
    return c;
}

CounterReport fused_counter_report(const Graph& g, const FusionBlock& block,
                                   const TilingPlan& plan, const DeviceSpec& device) {
    FusedTraffic t = fused_traffic(g, block, plan);
    CounterReport r;
    r.global_load_tx = transactions_for(t.global_load_elements, device);
    r.global_store_tx = global_store_tx_fused(g, block, device);
    r.shared_load_ops = t.shared_load_ops;
    r.shared_store_ops = t.shared_store_ops;
    r.ldst_executed = t.global_load_elements + t.global_store_elements + t.shared_load_ops +
                      t.shared_store_ops;
    int degree = 1;
    for (const auto& b : plan.buffers)
        degree = std::max(degree, warp_conflict_degree(b.pitch(), plan.block_dim_x, device));
    r.bank_conflict_degree = degree;
    r.macs_total = t.macs;
    r.macs_redundant = t.macs_redundant;
    return r;
}

double estimate_block_time(const BlockCost& cost, const DeviceSpec& device) {
    double occupancy_scale = std::min(1.0, cost.blocks_per_sm / 2.0);
    if (occupancy_scale <= 0) occupancy_scale = 0.5 / device.max_blocks_per_sm;
    double compute = static_cast<double>(cost.flops) / (device.peak_flops * occupancy_scale);
    double global_bytes = static_cast<double>(cost.global_load_elements + cost.global_store_elements) * 4;
    double shared_bytes = static_cast<double>(cost.shared_load_ops + cost.shared_store_ops) * 4;
    double memory = global_bytes / device.global_bw +
                    shared_bytes * cost.conflict_degree / device.shared_bw;
    return std::max(compute, memory);
}

double estimate_layer_time(const Graph& g, const Layer& layer, const DeviceSpec& device) {
    std::int64_t loads = 0, stores = 0, flops = 0;
    const TensorShape out = g.shape_of(layer.name);
    stores = out.elements();
    switch (layer.kind) {
    case LayerKind::conv: {
        loads = g.shape_of(layer.inputs[0]).elements();
        flops = 2 * out.elements() * layer.conv->macs_per_output();
        break;
    }
    case LayerKind::pool: {
        loads = g.shape_of(layer.inputs[0]).elements();
        flops = out.elements() * layer.pool->kernel * layer.pool->kernel;
        break;
    }
    case LayerKind::relu:
        loads = g.shape_of(layer.inputs[0]).elements();
        flops = out.elements();
        break;
    case LayerKind::add:
        loads = 2 * out.elements();
        flops = out.elements();
        break;
    case LayerKind::concat:
        loads = out.elements();
        break;
    }
    double compute = static_cast<double>(flops) / device.peak_flops;
    double memory = static_cast<double>(loads + stores) * 4 / device.global_bw;
    return std::max(compute, memory);
}

double estimate_unfused_time(const Graph& g, const std::vector<std::string>& layers,
                             const DeviceSpec& device) {
    double total = 0;
    for (const auto& n : layers) {
        const Layer* l = g.find_layer(n);
        if (!l) throw Error(ErrorKind::internal, "estimate_unfused_time: unknown layer '" + n + "'");
        total += estimate_layer_time(g, *l, device);
    }
    return total;
}

TuneResult tune(const Graph& g, const FusionBlock& block, const DeviceSpec& device,
                const PlanOptions& opts) {
    if (!block.fused())
        throw Error(ErrorKind::internal, "tune: unfused blocks have no tiling plan");
    const TensorShape out = g.shape_of(block.consumer_stage[0]);
    std::vector<TileGeometry> geos = enumerate_tilings(out.height, out.width);
    if (geos.empty()) geos.push_back(full_tile_geometry(out.height, out.width));

    struct Eval {
        TuneCandidate cand;
        TilingPlan plan;
    };
    std::vector<Eval> evals(geos.size());

#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < static_cast<long>(geos.size()); ++i) {
        Eval& e = evals[static_cast<size_t>(i)];
        const TileGeometry& geo = geos[static_cast<size_t>(i)];
        e.cand.geometry = geo;
        try {
            e.plan = plan_tiling(g, block, geo, device, opts);
            BlockCost cost = block_cost(g, block, e.plan, device);
            e.cand.feasible = true;
            e.cand.time_s = estimate_block_time(cost, device);
            e.cand.shared_bytes = e.plan.shared_bytes;
        } catch (const std::exception& err) {
            e.cand.feasible = false;
            e.cand.reason = err.what();
        }
    }

    // Deterministic argmin regardless of evaluation order.
    const Eval* best = nullptr;
    for (const Eval& e : evals) {
        if (!e.cand.feasible) continue;
        if (!best) { best = &e; continue; }
        const TileGeometry& a = e.cand.geometry;
        const TileGeometry& b = best->cand.geometry;
        auto key = [](const TuneCandidate& c, const TileGeometry& geo) {
            return std::make_tuple(c.time_s, c.shared_bytes,
                                   -static_cast<std::int64_t>(geo.grid_h) * geo.grid_w,
                                   geo.tile_h, geo.tile_w, geo.grid_h, geo.grid_w);
        };
        if (key(e.cand, a) < key(best->cand, b)) best = &e;
    }

    TuneResult result;
    for (const Eval& e : evals) result.candidates.push_back(e.cand);
    if (!best) {
        std::ostringstream os;
        os << "block " << block.id << ": no feasible tile geometry;";
        for (const Eval& e : evals)
            os << " (" << e.cand.geometry.tile_h << "x" << e.cand.geometry.tile_w << ": "
               << e.cand.reason << ")";
        throw Error(ErrorKind::infeasible, os.str());
    }
    result.best = best->plan;
    return result;
}

} // namespace xlfuse
