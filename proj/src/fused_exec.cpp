// Copyright (c) 2026 The xlfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlfuse/fused_exec.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "xlfuse/error.hpp"

namespace xlfuse {

namespace {

struct StageCtx {
    const Layer* layer = nullptr;
    ConvParams conv;
    const Tensor* input = nullptr; // producer input (global)
    const LayerWeights* weights = nullptr;
    TensorShape out_shape;
    bool counts_staging = true; // false when a merge sibling shares the staged region
};

// Buffer region origin for a tile starting at output row/col `o`.
inline int region_base(int o, const SharedLayout& buf) { return o * buf.stride - buf.border; }

} // namespace

CounterReport run_fused_block(const Graph& g, const FusionBlock& block, const TilingPlan& plan,
                              const DeviceSpec& device, std::map<std::string, Tensor>& values,
                              const WeightSet& w, const SimOptions& opts) {
    if (!block.fused())
        throw Error(ErrorKind::internal, "run_fused_block: block is not fused");
    if (plan.block_id != block.id || plan.producers != block.producer_stage ||
        plan.consumers != block.consumer_stage)
        throw Error(ErrorKind::validation,
                    "plan/" + plan.block_id + " does not match block " + block.id);

    std::vector<StageCtx> producers;
    std::set<std::string> staged_keys;
    for (const auto& name : block.producer_stage) {
        StageCtx s;
        s.layer = g.find_layer(name);
        s.conv = *s.layer->conv;
        auto vi = values.find(s.layer->inputs[0]);
        if (vi == values.end())
            throw Error(ErrorKind::internal, "missing input tensor '" + s.layer->inputs[0] + "'");
        s.input = &vi->second;
        auto wi = w.by_layer.find(name);
        if (wi == w.by_layer.end())
            throw Error(ErrorKind::internal, "missing weights for '" + name + "'");
        s.weights = &wi->second;
        s.out_shape = g.shape_of(name);
        std::string key = s.layer->inputs[0] + "/" + std::to_string(s.conv.kernel_h) + "x" +
                          std::to_string(s.conv.kernel_w) + "/" + std::to_string(s.conv.stride) +
                          "/" + std::to_string(s.conv.pad);
        s.counts_staging = !staged_keys.count(key);
        staged_keys.insert(key);
        producers.push_back(s);
    }

    std::vector<StageCtx> consumers;
    for (const auto& name : block.consumer_stage) {
        StageCtx s;
        s.layer = g.find_layer(name);
        if (s.layer->kind == LayerKind::conv) {
            s.conv = *s.layer->conv;
            auto wi = w.by_layer.find(name);
            if (wi == w.by_layer.end())
                throw Error(ErrorKind::internal, "missing weights for '" + name + "'");
            s.weights = &wi->second;
        }
        s.out_shape = g.shape_of(name);
        consumers.push_back(s);
    }

    const TensorShape out_shape = consumers[0].out_shape;
    const TileGeometry& geo = plan.geometry;

    // Output tensors (disjoint tile writes land directly in them).
    // Producers escape only when stored_tensors says their intermediate
    // is externally visible.
    std::set<std::string> escaping_names;
    for (const auto& [name, elems] : stored_tensors(g, block))
        if (std::find(block.consumer_stage.begin(), block.consumer_stage.end(), name) ==
            block.consumer_stage.end())
            escaping_names.insert(name);

    for (const auto& c : consumers) values.insert_or_assign(c.layer->name, Tensor(c.out_shape));
    for (const auto& p : producers)
        if (escaping_names.count(p.layer->name))
            values.insert_or_assign(p.layer->name, Tensor(p.out_shape));

    std::vector<Tensor*> outs;
    for (const auto& c : consumers) outs.push_back(&values.at(c.layer->name));
    std::vector<Tensor*> escape_outs(producers.size(), nullptr);
    for (size_t i = 0; i < producers.size(); ++i)
        if (escaping_names.count(producers[i].layer->name))
            escape_outs[i] = &values.at(producers[i].layer->name);

    const int total_tiles = geo.grid_h * geo.grid_w;
    std::int64_t ld_g = 0, st_g = 0, ld_s = 0, st_s = 0, macs = 0;

#pragma omp parallel for schedule(static) reduction(+ : ld_g, st_g, ld_s, st_s, macs)
    for (int linear = 0; linear < total_tiles; ++linear) {
        const int tile_idx = opts.reverse_tiles ? total_tiles - 1 - linear : linear;
        const int ty = tile_idx / geo.grid_w;
        const int tx = tile_idx % geo.grid_w;
        const int oy0 = ty * geo.tile_h;
        const int ox0 = tx * geo.tile_w;
        const int th = std::min(geo.tile_h, out_shape.height - oy0);
        const int tw = std::min(geo.tile_w, out_shape.width - ox0);
        if (th <= 0 || tw <= 0) continue;

        // Staged region extent for this (possibly clipped) tile.
        std::vector<std::vector<float>> buffers(plan.buffers.size());
        for (size_t bi = 0; bi < plan.buffers.size(); ++bi) {
            const SharedLayout& buf = plan.buffers[bi];
            const StageCtx& p = producers[bi];
            const int lead = buf.border;
            const int trail_h = buf.data_h() - (geo.tile_h - 1) * buf.stride - lead;
            const int trail_w = buf.data_w() - (geo.tile_w - 1) * buf.stride - lead;
            const int ext_h = (th - 1) * buf.stride + lead + trail_h;
            const int ext_w = (tw - 1) * buf.stride + lead + trail_w;
            const int by = region_base(oy0, buf);
            const int bx = region_base(ox0, buf);

            // Whole buffer pre-zeroed: border cells double as the
            // consumer-stage padding.
            buffers[bi].assign(static_cast<size_t>(buf.physical_elements()), 0.0f);
            float* data = buffers[bi].data();
            const int pitch = buf.pitch();
            const int rows = buf.rows();

            const TensorShape in_shape = p.input->shape;
            const int h1 = p.out_shape.height, w1 = p.out_shape.width;
            const int vy0 = std::max(0, by), vy1 = std::min(h1, by + ext_h);
            const int vx0 = std::max(0, bx), vx1 = std::min(w1, bx + ext_w);

            // Global staging loads (region-based, once per staged element).
            if (p.counts_staging) {
                const int ry0 = by * p.conv.stride - p.conv.pad;
                const int rx0 = bx * p.conv.stride - p.conv.pad;
                const int rext_h = (ext_h - 1) * p.conv.stride + p.conv.kernel_h;
                const int rext_w = (ext_w - 1) * p.conv.stride + p.conv.kernel_w;
                const std::int64_t vh = std::max(0, std::min(in_shape.height, ry0 + rext_h) -
                                                        std::max(0, ry0));
                const std::int64_t vw = std::max(0, std::min(in_shape.width, rx0 + rext_w) -
                                                        std::max(0, rx0));
                ld_g += vh * vw * in_shape.channels;
            }

            const ConvParams& c = p.conv;
            const int cin_per_group = c.in_channels / c.group;
            const int cout_per_group = c.out_channels / c.group;
            for (int oc = 0; oc < c.out_channels; ++oc) {
                const int grp = oc / cout_per_group;
                const size_t w_base =
                    static_cast<size_t>(oc) * cin_per_group * c.kernel_h * c.kernel_w;
                const float* filter = p.weights->filter.data();
                for (int y1 = vy0; y1 < vy1; ++y1) {
                    for (int x1 = vx0; x1 < vx1; ++x1) {
                        float acc = 0.0f;
                        for (int ic = 0; ic < cin_per_group; ++ic) {
                            const int in_c = grp * cin_per_group + ic;
                            for (int kh = 0; kh < c.kernel_h; ++kh) {
                                const int iy = y1 * c.stride - c.pad + kh;
                                if (iy < 0 || iy >= in_shape.height) continue;
                                for (int kw = 0; kw < c.kernel_w; ++kw) {
                                    const int ix = x1 * c.stride - c.pad + kw;
                                    if (ix < 0 || ix >= in_shape.width) continue;
                                    acc += filter[w_base +
                                                  (static_cast<size_t>(ic) * c.kernel_h + kh) *
                                                      c.kernel_w + kw] *
                                           p.input->at(in_c, iy, ix);
                                }
                            }
                        }
                        if (c.has_bias) acc += p.weights->bias[static_cast<size_t>(oc)];
                        if (c.activation == Activation::relu) acc = std::max(acc, 0.0f);
                        const size_t idx = (static_cast<size_t>(oc) * rows + (y1 - by)) * pitch +
                                           (x1 - bx);
                        data[idx] = acc;
                        ++st_s;
                    }
                }
            }
            macs += static_cast<std::int64_t>(vy1 - vy0) * (vx1 - vx0) * c.out_channels *
                    c.macs_per_output();

            // Escaping intermediate: each tile stores its ownership slab.
            if (escape_outs[bi]) {
                int own_y0 = oy0 * buf.stride;
                int own_y1 = ty == geo.grid_h - 1 ? h1
                                                  : std::min(h1, (oy0 + geo.tile_h) * buf.stride);
                int own_x0 = ox0 * buf.stride;
                int own_x1 = tx == geo.grid_w - 1 ? w1
                                                  : std::min(w1, (ox0 + geo.tile_w) * buf.stride);
                Tensor* t = escape_outs[bi];
                for (int ch = 0; ch < buf.channels; ++ch)
                    for (int y1 = own_y0; y1 < own_y1; ++y1)
                        for (int x1 = own_x0; x1 < own_x1; ++x1) {
                            t->at(ch, y1, x1) =
                                data[(static_cast<size_t>(ch) * rows + (y1 - by)) * pitch +
                                     (x1 - bx)];
                            ++st_g;
                        }
            }
        }

        // __syncthreads() boundary: producer stage complete for this tile.

        for (size_t ci = 0; ci < consumers.size(); ++ci) {
            const StageCtx& cs = consumers[ci];
            Tensor* out = outs[ci];
            if (cs.layer->kind == LayerKind::add) {
                const SharedLayout& b0 = plan.buffers[0];
                const SharedLayout& b1 = plan.buffers[1];
                const int by = region_base(oy0, b0), bx = region_base(ox0, b0);
                for (int ch = 0; ch < out->shape.channels; ++ch)
                    for (int oy = oy0; oy < oy0 + th; ++oy)
                        for (int ox = ox0; ox < ox0 + tw; ++ox) {
                            const float a =
                                buffers[0][(static_cast<size_t>(ch) * b0.rows() + (oy - by)) *
                                               b0.pitch() + (ox - bx)];
                            const float b =
                                buffers[1][(static_cast<size_t>(ch) * b1.rows() + (oy - by)) *
                                               b1.pitch() + (ox - bx)];
                            out->at(ch, oy, ox) = a + b;
                            ld_s += 2;
                            ++st_g;
                        }
                continue;
            }

            const ConvParams& c = cs.conv;
            const SharedLayout& buf = plan.buffers[0];
            const float* data = buffers[0].data();
            const int pitch = buf.pitch();
            const int rows = buf.rows();
            const int by = region_base(oy0, buf), bx = region_base(ox0, buf);
            const int cin_per_group = c.in_channels / c.group;
            const int cout_per_group = c.out_channels / c.group;
            const int c_interm = producers[0].out_shape.channels;

            for (int oy = oy0; oy < oy0 + th; ++oy) {
                for (int ox = ox0; ox < ox0 + tw; ++ox) {
                    for (int oc = 0; oc < c.out_channels; ++oc) {
                        const int grp = oc / cout_per_group;
                        const size_t w_base =
                            static_cast<size_t>(oc) * cin_per_group * c.kernel_h * c.kernel_w;
                        const float* filter = cs.weights->filter.data();
                        float acc = 0.0f;
                        for (int ic = 0; ic < cin_per_group; ++ic) {
                            const int in_c = grp * cin_per_group + ic;
                            for (int kh = 0; kh < c.kernel_h; ++kh) {
                                const int iy = oy * c.stride - c.pad + kh;
                                for (int kw = 0; kw < c.kernel_w; ++kw) {
                                    const int ix = ox * c.stride - c.pad + kw;
                                    acc += filter[w_base +
                                                  (static_cast<size_t>(ic) * c.kernel_h + kh) *
                                                      c.kernel_w + kw] *
                                           data[(static_cast<size_t>(in_c) * rows + (iy - by)) *
                                                    pitch + (ix - bx)];
                                }
                            }
                        }
                        if (c.has_bias) acc += cs.weights->bias[static_cast<size_t>(oc)];
                        if (c.activation == Activation::relu) acc = std::max(acc, 0.0f);
                        out->at(oc, oy, ox) = acc;
                        ++st_g;
                    }
                    // One staged word feeds every output channel; the load
                    // count is per consuming output pixel.
                    ld_s += static_cast<std::int64_t>(c.kernel_h) * c.kernel_w * c_interm;
                }
            }
            macs += static_cast<std::int64_t>(th) * tw * c.out_channels * c.macs_per_output();
        }
    }

    CounterReport r;
    r.global_load_tx = transactions_for(ld_g, device);
    std::int64_t store_elems = 0;
    r.global_store_tx = 0;
    for (const auto& [name, elems] : stored_tensors(g, block)) {
        r.global_store_tx += transactions_for(elems, device);
        store_elems += elems;
    }
    if (store_elems != st_g)
        throw Error(ErrorKind::internal,
                    "block " + block.id + ": stored " + std::to_string(st_g) +
                        " elements, schedule expects " + std::to_string(store_elems));
    r.shared_load_ops = ld_s;
    r.shared_store_ops = st_s;
    r.ldst_executed = ld_g + store_elems + ld_s + st_s;
    int degree = 1;
    for (const auto& b : plan.buffers)
        degree = std::max(degree, warp_conflict_degree(b.pitch(), plan.block_dim_x, device));
    r.bank_conflict_degree = degree;
    r.macs_total = macs;
    std::int64_t ideal = 0;
    for (const auto& p : producers)
        ideal += p.out_shape.elements() * p.conv.macs_per_output();
    for (const auto& c : consumers)
        if (c.layer->kind == LayerKind::conv)
            ideal += c.out_shape.elements() * c.conv.macs_per_output();
    r.macs_redundant = macs - ideal;
    return r;
}

SimulationResult simulate_graph(const Graph& g, const std::vector<FusionBlock>& blocks,
                                const std::map<std::string, TilingPlan>& plans,
                                const std::map<std::string, Tensor>& inputs, const WeightSet& w,
                                const DeviceSpec& device, const SimOptions& opts) {
    SimulationResult result;
    result.values = inputs;

    // Execute in topological order of each block's first member; every
    // external input of a block is produced strictly earlier.
    std::map<std::string, size_t> topo_index;
    size_t idx = 0;
    for (const Layer* l : topo_order(g)) topo_index[l->name] = idx++;
    std::vector<const FusionBlock*> order;
    for (const auto& b : blocks) order.push_back(&b);
    std::sort(order.begin(), order.end(), [&](const FusionBlock* a, const FusionBlock* b) {
        size_t ia = topo_index.size(), ib = topo_index.size();
        for (const auto& m : a->members) ia = std::min(ia, topo_index.at(m));
        for (const auto& m : b->members) ib = std::min(ib, topo_index.at(m));
        return ia < ib;
    });

    for (const FusionBlock* b : order) {
        if (!b->fused()) {
            const Layer* l = g.find_layer(b->members[0]);
            std::vector<const Tensor*> ins;
            for (const auto& in : l->inputs) ins.push_back(&result.values.at(in));
            result.values.insert_or_assign(l->name, run_layer(g, *l, ins, w));
            continue;
        }
        auto pi = plans.find(b->id);
        if (pi == plans.end())
            throw Error(ErrorKind::validation, "no tiling plan for fused block " + b->id);
        result.block_reports[b->id] =
            run_fused_block(g, *b, pi->second, device, result.values, w, opts);
    }
    return result;
}

} // namespace xlfuse
