// Copyright (c) 2026 The xlfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlfuse/tiling.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "xlfuse/error.hpp"
#include "xlfuse/textdoc.hpp"

namespace xlfuse {

namespace td = textdoc;

const char* to_string(WeightPlacement w) {
    return w == WeightPlacement::constant_memory ? "constant_memory" : "readonly_cached_global";
}

HaloExtent halo_extent(int tile_h, int tile_w, const std::vector<ConvParams>& chain) {
    if (chain.empty()) throw Error(ErrorKind::internal, "halo_extent: empty chain");
    if (tile_h < 1 || tile_w < 1) throw Error(ErrorKind::internal, "halo_extent: tile must be >= 1x1");

    HaloExtent out;
    out.stages.resize(chain.size());
    int eh = tile_h, ew = tile_w;
    int sch = 1, scw = 1;
    int offh = 0, offw = 0;
    for (int i = static_cast<int>(chain.size()) - 1; i >= 0; --i) {
        const ConvParams& c = chain[static_cast<size_t>(i)];
        HaloStage& s = out.stages[static_cast<size_t>(i)];
        s.kernel_h = c.kernel_h;
        s.kernel_w = c.kernel_w;
        s.stride = c.stride;
        s.pad = c.pad;
        s.channels_out = c.out_channels;
        s.macs_per_cell = c.in_channels > 0 ? c.macs_per_output() : 0;
        eh = (eh - 1) * c.stride + c.kernel_h;
        ew = (ew - 1) * c.stride + c.kernel_w;
        offh = offh * c.stride - c.pad;
        offw = offw * c.stride - c.pad;
        sch *= c.stride;
        scw *= c.stride;
        s.extent_h = eh;
        s.extent_w = ew;
        s.scale_h = sch;
        s.scale_w = scw;
        s.offset_h = offh;
        s.offset_w = offw;
    }
    return out;
}

namespace {

struct Range {
    int begin = 0, end = 0; // half-open
    int len() const { return std::max(0, end - begin); }
};

Range clip(int start, int extent, int limit) {
    return {std::max(0, start), std::min(limit, start + extent)};
}

// Forward shapes through the chain described by halo stages.
std::vector<std::pair<int, int>> stage_output_dims(const HaloExtent& halo, const TensorShape& input) {
    std::vector<std::pair<int, int>> dims;
    int h = input.height, w = input.width;
    for (const auto& s : halo.stages) {
        h = conv_out_dim(h, s.kernel_h, s.pad, s.stride);
        w = conv_out_dim(w, s.kernel_w, s.pad, s.stride);
        dims.emplace_back(h, w);
    }
    return dims;
}

} // namespace

RedundancyReport redundancy_count(const TileGeometry& geometry, const HaloExtent& halo,
                                  const TensorShape& input) {
    RedundancyReport r;
    const size_t n = halo.stages.size();
    if (n == 0) return r;

    auto dims = stage_output_dims(halo, input);
    const int out_h = dims.back().first;
    const int out_w = dims.back().second;
    if (geometry.tile_h * geometry.grid_h < out_h || geometry.tile_w * geometry.grid_w < out_w)
        throw Error(ErrorKind::internal, "redundancy_count: geometry does not cover the output");

    std::vector<std::vector<std::uint8_t>> marks(n); // marks[i]: input plane of stage i
    marks[0].assign(static_cast<size_t>(input.height) * input.width, 0);
    for (size_t i = 1; i < n; ++i)
        marks[i].assign(static_cast<size_t>(dims[i - 1].first) * dims[i - 1].second, 0);

    std::vector<std::int64_t> staged(n, 0);

    for (int ty = 0; ty < geometry.grid_h; ++ty) {
        for (int tx = 0; tx < geometry.grid_w; ++tx) {
            int oy0 = ty * geometry.tile_h;
            int ox0 = tx * geometry.tile_w;
            int th = std::min(geometry.tile_h, out_h - oy0);
            int tw = std::min(geometry.tile_w, out_w - ox0);
            if (th <= 0 || tw <= 0) continue;

            // Walk backward: region of stage i's input for this tile.
            int sy = oy0, sx = ox0, lh = th, lw = tw;
            for (int i = static_cast<int>(n) - 1; i >= 0; --i) {
                const HaloStage& st = halo.stages[static_cast<size_t>(i)];
                sy = sy * st.stride - st.pad;
                sx = sx * st.stride - st.pad;
                lh = (lh - 1) * st.stride + st.kernel_h;
                lw = (lw - 1) * st.stride + st.kernel_w;
                int plane_h = i == 0 ? input.height : dims[static_cast<size_t>(i) - 1].first;
                int plane_w = i == 0 ? input.width : dims[static_cast<size_t>(i) - 1].second;
                Range rh = clip(sy, lh, plane_h);
                Range rw = clip(sx, lw, plane_w);
                staged[static_cast<size_t>(i)] +=
                    static_cast<std::int64_t>(rh.len()) * rw.len();
                for (int y = rh.begin; y < rh.end; ++y)
                    for (int x = rw.begin; x < rw.end; ++x)
                        marks[static_cast<size_t>(i)][static_cast<size_t>(y) * plane_w + x] = 1;
            }
        }
    }

    auto unique_of = [&](size_t i) {
        std::int64_t u = 0;
        for (auto m : marks[i]) u += m;
        return u;
    };

    r.staged_input_elements = staged[0] * input.channels;
    r.unique_input_elements = unique_of(0) * input.channels;
    r.replicated_elements = r.staged_input_elements - r.unique_input_elements;
    for (size_t i = 1; i < n; ++i) {
        // marks[i] is the output plane of stage i-1: cells recomputed by
        // several tiles cost their stage's MACs again.
        const HaloStage& producer = halo.stages[i - 1];
        std::int64_t spatial_extra = staged[i] - unique_of(i);
        r.intermediate_staged_cells += staged[i] * producer.channels_out;
        r.intermediate_unique_cells += unique_of(i) * producer.channels_out;
        r.recomputed_cells += spatial_extra * producer.channels_out;
        r.redundant_macs += spatial_extra * producer.channels_out * producer.macs_per_cell;
    }
    return r;
}

namespace {

bool is_composite(int n) {
    if (n < 4) return false;
    for (int d = 2; d * d <= n; ++d)
        if (n % d == 0) return true;
    return false;
}

// Per-dimension (tile, grid) candidates per the factor rule.
std::vector<std::pair<int, int>> dim_candidates(int n) {
    std::vector<std::pair<int, int>> out;
    if (n <= 1) return out;
    int basis = n;
    while (!is_composite(basis)) ++basis;
    for (int t = 2; t < basis; ++t) {
        if (basis % t != 0) continue;
        if (t == n) continue;
        int g = basis / t;
        if (g < 2) continue;
        if (t * (g - 1) >= n) continue; // last tile would be empty
        out.emplace_back(t, g);
    }
    return out;
}

} // namespace

std::vector<TileGeometry> enumerate_tilings(int out_h, int out_w) {
    std::vector<TileGeometry> out;
    if (out_h == out_w) {
        for (auto [t, g] : dim_candidates(out_h)) {
            TileGeometry geo;
            geo.tile_h = geo.tile_w = t;
            geo.grid_h = geo.grid_w = g;
            out.push_back(geo);
        }
        return out;
    }
    auto hs = dim_candidates(out_h);
    auto ws = dim_candidates(out_w);
    if (hs.empty()) hs.emplace_back(out_h, 1);
    if (ws.empty()) ws.emplace_back(out_w, 1);
    for (auto [th, gh] : hs) {
        for (auto [tw, gw] : ws) {
            if (gh == 1 && gw == 1) continue; // that is the full-tile fallback
            TileGeometry geo;
            geo.tile_h = th;
            geo.grid_h = gh;
            geo.tile_w = tw;
            geo.grid_w = gw;
            out.push_back(geo);
        }
    }
    return out;
}

TileGeometry full_tile_geometry(int out_h, int out_w) {
    TileGeometry geo;
    geo.tile_h = out_h;
    geo.tile_w = out_w;
    geo.grid_h = geo.grid_w = 1;
    return geo;
}

namespace {

struct StageInfo {
    const Layer* layer = nullptr;
    ConvParams conv; // resolved (in_channels filled)
    TensorShape in_shape;
    TensorShape out_shape;
};

StageInfo stage_info(const Graph& g, const std::string& name) {
    const Layer* l = g.find_layer(name);
    if (!l) throw Error(ErrorKind::internal, "plan_tiling: unknown layer '" + name + "'");
    StageInfo s;
    s.layer = l;
    if (l->conv) s.conv = *l->conv;
    s.in_shape = g.shape_of(l->inputs[0]);
    s.out_shape = *l->out_shape;
    return s;
}

} // namespace

TilingPlan plan_tiling(const Graph& g, const FusionBlock& block, const TileGeometry& geometry,
                       const DeviceSpec& device, const PlanOptions& opts) {
    if (!block.fused())
        throw Error(ErrorKind::internal, "plan_tiling: unfused blocks have no tiling plan");

    std::vector<StageInfo> producers, consumers;
    for (const auto& n : block.producer_stage) producers.push_back(stage_info(g, n));
    for (const auto& n : block.consumer_stage) consumers.push_back(stage_info(g, n));

    // One output tile geometry serves every consumer: equal output extents
    // and strides are required (the planner only forms such blocks).
    const TensorShape out_shape = consumers[0].out_shape;
    for (const auto& c : consumers) {
        if (c.out_shape.height != out_shape.height || c.out_shape.width != out_shape.width)
            throw Error(ErrorKind::infeasible,
                        "block " + block.id + ": consumer output extents differ");
    }
    int consumer_stride = 1;
    int lead_h = 0, trail_h = 1, lead_w = 0, trail_w = 1;
    if (block.mode == FusionMode::merge) {
        // The add sink reads one intermediate point per output point.
        consumer_stride = 1;
        lead_h = lead_w = 0;
        trail_h = trail_w = 1;
    } else {
        consumer_stride = consumers[0].conv.stride;
        for (const auto& c : consumers) {
            if (c.conv.stride != consumer_stride)
                throw Error(ErrorKind::infeasible,
                            "block " + block.id + ": consumer strides differ");
            lead_h = std::max(lead_h, c.conv.pad);
            lead_w = std::max(lead_w, c.conv.pad);
            trail_h = std::max(trail_h, c.conv.kernel_h - c.conv.pad);
            trail_w = std::max(trail_w, c.conv.kernel_w - c.conv.pad);
        }
    }
    if (block.stores_intermediate) {
        // Escaping intermediates are written in disjoint ownership slabs of
        // tile_extent*stride rows; the staged region must cover the slab
        // even where a strided consumer samples past cells.
        trail_h = std::max(trail_h, consumer_stride);
        trail_w = std::max(trail_w, consumer_stride);
    }
    if (trail_h <= lead_h - geometry.tile_h || trail_w <= lead_w - geometry.tile_w)
        throw Error(ErrorKind::infeasible, "block " + block.id + ": padding exceeds kernel extent");

    const TileGeometry& geo = geometry;
    if (geo.tile_h < 1 || geo.tile_w < 1 || geo.grid_h < 1 || geo.grid_w < 1)
        throw Error(ErrorKind::validation, "tile geometry fields must be >= 1");
    if (geo.tile_h * geo.grid_h < out_shape.height || geo.tile_w * geo.grid_w < out_shape.width)
        throw Error(ErrorKind::validation, "tile geometry does not cover the output");
    if (geo.tile_h * (geo.grid_h - 1) >= out_shape.height ||
        geo.tile_w * (geo.grid_w - 1) >= out_shape.width)
        throw Error(ErrorKind::validation, "tile geometry has an empty trailing tile");

    TilingPlan plan;
    plan.graph_name = g.name;
    plan.block_id = block.id;
    plan.mode = block.mode;
    plan.producers = block.producer_stage;
    plan.consumers = block.consumer_stage;
    plan.stores_intermediate = block.stores_intermediate;
    plan.geometry = geo;
    plan.device_name = device.name;

    // Staged intermediate extent per dimension (includes the zero border).
    const int eu_h = (geo.tile_h - 1) * consumer_stride + lead_h + trail_h;
    const int eu_w = (geo.tile_w - 1) * consumer_stride + lead_w + trail_w;

    for (size_t i = 0; i < producers.size(); ++i) {
        const StageInfo& p = producers[i];
        SharedLayout buf;
        buf.name = "s" + std::to_string(i);
        buf.stage = p.layer->name;
        buf.channels = p.out_shape.channels;
        buf.border = std::max(lead_h, lead_w); // symmetric ring sized to the consumer pad
        buf.logical_h = eu_h - 2 * buf.border;
        buf.logical_w = eu_w - 2 * buf.border;
        buf.pad_cols = 1;
        buf.pad_rows = opts.row_bank_padding ? 1 : 0;
        buf.stride = consumer_stride;
        plan.buffers.push_back(buf);

        // Halo entry: the producer's own input region from global memory.
        HaloStage hs;
        hs.layer = p.layer->name;
        hs.kernel_h = p.conv.kernel_h;
        hs.kernel_w = p.conv.kernel_w;
        hs.stride = p.conv.stride;
        hs.pad = p.conv.pad;
        hs.channels_out = p.conv.out_channels;
        hs.macs_per_cell = p.conv.macs_per_output();
        hs.extent_h = (eu_h - 1) * p.conv.stride + p.conv.kernel_h;
        hs.extent_w = (eu_w - 1) * p.conv.stride + p.conv.kernel_w;
        hs.scale_h = consumer_stride * p.conv.stride;
        hs.scale_w = consumer_stride * p.conv.stride;
        hs.offset_h = -buf.border * p.conv.stride - p.conv.pad;
        hs.offset_w = -buf.border * p.conv.stride - p.conv.pad;
        plan.halo.stages.push_back(hs);
    }
    for (const StageInfo& c : consumers) {
        HaloStage hs;
        hs.layer = c.layer->name;
        if (block.mode == FusionMode::merge) {
            hs.kernel_h = hs.kernel_w = 1;
            hs.stride = 1;
            hs.pad = 0;
            hs.channels_out = c.out_shape.channels;
            hs.macs_per_cell = 0;
            hs.extent_h = geo.tile_h;
            hs.extent_w = geo.tile_w;
        } else {
            hs.kernel_h = c.conv.kernel_h;
            hs.kernel_w = c.conv.kernel_w;
            hs.stride = c.conv.stride;
            hs.pad = c.conv.pad;
            hs.channels_out = c.conv.out_channels;
            hs.macs_per_cell = c.conv.macs_per_output();
            hs.extent_h = (geo.tile_h - 1) * c.conv.stride + c.conv.kernel_h;
            hs.extent_w = (geo.tile_w - 1) * c.conv.stride + c.conv.kernel_w;
        }
        hs.scale_h = hs.scale_w = hs.stride;
        hs.offset_h = hs.offset_w = -hs.pad;
        plan.halo.stages.push_back(hs);
    }

    // Thread block: one thread per output point, looping past the limit.
    plan.block_dim_x = std::min(geo.tile_w, device.max_threads_per_block);
    plan.block_dim_y = std::min(geo.tile_h, std::max(1, device.max_threads_per_block / plan.block_dim_x));
    plan.geometry.loop_w = (geo.tile_w + plan.block_dim_x - 1) / plan.block_dim_x;
    plan.geometry.loop_h = (geo.tile_h + plan.block_dim_y - 1) / plan.block_dim_y;

    // Weight placement: constant memory only when every filter and bias
    // of the block fits the capacity.
    std::int64_t weight_bytes = 0;
    for (const StageInfo& s : producers) weight_bytes += (s.conv.weight_count() + s.conv.bias_count()) * 4;
    for (const StageInfo& s : consumers)
        if (s.layer->kind == LayerKind::conv)
            weight_bytes += (s.conv.weight_count() + s.conv.bias_count()) * 4;
    plan.weights = weight_bytes <= device.constant_capacity ? WeightPlacement::constant_memory
                                                            : WeightPlacement::readonly_cached_global;

    // Redundancy via per-producer synthetic chains: the staged region is
    // what a pseudo-consumer with kernel lead+trail and pad lead reads.
    std::set<std::string> staged_keys;
    for (size_t i = 0; i < producers.size(); ++i) {
        const StageInfo& p = producers[i];
        ConvParams pseudo;
        pseudo.kernel_h = lead_h + trail_h;
        pseudo.kernel_w = lead_w + trail_w;
        pseudo.pad = lead_h;
        pseudo.stride = consumer_stride;
        pseudo.out_channels = p.out_shape.channels;
        pseudo.in_channels = 0;
        std::vector<ConvParams> chain{p.conv, pseudo};
        HaloExtent h = halo_extent(geo.tile_h, geo.tile_w, chain);
        h.stages[0].channels_out = p.conv.out_channels;
        h.stages[0].macs_per_cell = p.conv.macs_per_output();
        RedundancyReport rr = redundancy_count(geo, h, p.in_shape);

        std::string key = p.layer->inputs[0] + "/" + std::to_string(p.conv.kernel_h) + "x" +
                          std::to_string(p.conv.kernel_w) + "/" + std::to_string(p.conv.stride) +
                          "/" + std::to_string(p.conv.pad);
        if (staged_keys.count(key)) {
            plan.shared_input_staging = true; // second producer reuses the staged region
        } else {
            staged_keys.insert(key);
            plan.replicated_elements += rr.replicated_elements;
        }
        plan.redundant_macs += rr.redundant_macs;
    }

    for (const auto& b : plan.buffers) plan.shared_bytes += b.physical_elements() * 4;
    if (plan.shared_bytes > device.shared_per_block_max)
        throw Error(ErrorKind::infeasible,
                    "block " + block.id + ": staging buffers need " + std::to_string(plan.shared_bytes) +
                        " B of shared memory, per-block limit is " +
                        std::to_string(device.shared_per_block_max) + " B");
    return plan;
}

OccupancyReport check_resources(const TilingPlan& plan, const DeviceSpec& device) {
    OccupancyReport r;
    std::int64_t bytes = std::max<std::int64_t>(plan.shared_bytes, 1);
    r.blocks_per_sm = static_cast<int>(std::min<std::int64_t>(device.shared_per_sm / bytes,
                                                              device.max_blocks_per_sm));
    r.shared_fraction = static_cast<double>(plan.shared_bytes) / static_cast<double>(device.shared_per_sm);
    if (r.blocks_per_sm < 1)
        r.warnings.push_back("staging buffers exceed per-SM shared capacity");
    if (plan.shared_bytes * 3 > device.shared_per_sm)
        r.warnings.push_back("plan uses more than 1/3 of per-SM shared memory");
    if (r.blocks_per_sm == 1)
        r.warnings.push_back("occupancy is 1 block/SM; memory latency cannot be hidden");
    return r;
}

namespace {

td::Node geometry_node(const TileGeometry& g) {
    td::Node sec = td::section("geometry");
    sec.children.push_back(td::int_list("tile", {g.tile_h, g.tile_w}));
    sec.children.push_back(td::int_list("grid", {g.grid_h, g.grid_w}));
    sec.children.push_back(td::int_list("loops", {g.loop_h, g.loop_w}));
    return sec;
}

td::Node stage_node(const HaloStage& s) {
    td::Node sec = td::section("stage");
    sec.children.push_back(td::scalar("layer", s.layer));
    sec.children.push_back(td::int_list("kernel", {s.kernel_h, s.kernel_w}));
    sec.children.push_back(td::scalar("stride", static_cast<long long>(s.stride)));
    sec.children.push_back(td::scalar("pad", static_cast<long long>(s.pad)));
    sec.children.push_back(td::scalar("channels_out", static_cast<long long>(s.channels_out)));
    sec.children.push_back(td::scalar("macs_per_cell", static_cast<long long>(s.macs_per_cell)));
    sec.children.push_back(td::int_list("extent", {s.extent_h, s.extent_w}));
    sec.children.push_back(td::int_list("scale", {s.scale_h, s.scale_w}));
    sec.children.push_back(td::int_list("offset", {s.offset_h, s.offset_w}));
    return sec;
}

HaloStage parse_stage(const td::Node& sec) {
    HaloStage s;
    s.layer = sec.get_string("layer", "");
    auto k = sec.require("kernel").as_int_list();
    s.kernel_h = static_cast<int>(k[0]);
    s.kernel_w = static_cast<int>(k[1]);
    s.stride = static_cast<int>(sec.require("stride").as_int());
    s.pad = static_cast<int>(sec.require("pad").as_int());
    s.channels_out = static_cast<int>(sec.get_int("channels_out", 0));
    s.macs_per_cell = sec.get_int("macs_per_cell", 0);
    auto e = sec.require("extent").as_int_list();
    s.extent_h = static_cast<int>(e[0]);
    s.extent_w = static_cast<int>(e[1]);
    auto sc = sec.require("scale").as_int_list();
    s.scale_h = static_cast<int>(sc[0]);
    s.scale_w = static_cast<int>(sc[1]);
    auto of = sec.require("offset").as_int_list();
    s.offset_h = static_cast<int>(of[0]);
    s.offset_w = static_cast<int>(of[1]);
    return s;
}

FusionMode parse_mode(const td::Node& n) {
    const std::string v = n.as_string();
    if (v == "straight") return FusionMode::straight;
    if (v == "split") return FusionMode::split;
    if (v == "merge") return FusionMode::merge;
    if (v == "unfused") return FusionMode::unfused;
    throw Error(ErrorKind::parse, "unknown fusion mode '" + v + "'", n.line);
}

} // namespace

std::string serialize_plan(const TilingPlan& p) {
    td::Document doc;
    td::Node sec = td::section("plan");
    sec.children.push_back(td::scalar("graph", p.graph_name));
    sec.children.push_back(td::scalar("block", p.block_id));
    sec.children.push_back(td::scalar("mode", std::string(to_string(p.mode))));
    sec.children.push_back(td::list("producers", p.producers));
    sec.children.push_back(td::list("consumers", p.consumers));
    sec.children.push_back(td::scalar("stores_intermediate", std::string(p.stores_intermediate ? "true" : "false")));
    sec.children.push_back(td::scalar("shared_input_staging", std::string(p.shared_input_staging ? "true" : "false")));
    sec.children.push_back(geometry_node(p.geometry));
    sec.children.push_back(td::int_list("threads", {p.block_dim_x, p.block_dim_y}));
    td::Node halo = td::section("halo");
    for (const auto& s : p.halo.stages) halo.children.push_back(stage_node(s));
    sec.children.push_back(std::move(halo));
    for (const auto& b : p.buffers) {
        td::Node bn = td::section("buffer");
        bn.children.push_back(td::scalar("name", b.name));
        bn.children.push_back(td::scalar("stage", b.stage));
        bn.children.push_back(td::scalar("channels", static_cast<long long>(b.channels)));
        bn.children.push_back(td::int_list("logical", {b.logical_h, b.logical_w}));
        bn.children.push_back(td::scalar("border", static_cast<long long>(b.border)));
        bn.children.push_back(td::int_list("bank_pad", {b.pad_rows, b.pad_cols}));
        bn.children.push_back(td::scalar("stride", static_cast<long long>(b.stride)));
        bn.children.push_back(td::scalar("physical_elements", static_cast<long long>(b.physical_elements())));
        sec.children.push_back(std::move(bn));
    }
    sec.children.push_back(td::scalar("weights", std::string(to_string(p.weights))));
    sec.children.push_back(td::scalar("replicated_elements", static_cast<long long>(p.replicated_elements)));
    sec.children.push_back(td::scalar("redundant_macs", static_cast<long long>(p.redundant_macs)));
    sec.children.push_back(td::scalar("shared_bytes", static_cast<long long>(p.shared_bytes)));
    sec.children.push_back(td::scalar("device", p.device_name));
    doc.entries.push_back(std::move(sec));
    return td::serialize(doc);
}

TilingPlan parse_plan(const std::string& text) {
    td::Document doc = td::parse(text);
    const td::Node& sec = doc.require("plan");
    TilingPlan p;
    p.graph_name = sec.require("graph").as_string();
    p.block_id = sec.require("block").as_string();
    p.mode = parse_mode(sec.require("mode"));
    p.producers = sec.require("producers").values;
    p.consumers = sec.require("consumers").values;
    p.stores_intermediate = sec.get_bool("stores_intermediate", false);
    p.shared_input_staging = sec.get_bool("shared_input_staging", false);
    const td::Node& geo = sec.require("geometry");
    auto tile = geo.require("tile").as_int_list();
    auto grid = geo.require("grid").as_int_list();
    auto loops = geo.require("loops").as_int_list();
    p.geometry.tile_h = static_cast<int>(tile[0]);
    p.geometry.tile_w = static_cast<int>(tile[1]);
    p.geometry.grid_h = static_cast<int>(grid[0]);
    p.geometry.grid_w = static_cast<int>(grid[1]);
    p.geometry.loop_h = static_cast<int>(loops[0]);
    p.geometry.loop_w = static_cast<int>(loops[1]);
    auto threads = sec.require("threads").as_int_list();
    p.block_dim_x = static_cast<int>(threads[0]);
    p.block_dim_y = static_cast<int>(threads[1]);
    for (const td::Node* sn : sec.require("halo").find_all("stage"))
        p.halo.stages.push_back(parse_stage(*sn));
    for (const td::Node* bn : sec.find_all("buffer")) {
        SharedLayout b;
        b.name = bn->require("name").as_string();
        b.stage = bn->require("stage").as_string();
        b.channels = static_cast<int>(bn->require("channels").as_int());
        auto lg = bn->require("logical").as_int_list();
        b.logical_h = static_cast<int>(lg[0]);
        b.logical_w = static_cast<int>(lg[1]);
        b.border = static_cast<int>(bn->require("border").as_int());
        auto bp = bn->require("bank_pad").as_int_list();
        b.pad_rows = static_cast<int>(bp[0]);
        b.pad_cols = static_cast<int>(bp[1]);
        b.stride = static_cast<int>(bn->require("stride").as_int());
        if (bn->require("physical_elements").as_int() != b.physical_elements())
            throw Error(ErrorKind::parse, "buffer '" + b.name + "': physical_elements mismatch",
                        bn->line);
        p.buffers.push_back(std::move(b));
    }
    const std::string w = sec.require("weights").as_string();
    if (w == "constant_memory") p.weights = WeightPlacement::constant_memory;
    else if (w == "readonly_cached_global") p.weights = WeightPlacement::readonly_cached_global;
    else throw Error(ErrorKind::parse, "unknown weight placement '" + w + "'");
    p.replicated_elements = sec.require("replicated_elements").as_int();
    p.redundant_macs = sec.require("redundant_macs").as_int();
    p.shared_bytes = sec.require("shared_bytes").as_int();
    p.device_name = sec.get_string("device", "");
    return p;
}

TilingPlan load_plan(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_plan(ss.str());
}

} // namespace xlfuse
