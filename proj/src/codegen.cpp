// Copyright (c) 2026 The xlfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlfuse/codegen.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "xlfuse/cost_model.hpp"
#include "xlfuse/error.hpp"
#include "xlfuse/textdoc.hpp"
#include "xlfuse/version.hpp"

namespace xlfuse {

namespace td = textdoc;

namespace {

std::string kernel_symbol(const TilingPlan& plan) {
    return "fused_" + plan.block_id + "_" + to_string(plan.mode) + "_" +
           std::to_string(plan.geometry.tile_h) + "x" + std::to_string(plan.geometry.tile_w);
}

struct Writer {
    std::ostringstream os;
    int depth = 0;

    void line(const std::string& s) {
        for (int i = 0; i < depth; ++i) os << "    ";
        os << s << '\n';
    }
    void blank() { os << '\n'; }
    void open(const std::string& s) {
        line(s + " {");
        ++depth;
    }
    void close() {
        --depth;
        line("}");
    }
};

std::string idx3(const std::string& c, int h, int w, const std::string& y, const std::string& x) {
    std::ostringstream os;
    os << "(" << c << " * " << h << " + " << y << ") * " << w << " + " << x;
    return os.str();
}

struct ConvEmit {
    const Layer* layer = nullptr;
    ConvParams conv;
    TensorShape in_shape;
    TensorShape out_shape;
};

ConvEmit conv_emit(const Graph& g, const std::string& name) {
    ConvEmit e;
    e.layer = g.find_layer(name);
    if (e.layer->conv) e.conv = *e.layer->conv;
    e.in_shape = g.shape_of(e.layer->inputs[0]);
    e.out_shape = g.shape_of(name);
    return e;
}

std::string weight_ref(const TilingPlan& plan, const std::string& layer, bool bias,
                       const std::string& index) {
    if (plan.weights == WeightPlacement::constant_memory)
        return "c_" + layer + (bias ? "_b" : "_w") + "[" + index + "]";
    return "__ldg(&w_" + layer + (bias ? "_b" : "_w") + "[" + index + "])";
}

} // namespace

KernelSource emit_kernel(const Graph& g, const FusionBlock& block, const TilingPlan& plan,
                         const DeviceSpec& device) {
    if (plan.block_id != block.id)
        throw Error(ErrorKind::validation, "plan does not belong to block " + block.id);

    std::vector<ConvEmit> producers, consumers;
    for (const auto& n : block.producer_stage) producers.push_back(conv_emit(g, n));
    for (const auto& n : block.consumer_stage) consumers.push_back(conv_emit(g, n));

    if (plan.weights == WeightPlacement::constant_memory) {
        std::int64_t weight_bytes = 0;
        for (const auto& p : producers) weight_bytes += (p.conv.weight_count() + p.conv.bias_count()) * 4;
        for (const auto& c : consumers)
            if (c.layer->kind == LayerKind::conv)
                weight_bytes += (c.conv.weight_count() + c.conv.bias_count()) * 4;
        if (weight_bytes > device.constant_capacity)
            throw Error(ErrorKind::validation,
                        "plan demands constant placement but " + std::to_string(weight_bytes) +
                            " B exceed the " + std::to_string(device.constant_capacity) +
                            " B capacity");
    }

    auto stored = stored_tensors(g, block);
    std::set<std::string> escaping;
    for (const auto& [name, elems] : stored)
        if (std::find(block.consumer_stage.begin(), block.consumer_stage.end(), name) ==
            block.consumer_stage.end())
            escaping.insert(name);

    // Distinct staged global inputs, producer order.
    std::vector<std::string> load_sources;
    for (const auto& p : producers)
        if (std::find(load_sources.begin(), load_sources.end(), p.layer->inputs[0]) ==
            load_sources.end())
            load_sources.push_back(p.layer->inputs[0]);

    KernelManifest mf;
    mf.kernel_symbol = kernel_symbol(plan);
    mf.graph_name = g.name;
    mf.block_id = block.id;
    mf.mode = plan.mode;
    mf.shared_bytes = plan.shared_bytes;
    mf.barrier_count = 1;
    mf.grid_x = plan.geometry.grid_w;
    mf.grid_y = plan.geometry.grid_h;
    mf.block_x = plan.block_dim_x;
    mf.block_y = plan.block_dim_y;
    mf.loop_x = plan.geometry.loop_w;
    mf.loop_y = plan.geometry.loop_h;
    mf.weights = plan.weights;
    mf.loads = load_sources;
    for (const auto& [name, elems] : stored) mf.stores.push_back(name);

    std::vector<ConvEmit> all_convs = producers;
    for (const auto& c : consumers)
        if (c.layer->kind == LayerKind::conv) all_convs.push_back(c);
    for (const auto& c : all_convs) {
        mf.constants.emplace_back("c_" + c.layer->name + "_w", c.conv.weight_count());
        if (c.conv.has_bias) mf.constants.emplace_back("c_" + c.layer->name + "_b", c.conv.bias_count());
    }

    Writer k;
    k.line("// " + mf.kernel_symbol + ": " + block.producer_stage[0] +
           (producers.size() > 1 ? " + " + block.producer_stage[1] : "") + " -> " +
           block.consumer_stage[0] +
           (consumers.size() > 1 ? " + " + block.consumer_stage[1] : ""));
    k.line("// emitted by xlfuse " + std::string(kVersion) + " for device " + plan.device_name);
    k.blank();

    if (plan.weights == WeightPlacement::constant_memory) {
        for (const auto& [sym, elems] : mf.constants)
            k.line("__constant__ float " + sym + "[" + std::to_string(elems) + "];");
        k.blank();
    }

    // Signature: staged inputs, then weight pointers on the read-only
    // path, then output tensors.
    std::vector<std::string> params;
    for (const auto& src : load_sources) params.push_back("const float* __restrict__ g_" + src);
    if (plan.weights == WeightPlacement::readonly_cached_global) {
        for (const auto& c : all_convs) {
            params.push_back("const float* __restrict__ w_" + c.layer->name + "_w");
            if (c.conv.has_bias) params.push_back("const float* __restrict__ w_" + c.layer->name + "_b");
        }
    }
    for (const auto& [name, elems] : stored) params.push_back("float* __restrict__ g_" + name);

    k.line("extern \"C\" __global__ void " + mf.kernel_symbol + "(");
    for (size_t i = 0; i < params.size(); ++i)
        k.line("    " + params[i] + (i + 1 < params.size() ? "," : ")"));
    k.open("");

    for (size_t bi = 0; bi < plan.buffers.size(); ++bi)
        k.line("__shared__ float " + plan.buffers[bi].name + "[" +
               std::to_string(plan.buffers[bi].physical_elements()) + "];");
    k.blank();
    k.line("const int tile_y = blockIdx.y * " + std::to_string(plan.geometry.tile_h) + ";");
    k.line("const int tile_x = blockIdx.x * " + std::to_string(plan.geometry.tile_w) + ";");

    // ---- producer stage ----
    for (size_t pi = 0; pi < producers.size(); ++pi) {
        const ConvEmit& p = producers[pi];
        const SharedLayout& buf = plan.buffers[pi];
        const ConvParams& c = p.conv;
        const int rows = buf.rows(), pitch = buf.pitch();
        const int ext_h = buf.data_h(), ext_w = buf.data_w();
        const int cin_per_group = c.in_channels / c.group;
        const int cout_per_group = c.out_channels / c.group;

        k.blank();
        k.line("// load: stage " + p.layer->name + " reads " + p.layer->inputs[0]);
        k.open("for (int sy = threadIdx.y; sy < " + std::to_string(ext_h) + "; sy += blockDim.y)");
        k.open("for (int sx = threadIdx.x; sx < " + std::to_string(ext_w) + "; sx += blockDim.x)");
        k.line("const int py = tile_y * " + std::to_string(buf.stride) + " - " +
               std::to_string(buf.border) + " + sy;");
        k.line("const int px = tile_x * " + std::to_string(buf.stride) + " - " +
               std::to_string(buf.border) + " + sx;");
        k.line("const bool live = py >= 0 && py < " + std::to_string(p.out_shape.height) +
               " && px >= 0 && px < " + std::to_string(p.out_shape.width) + ";");
        k.open("for (int oc = 0; oc < " + std::to_string(c.out_channels) + "; ++oc)");
        k.line("float acc = 0.0f;");
        k.open("if (live) // range guard");
        if (c.group > 1) k.line("const int grp = oc / " + std::to_string(cout_per_group) + ";");
        k.open("for (int ic = 0; ic < " + std::to_string(cin_per_group) + "; ++ic)");
        k.line(std::string("const int in_c = ") +
               (c.group > 1 ? "grp * " + std::to_string(cin_per_group) + " + ic" : "ic") + ";");
        k.open("for (int kh = 0; kh < " + std::to_string(c.kernel_h) + "; ++kh)");
        k.line("const int iy = py * " + std::to_string(c.stride) + " - " + std::to_string(c.pad) +
               " + kh;");
        k.open("for (int kw = 0; kw < " + std::to_string(c.kernel_w) + "; ++kw)");
        k.line("const int ix = px * " + std::to_string(c.stride) + " - " + std::to_string(c.pad) +
               " + kw;");
        std::string in_idx = idx3("in_c", p.in_shape.height, p.in_shape.width, "iy", "ix");
        std::string w_idx = "(oc * " + std::to_string(cin_per_group) + " + ic) * " +
                            std::to_string(c.kernel_h * c.kernel_w) + " + kh * " +
                            std::to_string(c.kernel_w) + " + kw";
        if (c.pad > 0) {
            k.line("const bool inside = iy >= 0 && iy < " + std::to_string(p.in_shape.height) +
                   " && ix >= 0 && ix < " + std::to_string(p.in_shape.width) + ";");
            k.line("const float v = inside ? __ldg(&g_" + p.layer->inputs[0] + "[" + in_idx +
                   "]) : 0.0f;");
        } else {
            k.line("const float v = __ldg(&g_" + p.layer->inputs[0] + "[" + in_idx + "]);");
        }
        k.line("acc += " + weight_ref(plan, p.layer->name, false, w_idx) + " * v;");
        k.close(); // kw
        k.close(); // kh
        k.close(); // ic
        if (c.has_bias) k.line("acc += " + weight_ref(plan, p.layer->name, true, "oc") + ";");
        if (c.activation == Activation::relu) k.line("acc = fmaxf(acc, 0.0f);");
        k.close(); // live guard: dead cells keep the zero fill
        k.line(buf.name + "[" + idx3("oc", rows, pitch, "sy", "sx") + "] = acc;");
        if (escaping.count(p.layer->name)) {
            k.line("const bool owned = live && py >= tile_y * " + std::to_string(buf.stride) +
                   " && py < (tile_y + " + std::to_string(plan.geometry.tile_h) + ") * " +
                   std::to_string(buf.stride) + " + (blockIdx.y == " +
                   std::to_string(plan.geometry.grid_h - 1) + " ? " +
                   std::to_string(p.out_shape.height) + " : 0)" + " && px >= tile_x * " +
                   std::to_string(buf.stride) + " && px < (tile_x + " +
                   std::to_string(plan.geometry.tile_w) + ") * " + std::to_string(buf.stride) +
                   " + (blockIdx.x == " + std::to_string(plan.geometry.grid_w - 1) + " ? " +
                   std::to_string(p.out_shape.width) + " : 0);");
            k.open("if (owned) // range guard");
            k.line("g_" + p.layer->name + "[" +
                   idx3("oc", p.out_shape.height, p.out_shape.width, "py", "px") +
                   "] = acc; // store: " + p.layer->name);
            k.close();
        }
        k.close(); // oc
        k.close(); // sx
        k.close(); // sy
    }

    k.blank();
    k.line("__syncthreads();");

    // ---- consumer stage ----
    for (size_t ci = 0; ci < consumers.size(); ++ci) {
        const ConvEmit& cs = consumers[ci];
        k.blank();
        k.line("// consume: " + cs.layer->name);
        k.open("for (int ly = 0; ly < " + std::to_string(plan.geometry.loop_h) + "; ++ly)");
        k.open("for (int lx = 0; lx < " + std::to_string(plan.geometry.loop_w) + "; ++lx)");
        k.line("const int py = threadIdx.y + ly * blockDim.y;");
        k.line("const int px = threadIdx.x + lx * blockDim.x;");
        k.line("const int oy = tile_y + py;");
        k.line("const int ox = tile_x + px;");
        k.line("const bool live = py < " + std::to_string(plan.geometry.tile_h) + " && px < " +
               std::to_string(plan.geometry.tile_w) + " && oy < " +
               std::to_string(cs.out_shape.height) + " && ox < " +
               std::to_string(cs.out_shape.width) + ";");
        k.open("if (live) // range guard");
        if (cs.layer->kind == LayerKind::add) {
            const SharedLayout& b0 = plan.buffers[0];
            const SharedLayout& b1 = plan.buffers[1];
            k.open("for (int ch = 0; ch < " + std::to_string(cs.out_shape.channels) + "; ++ch)");
            k.line("const float a = " + b0.name + "[" +
                   idx3("ch", b0.rows(), b0.pitch(), "py", "px") + "];");
            k.line("const float b = " + b1.name + "[" +
                   idx3("ch", b1.rows(), b1.pitch(), "py", "px") + "];");
            k.line("g_" + cs.layer->name + "[" +
                   idx3("ch", cs.out_shape.height, cs.out_shape.width, "oy", "ox") +
                   "] = a + b; // store: " + cs.layer->name);
            k.close();
        } else {
            const ConvParams& c = cs.conv;
            const SharedLayout& buf = plan.buffers[0];
            const int cin_per_group = c.in_channels / c.group;
            const int cout_per_group = c.out_channels / c.group;
            k.open("for (int oc = 0; oc < " + std::to_string(c.out_channels) + "; ++oc)");
            k.line("float acc = 0.0f;");
            if (c.group > 1) k.line("const int grp = oc / " + std::to_string(cout_per_group) + ";");
            k.open("for (int ic = 0; ic < " + std::to_string(cin_per_group) + "; ++ic)");
            k.line(std::string("const int in_c = ") +
                   (c.group > 1 ? "grp * " + std::to_string(cin_per_group) + " + ic" : "ic") + ";");
            k.open("for (int kh = 0; kh < " + std::to_string(c.kernel_h) + "; ++kh)");
            // Buffer row: py*stride - pad + kh - (tile_y*stride - border), with
            // the tile origin already folded out.
            k.line("const int sy = py * " + std::to_string(c.stride) + " + kh + " +
                   std::to_string(buf.border - c.pad) + ";");
            k.open("for (int kw = 0; kw < " + std::to_string(c.kernel_w) + "; ++kw)");
            k.line("const int sx = px * " + std::to_string(c.stride) + " + kw + " +
                   std::to_string(buf.border - c.pad) + ";");
            std::string w_idx = "(oc * " + std::to_string(cin_per_group) + " + ic) * " +
                                std::to_string(c.kernel_h * c.kernel_w) + " + kh * " +
                                std::to_string(c.kernel_w) + " + kw";
            k.line("acc += " + weight_ref(plan, cs.layer->name, false, w_idx) + " * " + buf.name +
                   "[" + idx3("in_c", buf.rows(), buf.pitch(), "sy", "sx") + "];");
            k.close(); // kw
            k.close(); // kh
            k.close(); // ic
            if (c.has_bias) k.line("acc += " + weight_ref(plan, cs.layer->name, true, "oc") + ";");
            if (c.activation == Activation::relu) k.line("acc = fmaxf(acc, 0.0f);");
            k.line("g_" + cs.layer->name + "[" +
                   idx3("oc", cs.out_shape.height, cs.out_shape.width, "oy", "ox") +
                   "] = acc; // store: " + cs.layer->name);
            k.close(); // oc
        }
        k.close(); // live guard
        k.close(); // lx
        k.close(); // ly
    }
    k.close(); // kernel body

    // ---- host stub ----
    Writer h;
    h.line("// host stub for " + mf.kernel_symbol);
    h.line("// emitted by xlfuse " + std::string(kVersion));
    h.blank();
    h.line("#include <cuda_runtime.h>");
    h.blank();
    std::vector<std::string> hparams;
    for (const auto& src : load_sources) hparams.push_back("const float* d_" + src);
    for (const auto& [name, elems] : stored) hparams.push_back("float* d_" + name);
    for (const auto& c : all_convs) {
        hparams.push_back("const float* " +
                          std::string(plan.weights == WeightPlacement::constant_memory ? "h_" : "d_") +
                          c.layer->name + "_w");
        if (c.conv.has_bias)
            hparams.push_back("const float* " +
                              std::string(plan.weights == WeightPlacement::constant_memory ? "h_" : "d_") +
                              c.layer->name + "_b");
    }
    hparams.push_back("cudaStream_t stream");
    h.line("void launch_" + mf.kernel_symbol + "(");
    for (size_t i = 0; i < hparams.size(); ++i)
        h.line("    " + hparams[i] + (i + 1 < hparams.size() ? "," : ")"));
    h.open("");
    if (plan.weights == WeightPlacement::constant_memory) {
        for (const auto& c : all_convs) {
            h.line("cudaMemcpyToSymbol(c_" + c.layer->name + "_w, h_" + c.layer->name + "_w, " +
                   std::to_string(c.conv.weight_count()) + " * sizeof(float));");
            if (c.conv.has_bias)
                h.line("cudaMemcpyToSymbol(c_" + c.layer->name + "_b, h_" + c.layer->name + "_b, " +
                       std::to_string(c.conv.bias_count()) + " * sizeof(float));");
        }
    }
    h.line("dim3 grid(" + std::to_string(mf.grid_x) + ", " + std::to_string(mf.grid_y) + ");");
    h.line("dim3 block(" + std::to_string(mf.block_x) + ", " + std::to_string(mf.block_y) + ");");
    std::ostringstream call;
    call << mf.kernel_symbol << "<<<grid, block, 0, stream>>>(";
    bool first = true;
    for (const auto& src : load_sources) {
        call << (first ? "" : ", ") << "d_" << src;
        first = false;
    }
    if (plan.weights == WeightPlacement::readonly_cached_global) {
        for (const auto& c : all_convs) {
            call << ", d_" << c.layer->name << "_w";
            if (c.conv.has_bias) call << ", d_" << c.layer->name << "_b";
        }
    }
    for (const auto& [name, elems] : stored) call << ", d_" << name;
    call << ");";
    h.line(call.str());
    h.close();

    // ---- manifest ----
    td::Document doc;
    td::Node sec = td::section("manifest");
    sec.children.push_back(td::scalar("kernel", mf.kernel_symbol));
    sec.children.push_back(td::scalar("graph", mf.graph_name));
    sec.children.push_back(td::scalar("block", mf.block_id));
    sec.children.push_back(td::scalar("mode", std::string(to_string(mf.mode))));
    sec.children.push_back(td::int_list("tile", {plan.geometry.tile_h, plan.geometry.tile_w}));
    sec.children.push_back(td::int_list("grid", {mf.grid_x, mf.grid_y}));
    sec.children.push_back(td::int_list("threads", {mf.block_x, mf.block_y}));
    sec.children.push_back(td::int_list("loops", {mf.loop_x, mf.loop_y}));
    sec.children.push_back(td::scalar("barriers", static_cast<long long>(mf.barrier_count)));
    sec.children.push_back(td::scalar("shared_bytes", static_cast<long long>(mf.shared_bytes)));
    sec.children.push_back(td::scalar("weights", std::string(to_string(mf.weights))));
    for (const auto& [sym, elems] : mf.constants) {
        td::Node cn = td::section("constant");
        cn.children.push_back(td::scalar("symbol", sym));
        cn.children.push_back(td::scalar("elements", static_cast<long long>(elems)));
        sec.children.push_back(std::move(cn));
    }
    for (const auto& l : mf.loads) sec.children.push_back(td::scalar("load", l));
    for (const auto& s : mf.stores) sec.children.push_back(td::scalar("store", s));
    doc.entries.push_back(std::move(sec));

    KernelSource out;
    out.kernel = k.os.str();
    out.host = h.os.str();
    out.manifest_text = td::serialize(doc);
    out.manifest = mf;
    return out;
}

KernelManifest parse_manifest(const std::string& text) {
    td::Document doc = td::parse(text);
    const td::Node& sec = doc.require("manifest");
    KernelManifest mf;
    mf.kernel_symbol = sec.require("kernel").as_string();
    mf.graph_name = sec.require("graph").as_string();
    mf.block_id = sec.require("block").as_string();
    const std::string mode = sec.require("mode").as_string();
    if (mode == "straight") mf.mode = FusionMode::straight;
    else if (mode == "split") mf.mode = FusionMode::split;
    else if (mode == "merge") mf.mode = FusionMode::merge;
    else throw Error(ErrorKind::parse, "unknown mode '" + mode + "'");
    auto grid = sec.require("grid").as_int_list();
    mf.grid_x = static_cast<int>(grid[0]);
    mf.grid_y = static_cast<int>(grid[1]);
    auto threads = sec.require("threads").as_int_list();
    mf.block_x = static_cast<int>(threads[0]);
    mf.block_y = static_cast<int>(threads[1]);
    auto loops = sec.require("loops").as_int_list();
    mf.loop_x = static_cast<int>(loops[0]);
    mf.loop_y = static_cast<int>(loops[1]);
    mf.barrier_count = static_cast<int>(sec.require("barriers").as_int());
    mf.shared_bytes = sec.require("shared_bytes").as_int();
    const std::string w = sec.require("weights").as_string();
    mf.weights = w == "constant_memory" ? WeightPlacement::constant_memory
                                        : WeightPlacement::readonly_cached_global;
    for (const td::Node* cn : sec.find_all("constant"))
        mf.constants.emplace_back(cn->require("symbol").as_string(),
                                  cn->require("elements").as_int());
    for (const td::Node* ln : sec.find_all("load")) mf.loads.push_back(ln->as_string());
    for (const td::Node* sn : sec.find_all("store")) mf.stores.push_back(sn->as_string());
    return mf;
}

std::vector<std::string> structural_check(const KernelSource& src, const TilingPlan& plan) {
    std::vector<std::string> violations;
    KernelManifest mf;
    try {
        mf = parse_manifest(src.manifest_text);
    } catch (const Error& e) {
        violations.push_back(std::string("manifest unparsable: ") + e.what());
        return violations;
    }

    // Barrier placement: one producer/consumer boundary.
    int barriers = 0;
    size_t pos = 0;
    while ((pos = src.kernel.find("__syncthreads();", pos)) != std::string::npos) {
        ++barriers;
        pos += 1;
    }
    if (barriers != mf.barrier_count)
        violations.push_back("barrier count " + std::to_string(barriers) + " != manifest " +
                             std::to_string(mf.barrier_count));
    if (mf.barrier_count != 1)
        violations.push_back("two-stage kernels need exactly one barrier, manifest says " +
                             std::to_string(mf.barrier_count));

    // Shared declarations vs manifest and plan.
    std::int64_t declared = 0;
    std::istringstream in(src.kernel);
    std::string line;
    std::set<std::string> declared_names;
    while (std::getline(in, line)) {
        size_t sh = line.find("__shared__ float ");
        if (sh == std::string::npos) continue;
        size_t name_begin = sh + std::string("__shared__ float ").size();
        size_t br = line.find('[', name_begin);
        size_t br_end = line.find(']', br);
        if (br == std::string::npos || br_end == std::string::npos) {
            violations.push_back("malformed shared declaration: " + line);
            continue;
        }
        declared_names.insert(line.substr(name_begin, br - name_begin));
        declared += std::stoll(line.substr(br + 1, br_end - br - 1));
    }
    if (declared * 4 != mf.shared_bytes)
        violations.push_back("declared shared bytes " + std::to_string(declared * 4) +
                             " != manifest " + std::to_string(mf.shared_bytes));
    if (mf.shared_bytes != plan.shared_bytes)
        violations.push_back("manifest shared bytes != plan shared bytes");
    for (const auto& b : plan.buffers)
        if (!declared_names.count(b.name))
            violations.push_back("buffer " + b.name + " is not declared");

    // Section counts: one staging section per producer, one store per
    // externally visible tensor.
    auto count_marker = [&](const std::string& marker) {
        int n = 0;
        size_t at = 0;
        while ((at = src.kernel.find(marker, at)) != std::string::npos) {
            ++n;
            at += marker.size();
        }
        return n;
    };
    int load_sections = count_marker("// load: stage ");
    if (load_sections != static_cast<int>(plan.producers.size()))
        violations.push_back("expected " + std::to_string(plan.producers.size()) +
                             " staging sections, found " + std::to_string(load_sections));
    for (const auto& store : mf.stores) {
        int n = count_marker("// store: " + store + "\n");
        if (n != 1)
            violations.push_back("store section for '" + store + "' appears " +
                                 std::to_string(n) + " times");
    }

    // Branch tokens: every `if` must be a tagged coordinate range guard.
    in.clear();
    in.str(src.kernel);
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t at = line.find("if (");
        if (at == std::string::npos) continue;
        if (line.find("// range guard") == std::string::npos)
            violations.push_back("untagged branch on kernel line " + std::to_string(lineno));
    }

    // Launch geometry: host stub vs manifest vs plan.
    std::string grid_line = "dim3 grid(" + std::to_string(mf.grid_x) + ", " +
                            std::to_string(mf.grid_y) + ");";
    std::string block_line = "dim3 block(" + std::to_string(mf.block_x) + ", " +
                             std::to_string(mf.block_y) + ");";
    if (src.host.find(grid_line) == std::string::npos)
        violations.push_back("host stub grid does not match manifest");
    if (src.host.find(block_line) == std::string::npos)
        violations.push_back("host stub block does not match manifest");
    if (mf.grid_x != plan.geometry.grid_w || mf.grid_y != plan.geometry.grid_h)
        violations.push_back("manifest grid does not match plan");
    if (mf.block_x != plan.block_dim_x || mf.block_y != plan.block_dim_y)
        violations.push_back("manifest thread block does not match plan");
    return violations;
}

} // namespace xlfuse
