// Copyright (c) 2026 The xlfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlfuse/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "xlfuse/error.hpp"

namespace xlfuse {

namespace {

Tensor conv_layer(const Layer& layer, const Tensor& in, const WeightSet& w) {
    const ConvParams& c = *layer.conv;
    const int out_h = conv_out_dim(in.shape.height, c.kernel_h, c.pad, c.stride);
    const int out_w = conv_out_dim(in.shape.width, c.kernel_w, c.pad, c.stride);
    Tensor out({c.out_channels, out_h, out_w});

    auto it = w.by_layer.find(layer.name);
    if (it == w.by_layer.end())
        throw Error(ErrorKind::internal, "no weights for conv '" + layer.name + "'");
    const LayerWeights& lw = it->second;

    const int cin_per_group = c.in_channels / c.group;
    const int cout_per_group = c.out_channels / c.group;

    for (int oc = 0; oc < c.out_channels; ++oc) {
        const int grp = oc / cout_per_group;
        const size_t w_base = static_cast<size_t>(oc) * cin_per_group * c.kernel_h * c.kernel_w;
        for (int oy = 0; oy < out_h; ++oy) {
            for (int ox = 0; ox < out_w; ++ox) {
                float acc = 0.0f;
                for (int ic = 0; ic < cin_per_group; ++ic) {
                    const int in_c = grp * cin_per_group + ic;
                    for (int kh = 0; kh < c.kernel_h; ++kh) {
                        const int iy = oy * c.stride - c.pad + kh;
                        if (iy < 0 || iy >= in.shape.height) continue;
                        for (int kw = 0; kw < c.kernel_w; ++kw) {
                            const int ix = ox * c.stride - c.pad + kw;
                            if (ix < 0 || ix >= in.shape.width) continue;
                            acc += lw.filter[w_base + (static_cast<size_t>(ic) * c.kernel_h + kh) *
                                                           c.kernel_w + kw] *
                                   in.at(in_c, iy, ix);
                        }
                    }
                }
                if (c.has_bias) acc += lw.bias[static_cast<size_t>(oc)];
                if (c.activation == Activation::relu) acc = std::max(acc, 0.0f);
                out.at(oc, oy, ox) = acc;
            }
        }
    }
    return out;
}

Tensor pool_layer(const Layer& layer, const Tensor& in) {
    const PoolParams& p = *layer.pool;
    const int out_h = conv_out_dim(in.shape.height, p.kernel, p.pad, p.stride);
    const int out_w = conv_out_dim(in.shape.width, p.kernel, p.pad, p.stride);
    Tensor out({in.shape.channels, out_h, out_w});
    for (int ch = 0; ch < in.shape.channels; ++ch) {
        for (int oy = 0; oy < out_h; ++oy) {
            for (int ox = 0; ox < out_w; ++ox) {
                float best = -std::numeric_limits<float>::infinity();
                float sum = 0.0f;
                for (int kh = 0; kh < p.kernel; ++kh) {
                    const int iy = oy * p.stride - p.pad + kh;
                    for (int kw = 0; kw < p.kernel; ++kw) {
                        const int ix = ox * p.stride - p.pad + kw;
                        float v = 0.0f;
                        if (iy >= 0 && iy < in.shape.height && ix >= 0 && ix < in.shape.width)
                            v = in.at(ch, iy, ix);
                        best = std::max(best, v);
                        sum += v;
                    }
                }
                // avg divides by the full window area, padding included.
                out.at(ch, oy, ox) = p.kind == PoolKind::max
                                         ? best
                                         : sum / static_cast<float>(p.kernel * p.kernel);
            }
        }
    }
    return out;
}

} // namespace

Tensor run_layer(const Graph& g, const Layer& layer, const std::vector<const Tensor*>& ins,
                 const WeightSet& w) {
    (void)g;
    switch (layer.kind) {
    case LayerKind::conv:
        return conv_layer(layer, *ins[0], w);
    case LayerKind::pool:
        return pool_layer(layer, *ins[0]);
    case LayerKind::relu: {
        Tensor out = *ins[0];
        for (auto& v : out.data) v = std::max(v, 0.0f);
        return out;
    }
    case LayerKind::add: {
        Tensor out = *ins[0];
        const Tensor& b = *ins[1];
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
        return out;
    }
    case LayerKind::concat: {
        int channels = 0;
        for (const Tensor* t : ins) channels += t->shape.channels;
        Tensor out({channels, ins[0]->shape.height, ins[0]->shape.width});
        size_t off = 0;
        for (const Tensor* t : ins) {
            std::copy(t->data.begin(), t->data.end(), out.data.begin() + static_cast<long>(off));
            off += t->data.size();
        }
        return out;
    }
    }
    throw Error(ErrorKind::internal, "unreachable layer kind");
}

std::map<std::string, Tensor> run_reference(const Graph& g,
                                            const std::map<std::string, Tensor>& inputs,
                                            const WeightSet& w) {
    std::map<std::string, Tensor> values;
    for (const auto& [name, t] : inputs) values.emplace(name, t);
    for (const Layer* l : topo_order(g)) {
        std::vector<const Tensor*> ins;
        for (const auto& in : l->inputs) {
            auto it = values.find(in);
            if (it == values.end())
                throw Error(ErrorKind::internal, "missing tensor '" + in + "'");
            ins.push_back(&it->second);
        }
        values.emplace(l->name, run_layer(g, *l, ins, w));
    }
    return values;
}

CompareReport compare(const Tensor& a, const Tensor& b, double rel_tol) {
    if (!(a.shape == b.shape))
        throw Error(ErrorKind::verification, "compare: tensor shapes differ");
    CompareReport r;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double av = a.data[i], bv = b.data[i];
        const double abs_diff = std::abs(av - bv);
        const double denom = std::max({std::abs(av), std::abs(bv), 1e-6});
        r.max_abs = std::max(r.max_abs, abs_diff);
        r.max_rel = std::max(r.max_rel, abs_diff / denom);
    }
    r.pass = r.max_rel <= rel_tol;
    return r;
}

} // namespace xlfuse
