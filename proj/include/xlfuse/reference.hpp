// Copyright (c) 2026 The xlfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>

#include "xlfuse/graph.hpp"
#include "xlfuse/tensor.hpp"

namespace xlfuse {

/// Naive per-layer CPU oracle. Deliberately serial and written as the
/// plainest possible loop nests; the fused interpreter is checked
/// against it. Accumulation order is fixed: input channel outer, then
/// filter rows, then filter columns.
std::map<std::string, Tensor> run_reference(const Graph& g,
                                            const std::map<std::string, Tensor>& inputs,
                                            const WeightSet& w);

/// Executes one layer given its input tensors (used by run_reference
/// and by the fused executor for unfused singleton layers).
Tensor run_layer(const Graph& g, const Layer& layer, const std::vector<const Tensor*>& ins,
                 const WeightSet& w);

struct CompareReport {
    double max_abs = 0;
    double max_rel = 0;
    bool pass = false;
};

/// Element-wise comparison; relative denominator max(|a|,|b|,1e-6);
/// passes iff max_rel <= rel_tol. Throws on shape mismatch.
CompareReport compare(const Tensor& a, const Tensor& b, double rel_tol);

} // namespace xlfuse
