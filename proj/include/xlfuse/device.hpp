// Copyright (c) 2026 The xlfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

namespace xlfuse {

/// GPU resource and bandwidth figures consumed by the tiling planner and
/// the cost model. Capacities are bytes, bandwidths bytes/s.
struct DeviceSpec {
    std::string name;
    int sm_count = 0;
    double peak_flops = 0;
    double global_bw = 0;
    double shared_bw = 0;
    std::int64_t shared_per_sm = 96 * 1024;
    std::int64_t shared_per_block_max = 48 * 1024;
    std::int64_t constant_capacity = 64 * 1024;
    std::int64_t readonly_cache = 48 * 1024;
    int banks = 32;
    int bank_word = 4;
    int warp_size = 32;
    int transaction_bytes = 16;
    int max_blocks_per_sm = 32;
    int max_threads_per_block = 1024;

    void check() const; // throws Error{validation} on nonsense values
};

DeviceSpec parse_device(const std::string& text);
DeviceSpec load_device(const std::string& path);
std::string serialize_device(const DeviceSpec& d);

DeviceSpec titan_xp_spec();
DeviceSpec tesla_p4_spec();

} // namespace xlfuse
