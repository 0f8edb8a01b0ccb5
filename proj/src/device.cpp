// Copyright (c) 2026 The xlfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlfuse/device.hpp"

#include <fstream>
#include <sstream>

#include "xlfuse/error.hpp"
#include "xlfuse/textdoc.hpp"

namespace xlfuse {

namespace td = textdoc;

void DeviceSpec::check() const {
    auto bad = [](const std::string& what) {
        throw Error(ErrorKind::validation, "device spec: " + what + " must be positive");
    };
    if (sm_count < 1) bad("sm_count");
    if (peak_flops <= 0) bad("peak_flops");
    if (global_bw <= 0) bad("global_bw");
    if (shared_bw <= 0) bad("shared_bw");
    if (shared_per_sm < 1) bad("shared_per_sm");
    if (shared_per_block_max < 1) bad("shared_per_block_max");
    if (constant_capacity < 1) bad("constant_capacity");
    if (readonly_cache < 1) bad("readonly_cache");
    if (banks < 1) bad("banks");
    if (bank_word < 1) bad("bank_word");
    if (warp_size < 1) bad("warp_size");
    if (max_blocks_per_sm < 1) bad("max_blocks_per_sm");
    if (max_threads_per_block < 1) bad("max_threads_per_block");
    if (transaction_bytes < 4 || transaction_bytes % 4 != 0)
        throw Error(ErrorKind::validation,
                    "device spec: transaction_bytes must be a positive multiple of 4");
}

DeviceSpec parse_device(const std::string& text) {
    td::Document doc = td::parse(text);
    DeviceSpec d;
    d.name = doc.require("name").as_string();
    d.sm_count = static_cast<int>(doc.require("sm_count").as_int());
    d.peak_flops = doc.require("peak_flops").as_double();
    d.global_bw = doc.require("global_bw").as_double();
    d.shared_bw = doc.require("shared_bw").as_double();
    auto get = [&](const char* key, std::int64_t fallback) {
        const td::Node* n = doc.find(key);
        return n ? n->as_int() : fallback;
    };
    d.shared_per_sm = get("shared_per_sm", d.shared_per_sm);
    d.shared_per_block_max = get("shared_per_block_max", d.shared_per_block_max);
    d.constant_capacity = get("constant_capacity", d.constant_capacity);
    d.readonly_cache = get("readonly_cache", d.readonly_cache);
    d.banks = static_cast<int>(get("banks", d.banks));
    d.bank_word = static_cast<int>(get("bank_word", d.bank_word));
    d.warp_size = static_cast<int>(get("warp_size", d.warp_size));
    d.transaction_bytes = static_cast<int>(get("transaction_bytes", d.transaction_bytes));
    d.max_blocks_per_sm = static_cast<int>(get("max_blocks_per_sm", d.max_blocks_per_sm));
    d.max_threads_per_block = static_cast<int>(get("max_threads_per_block", d.max_threads_per_block));
    d.check();
    return d;
}

DeviceSpec load_device(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_device(ss.str());
}

std::string serialize_device(const DeviceSpec& d) {
    td::Document doc;
    doc.entries.push_back(td::scalar("name", d.name));
    doc.entries.push_back(td::scalar("sm_count", static_cast<long long>(d.sm_count)));
    doc.entries.push_back(td::scalar("peak_flops", d.peak_flops));
    doc.entries.push_back(td::scalar("global_bw", d.global_bw));
    doc.entries.push_back(td::scalar("shared_bw", d.shared_bw));
    doc.entries.push_back(td::scalar("shared_per_sm", static_cast<long long>(d.shared_per_sm)));
    doc.entries.push_back(td::scalar("shared_per_block_max", static_cast<long long>(d.shared_per_block_max)));
    doc.entries.push_back(td::scalar("constant_capacity", static_cast<long long>(d.constant_capacity)));
    doc.entries.push_back(td::scalar("readonly_cache", static_cast<long long>(d.readonly_cache)));
    doc.entries.push_back(td::scalar("banks", static_cast<long long>(d.banks)));
    doc.entries.push_back(td::scalar("bank_word", static_cast<long long>(d.bank_word)));
    doc.entries.push_back(td::scalar("warp_size", static_cast<long long>(d.warp_size)));
    doc.entries.push_back(td::scalar("transaction_bytes", static_cast<long long>(d.transaction_bytes)));
    doc.entries.push_back(td::scalar("max_blocks_per_sm", static_cast<long long>(d.max_blocks_per_sm)));
    doc.entries.push_back(td::scalar("max_threads_per_block", static_cast<long long>(d.max_threads_per_block)));
    return td::serialize(doc);
}

DeviceSpec titan_xp_spec() {
    DeviceSpec d;
    d.name = "titan_xp";
    d.sm_count = 30;
    d.peak_flops = 12.15e12;
    d.global_bw = 547.7e9;
    d.shared_bw = 6074e9;
    return d;
}

DeviceSpec tesla_p4_spec() {
    DeviceSpec d;
    d.name = "tesla_p4";
    d.sm_count = 20;
    d.peak_flops = 5.5e12;
    d.global_bw = 192e9;
    d.shared_bw = 2721e9;
    return d;
}

} // namespace xlfuse
