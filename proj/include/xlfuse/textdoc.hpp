// Copyright (c) 2026 The xlfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace xlfuse::textdoc {

/// One entry of a structured text document: either a `key values...` line
/// or a `key { ... }` section with child entries. Lists are written with
/// brackets (`shape [192, 28, 28]`); brackets and commas are decoration
/// and are stripped during tokenization.
struct Node {
    std::string key;
    std::vector<std::string> values; // empty for sections
    std::vector<Node> children;      // section entries
    bool is_section = false;
    int line = 0; // 1-based source line, 0 when synthesized

    const Node* find(const std::string& k) const;
    std::vector<const Node*> find_all(const std::string& k) const;

    // Typed accessors with line-located errors.
    std::string as_string() const;
    long long as_int() const;
    double as_double() const;
    bool as_bool() const;
    std::vector<long long> as_int_list() const;

    // Child lookups; `require_*` throw when the key is missing.
    std::string get_string(const std::string& k, const std::string& fallback) const;
    long long get_int(const std::string& k, long long fallback) const;
    double get_double(const std::string& k, double fallback) const;
    bool get_bool(const std::string& k, bool fallback) const;
    const Node& require(const std::string& k) const;
};

struct Document {
    std::vector<Node> entries;

    const Node* find(const std::string& k) const;
    std::vector<const Node*> find_all(const std::string& k) const;
    const Node& require(const std::string& k) const;
};

/// Parses a document. Comments run from `#` to end of line. Throws
/// Error{parse} with the offending line number on malformed input.
Document parse(const std::string& text);

/// Canonical serialization: two-space indentation, single values bare,
/// multi-values bracketed. parse(serialize(d)) reproduces d, and
/// serialize is a fixed point over parse∘serialize.
std::string serialize(const Document& doc);

Document read_file(const std::string& path);

/// Atomic write: temp file in the same directory, then rename.
void write_file(const std::string& path, const std::string& content);

// Node construction helpers for serializer-side code.
Node scalar(const std::string& key, const std::string& value);
Node scalar(const std::string& key, long long value);
Node scalar(const std::string& key, double value);
Node list(const std::string& key, const std::vector<std::string>& values);
Node int_list(const std::string& key, const std::vector<long long>& values);
Node section(const std::string& key);

} // namespace xlfuse::textdoc
