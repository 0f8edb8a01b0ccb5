// Copyright (c) 2026 The xlfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlfuse/textdoc.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "xlfuse/error.hpp"

namespace xlfuse::textdoc {

namespace {

[[noreturn]] void fail(int line, const std::string& msg) {
    throw Error(ErrorKind::parse, msg, line);
}

std::vector<std::string> tokenize(const std::string& s, int line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == '[' || c == ']' || c == ',') {
            if (!cur.empty()) { out.push_back(cur); cur.clear(); }
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) { out.push_back(cur); cur.clear(); }
            continue;
        }
        cur.push_back(c);
    }
    if (!cur.empty()) out.push_back(cur);
    if (out.empty()) fail(line, "expected a value after key");
    return out;
}

std::string strip(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

} // namespace

const Node* Node::find(const std::string& k) const {
    for (const auto& c : children)
        if (c.key == k) return &c;
    return nullptr;
}

std::vector<const Node*> Node::find_all(const std::string& k) const {
    std::vector<const Node*> out;
    for (const auto& c : children)
        if (c.key == k) out.push_back(&c);
    return out;
}

std::string Node::as_string() const {
    if (values.size() != 1) fail(line, "key '" + key + "' expects a single value");
    return values[0];
}

long long Node::as_int() const {
    const std::string v = as_string();
    long long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        fail(line, "key '" + key + "': '" + v + "' is not an integer");
    return out;
}

double Node::as_double() const {
    const std::string v = as_string();
    try {
        size_t pos = 0;
        double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        fail(line, "key '" + key + "': '" + v + "' is not a number");
    }
}

bool Node::as_bool() const {
    const std::string v = as_string();
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail(line, "key '" + key + "': '" + v + "' is not a boolean");
}

std::vector<long long> Node::as_int_list() const {
    std::vector<long long> out;
    for (const auto& v : values) {
        long long x = 0;
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
        if (ec != std::errc() || p != v.data() + v.size())
            fail(line, "key '" + key + "': '" + v + "' is not an integer");
        out.push_back(x);
    }
    return out;
}

std::string Node::get_string(const std::string& k, const std::string& fallback) const {
    const Node* n = find(k);
    return n ? n->as_string() : fallback;
}

long long Node::get_int(const std::string& k, long long fallback) const {
    const Node* n = find(k);
    return n ? n->as_int() : fallback;
}

double Node::get_double(const std::string& k, double fallback) const {
    const Node* n = find(k);
    return n ? n->as_double() : fallback;
}

bool Node::get_bool(const std::string& k, bool fallback) const {
    const Node* n = find(k);
    return n ? n->as_bool() : fallback;
}

const Node& Node::require(const std::string& k) const {
    const Node* n = find(k);
    if (!n) fail(line, "section '" + key + "' is missing required key '" + k + "'");
    return *n;
}

const Node* Document::find(const std::string& k) const {
    for (const auto& c : entries)
        if (c.key == k) return &c;
    return nullptr;
}

std::vector<const Node*> Document::find_all(const std::string& k) const {
    std::vector<const Node*> out;
    for (const auto& c : entries)
        if (c.key == k) out.push_back(&c);
    return out;
}

const Node& Document::require(const std::string& k) const {
    const Node* n = find(k);
    if (!n) fail(0, "document is missing required key '" + k + "'");
    return *n;
}

Document parse(const std::string& text) {
    Document doc;
    std::vector<Node*> stack; // open sections
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        size_t hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        std::string line = strip(raw);
        if (line.empty()) continue;

        auto& siblings = stack.empty() ? doc.entries : stack.back()->children;

        if (line == "}") {
            if (stack.empty()) fail(lineno, "unmatched '}'");
            stack.pop_back();
            continue;
        }

        size_t sp = line.find_first_of(" \t");
        std::string key = sp == std::string::npos ? line : line.substr(0, sp);
        std::string rest = sp == std::string::npos ? "" : strip(line.substr(sp + 1));
        if (key.empty()) fail(lineno, "expected a key");
        if (key.find('{') != std::string::npos || key.find('}') != std::string::npos)
            fail(lineno, "key '" + key + "' must be separated from braces by whitespace");

        Node node;
        node.key = key;
        node.line = lineno;
        if (rest == "{") {
            node.is_section = true;
            siblings.push_back(std::move(node));
            stack.push_back(&siblings.back());
        } else if (!rest.empty() && rest.back() == '{') {
            fail(lineno, "'{' must be the last token on its line");
        } else if (rest.empty()) {
            fail(lineno, "key '" + key + "' has no value (use 'key value' or 'key {')");
        } else {
            node.values = tokenize(rest, lineno);
            siblings.push_back(std::move(node));
        }
    }
    if (!stack.empty())
        fail(stack.back()->line, "section '" + stack.back()->key + "' is never closed");
    return doc;
}

namespace {

void emit(std::ostream& os, const Node& n, int depth) {
    for (int i = 0; i < depth; ++i) os << "  ";
    os << n.key;
    if (n.is_section) {
        os << " {\n";
        for (const auto& c : n.children) emit(os, c, depth + 1);
        for (int i = 0; i < depth; ++i) os << "  ";
        os << "}\n";
        return;
    }
    if (n.values.size() == 1) {
        os << ' ' << n.values[0];
    } else {
        os << " [";
        for (size_t i = 0; i < n.values.size(); ++i) {
            if (i) os << ", ";
            os << n.values[i];
        }
        os << ']';
    }
    os << '\n';
}

} // namespace

std::string serialize(const Document& doc) {
    std::ostringstream os;
    for (const auto& n : doc.entries) emit(os, n, 0);
    return os.str();
}

Document read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

void write_file(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::io, "cannot write '" + tmp.string() + "'");
        out << content;
    }
    fs::rename(tmp, target);
}

Node scalar(const std::string& key, const std::string& value) {
    Node n;
    n.key = key;
    n.values = {value};
    return n;
}

Node scalar(const std::string& key, long long value) {
    return scalar(key, std::to_string(value));
}

Node scalar(const std::string& key, double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return scalar(key, std::string(buf));
}

Node list(const std::string& key, const std::vector<std::string>& values) {
    Node n;
    n.key = key;
    n.values = values;
    return n;
}

Node int_list(const std::string& key, const std::vector<long long>& values) {
    Node n;
    n.key = key;
    for (long long v : values) n.values.push_back(std::to_string(v));
    return n;
}

Node section(const std::string& key) {
    Node n;
    n.key = key;
    n.is_section = true;
    return n;
}

} // namespace xlfuse::textdoc
