// Copyright (c) 2026 The xlfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "test_util.hpp"
#include "xlfuse/error.hpp"
#include "xlfuse/textdoc.hpp"

using namespace xlfuse;
namespace td = xlfuse::textdoc;

TEST_CASE("scalar, list and section entries parse") {
    auto doc = td::parse("name a1\nshape [1, 2, 3]\nsec {\n  key v\n}\n");
    CHECK(doc.require("name").as_string() == "a1");
    auto xs = doc.require("shape").as_int_list();
    REQUIRE(xs.size() == 3);
    CHECK(xs[2] == 3);
    CHECK(doc.require("sec").require("key").as_string() == "v");
}

TEST_CASE("comments and blank lines are ignored") {
    auto doc = td::parse("# header\n\nname x # trailing\n");
    CHECK(doc.require("name").as_string() == "x");
}

TEST_CASE("errors carry the offending line") {
    try {
        td::parse("name ok\nbroken\n");
        FAIL("expected parse error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::parse);
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(td::parse("sec {\n"), Error);
    CHECK_THROWS_AS(td::parse("}\n"), Error);
    CHECK_THROWS_AS(td::parse("key 1\nk{ x\n"), Error);
}

TEST_CASE("serialize is a fixed point over parse") {
    const std::string src = "name a\nsec {\n  xs [1, 2]\n  inner {\n    v 3\n  }\n}\nz 9\n";
    auto d1 = td::parse(src);
    std::string s1 = td::serialize(d1);
    auto d2 = td::parse(s1);
    CHECK(td::serialize(d2) == s1);
}

TEST_CASE("fixture documents round-trip") {
    for (const char* f : {"graphs/a1.graph", "graphs/squeezenet.graph", "devices/titan_xp.device"}) {
        auto d1 = td::parse(test::read_file(test::fixture_path(f)));
        std::string s1 = td::serialize(d1);
        CHECK(td::serialize(td::parse(s1)) == s1);
    }
}

TEST_CASE("typed accessors reject bad values with loci") {
    auto doc = td::parse("n notanumber\n");
    try {
        doc.require("n").as_int();
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.line() == 1);
    }
}
