#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <cmath>
#include <set>

#include "pendown/common.hpp"

using namespace pendown;

TEST_CASE("seeded rng streams are reproducible", "[common]") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        const std::uint64_t va = a.next_u64();
        REQUIRE(va == b.next_u64());
    }
    bool differs = false;
    Rng a2(42);
    for (int i = 0; i < 100; ++i) differs = differs || (a2.next_u64() != c.next_u64());
    REQUIRE(differs);
}

TEST_CASE("rng below is in range and rejects zero", "[common]") {
    Rng r(7);
    for (int i = 0; i < 1000; ++i) REQUIRE(r.below(13) < 13);
    REQUIRE_THROWS_AS(r.below(0), ValidationError);
}

TEST_CASE("rng unit stays in the half-open interval", "[common]") {
    Rng r(11);
    for (int i = 0; i < 1000; ++i) {
        const double u = r.unit();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("rng normal has sane first moments", "[common]") {
    Rng r(5);
    double s = 0.0, s2 = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double v = r.normal();
        s += v;
        s2 += v * v;
    }
    REQUIRE(std::abs(s / n) < 0.05);
    REQUIRE(std::abs(s2 / n - 1.0) < 0.05);
}

TEST_CASE("permutation is a bijection and seed-stable", "[common]") {
    Rng r(99);
    const auto p = r.permutation(50);
    std::set<std::size_t> seen(p.begin(), p.end());
    REQUIRE(seen.size() == 50);
    REQUIRE(*seen.rbegin() == 49);
    REQUIRE(Rng(99).permutation(50) == p);
}

TEST_CASE("fnv1a64 matches published reference values", "[common]") {
    REQUIRE(fnv1a64("") == 0xcbf29ce484222325ull);
    REQUIRE(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
    REQUIRE(fnv1a64("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("hex64 renders fixed width lowercase", "[common]") {
    REQUIRE(hex64(0) == "0000000000000000");
    REQUIRE(hex64(0xdeadbeefull) == "00000000deadbeef");
    REQUIRE(hex64(UINT64_MAX) == "ffffffffffffffff");
}

TEST_CASE("derive_seed separates scopes", "[common]") {
    REQUIRE(derive_seed(1, "Male") != derive_seed(1, "Female"));
    REQUIRE(derive_seed(1, "Male") == derive_seed(1, "Male"));
    REQUIRE(derive_seed(1, "Male") != derive_seed(2, "Male"));
}

TEST_CASE("format_double round-trips exactly", "[common]") {
    Rng r(3);
    for (int i = 0; i < 2000; ++i) {
        const double v = (r.unit() - 0.5) * std::pow(10.0, r.uniform(-12, 12));
        const double back = parse_double(format_double(v), "probe");
        REQUIRE(back == v);
    }
    REQUIRE(format_double(1.0) == "1");
    REQUIRE(format_double(0.5) == "0.5");
}

TEST_CASE("parse helpers reject trailing garbage", "[common]") {
    REQUIRE_THROWS_AS(parse_double("1.5x", "field"), ParseError);
    REQUIRE_THROWS_AS(parse_double("", "field"), ParseError);
    REQUIRE_THROWS_AS(parse_long("12.5", "field"), ParseError);
    REQUIRE(parse_long("-42", "field") == -42);
}

TEST_CASE("moment helpers match hand values", "[common]") {
    const std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
    REQUIRE(mean_of(v) == Catch::Approx(2.5));
    REQUIRE(population_std(v) == Catch::Approx(std::sqrt(1.25)));
    REQUIRE(sample_std(v) == Catch::Approx(std::sqrt(5.0 / 3.0)));
    REQUIRE(sample_std(std::vector<double>{7.0}) == 0.0);
    REQUIRE_THROWS_AS(mean_of(std::vector<double>{}), ValidationError);
}

TEST_CASE("parallel_for covers every index once at any width", "[common]") {
    for (int threads : {1, 2, 4}) {
        std::vector<std::atomic<int>> hits(97);
        for (auto& h : hits) h = 0;
        parallel_for(hits.size(), threads, [&](std::size_t i) { hits[i].fetch_add(1); });
        for (auto& h : hits) REQUIRE(h.load() == 1);
    }
}

TEST_CASE("parallel_for rethrows a worker exception", "[common]") {
    auto boom = [&](std::size_t i) {
        if (i == 13) throw ValidationError("boom");
    };
    REQUIRE_THROWS_AS(parallel_for(64, 4, boom), ValidationError);
    REQUIRE_THROWS_AS(parallel_for(64, 1, boom), ValidationError);
}
