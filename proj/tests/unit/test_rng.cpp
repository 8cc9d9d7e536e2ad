#include <catch2/catch_amalgamated.hpp>

#include <apadiag/rng.hpp>

#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

using namespace apadiag;

TEST_CASE("splitmix64 matches the published reference sequence", "[rng]") {
    std::uint64_t s = 0;
    CHECK(splitmix64(s) == 0xe220a8397b1dcdafull);
    CHECK(splitmix64(s) == 0x6e789e6aa1b965f4ull);
    CHECK(splitmix64(s) == 0x06c45d188009454full);
}

TEST_CASE("generator streams are frozen regression values", "[rng]") {
    // These pin the exact stream so that any refactor that changes generated
    // artifacts is caught here first, with a readable diff.
    Rng r(42);
    CHECK(r.next_u64() == 0xc151df7d6ee5e2d6ull);
    CHECK(r.next_u64() == 0xa3978fb9b92502a8ull);
    CHECK(r.next_u64() == 0xc08c967f0e5e7b0aull);

    Rng u(42);
    CHECK(u.uniform01() == Catch::Approx(0.75515553295453897).epsilon(1e-15));
    CHECK(u.uniform01() == Catch::Approx(0.63903139385469743).epsilon(1e-15));

    CHECK(derive_seed(1, "a") == 0xe09968b6feabf635ull);
    CHECK(derive_seed(1, "b") == 0x63e97a44b65f303dull);
    CHECK(derive_seed(1, "a", 7) == 0xbba41bb59b7adc7bull);
}

TEST_CASE("same seed gives the same stream, different seeds differ", "[rng]") {
    Rng a(7), b(7), c(8);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 64; ++i) {
        const auto va = a.next_u64();
        all_equal = all_equal && (va == b.next_u64());
        any_diff = any_diff || (va != c.next_u64());
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("derive_seed separates tags and indices", "[rng]") {
    std::set<std::uint64_t> seen;
    for (const char* tag : {"alpha", "beta", "gamma"})
        for (std::uint64_t i = 0; i < 8; ++i) seen.insert(derive_seed(123, tag, i));
    CHECK(seen.size() == 24);  // no collisions among near-identical inputs
    CHECK(derive_seed(1, "x") != derive_seed(2, "x"));
}

TEST_CASE("uniform01 stays in [0, 1) and fills the range", "[rng]") {
    Rng r(11);
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double v = r.uniform01();
        REQUIRE(v >= 0.0);
        REQUIRE(v < 1.0);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo < 0.001);
    CHECK(hi > 0.999);
}

TEST_CASE("bounded draws cover exactly [0, n)", "[rng]") {
    Rng r(13);
    std::vector<int> counts(10, 0);
    for (int i = 0; i < 100000; ++i) {
        const auto v = r.bounded(10);
        REQUIRE(v < 10);
        ++counts[static_cast<std::size_t>(v)];
    }
    for (const int c : counts) CHECK(c > 9000);  // within ~7 sigma of 10000
}

TEST_CASE("normal moments match a standard Gaussian", "[rng]") {
    Rng r(17);
    const int n = 1000000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = r.normal();
        sum += v;
        sumsq += v * v;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 5.0 / std::sqrt(static_cast<double>(n)));  // 5 sigma
    CHECK(std::abs(var - 1.0) < 0.01);
}

TEST_CASE("uniform(lo, hi) respects its bounds", "[rng]") {
    Rng r(19);
    for (int i = 0; i < 10000; ++i) {
        const double v = r.uniform(-2.5, 3.5);
        REQUIRE(v >= -2.5);
        REQUIRE(v < 3.5);
    }
}
