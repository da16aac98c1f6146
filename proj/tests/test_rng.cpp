#include <doctest.h>

#include <cmath>
#include <vector>

#include "sae/rng.hpp"

using namespace sae;

TEST_CASE("same (seed, stream) reproduces the sequence exactly") {
    Philox a(42, 7), b(42, 7);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different streams are distinct") {
    Philox a(42, 0), b(42, 1);
    bool any_diff = false;
    for (int i = 0; i < 16; ++i) any_diff |= (a.next_u64() != b.next_u64());
    CHECK(any_diff);
}

TEST_CASE("uniform stays inside the open unit interval") {
    Philox rng(1, 0);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        CHECK(u > 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("normal moments are near standard") {
    Philox rng(3, 0);
    double sum = 0.0, ss = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        ss += z * z;
    }
    const double mean = sum / n;
    const double var = ss / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("next_below covers the range without bias artifacts") {
    Philox rng(9, 2);
    std::vector<int> counts(5, 0);
    for (int i = 0; i < 50000; ++i) ++counts[rng.next_below(5)];
    for (int c : counts) CHECK(c > 9500);
}
