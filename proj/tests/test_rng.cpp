#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pigrid/rng.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using pigrid::Rng;

TEST_CASE("same seed gives an identical stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a.uniform() == b.uniform());
}

TEST_CASE("different seeds diverge") {
    Rng a(1), b(2);
    int same = 0;
    for (int i = 0; i < 100; ++i)
        if (a.uniform() == b.uniform()) ++same;
    CHECK(same < 5);
}

TEST_CASE("uniform stays in [0, 1) and fills the range") {
    Rng rng(7);
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo < 0.001);
    CHECK(hi > 0.999);
}

TEST_CASE("uniform(lo, hi) respects the bounds") {
    Rng rng(9);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform(-3.0, 5.0);
        CHECK(u >= -3.0);
        CHECK(u < 5.0);
    }
}

TEST_CASE("normal has roughly standard moments") {
    Rng rng(11);
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    // standard error of the mean ~ 1/sqrt(n) = 0.0022; allow 4 sigma
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("uniform_index covers [0, n) without bias at the edges") {
    Rng rng(13);
    const std::size_t n = 7;
    std::vector<int> counts(n, 0);
    const int draws = 70000;
    for (int i = 0; i < draws; ++i) {
        const std::size_t k = rng.uniform_index(n);
        REQUIRE(k < n);
        ++counts[k];
    }
    for (int c : counts) CHECK(std::abs(c - draws / static_cast<int>(n)) < 500);
    CHECK(rng.uniform_index(1) == 0);
    CHECK(rng.uniform_index(0) == 0);
}

TEST_CASE("shuffle is a permutation and is seed-deterministic") {
    std::vector<int> v(50);
    for (int i = 0; i < 50; ++i) v[i] = i;
    std::vector<int> w = v;

    Rng a(21);
    a.shuffle(v);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == w);
    CHECK(v != w); // astronomically unlikely to be identity

    std::vector<int> v2 = w;
    Rng b(21);
    b.shuffle(v2);
    CHECK(v2 == v);
}
