#include <doctest.h>

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "medsens/rng.hpp"

using namespace medsens;

TEST_CASE("identical (seed, stream) reproduce identical sequences") {
    RngStream a(987654321, 17);
    RngStream b(987654321, 17);
    for (int i = 0; i < 10000; ++i) {
        REQUIRE(a.next_u64() == b.next_u64());
    }
    RngStream c(987654321, 17);
    RngStream d(987654321, 17);
    for (int i = 0; i < 1000; ++i) {
        REQUIRE(c.uniform01() == d.uniform01());
        REQUIRE(c.normal01() == d.normal01());
    }
}

TEST_CASE("distinct streams differ") {
    RngStream a(42, 0);
    RngStream b(42, 1);
    RngStream c(43, 0);
    int equal_ab = 0, equal_ac = 0;
    for (int i = 0; i < 1000; ++i) {
        std::uint64_t va = a.next_u64();
        if (va == b.next_u64()) ++equal_ab;
        if (va == c.next_u64()) ++equal_ac;
    }
    CHECK(equal_ab == 0);
    CHECK(equal_ac == 0);
}

TEST_CASE("uniform01 lies strictly inside (0,1) and looks uniform") {
    RngStream rng(7, 3);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) {
        double u = rng.uniform01();
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(sum / 100000 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("sample_normal moments and degenerate sd") {
    RngStream rng(2024, 5);
    CHECK(sample_normal(5.0, 0.0, rng) == 5.0);
    double sum = 0.0, sumsq = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        double x = sample_normal(0.0, 1.0, rng);
        sum += x;
        sumsq += x * x;
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    CHECK(std::fabs(mean) < 0.02);  // 5 sd / sqrt(n) bound from the contract
    CHECK(var == doctest::Approx(1.0).epsilon(0.03));
    CHECK_THROWS_AS(sample_normal(0.0, -1.0, rng), std::invalid_argument);
}

TEST_CASE("sample_bernoulli edge and typical cases") {
    RngStream rng(11, 0);
    for (int i = 0; i < 1000; ++i) {
        CHECK(sample_bernoulli(0.0, rng) == 0);
        CHECK(sample_bernoulli(1.0, rng) == 1);
    }
    int ones = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) ones += sample_bernoulli(0.3, rng);
    CHECK(static_cast<double>(ones) / n == doctest::Approx(0.3).epsilon(0.04));
    CHECK(std::fabs(static_cast<double>(ones) / n - 0.3) < 0.01);
    CHECK_THROWS_AS(sample_bernoulli(1.5, rng), std::invalid_argument);
    CHECK_THROWS_AS(sample_bernoulli(-0.1, rng), std::invalid_argument);
}

TEST_CASE("sample_categorical frequencies") {
    RngStream rng(99, 4);
    std::array<double, 4> probs{0.25, 0.25, 0.20, 0.30};
    std::array<int, 4> counts{};
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        counts[sample_categorical(probs, rng)] += 1;
    }
    for (int k = 0; k < 4; ++k) {
        CHECK(static_cast<double>(counts[k]) / n == doctest::Approx(probs[k]).epsilon(0.03));
    }
    CHECK_THROWS_AS(sample_categorical(std::vector<double>{}, rng), std::invalid_argument);
    CHECK_THROWS_AS(sample_categorical(std::vector<double>{-1.0, 2.0}, rng),
                    std::invalid_argument);
}

TEST_CASE("substream combiner is deterministic and order sensitive") {
    CHECK(substream({1, 2, 3}) == substream({1, 2, 3}));
    CHECK(substream({1, 2, 3}) != substream({3, 2, 1}));
    CHECK(substream({kPurposeImpute, 0, 1}) != substream({kPurposeBootstrap, 0, 1}));
}
