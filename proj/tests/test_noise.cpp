#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fixtures.hpp"
#include "nbcert/noise.hpp"

using namespace nbcert;

TEST_CASE("zero noise always samples the origin") {
    NoiseModel noise = NoiseModel::zero(3);
    Rng rng(1);
    for (int i = 0; i < 100; ++i) CHECK(sample(noise, rng) == Vec{0.0, 0.0, 0.0});
    CHECK(noise.is_zero());
}

TEST_CASE("uniform samples respect bounds and have near-zero mean") {
    NoiseModel noise = NoiseModel::uniform({1.0});
    Rng rng(2);
    double mean = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
        const double d = sample(noise, rng)[0];
        REQUIRE(d >= -1.0);
        REQUIRE(d <= 1.0);
        mean += d;
    }
    mean /= n;
    CHECK(std::abs(mean) < 0.005);
}

TEST_CASE("fixed seed reproduces the sample sequence") {
    NoiseModel noise = NoiseModel::uniform({0.5, 0.25});
    Rng a = Rng::stream(99, {1, 2});
    Rng b = Rng::stream(99, {1, 2});
    for (int i = 0; i < 50; ++i) CHECK(sample(noise, a) == sample(noise, b));
}

TEST_CASE("partition tiles the support with exact masses") {
    const CellPartition p1 = partition(NoiseModel::uniform({1.0}), 2);
    REQUIRE(p1.size() == 2);
    CHECK(p1.cells[0].lower[0] == Catch::Approx(-1.0));
    CHECK(p1.cells[0].upper[0] == Catch::Approx(0.0));
    CHECK(p1.cells[1].upper[0] == Catch::Approx(1.0));
    CHECK(p1.mass[0] == Catch::Approx(0.5));
    CHECK(p1.mass[1] == Catch::Approx(0.5));

    const CellPartition p2 = partition(NoiseModel::uniform({1.0, 1.0}), 2);
    REQUIRE(p2.size() == 4);
    for (double m : p2.mass) CHECK(m == Catch::Approx(0.25));

    CHECK_THROWS_AS(partition(NoiseModel::uniform({1.0}), 0), std::invalid_argument);
}

TEST_CASE("partition masses always sum to one") {
    Rng rng(13);
    for (int t = 0; t < 30; ++t) {
        const std::size_t dim = 1 + rng.uniform_int(3);
        Vec radius(dim);
        for (auto& r : radius) r = rng.uniform(0.0, 2.0);
        const std::size_t m = 1 + rng.uniform_int(5);
        const CellPartition p = partition(NoiseModel::uniform(radius), m);
        double total = 0.0;
        for (double v : p.mass) total += v;
        CHECK(total == Catch::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("bound_expectation on constants and the identity") {
    const CellPartition p = partition(NoiseModel::uniform({1.0}), 2);
    auto constant = [](const Box&) { return Interval(0.7, 0.7); };
    CHECK(bound_expectation(BoundSide::upper, constant, p) == Catch::Approx(0.7));
    CHECK(bound_expectation(BoundSide::lower, constant, p) == Catch::Approx(0.7));

    auto identity = [](const Box& b) { return b.axis(0); };
    CHECK(bound_expectation(BoundSide::upper, identity, p) == Catch::Approx(0.5));
    CHECK(bound_expectation(BoundSide::lower, identity, p) == Catch::Approx(-0.5));

    CHECK_THROWS_AS(bound_expectation(BoundSide::upper, constant, CellPartition{}),
                    std::invalid_argument);
}

TEST_CASE("expectation bounds sandwich Monte-Carlo means and tighten with m") {
    Rng rng(17);
    for (int inst = 0; inst < 15; ++inst) {
        const MlpNetwork net = fixtures::random_net(rng, 1, {6}, 1, Activation::tanh,
                                                    Activation::linear);
        const double radius = rng.uniform(0.2, 1.5);
        const NoiseModel noise = NoiseModel::uniform({radius});
        auto F = [&](const Box& b) { return net.ibp_value(b); };

        // Monte-Carlo oracle
        double mc = 0.0;
        const int n = 200000;
        Rng mc_rng(1000 + inst);
        for (int i = 0; i < n; ++i) mc += net.value(sample(noise, mc_rng));
        mc /= n;

        double prev_lo = -1e300, prev_hi = 1e300;
        for (std::size_t m : {2, 4, 8, 16}) {
            const CellPartition p = partition(noise, m);
            const double lo = bound_expectation(BoundSide::lower, F, p);
            const double hi = bound_expectation(BoundSide::upper, F, p);
            CHECK(lo <= mc + 0.01);
            CHECK(hi >= mc - 0.01);
            // refinement never loosens
            CHECK(lo >= prev_lo - 1e-12);
            CHECK(hi <= prev_hi + 1e-12);
            prev_lo = lo;
            prev_hi = hi;
        }
    }
}
