#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "nbcert/interval.hpp"
#include "nbcert/rng.hpp"

using namespace nbcert;

TEST_CASE("interval arithmetic encloses sampled values") {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const Interval a(rng.uniform(-3, 1), rng.uniform(1, 4));
        const Interval b(rng.uniform(-2, 0), rng.uniform(0, 3));
        for (int i = 0; i < 20; ++i) {
            const double x = rng.uniform(a.lo, a.hi);
            const double y = rng.uniform(b.lo, b.hi);
            CHECK((a + b).contains(x + y));
            CHECK((a - b).contains(x - y));
            CHECK((a * b).contains(x * y));
            CHECK(sqr(a).contains(x * x));
            CHECK(nbcert::abs(a).contains(std::abs(x)));
            CHECK(nbcert::sin(a).contains(std::sin(x)));
            CHECK(nbcert::cos(a).contains(std::cos(x)));
        }
    }
}

TEST_CASE("interval sin hits interior extrema") {
    const Interval wide(0.0, 4.0);  // contains pi/2
    CHECK(nbcert::sin(wide).hi == 1.0);
    const Interval narrow(0.1, 0.2);
    CHECK(nbcert::sin(narrow).hi == Catch::Approx(std::sin(0.2)));
    CHECK(nbcert::sin(narrow).lo == Catch::Approx(std::sin(0.1)));
    const Interval full(-10.0, 10.0);
    CHECK(nbcert::sin(full).lo == -1.0);
    CHECK(nbcert::sin(full).hi == 1.0);
}

TEST_CASE("interval division rejects zero-crossing denominators") {
    CHECK_THROWS_AS(Interval(1.0, 2.0) / Interval(-1.0, 1.0), std::domain_error);
    const Interval q = Interval(1.0, 2.0) / Interval(2.0, 4.0);
    CHECK(q.lo == Catch::Approx(0.25));
    CHECK(q.hi == Catch::Approx(1.0));
}

TEST_CASE("box membership uses closed boundaries") {
    const Box b({0.0}, {1.0});
    CHECK(b.contains(Vec{0.5}));
    CHECK(b.contains(Vec{1.0}));
    CHECK(b.contains(Vec{0.0}));
    CHECK_FALSE(b.contains(Vec{1.0000001}));
}

TEST_CASE("region union membership is disjunctive") {
    const Region r{Box({0.0}, {1.0}), Box({2.0}, {3.0})};
    CHECK(r.contains(Vec{0.5}));
    CHECK_FALSE(r.contains(Vec{1.5}));
    CHECK(r.contains(Vec{2.0}));
}

TEST_CASE("box constructor validates bounds") {
    CHECK_THROWS_AS(Box({1.0}, {0.0}), std::invalid_argument);
    CHECK_THROWS_AS(Box({0.0, 0.0}, {1.0}), std::invalid_argument);
}

TEST_CASE("box difference tiles the complement") {
    const Box outer({0.0, 0.0}, {4.0, 4.0});
    const Box cut({1.0, 1.0}, {2.0, 3.0});
    const auto pieces = box_difference(outer, cut);
    double vol = 0.0;
    for (const auto& p : pieces) vol += p.volume();
    CHECK(vol == Catch::Approx(outer.volume() - cut.volume()));

    Rng rng(3);
    for (int i = 0; i < 2000; ++i) {
        Vec s{rng.uniform(0, 4), rng.uniform(0, 4)};
        int count = 0;
        for (const auto& p : pieces) count += p.contains(s) ? 1 : 0;
        const bool interior = s[0] > 1.0 && s[0] < 2.0 && s[1] > 1.0 && s[1] < 3.0;
        if (interior) CHECK(count == 0);
        if (!cut.contains(s)) CHECK(count >= 1);
    }
}

TEST_CASE("box distance and bisection") {
    const Box b({0.0, 0.0}, {1.0, 1.0});
    CHECK(b.distance_1(Vec{0.5, 0.5}) == 0.0);
    CHECK(b.distance_1(Vec{2.0, 3.0}) == Catch::Approx(3.0));
    const auto children = b.bisect_all();
    REQUIRE(children.size() == 4);
    double vol = 0.0;
    for (const auto& c : children) vol += c.volume();
    CHECK(vol == Catch::Approx(1.0));
}
