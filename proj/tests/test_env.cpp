#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "fixtures.hpp"
#include "nbcert/env.hpp"
#include "nbcert/io.hpp"
#include "nbcert/rng.hpp"

using namespace nbcert;

TEST_CASE("builtin toy contraction steps by the defining equation") {
    const SystemModel m = builtin_model("toy-contraction-1d");
    CHECK(m.state_dim == 1);
    CHECK(m.lipschitz_f == Catch::Approx(0.5));
    const Vec next = step(m, {1.0}, {0.7});  // action ignored by the dynamics
    CHECK(next[0] == Catch::Approx(0.5));
}

TEST_CASE("identity affine system from a TOML model file") {
    const auto root = toml::parse(R"(
[model]
name = "identity-2d"
state_dim = 2
action_dim = 1
decoder = "clamp"
action_low = [-1.0]
action_high = [1.0]
lipschitz_f = 1.0
[model.state_space]
lower = [-2.0, -2.0]
upper = [2.0, 2.0]
[[model.initial]]
lower = [-0.5, -0.5]
upper = [0.5, 0.5]
[[model.unsafe]]
lower = [1.8, -2.0]
upper = [2.0, 2.0]
[model.dynamics]
kind = "affine"
A = [[1.0, 0.0], [0.0, 1.0]]
B = [[0.0], [0.0]]
c = [0.0, 0.0]
)");
    const SystemModel m = model_from_toml(root);
    const Vec s{0.3, -0.2};
    CHECK(step(m, s, {0.9}) == s);
}

TEST_CASE("pendulum equilibrium is a fixed point") {
    const SystemModel m = builtin_model("pendulum");
    const Vec next = step(m, {0.0, 0.0}, {0.0});
    CHECK(next[0] == Catch::Approx(0.0));
    CHECK(next[1] == Catch::Approx(0.0));
}

TEST_CASE("region membership examples") {
    const Region box1{Box({0.0}, {1.0})};
    CHECK(region_contains(box1, {0.5}));
    CHECK(region_contains(box1, {1.0}));  // closed boundary
    const Region uni{Box({0.0}, {1.0}), Box({2.0}, {3.0})};
    CHECK_FALSE(region_contains(uni, {1.5}));
}

TEST_CASE("builtin catalog matches the documented dimensions") {
    const SystemModel cp = builtin_model("cartpole");
    CHECK(cp.state_dim == 4);
    CHECK(cp.decoding == ActionDecoding::argmax);
    CHECK(cp.discrete_actions.size() == 2);

    const SystemModel b1 = builtin_model("b1");
    CHECK(b1.state_dim == 2);

    CHECK_THROWS_AS(builtin_model("no-such-system"), std::invalid_argument);
}

TEST_CASE("construction rejects overlapping initial and unsafe sets") {
    SystemModel m = fixtures::asymmetric_contraction_1d();
    m.unsafe_set = Region{Box({0.4}, {0.8})};  // overlaps S_0 = [-0.5, 0.5]
    CHECK_THROWS_AS(m.check(), std::invalid_argument);
}

TEST_CASE("lipschitz_f dominates sampled closed-form difference ratios") {
    Rng rng(17);
    for (const char* name : {"toy-contraction-1d", "cartpole", "pendulum", "tora", "b1"}) {
        const SystemModel m = builtin_model(name);
        int checked = 0;
        for (int i = 0; i < 20000; ++i) {
            Vec s1(m.state_dim), s2(m.state_dim);
            for (std::size_t d = 0; d < m.state_dim; ++d) {
                s1[d] = rng.uniform(m.state_space.lower[d], m.state_space.upper[d]);
                s2[d] = rng.uniform(m.state_space.lower[d], m.state_space.upper[d]);
            }
            Vec a1(m.action_dim), a2(m.action_dim);
            for (std::size_t d = 0; d < m.action_dim; ++d) {
                if (m.decoding == ActionDecoding::argmax) {
                    a1[d] = m.discrete_actions[rng.uniform_int(m.discrete_actions.size())][d];
                    a2[d] = m.discrete_actions[rng.uniform_int(m.discrete_actions.size())][d];
                } else {
                    a1[d] = rng.uniform(m.action_low[d], m.action_high[d]);
                    a2[d] = rng.uniform(m.action_low[d], m.action_high[d]);
                }
            }
            const double din = norm1_diff(s1, s2) + norm1_diff(a1, a2);
            if (din < 1e-9) continue;
            const double dout = norm1_diff(m.dynamics.eval(s1, a1), m.dynamics.eval(s2, a2));
            ++checked;
            REQUIRE(dout <= m.lipschitz_f * din * (1.0 + 1e-9));
        }
        CHECK(checked > 10000);
    }
}

TEST_CASE("interval dynamics enclose concrete evaluations") {
    Rng rng(19);
    for (const char* name : {"cartpole", "pendulum", "tora", "b1"}) {
        const SystemModel m = builtin_model(name);
        for (int t = 0; t < 50; ++t) {
            Vec lo(m.state_dim), hi(m.state_dim);
            for (std::size_t d = 0; d < m.state_dim; ++d) {
                lo[d] = rng.uniform(m.state_space.lower[d], m.state_space.upper[d] - 0.1);
                hi[d] = lo[d] + rng.uniform(0.0, 0.1);
            }
            const Box sb(lo, hi);
            Vec alo(m.action_dim, -1.0), ahi(m.action_dim, 1.0);
            const Box ab(alo, ahi);
            const Box img = m.dynamics.eval_box(sb, ab);
            for (int i = 0; i < 50; ++i) {
                Vec s(m.state_dim), a(m.action_dim);
                for (std::size_t d = 0; d < m.state_dim; ++d)
                    s[d] = rng.uniform(sb.lower[d], sb.upper[d]);
                for (std::size_t d = 0; d < m.action_dim; ++d)
                    a[d] = rng.uniform(ab.lower[d], ab.upper[d]);
                CHECK(img.contains(m.dynamics.eval(s, a)));
            }
        }
    }
}

TEST_CASE("argmax and clamp decoding") {
    const SystemModel cp = builtin_model("cartpole");
    CHECK(decode_action(cp, {0.2, 0.9}) == Vec{10.0});
    CHECK(decode_action(cp, {1.5, 0.9}) == Vec{-10.0});

    const SystemModel pd = builtin_model("pendulum");
    CHECK(decode_action(pd, {5.0}) == Vec{2.0});  // clamped to the range
    CHECK(decode_action(pd, {-0.3}) == Vec{-0.3});
}

TEST_CASE("inline tables are outside the supported TOML subset") {
    CHECK_THROWS_AS(toml::parse("terms = [{out = 0}]\n"), toml::ParseError);
}

TEST_CASE("polynomial dynamics via array-of-tables terms") {
    const auto root = toml::parse(R"(
[model]
state_dim = 1
action_dim = 1
decoder = "clamp"
action_low = [-1.0]
action_high = [1.0]
lipschitz_f = 6.2
[model.state_space]
lower = [-2.0]
upper = [2.0]
[[model.initial]]
lower = [0.05]
upper = [0.3]
[[model.unsafe]]
lower = [-2.0]
upper = [-1.5]
[model.dynamics]
kind = "polynomial"
[[model.dynamics.terms]]
out = 0
coef = 1.4
state_powers = [1]
action_powers = [0]
[[model.dynamics.terms]]
out = 0
coef = -0.4
state_powers = [3]
action_powers = [0]
[[model.dynamics.terms]]
out = 0
coef = 1.0
state_powers = [0]
action_powers = [1]
)");
    const SystemModel m = model_from_toml(root);
    // x' = 1.4 x - 0.4 x^3 + a
    const Vec next = m.dynamics.eval({1.0}, {0.1});
    CHECK(next[0] == Catch::Approx(1.4 - 0.4 + 0.1));
    // interval consistency
    const Box img = m.dynamics.eval_box(Box({0.9}, {1.1}), Box({0.0}, {0.2}));
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const Vec s{rng.uniform(0.9, 1.1)};
        const Vec a{rng.uniform(0.0, 0.2)};
        CHECK(img.contains(m.dynamics.eval(s, a)));
    }
}

TEST_CASE("step raises on non-finite successors") {
    SystemModel m = fixtures::affine_1d(1e308, 1e308, 1.0, Box({-2.0}, {2.0}),
                                        Region{Box({-0.5}, {0.5})}, Region{Box({1.8}, {2.0})});
    m.lipschitz_f = 1.0;
    CHECK_THROWS_AS(step(m, {1.0}, {1.0}), std::runtime_error);
}
