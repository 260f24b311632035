#include <catch2/catch_amalgamated.hpp>

#include "nbcert/toml.hpp"

using namespace nbcert;

TEST_CASE("toml parses scalars, strings, and arrays") {
    const auto root = toml::parse(R"(
# a comment
seed = 42
rate = 0.25
name = "hello # not a comment"
flag = true
radius = [0.1, 0.2, 0.3]
matrix = [[1.0, 2.0], [3.0, 4.0]]
)");
    CHECK(root.at("seed").as_int() == 42);
    CHECK(root.at("rate").as_double() == Catch::Approx(0.25));
    CHECK(root.at("name").as_string() == "hello # not a comment");
    CHECK(root.at("flag").as_bool());
    CHECK(root.at("radius").as_double_array() == std::vector<double>{0.1, 0.2, 0.3});
    const auto m = root.at("matrix").as_double_matrix();
    REQUIRE(m.size() == 2);
    CHECK(m[1][0] == 3.0);
}

TEST_CASE("toml supports multi-line arrays and nested tables") {
    const auto root = toml::parse(R"(
[model]
state_dim = 2
[model.dynamics]
kind = "affine"
A = [
  [0.5, 0.0],
  [0.0, 0.5],   # trailing comment
]
)");
    const auto& dyn = root.at("model").at("dynamics");
    CHECK(dyn.at("kind").as_string() == "affine");
    CHECK(dyn.at("A").as_double_matrix()[1][1] == 0.5);
}

TEST_CASE("toml supports arrays of tables") {
    const auto root = toml::parse(R"(
[[model.unsafe]]
lower = [1.8]
upper = [2.0]
[[model.unsafe]]
lower = [-2.0]
upper = [-1.8]
)");
    const auto& arr = root.at("model").at("unsafe").as_array();
    REQUIRE(arr.size() == 2);
    CHECK(arr[1].at("upper").as_double_array()[0] == -1.8);
}

TEST_CASE("toml reports line numbers on errors") {
    try {
        toml::parse("a = 1\nb = \nc = 3\n");
        FAIL("expected a parse error");
    } catch (const toml::ParseError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(toml::parse("x = 1\nx = 2\n"), toml::ParseError);
    CHECK_THROWS_AS(toml::parse("= 3\n"), toml::ParseError);
    CHECK_THROWS_AS(toml::parse("v = [1, 2\n"), toml::ParseError);
}

TEST_CASE("typed getters reject wrong kinds") {
    const auto root = toml::parse("x = \"str\"\n");
    CHECK_THROWS(root.at("x").as_double());
    CHECK_THROWS(root.at("missing"));
    CHECK(root.number_or("missing", 7.0) == 7.0);
}
