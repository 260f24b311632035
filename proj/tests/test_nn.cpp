#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "fixtures.hpp"
#include "nbcert/nn.hpp"

using namespace nbcert;
using fixtures::linear_net;

namespace {

// Independent straight-line evaluator: scalar-by-scalar, no vector loops
// shared with the implementation path.
double straight_line_eval(const MlpNetwork& net, const Vec& x, std::size_t out_index) {
    std::vector<double> cur(x.begin(), x.end());
    for (const auto& layer : net.layers()) {
        std::vector<double> next;
        for (std::size_t r = 0; r < layer.w.rows; ++r) {
            double z = layer.b[r];
            for (std::size_t c = 0; c < layer.w.cols; ++c) z = z + layer.w(r, c) * cur[c];
            double a = z;
            switch (layer.act) {
                case Activation::relu: a = z > 0 ? z : 0; break;
                case Activation::sigmoid: a = 1.0 / (1.0 + std::exp(-z)); break;
                case Activation::tanh: a = std::tanh(z); break;
                case Activation::linear: break;
            }
            next.push_back(a);
        }
        cur = next;
    }
    return cur[out_index];
}

Vec random_point(Rng& rng, const Box& box) {
    Vec x(box.dim());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(box.lower[i], box.upper[i]);
    return x;
}

}  // namespace

TEST_CASE("forward matches hand-computed affine examples") {
    const MlpNetwork net = linear_net({{2.0}}, {1.0});
    CHECK(net.forward({3.0})[0] == Catch::Approx(7.0));

    const MlpNetwork relu_net = linear_net({{1.0, -1.0}}, {0.0}, Activation::relu);
    CHECK(relu_net.forward({0.3, 0.5})[0] == 0.0);
}

TEST_CASE("forward matches an independent straight-line evaluator") {
    Rng rng(11);
    for (int t = 0; t < 30; ++t) {
        const MlpNetwork net = fixtures::random_net(rng, 3, {5, 4}, 2, Activation::tanh,
                                                    Activation::linear);
        for (int i = 0; i < 10; ++i) {
            const Vec x{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
            const Vec out = net.forward(x);
            for (std::size_t j = 0; j < out.size(); ++j)
                CHECK(std::abs(out[j] - straight_line_eval(net, x, j)) < 1e-12);
        }
    }
}

TEST_CASE("forward rejects dimension mismatches") {
    const MlpNetwork net = linear_net({{2.0}}, {1.0});
    CHECK_THROWS_AS(net.forward({1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("ibp is exact for a single affine layer") {
    const MlpNetwork net = linear_net({{1.0, -1.0}}, {0.0});
    const Box out = net.ibp(Box({0.0, 0.0}, {1.0, 1.0}));
    CHECK(out.lower[0] == Catch::Approx(-1.0));
    CHECK(out.upper[0] == Catch::Approx(1.0));

    const MlpNetwork relu_net = linear_net({{1.0, -1.0}}, {0.0}, Activation::relu);
    const Box out2 = relu_net.ibp(Box({0.0, 0.0}, {1.0, 1.0}));
    CHECK(out2.lower[0] == Catch::Approx(0.0));
    CHECK(out2.upper[0] == Catch::Approx(1.0));
}

TEST_CASE("ibp soundness: sampled outputs stay inside the enclosure") {
    Rng rng(23);
    for (int t = 0; t < 100; ++t) {
        const auto act = t % 3 == 0   ? Activation::relu
                         : t % 3 == 1 ? Activation::sigmoid
                                      : Activation::tanh;
        const MlpNetwork net = fixtures::random_net(rng, 2, {6, 6}, 1, act, Activation::linear);
        Vec lo{rng.uniform(-2, 0), rng.uniform(-2, 0)};
        Vec hi{lo[0] + rng.uniform(0.1, 2.0), lo[1] + rng.uniform(0.1, 2.0)};
        const Box box(lo, hi);
        const Box enclosure = net.ibp(box);
        for (int i = 0; i < 200; ++i) {
            const Vec y = net.forward(random_point(rng, box));
            CHECK(enclosure.contains(y));
        }
    }
}

TEST_CASE("ibp monotonicity: nested boxes give nested enclosures") {
    Rng rng(29);
    for (int t = 0; t < 50; ++t) {
        const MlpNetwork net = fixtures::random_net(rng, 2, {5}, 1, Activation::relu,
                                                    Activation::linear);
        const Box outer({-1.0, -1.0}, {1.0, 1.0});
        const double shrink = rng.uniform(0.0, 0.9);
        const Box inner({-1.0 + shrink, -1.0 + shrink}, {1.0 - shrink, 1.0 - shrink});
        CHECK(net.ibp(outer).contains(net.ibp(inner)));
    }
}

TEST_CASE("lipschitz bound equals the layerwise product on examples") {
    const MlpNetwork net = linear_net({{2.0, 0.0}, {0.0, 3.0}}, {0.0, 0.0}, Activation::relu);
    CHECK(net.lipschitz_1norm() == Catch::Approx(3.0));

    Layer l1, l2;
    l1.w = Matrix(1, 1);
    l1.w(0, 0) = 2.0;
    l1.b = {0.0};
    l1.act = Activation::linear;
    l2.w = Matrix(1, 1);
    l2.w(0, 0) = -4.0;
    l2.b = {0.0};
    l2.act = Activation::linear;
    const MlpNetwork chain(1, {l1, l2});
    CHECK(chain.lipschitz_1norm() == Catch::Approx(8.0));
}

TEST_CASE("lipschitz bound dominates sampled difference ratios") {
    Rng rng(31);
    const MlpNetwork net = fixtures::random_net(rng, 3, {8, 8}, 2, Activation::sigmoid,
                                                Activation::linear);
    const double bound = net.lipschitz_1norm();
    const Box box({-2, -2, -2}, {2, 2, 2});
    for (int i = 0; i < 20000; ++i) {
        const Vec x = random_point(rng, box);
        const Vec y = random_point(rng, box);
        const double dx = norm1_diff(x, y);
        if (dx < 1e-9) continue;
        const double dy = norm1_diff(net.forward(x), net.forward(y));
        CHECK(dy <= bound * dx * (1.0 + 1e-9));
    }
}

TEST_CASE("gradients match hand-computed linear example") {
    const MlpNetwork net = linear_net({{2.0}}, {1.0});
    const GradientTape tape = net.gradients({3.0}, {1.0});
    CHECK(tape.layers[0].dw(0, 0) == Catch::Approx(3.0));
    CHECK(tape.layers[0].db[0] == Catch::Approx(1.0));
}

TEST_CASE("dead relu units get zero gradients") {
    // single relu unit with pre-activation forced negative
    const MlpNetwork net = linear_net({{1.0}}, {-5.0}, Activation::relu);
    const GradientTape tape = net.gradients({1.0}, {1.0});
    CHECK(tape.layers[0].dw(0, 0) == 0.0);
    CHECK(tape.layers[0].db[0] == 0.0);
}

TEST_CASE("gradients match central finite differences") {
    Rng rng(37);
    for (int t = 0; t < 10; ++t) {
        MlpNetwork net = fixtures::random_net(rng, 2, {5, 4}, 1, Activation::tanh,
                                              Activation::sigmoid);
        const Vec x{rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const GradientTape tape = net.gradients(x, {1.0});
        const double h = 1e-5;
        for (std::size_t li = 0; li < net.layers().size(); ++li) {
            auto& layer = net.mutable_layers()[li];
            for (std::size_t idx = 0; idx < layer.w.data.size(); ++idx) {
                const double keep = layer.w.data[idx];
                layer.w.data[idx] = keep + h;
                const double up = net.value(x);
                layer.w.data[idx] = keep - h;
                const double dn = net.value(x);
                layer.w.data[idx] = keep;
                const double fd = (up - dn) / (2 * h);
                const double an = tape.layers[li].dw.data[idx];
                CHECK(std::abs(fd - an) <= 1e-4 * std::max(1.0, std::abs(fd)));
            }
            for (std::size_t idx = 0; idx < layer.b.size(); ++idx) {
                const double keep = layer.b[idx];
                layer.b[idx] = keep + h;
                const double up = net.value(x);
                layer.b[idx] = keep - h;
                const double dn = net.value(x);
                layer.b[idx] = keep;
                const double fd = (up - dn) / (2 * h);
                CHECK(std::abs(fd - tape.layers[li].db[idx]) <= 1e-4 * std::max(1.0, std::abs(fd)));
            }
        }
    }
}

TEST_CASE("weights round-trip bitwise through JSON") {
    Rng rng(41);
    const MlpNetwork net = fixtures::random_net(rng, 3, {4}, 2, Activation::relu,
                                                Activation::linear);
    const auto path = std::filesystem::temp_directory_path() / "nbcert_test_weights.json";
    save_weights(net, path.string());
    const MlpNetwork loaded = load_weights(path.string());
    REQUIRE(loaded.layers().size() == net.layers().size());
    for (std::size_t li = 0; li < net.layers().size(); ++li) {
        CHECK(loaded.layers()[li].w.data == net.layers()[li].w.data);
        CHECK(loaded.layers()[li].b == net.layers()[li].b);
        CHECK(loaded.layers()[li].act == net.layers()[li].act);
    }
    std::filesystem::remove(path);
}

TEST_CASE("weights loader rejects malformed files") {
    const auto dir = std::filesystem::temp_directory_path();
    const auto bad_chain = dir / "nbcert_bad_chain.json";
    write_file(bad_chain.string(),
               R"({"input_dim": 1, "layers": [
                   {"w": [[1.0, 2.0]], "b": [0.0], "act": "relu"},
                   {"w": [[1.0]], "b": [0.0], "act": "linear"}]})");
    CHECK_THROWS_AS(load_weights(bad_chain.string()), std::invalid_argument);
    const auto garbage = dir / "nbcert_garbage.json";
    write_file(garbage.string(), "not json at all {{{");
    CHECK_THROWS_AS(load_weights(garbage.string()), std::invalid_argument);
    std::filesystem::remove(bad_chain);
    std::filesystem::remove(garbage);
}

TEST_CASE("hand-written weights file evaluates as written") {
    const auto path = std::filesystem::temp_directory_path() / "nbcert_hand.json";
    write_file(path.string(),
               R"({"input_dim": 1, "layers": [{"w": [[2.5]], "b": [-0.5], "act": "linear"}]})");
    const MlpNetwork net = load_weights(path.string());
    CHECK(net.forward({1.0})[0] == Catch::Approx(2.0));
    std::filesystem::remove(path);
}
