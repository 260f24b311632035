#pragma once

// Shared test fixtures: hand-built networks, supervised controller fits,
// and the benchmark systems the end-to-end tests verify against.

#include <cmath>
#include <functional>
#include <vector>

#include "nbcert/env.hpp"
#include "nbcert/nn.hpp"
#include "nbcert/rng.hpp"

namespace fixtures {

using nbcert::Activation;
using nbcert::Box;
using nbcert::Layer;
using nbcert::Matrix;
using nbcert::MlpNetwork;
using nbcert::Region;
using nbcert::Rng;
using nbcert::SystemModel;
using nbcert::Vec;

/// Single affine layer net: y = W x + b with the given activation.
inline MlpNetwork linear_net(const std::vector<Vec>& w_rows, const Vec& b,
                             Activation act = Activation::linear) {
    Layer l;
    l.w = Matrix(w_rows.size(), w_rows[0].size());
    for (std::size_t r = 0; r < w_rows.size(); ++r)
        for (std::size_t c = 0; c < w_rows[0].size(); ++c) l.w(r, c) = w_rows[r][c];
    l.b = b;
    l.act = act;
    return MlpNetwork(w_rows[0].size(), {l});
}

inline MlpNetwork zero_controller(std::size_t in, std::size_t out) {
    return linear_net(std::vector<Vec>(out, Vec(in, 0.0)), Vec(out, 0.0));
}

/// Constant scalar output regardless of input.
inline MlpNetwork constant_net(std::size_t in, double value) {
    return linear_net({Vec(in, 0.0)}, {value});
}

inline MlpNetwork random_net(Rng& rng, std::size_t in, const std::vector<std::size_t>& hidden,
                             std::size_t out, Activation hidden_act, Activation out_act,
                             double scale = 1.0) {
    return MlpNetwork::random(in, hidden, out, hidden_act, out_act, rng, scale);
}

/// Supervised least-squares fit of a small MLP to a target map over a box.
inline MlpNetwork fit_net(const std::function<Vec(const Vec&)>& target, const Box& domain,
                          std::size_t out_dim, const std::vector<std::size_t>& hidden,
                          Activation hidden_act, std::size_t iters, double lr, std::uint64_t seed) {
    Rng rng(seed);
    MlpNetwork net =
        MlpNetwork::random(domain.dim(), hidden, out_dim, hidden_act, Activation::linear, rng, 1.0);
    nbcert::GradientTape vel = net.zero_tape();
    const std::size_t batch = 32;
    for (std::size_t it = 0; it < iters; ++it) {
        nbcert::GradientTape grad = net.zero_tape();
        for (std::size_t b = 0; b < batch; ++b) {
            Vec x(domain.dim());
            for (std::size_t d = 0; d < x.size(); ++d)
                x[d] = rng.uniform(domain.lower[d], domain.upper[d]);
            const Vec y = target(x);
            const Vec pred = net.forward(x);
            Vec upstream(out_dim);
            for (std::size_t j = 0; j < out_dim; ++j)
                upstream[j] = 2.0 * (pred[j] - y[j]) / static_cast<double>(batch);
            grad.add_scaled(net.gradients(x, upstream), 1.0);
        }
        vel.scale(0.9);
        vel.add_scaled(grad, -lr);
        net.apply_update(vel, 1.0);
    }
    return net;
}

/// 1D contraction with an asymmetric unsafe band, handy for hand-written
/// linear certificates (B(s) = s - c0 separates S_0 from S_u).
inline SystemModel asymmetric_contraction_1d() {
    SystemModel m;
    m.name = "asym-contraction-1d";
    m.state_dim = 1;
    m.action_dim = 1;
    m.state_space = Box({-2.0}, {2.0});
    m.initial_set = Region{Box({-0.5}, {0.5})};
    m.unsafe_set = Region{Box({1.8}, {2.0})};
    m.decoding = nbcert::ActionDecoding::clamp;
    m.action_low = {-1.0};
    m.action_high = {1.0};
    m.dynamics = nbcert::make_dynamics(1, 1, nbcert::dyn::Contraction1d{});
    m.lipschitz_f = 0.5;
    m.check();
    return m;
}

/// Generic 1D affine closed loop s' = A s + B a with box regions.
inline SystemModel affine_1d(double A, double Bcoef, double lip, Box space, Region initial,
                             Region unsafe, double a_lo = -1.0, double a_hi = 1.0) {
    SystemModel m;
    m.name = "affine-1d";
    m.state_dim = 1;
    m.action_dim = 1;
    m.state_space = std::move(space);
    m.initial_set = std::move(initial);
    m.unsafe_set = std::move(unsafe);
    m.decoding = nbcert::ActionDecoding::clamp;
    m.action_low = {a_lo};
    m.action_high = {a_hi};
    struct Dyn {
        double A, B;
        template <class T>
        std::vector<T> operator()(const std::vector<T>& s, const std::vector<T>& a) const {
            return {A * s[0] + B * a[0]};
        }
    };
    m.dynamics = nbcert::make_dynamics(1, 1, Dyn{A, Bcoef});
    m.lipschitz_f = lip;
    m.check();
    return m;
}

/// Bistable 1D system: x' = 1.4x - 0.4x^3 + a with a stabilizing linear
/// controller a = 0.3(x + noise). The saddle sits at 0; the right basin is
/// forever-safe, the left attractor (~ -1.32) brushes the unsafe band, so
/// the safety probability from states near the saddle is genuinely in (0,1)
/// once the noise is large enough to push trajectories across.
inline SystemModel bistable_1d() {
    SystemModel m;
    m.name = "bistable-1d";
    m.state_dim = 1;
    m.action_dim = 1;
    m.state_space = Box({-2.0}, {2.0});
    m.initial_set = Region{Box({0.05}, {0.3})};
    m.unsafe_set = Region{Box({-2.0}, {-1.5})};
    m.decoding = nbcert::ActionDecoding::clamp;
    m.action_low = {-1.0};
    m.action_high = {1.0};
    struct Dyn {
        template <class T>
        std::vector<T> operator()(const std::vector<T>& s, const std::vector<T>& a) const {
            return {s[0] + 0.4 * s[0] - 0.4 * s[0] * sqr_of(s[0]) + a[0]};
        }
        static double sqr_of(double v) { return v * v; }
        static nbcert::Interval sqr_of(const nbcert::Interval& v) { return nbcert::sqr(v); }
    };
    m.dynamics = nbcert::make_dynamics(1, 1, Dyn{});
    // |d/ds (1.4 s - 0.4 s^3)| <= 1.4 + 1.2*4 = 6.2 over |s| <= 2; action column 1
    m.lipschitz_f = 6.2;
    m.check();
    return m;
}

inline MlpNetwork bistable_controller() { return linear_net({{0.3}}, {0.0}); }

/// 2D variant: bistable x-axis coupled with a contracting y-axis. The
/// controller is fit (not hand-built) in tests that require it.
inline SystemModel bistable_2d() {
    SystemModel m;
    m.name = "bistable-2d";
    m.state_dim = 2;
    m.action_dim = 2;
    m.state_space = Box({-2.0, -1.5}, {2.0, 1.5});
    m.initial_set = Region{Box({0.05, -0.2}, {0.3, 0.2})};
    m.unsafe_set = Region{Box({-2.0, -1.5}, {-1.5, 1.5})};
    m.decoding = nbcert::ActionDecoding::clamp;
    m.action_low = {-1.0, -1.0};
    m.action_high = {1.0, 1.0};
    struct Dyn {
        template <class T>
        std::vector<T> operator()(const std::vector<T>& s, const std::vector<T>& a) const {
            return {s[0] + 0.4 * s[0] - 0.4 * s[0] * sqr_of(s[0]) + a[0], 0.5 * s[1] + a[1]};
        }
        static double sqr_of(double v) { return v * v; }
        static nbcert::Interval sqr_of(const nbcert::Interval& v) { return nbcert::sqr(v); }
    };
    m.dynamics = nbcert::make_dynamics(2, 2, Dyn{});
    m.lipschitz_f = 6.2;
    m.check();
    return m;
}

/// Exact linear controller for bistable_2d: a = (0.3 x, 0.2 y).
inline MlpNetwork bistable_2d_controller() {
    return linear_net({{0.3, 0.0}, {0.0, 0.2}}, {0.0, 0.0});
}

/// Conveyor system for finite-horizon bounds: drift +0.05 until the
/// observed state crosses 0.6, then a +0.8 jump lands deep inside the
/// unsafe band [1.0, 2.0]. Entries always penetrate past 1.2 - r, so the
/// barrier can transition within the entry-free layer and the
/// finite-horizon upper families are genuinely satisfiable.
inline SystemModel conveyor_1d() {
    SystemModel m;
    m.name = "conveyor-1d";
    m.state_dim = 1;
    m.action_dim = 1;
    m.state_space = Box({-2.0}, {2.0});
    m.initial_set = Region{Box({-0.2}, {0.2})};
    m.unsafe_set = Region{Box({1.0}, {2.0})};
    m.decoding = nbcert::ActionDecoding::argmax;
    m.discrete_actions = {Vec{0.05}, Vec{0.8}};
    struct Dyn {
        template <class T>
        std::vector<T> operator()(const std::vector<T>& s, const std::vector<T>& a) const {
            return {s[0] + a[0]};
        }
    };
    m.dynamics = nbcert::make_dynamics(1, 1, Dyn{});
    m.lipschitz_f = 1.0;
    m.check();
    return m;
}

/// Conveyor controller: argmax of (0, 10(x - 0.6)) picks the jump action
/// exactly when the observed state exceeds 0.6.
inline MlpNetwork conveyor_controller() { return linear_net({{0.0}, {10.0}}, {0.0, -6.0}); }

/// 2-periodic contraction: M = [[0, -s], [q/s, 0]] has M^2 = -q I, so two
/// steps contract by q < 1 while a single step can expand by s. `spread`
/// controls how lopsided the one-step map is.
inline SystemModel periodic_2d(double spread = 1.5, double q = 0.7) {
    SystemModel m;
    m.name = "periodic-2d";
    m.state_dim = 2;
    m.action_dim = 1;
    m.state_space = Box({-2.0, -2.0}, {2.0, 2.0});
    m.initial_set = Region{Box({-0.3, -0.3}, {0.3, 0.3})};
    m.unsafe_set = Region{Box({1.7, -2.0}, {2.0, 2.0})};
    m.decoding = nbcert::ActionDecoding::clamp;
    m.action_low = {-1.0};
    m.action_high = {1.0};
    struct Dyn {
        double s, q;
        template <class T>
        std::vector<T> operator()(const std::vector<T>& x, const std::vector<T>&) const {
            return {-s * x[1], (q / s) * x[0]};
        }
    };
    m.dynamics = nbcert::make_dynamics(2, 1, Dyn{spread, q});
    m.lipschitz_f = std::max(spread, q / spread);
    m.check();
    return m;
}

}  // namespace fixtures
