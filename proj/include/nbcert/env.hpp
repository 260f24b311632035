#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nbcert/interval.hpp"
#include "nbcert/nn.hpp"
#include "nbcert/toml.hpp"

namespace nbcert {

enum class ActionDecoding { argmax, clamp };

/// Discrete-time dynamics with two evaluation modes: concrete states and
/// sound interval enclosures (used by the grid validator).
struct Dynamics {
    std::function<Vec(const Vec&, const Vec&)> eval;
    std::function<Box(const Box&, const Box&)> eval_box;
};

/// Build both evaluation modes from one functor templated over the scalar
/// type (double or Interval).
template <class F>
Dynamics make_dynamics(std::size_t state_dim, std::size_t action_dim, F f) {
    Dynamics d;
    d.eval = [f](const Vec& s, const Vec& a) -> Vec { return f(s, a); };
    d.eval_box = [f, state_dim, action_dim](const Box& sb, const Box& ab) -> Box {
        std::vector<Interval> s(state_dim), a(action_dim);
        for (std::size_t i = 0; i < state_dim; ++i) s[i] = sb.axis(i);
        for (std::size_t i = 0; i < action_dim; ++i) a[i] = ab.axis(i);
        std::vector<Interval> out = f(s, a);
        Vec lo(out.size()), hi(out.size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            lo[i] = out[i].lo;
            hi[i] = out[i].hi;
        }
        return Box(std::move(lo), std::move(hi));
    };
    return d;
}

/// A DNN-controlled system: compact state space, initial and unsafe
/// regions, action decoding, dynamics, and an analytic Lipschitz bound of
/// the dynamics w.r.t. the 1-norm on (state, action).
struct SystemModel {
    std::string name;
    std::size_t state_dim = 0;
    std::size_t action_dim = 0;
    Box state_space;
    Region initial_set;
    Region unsafe_set;
    ActionDecoding decoding = ActionDecoding::clamp;
    Vec action_low, action_high;          // clamp range, continuous systems
    std::vector<Vec> discrete_actions;    // argmax table, discrete systems
    Dynamics dynamics;
    double lipschitz_f = 0.0;
    std::function<double(const Vec&, const Vec&, const Vec&)> reward;  // housed, unused

    void check() const {
        if (state_dim == 0 || state_space.dim() != state_dim)
            throw std::invalid_argument("SystemModel: bad state dimension");
        if (initial_set.empty()) throw std::invalid_argument("SystemModel: empty initial set");
        if (unsafe_set.empty()) throw std::invalid_argument("SystemModel: empty unsafe set");
        for (const auto& b : initial_set.boxes)
            if (!state_space.contains(b))
                throw std::invalid_argument("SystemModel: initial set not contained in state space");
        for (const auto& b : unsafe_set.boxes)
            if (!state_space.contains(b))
                throw std::invalid_argument("SystemModel: unsafe set not contained in state space");
        if (initial_set.intersects(unsafe_set))
            throw std::invalid_argument("SystemModel: initial and unsafe sets overlap");
        if (decoding == ActionDecoding::argmax && discrete_actions.empty())
            throw std::invalid_argument("SystemModel: argmax decoding without an action table");
        if (decoding == ActionDecoding::clamp &&
            (action_low.size() != action_dim || action_high.size() != action_dim))
            throw std::invalid_argument("SystemModel: clamp decoding needs per-dim action range");
        if (lipschitz_f <= 0.0) throw std::invalid_argument("SystemModel: lipschitz_f must be positive");
    }
};

inline bool region_contains(const Region& region, const Vec& s) { return region.contains(s); }

inline std::size_t argmax_index(const Vec& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

/// Map raw controller output to the action fed into the dynamics.
inline Vec decode_action(const SystemModel& model, const Vec& controller_output) {
    if (model.decoding == ActionDecoding::argmax) {
        if (controller_output.size() != model.discrete_actions.size())
            throw std::invalid_argument("decode_action: controller output size does not match action table");
        return model.discrete_actions[argmax_index(controller_output)];
    }
    if (controller_output.size() != model.action_dim)
        throw std::invalid_argument("decode_action: controller output size does not match action_dim");
    Vec a(controller_output.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        a[i] = std::clamp(controller_output[i], model.action_low[i], model.action_high[i]);
    return a;
}

/// Indices of actions that could be the argmax for some output in the box.
inline std::vector<std::size_t> possible_argmax(const Box& output_box) {
    std::vector<std::size_t> out;
    double best_lo = output_box.lower[0];
    for (std::size_t i = 1; i < output_box.dim(); ++i) best_lo = std::max(best_lo, output_box.lower[i]);
    for (std::size_t i = 0; i < output_box.dim(); ++i)
        if (output_box.upper[i] >= best_lo) out.push_back(i);
    return out;
}

inline Box clamp_action_box(const SystemModel& model, const Box& output_box) {
    Vec lo(output_box.dim()), hi(output_box.dim());
    for (std::size_t i = 0; i < output_box.dim(); ++i) {
        lo[i] = std::clamp(output_box.lower[i], model.action_low[i], model.action_high[i]);
        hi[i] = std::clamp(output_box.upper[i], model.action_low[i], model.action_high[i]);
    }
    return Box(std::move(lo), std::move(hi));
}

/// One closed-loop step from a concrete state given the raw controller
/// output. Deterministic; throws on a non-finite successor.
inline Vec step(const SystemModel& model, const Vec& s, const Vec& controller_output) {
    if (s.size() != model.state_dim) throw std::invalid_argument("step: state dimension mismatch");
    Vec next = model.dynamics.eval(s, decode_action(model, controller_output));
    if (!all_finite(next)) throw std::runtime_error("step: dynamics produced a non-finite state");
    return next;
}

// ---------------------------------------------------------------------------
// Built-in systems. Each is an explicit Euler discretization with all
// constants recorded here; lipschitz_f is a closed-form bound of the
// Jacobian's induced 1-norm over the stated state-space and action ranges
// (max absolute column sum, derivation noted per system).
// ---------------------------------------------------------------------------

namespace dyn {

template <class T>
using V = std::vector<T>;

// s' = 0.5 s, action ignored. Jacobian column sums: {0.5, 0} -> L_f = 0.5.
struct Contraction1d {
    template <class T>
    V<T> operator()(const V<T>& s, const V<T>&) const {
        return {0.5 * s[0]};
    }
};

// Cart-pole with Euler step dt = 0.02. State (x, xdot, theta, thetadot),
// action = horizontal force in {-10, +10}.
// gravity 9.8, cart mass 1.0, pole mass 0.1, half-pole length 0.5.
// Column-sum bound over |theta| <= 0.3, |thetadot| <= 3.5, |F| <= 10
// evaluates below 1.5; 1.6 is stored as a safe round-up.
struct Cartpole {
    static constexpr double gravity = 9.8;
    static constexpr double mass_cart = 1.0;
    static constexpr double mass_pole = 0.1;
    static constexpr double total_mass = mass_cart + mass_pole;
    static constexpr double length = 0.5;
    static constexpr double polemass_length = mass_pole * length;
    static constexpr double dt = 0.02;

    template <class T>
    V<T> operator()(const V<T>& s, const V<T>& a) const {
        using std::cos;
        using std::sin;
        const T& x = s[0];
        const T& v = s[1];
        const T& th = s[2];
        const T& om = s[3];
        const T& force = a[0];
        T sin_th = sin(th);
        T cos_th = cos(th);
        T temp = (force + polemass_length * sqr_of(om) * sin_th) * (1.0 / total_mass);
        T den = length * ((4.0 / 3.0) - (mass_pole / total_mass) * sqr_of(cos_th));
        T th_acc = (gravity * sin_th - cos_th * temp) / den;
        T x_acc = temp - (polemass_length / total_mass) * th_acc * cos_th;
        return {x + dt * v, v + dt * x_acc, th + dt * om, om + dt * th_acc};
    }

private:
    static double sqr_of(double v) { return v * v; }
    static Interval sqr_of(const Interval& v) { return sqr(v); }
};

// Pendulum in angle space (theta, thetadot), Euler dt = 0.02; torque u in
// [-2, 2]; g = 10, length 1, mass 1:
//   thetadot' = thetadot + dt (1.5 g sin(theta) + 3 u)
// Column sums over |theta| <= 2.5: {1 + 0.02*15, 1.02, 0.06} -> L_f = 1.3.
struct Pendulum {
    static constexpr double dt = 0.02;
    static constexpr double g = 10.0;

    template <class T>
    V<T> operator()(const V<T>& s, const V<T>& a) const {
        using std::sin;
        const T& th = s[0];
        const T& om = s[1];
        const T& u = a[0];
        return {th + dt * om, om + dt * (1.5 * g * sin(th) + 3.0 * u)};
    }
};

// Translational oscillator with rotational actuator, Euler dt = 0.1:
//   x1' += dt x2; x2' += dt (-x1 + 0.1 sin x3); x3' += dt x4; x4' += dt u
// Column sums: {1.1, 1.1, 1.01, 1.1, 0.1} -> L_f = 1.1.
struct Tora {
    static constexpr double dt = 0.1;

    template <class T>
    V<T> operator()(const V<T>& s, const V<T>& a) const {
        using std::sin;
        return {s[0] + dt * s[1], s[1] + dt * (-1.0 * s[0] + 0.1 * sin(s[2])),
                s[2] + dt * s[3], s[3] + dt * a[0]};
    }
};

// Nonlinear benchmark: x1' += dt x2; x2' += dt (u x2^2 - x1), dt = 0.1.
// Column sums over |x2| <= 2, |u| <= 2: {1.1, 0.1 + 1 + dt*2*|u x2|, dt x2^2}
// = {1.1, 1.9, 0.4} -> L_f = 1.9.
struct B1 {
    static constexpr double dt = 0.1;

    template <class T>
    V<T> operator()(const V<T>& s, const V<T>& a) const {
        return {s[0] + dt * s[1], s[1] + dt * (a[0] * sqr_of(s[1]) - s[0])};
    }

private:
    static double sqr_of(double v) { return v * v; }
    static Interval sqr_of(const Interval& v) { return sqr(v); }
};

}  // namespace dyn

inline SystemModel builtin_model(const std::string& name) {
    SystemModel m;
    m.name = name;
    if (name == "toy-contraction-1d") {
        m.state_dim = 1;
        m.action_dim = 1;
        m.state_space = Box({-2.0}, {2.0});
        m.initial_set = Region{Box({-0.5}, {0.5})};
        m.unsafe_set = Region{Box({-2.0}, {-1.8}), Box({1.8}, {2.0})};
        m.decoding = ActionDecoding::clamp;
        m.action_low = {-1.0};
        m.action_high = {1.0};
        m.dynamics = make_dynamics(1, 1, dyn::Contraction1d{});
        m.lipschitz_f = 0.5;
    } else if (name == "cartpole") {
        m.state_dim = 4;
        m.action_dim = 1;
        m.state_space = Box({-2.4, -3.5, -0.3, -3.5}, {2.4, 3.5, 0.3, 3.5});
        m.initial_set = Region{Box({-0.05, -0.05, -0.05, -0.05}, {0.05, 0.05, 0.05, 0.05})};
        m.unsafe_set = Region{Box({-2.4, -3.5, -0.3, -3.5}, {2.4, 3.5, -0.25, 3.5}),
                              Box({-2.4, -3.5, 0.25, -3.5}, {2.4, 3.5, 0.3, 3.5})};
        m.decoding = ActionDecoding::argmax;
        m.discrete_actions = {Vec{-10.0}, Vec{10.0}};
        m.dynamics = make_dynamics(4, 1, dyn::Cartpole{});
        m.lipschitz_f = 1.6;
    } else if (name == "pendulum") {
        m.state_dim = 2;
        m.action_dim = 1;
        m.state_space = Box({-2.5, -6.0}, {2.5, 6.0});
        m.initial_set = Region{Box({-0.25, -0.25}, {0.25, 0.25})};
        m.unsafe_set = Region{Box({-2.5, -6.0}, {-2.2, 6.0}), Box({2.2, -6.0}, {2.5, 6.0})};
        m.decoding = ActionDecoding::clamp;
        m.action_low = {-2.0};
        m.action_high = {2.0};
        m.dynamics = make_dynamics(2, 1, dyn::Pendulum{});
        m.lipschitz_f = 1.3;
    } else if (name == "tora") {
        m.state_dim = 4;
        m.action_dim = 1;
        m.state_space = Box({-2.0, -2.0, -2.0, -2.0}, {2.0, 2.0, 2.0, 2.0});
        m.initial_set = Region{Box({0.6, -0.7, -0.4, 0.5}, {0.7, -0.6, -0.3, 0.6})};
        m.unsafe_set = Region{Box({-2.0, -2.0, -2.0, -2.0}, {-1.5, 2.0, 2.0, 2.0}),
                              Box({1.5, -2.0, -2.0, -2.0}, {2.0, 2.0, 2.0, 2.0})};
        m.decoding = ActionDecoding::clamp;
        m.action_low = {-2.0};
        m.action_high = {2.0};
        m.dynamics = make_dynamics(4, 1, dyn::Tora{});
        m.lipschitz_f = 1.1;
    } else if (name == "b1") {
        m.state_dim = 2;
        m.action_dim = 1;
        m.state_space = Box({-2.0, -2.0}, {2.0, 2.0});
        m.initial_set = Region{Box({0.8, 0.5}, {0.9, 0.6})};
        m.unsafe_set = Region{Box({-2.0, -2.0}, {-1.8, 2.0}), Box({1.8, -2.0}, {2.0, 2.0})};
        m.decoding = ActionDecoding::clamp;
        m.action_low = {-2.0};
        m.action_high = {2.0};
        m.dynamics = make_dynamics(2, 1, dyn::B1{});
        m.lipschitz_f = 1.9;
    } else {
        throw std::invalid_argument("unknown builtin model: " + name);
    }
    m.check();
    return m;
}

// ---------------------------------------------------------------------------
// Custom systems from a TOML model file: box regions, dynamics from the
// affine / polynomial (degree <= 3) templates, explicit L_f constant.
// ---------------------------------------------------------------------------

namespace detail {

inline double powi(double x, int n) {
    double r = 1.0;
    for (int i = 0; i < n; ++i) r *= x;
    return r;
}

inline Interval powi(const Interval& x, int n) {
    if (n == 0) return Interval(1.0, 1.0);
    if (n == 1) return x;
    if (n == 2) return sqr(x);
    return x * sqr(x);  // degree 3 is the template ceiling
}

struct PolyTerm {
    std::size_t out = 0;
    double coef = 0.0;
    std::vector<int> state_powers;
    std::vector<int> action_powers;
};

struct PolyDynamics {
    std::size_t state_dim = 0, action_dim = 0;
    std::vector<PolyTerm> terms;

    template <class T>
    std::vector<T> operator()(const std::vector<T>& s, const std::vector<T>& a) const {
        std::vector<T> out(state_dim, T{});
        for (const auto& t : terms) {
            T m = term_one<T>();
            for (std::size_t i = 0; i < state_dim; ++i)
                if (t.state_powers[i] > 0) m = m * powi(s[i], t.state_powers[i]);
            for (std::size_t i = 0; i < action_dim; ++i)
                if (t.action_powers[i] > 0) m = m * powi(a[i], t.action_powers[i]);
            out[t.out] = out[t.out] + t.coef * m;
        }
        return out;
    }

private:
    template <class T>
    static T term_one();
};

template <>
inline double PolyDynamics::term_one<double>() {
    return 1.0;
}
template <>
inline Interval PolyDynamics::term_one<Interval>() {
    return Interval(1.0, 1.0);
}

struct AffineDynamics {
    std::vector<std::vector<double>> A, B;
    Vec c;

    template <class T>
    std::vector<T> operator()(const std::vector<T>& s, const std::vector<T>& a) const {
        std::vector<T> out;
        out.reserve(A.size());
        for (std::size_t r = 0; r < A.size(); ++r) {
            T acc = c[r] * term_one<T>();
            for (std::size_t i = 0; i < A[r].size(); ++i) acc = acc + A[r][i] * s[i];
            for (std::size_t i = 0; i < B[r].size(); ++i) acc = acc + B[r][i] * a[i];
            out.push_back(acc);
        }
        return out;
    }

private:
    template <class T>
    static T term_one();
};

template <>
inline double AffineDynamics::term_one<double>() {
    return 1.0;
}
template <>
inline Interval AffineDynamics::term_one<Interval>() {
    return Interval(1.0, 1.0);
}

inline Region region_from_toml(const toml::Value& v) {
    Region r;
    for (const auto& b : v.as_array())
        r.boxes.emplace_back(b.at("lower").as_double_array(), b.at("upper").as_double_array());
    return r;
}

}  // namespace detail

inline SystemModel model_from_toml(const toml::Value& root) {
    const toml::Value& mt = root.has("model") ? root.at("model") : root;
    SystemModel m;
    m.name = mt.string_or("name", "custom");
    m.state_dim = static_cast<std::size_t>(mt.at("state_dim").as_int());
    m.action_dim = static_cast<std::size_t>(mt.at("action_dim").as_int());
    m.state_space = Box(mt.at("state_space").at("lower").as_double_array(),
                        mt.at("state_space").at("upper").as_double_array());
    m.initial_set = detail::region_from_toml(mt.at("initial"));
    m.unsafe_set = detail::region_from_toml(mt.at("unsafe"));
    m.lipschitz_f = mt.at("lipschitz_f").as_double();

    const std::string decoder = mt.string_or("decoder", "clamp");
    if (decoder == "argmax") {
        m.decoding = ActionDecoding::argmax;
        for (const auto& a : mt.at("actions").as_array()) m.discrete_actions.push_back(a.as_double_array());
    } else if (decoder == "clamp") {
        m.decoding = ActionDecoding::clamp;
        m.action_low = mt.at("action_low").as_double_array();
        m.action_high = mt.at("action_high").as_double_array();
    } else {
        throw std::invalid_argument("model file: unknown decoder '" + decoder + "'");
    }

    const toml::Value& dt = mt.at("dynamics");
    const std::string kind = dt.at("kind").as_string();
    if (kind == "affine") {
        detail::AffineDynamics d;
        d.A = dt.at("A").as_double_matrix();
        d.B = dt.at("B").as_double_matrix();
        d.c = dt.has("c") ? dt.at("c").as_double_array() : Vec(m.state_dim, 0.0);
        if (d.A.size() != m.state_dim || d.B.size() != m.state_dim || d.c.size() != m.state_dim)
            throw std::invalid_argument("model file: affine dynamics dimension mismatch");
        m.dynamics = make_dynamics(m.state_dim, m.action_dim, d);
    } else if (kind == "polynomial") {
        detail::PolyDynamics d;
        d.state_dim = m.state_dim;
        d.action_dim = m.action_dim;
        for (const auto& t : dt.at("terms").as_array()) {
            detail::PolyTerm pt;
            pt.out = static_cast<std::size_t>(t.at("out").as_int());
            pt.coef = t.at("coef").as_double();
            for (const auto& p : t.at("state_powers").as_array())
                pt.state_powers.push_back(static_cast<int>(p.as_int()));
            for (const auto& p : t.at("action_powers").as_array())
                pt.action_powers.push_back(static_cast<int>(p.as_int()));
            if (pt.out >= m.state_dim || pt.state_powers.size() != m.state_dim ||
                pt.action_powers.size() != m.action_dim)
                throw std::invalid_argument("model file: malformed polynomial term");
            int total = 0;
            for (int p : pt.state_powers) total += p;
            for (int p : pt.action_powers) total += p;
            if (total > 3) throw std::invalid_argument("model file: polynomial degree exceeds 3");
            d.terms.push_back(std::move(pt));
        }
        m.dynamics = make_dynamics(m.state_dim, m.action_dim, d);
    } else {
        throw std::invalid_argument("model file: unknown dynamics kind '" + kind + "'");
    }
    m.check();
    return m;
}

inline SystemModel load_model_toml(const std::string& path) {
    return model_from_toml(toml::parse_file(path));
}

}  // namespace nbcert
