#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "nbcert/env.hpp"
#include "nbcert/interval.hpp"

namespace nbcert {

struct GridCapExceeded : std::runtime_error {
    std::size_t required;
    GridCapExceeded(std::size_t req, std::size_t cap)
        : std::runtime_error("discretization needs " + std::to_string(req) +
                             " cells, cap is " + std::to_string(cap)),
          required(req) {}
};

struct RefinementExhausted : std::runtime_error {
    RefinementExhausted(double tau, double floor)
        : std::runtime_error("refinement would drop granularity to " + std::to_string(tau) +
                             ", below the floor " + std::to_string(floor)) {}
};

/// One grid cell: center point plus per-axis half-widths. Every point of
/// the cell is within 1-norm distance tau() = sum(half) of the center, so
/// a check at the center with the matching Lipschitz slack covers the cell.
struct GridCell {
    Vec center;
    Vec half;
    bool initial = false;
    bool unsafe = false;

    double tau() const {
        double t = 0.0;
        for (double h : half) t += h;
        return t;
    }

    Box box() const {
        Vec lo(center.size()), hi(center.size());
        for (std::size_t i = 0; i < center.size(); ++i) {
            lo[i] = center[i] - half[i];
            hi[i] = center[i] + half[i];
        }
        return Box(std::move(lo), std::move(hi));
    }
};

/// Finite covering of the state space. Cells tile S; the per-axis tick
/// lattice includes every face coordinate of the initial and unsafe boxes,
/// so no cell straddles a region boundary and center membership equals
/// cell membership.
struct Discretization {
    std::vector<GridCell> cells;
    double base_tau = 0.0;
    std::size_t state_dim = 0;

    double max_tau() const {
        double t = 0.0;
        for (const auto& c : cells) t = std::max(t, c.tau());
        return t;
    }

    std::size_t count_initial() const {
        std::size_t n = 0;
        for (const auto& c : cells) n += c.initial ? 1 : 0;
        return n;
    }

    std::size_t count_unsafe() const {
        std::size_t n = 0;
        for (const auto& c : cells) n += c.unsafe ? 1 : 0;
        return n;
    }
};

namespace detail {

inline std::vector<double> axis_ticks(double lo, double hi, double spacing,
                                      const std::vector<double>& faces) {
    std::vector<double> ticks{lo, hi};
    if (hi > lo && spacing > 0.0) {
        const auto segments = static_cast<std::size_t>(std::ceil((hi - lo) / spacing - 1e-12));
        for (std::size_t s = 1; s < segments; ++s)
            ticks.push_back(lo + (hi - lo) * static_cast<double>(s) / static_cast<double>(segments));
    }
    for (double f : faces)
        if (f > lo && f < hi) ticks.push_back(f);
    std::sort(ticks.begin(), ticks.end());
    ticks.erase(std::unique(ticks.begin(), ticks.end()), ticks.end());
    return ticks;
}

}  // namespace detail

/// Cell-centered covering of `space` with 1-norm covering radius at most
/// `tau` per cell: per-axis spacing 2*tau/n plus the region face ticks.
inline Discretization discretize(const Box& space, const Region& initial, const Region& unsafe,
                                 double tau, std::size_t cell_cap = 2'000'000) {
    if (!(tau > 0.0)) throw std::invalid_argument("discretize: tau must be positive");
    const std::size_t n = space.dim();
    const double spacing = 2.0 * tau / static_cast<double>(n);

    std::vector<std::vector<double>> ticks(n);
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> faces;
        for (const auto& b : initial.boxes) {
            faces.push_back(b.lower[i]);
            faces.push_back(b.upper[i]);
        }
        for (const auto& b : unsafe.boxes) {
            faces.push_back(b.lower[i]);
            faces.push_back(b.upper[i]);
        }
        ticks[i] = detail::axis_ticks(space.lower[i], space.upper[i], spacing, faces);
        total *= ticks[i].size() - 1;
        if (total > cell_cap) {
            std::size_t required = 1;
            for (std::size_t j = 0; j < n; ++j) {
                const double w = space.upper[j] - space.lower[j];
                required *= std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(w / spacing)));
            }
            throw GridCapExceeded(std::max(required, total), cell_cap);
        }
    }

    Discretization disc;
    disc.base_tau = tau;
    disc.state_dim = n;
    disc.cells.reserve(total);
    std::vector<std::size_t> idx(n, 0);
    for (;;) {
        GridCell cell;
        cell.center.resize(n);
        cell.half.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double lo = ticks[i][idx[i]];
            const double hi = ticks[i][idx[i] + 1];
            cell.center[i] = 0.5 * (lo + hi);
            cell.half[i] = 0.5 * (hi - lo);
        }
        cell.initial = initial.contains(cell.center);
        cell.unsafe = unsafe.contains(cell.center);
        disc.cells.push_back(std::move(cell));
        std::size_t d = 0;
        while (d < n && ++idx[d] + 1 == ticks[d].size()) {
            idx[d] = 0;
            ++d;
        }
        if (d == n) break;
    }
    return disc;
}

inline Discretization discretize(const SystemModel& model, double tau,
                                 std::size_t cell_cap = 2'000'000) {
    return discretize(model.state_space, model.initial_set, model.unsafe_set, tau, cell_cap);
}

/// Local counterexample-guided refinement: cells within 1-norm distance
/// 2*tau(cell) of a counterexample are split into 2^n children (halving
/// the local granularity); the counterexample points themselves join the
/// grid as degenerate training cells.
inline Discretization refine(const Discretization& disc, const Region& initial, const Region& unsafe,
                             const std::vector<Vec>& counterexamples, double tau_floor = 1e-4) {
    if (counterexamples.empty())
        throw std::invalid_argument("refine: no counterexamples and no explicit request");
    Discretization out;
    out.base_tau = disc.base_tau;
    out.state_dim = disc.state_dim;
    for (const auto& cell : disc.cells) {
        bool near = false;
        const Box b = cell.box();
        for (const auto& cx : counterexamples) {
            if (b.distance_1(cx) <= 2.0 * cell.tau()) {
                near = true;
                break;
            }
        }
        if (!near || cell.tau() == 0.0) {
            out.cells.push_back(cell);
            continue;
        }
        if (0.5 * cell.tau() < tau_floor) throw RefinementExhausted(0.5 * cell.tau(), tau_floor);
        for (const Box& child : b.bisect_all()) {
            GridCell c;
            c.center = child.center();
            c.half = child.radius();
            c.initial = initial.contains(c.center);
            c.unsafe = unsafe.contains(c.center);
            out.cells.push_back(std::move(c));
        }
    }
    for (const auto& cx : counterexamples) {
        GridCell c;
        c.center = cx;
        c.half.assign(disc.state_dim, 0.0);
        c.initial = initial.contains(cx);
        c.unsafe = unsafe.contains(cx);
        out.cells.push_back(std::move(c));
    }
    return out;
}

inline Discretization refine(const Discretization& disc, const SystemModel& model,
                             const std::vector<Vec>& counterexamples, double tau_floor = 1e-4) {
    return refine(disc, model.initial_set, model.unsafe_set, counterexamples, tau_floor);
}

}  // namespace nbcert
