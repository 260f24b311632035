#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "nbcert/interval.hpp"
#include "nbcert/rng.hpp"

namespace nbcert {

/// Bounded perturbation of the observed state: a product of independent
/// uniform distributions on [-r_i, r_i] (zero radius collapses a dimension
/// to the point 0, and the all-zero case is the unperturbed system).
struct NoiseModel {
    Vec radius;

    static NoiseModel uniform(Vec r) {
        for (double v : r)
            if (v < 0.0) throw std::invalid_argument("NoiseModel: negative radius");
        return NoiseModel{std::move(r)};
    }
    static NoiseModel zero(std::size_t dim) { return NoiseModel{Vec(dim, 0.0)}; }

    std::size_t dim() const { return radius.size(); }

    bool is_zero() const {
        for (double r : radius)
            if (r > 0.0) return false;
        return true;
    }

    /// Support W = prod [-r_i, r_i].
    Box support() const {
        Vec lo(radius.size()), hi(radius.size());
        for (std::size_t i = 0; i < radius.size(); ++i) {
            lo[i] = -radius[i];
            hi[i] = radius[i];
        }
        return Box(std::move(lo), std::move(hi));
    }
};

inline Vec sample(const NoiseModel& noise, Rng& rng) {
    Vec d(noise.dim());
    for (std::size_t i = 0; i < d.size(); ++i)
        d[i] = noise.radius[i] > 0.0 ? rng.uniform(-noise.radius[i], noise.radius[i]) : 0.0;
    return d;
}

/// Tiling of the noise support into axis-aligned cells with their exact
/// probability masses (volume ratio for the uniform product).
struct CellPartition {
    std::vector<Box> cells;
    Vec mass;
    std::size_t cells_per_dim = 1;

    std::size_t size() const { return cells.size(); }
};

/// Axis-uniform grid of m^d cells over the support, where d counts only
/// dimensions with positive radius. Masses are exact and sum to 1.
inline CellPartition partition(const NoiseModel& noise, std::size_t m) {
    if (m == 0) throw std::invalid_argument("partition: m must be positive");
    const std::size_t n = noise.dim();
    std::vector<std::size_t> levels(n, 1);
    double cell_mass = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (noise.radius[i] > 0.0) {
            levels[i] = m;
            cell_mass /= static_cast<double>(m);
        }
    }
    CellPartition p;
    p.cells_per_dim = m;
    std::vector<std::size_t> idx(n, 0);
    for (;;) {
        Vec lo(n), hi(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double r = noise.radius[i];
            if (levels[i] == 1) {
                lo[i] = -r;
                hi[i] = r;
            } else {
                const double w = 2.0 * r / static_cast<double>(m);
                lo[i] = -r + w * static_cast<double>(idx[i]);
                hi[i] = (idx[i] + 1 == m) ? r : lo[i] + w;
            }
        }
        p.cells.emplace_back(std::move(lo), std::move(hi));
        p.mass.push_back(cell_mass);
        std::size_t d = 0;
        while (d < n && ++idx[d] == levels[d]) {
            idx[d] = 0;
            ++d;
        }
        if (d == n) break;
    }
    return p;
}

enum class BoundSide { lower, upper };

/// Sound one-sided bound on E_{delta~mu}[F(delta)] given a sound interval
/// extension F of the integrand: sum of mass_i * sup F(cell_i) for the
/// upper side, mass_i * inf F(cell_i) for the lower side.
inline double bound_expectation(BoundSide side, const std::function<Interval(const Box&)>& F,
                                const CellPartition& p) {
    if (p.cells.empty()) throw std::invalid_argument("bound_expectation: empty partition");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.cells.size(); ++i) {
        const Interval v = F(p.cells[i]);
        acc += p.mass[i] * (side == BoundSide::upper ? v.hi : v.lo);
    }
    return acc;
}

}  // namespace nbcert
