#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nbcert/certificate.hpp"
#include "nbcert/discretize.hpp"
#include "nbcert/env.hpp"
#include "nbcert/nn.hpp"
#include "nbcert/noise.hpp"
#include "nbcert/parallel.hpp"
#include "nbcert/rng.hpp"

namespace nbcert {

// ---------------------------------------------------------------------------
// Lipschitz slack. Checking a condition at a grid point s~ with covering
// radius tau extends to every state within tau once the condition is
// strengthened by zeta. The slack depends on how the expectation term is
// scaled in the condition:
//   decrease / increase :  tau * L_B * (1 + L_f (1 + L_pi))
//   gamma-scaled        :  tau * L_B * (gamma * L_f (1 + L_pi) + 1)
//   alpha-scaled        :  tau * L_B * (alpha * L_f (1 + L_pi) + 1)
// All three are instances of zeta(scale) with scale in {1, gamma, alpha}.
// ---------------------------------------------------------------------------

enum class MarginKind { decrease, gamma_scaled, increase, alpha_scaled };

inline double margin(double tau, double L_B, double L_f, double L_pi, MarginKind kind,
                     double scale = 1.0) {
    if (tau < 0.0 || L_B < 0.0 || L_f < 0.0 || L_pi < 0.0)
        throw std::invalid_argument("margin: constants must be nonnegative");
    double s = 1.0;
    switch (kind) {
        case MarginKind::decrease:
        case MarginKind::increase: s = 1.0; break;
        case MarginKind::gamma_scaled:
        case MarginKind::alpha_scaled: s = scale; break;
    }
    return tau * L_B * (s * L_f * (1.0 + L_pi) + 1.0);
}

enum class Verdict { valid, invalid, inconclusive };

inline const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::valid: return "valid";
        case Verdict::invalid: return "invalid";
        case Verdict::inconclusive: return "inconclusive";
    }
    return "?";
}

struct Counterexample {
    Vec state;
    std::string condition;
    double violation = 0.0;  // positive amount by which the check failed
};

struct ValidationReport {
    Verdict verdict = Verdict::valid;
    std::string failed_condition;
    std::vector<Counterexample> counterexamples;  // concrete grid-condition violations
    std::vector<Counterexample> undecided;        // straddles surviving the bisection budget
    double zeta = 0.0;                            // largest slack applied
    std::size_t cells_checked = 0;
    double seconds = 0.0;

    /// Points used to rebuild the grid in the next CEGIS iteration.
    std::vector<Vec> refinement_points() const {
        std::vector<Vec> out;
        out.reserve(counterexamples.size() + undecided.size());
        for (const auto& c : counterexamples) out.push_back(c.state);
        for (const auto& c : undecided) out.push_back(c.state);
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["schema"] = "nbcert-validation-report-v1";
        j["verdict"] = verdict_name(verdict);
        j["failed_condition"] = failed_condition;
        j["zeta"] = zeta;
        j["cells_checked"] = cells_checked;
        j["seconds"] = seconds;
        auto dump = [](const std::vector<Counterexample>& xs) {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& c : xs)
                arr.push_back({{"state", c.state}, {"condition", c.condition}, {"violation", c.violation}});
            return arr;
        };
        j["counterexamples"] = dump(counterexamples);
        j["undecided"] = dump(undecided);
        return j;
    }
};

struct ValidationOptions {
    std::size_t partition_m = 8;          // noise cells per perturbed dimension
    int bisect_depth = 6;                 // straddle splitting budget in region checks
    std::size_t max_counterexamples = 64; // per condition
    std::size_t k_product_cap = 1 << 18;  // product-partition cells per grid point
    int threads = 1;
};

// ---------------------------------------------------------------------------
// Closed-loop enclosures
// ---------------------------------------------------------------------------

/// Sound image machinery for one perturbed closed-loop step. For argmax
/// systems the controller's Lipschitz constant plays no role in margins:
/// the candidate-action set is computed over the whole cell plus noise box,
/// so action flips anywhere in the cell are already covered, and the
/// remaining state sensitivity at a fixed action is bounded by L_f alone.
class ClosedLoop {
public:
    ClosedLoop(const SystemModel& model, const MlpNetwork& controller)
        : model_(model), controller_(controller) {}

    const SystemModel& model() const { return model_; }
    const MlpNetwork& controller() const { return controller_; }

    /// Effective controller Lipschitz constant for margin formulas.
    double lipschitz_pi() const {
        return model_.decoding == ActionDecoding::argmax ? 0.0 : controller_.lipschitz_1norm();
    }

    /// Enclosure of the successor set {f(s, decode(pi(o + delta)))} for
    /// s in state_box, o in state_box, delta in noise_box.
    Box step_box(const Box& state_box, const Box& noise_box) const {
        Vec lo(state_box.dim()), hi(state_box.dim());
        for (std::size_t i = 0; i < state_box.dim(); ++i) {
            lo[i] = state_box.lower[i] + noise_box.lower[i];
            hi[i] = state_box.upper[i] + noise_box.upper[i];
        }
        const Box observed(std::move(lo), std::move(hi));
        const Box ctrl_out = controller_.ibp(observed);
        if (model_.decoding == ActionDecoding::argmax) {
            std::optional<Box> image;
            for (std::size_t idx : possible_argmax(ctrl_out)) {
                const Box img =
                    model_.dynamics.eval_box(state_box, Box::point(model_.discrete_actions[idx]));
                image = image ? hull(*image, img) : img;
            }
            return *image;
        }
        return model_.dynamics.eval_box(state_box, clamp_action_box(model_, ctrl_out));
    }

    /// Barrier value over an image box. When `clip` is set (the state
    /// space), landings outside it are safe-terminated and contribute a
    /// barrier value of zero to upper-family growth conditions.
    static Interval barrier_over(const MlpNetwork& barrier, const Box& img, const Box* clip) {
        if (!clip || clip->contains(img)) return barrier.ibp_value(img);
        if (!clip->intersects(img)) return Interval(0.0, 0.0);
        return barrier.ibp_value(img.intersection(*clip)).hull(Interval(0.0, 0.0));
    }

    /// Enclosure of B(f(s~, decode(pi(s~ + delta)))) for delta in noise_box
    /// at the cell center. For clamp decoding the observation box is the
    /// center plus the noise box; the Lipschitz slack's (1 + L_pi) factor
    /// covers the controller's variation across the cell. For argmax the
    /// candidate-action set is instead widened over the whole cell (and
    /// L_pi = 0 in the slack), which covers action flips exactly.
    Interval barrier_after_step(const MlpNetwork& barrier, const GridCell& cell,
                                const Box& noise_box, const Box* clip = nullptr) const {
        const Box state_point = Box::point(cell.center);
        if (model_.decoding == ActionDecoding::argmax) {
            const Box cell_box = cell.box();
            Vec lo(cell_box.dim()), hi(cell_box.dim());
            for (std::size_t i = 0; i < cell_box.dim(); ++i) {
                lo[i] = cell_box.lower[i] + noise_box.lower[i];
                hi[i] = cell_box.upper[i] + noise_box.upper[i];
            }
            const Box ctrl_out = controller_.ibp(Box(std::move(lo), std::move(hi)));
            std::optional<Interval> value;
            for (std::size_t idx : possible_argmax(ctrl_out)) {
                const Box img =
                    model_.dynamics.eval_box(state_point, Box::point(model_.discrete_actions[idx]));
                const Interval v = barrier_over(barrier, img, clip);
                value = value ? value->hull(v) : v;
            }
            return *value;
        }
        Vec lo(cell.center.size()), hi(cell.center.size());
        for (std::size_t i = 0; i < cell.center.size(); ++i) {
            lo[i] = cell.center[i] + noise_box.lower[i];
            hi[i] = cell.center[i] + noise_box.upper[i];
        }
        const Box ctrl_out = controller_.ibp(Box(std::move(lo), std::move(hi)));
        const Box img = model_.dynamics.eval_box(state_point, clamp_action_box(model_, ctrl_out));
        return barrier_over(barrier, img, clip);
    }

private:
    static Box hull(const Box& a, const Box& b) {
        Vec lo(a.dim()), hi(a.dim());
        for (std::size_t i = 0; i < a.dim(); ++i) {
            lo[i] = std::min(a.lower[i], b.lower[i]);
            hi[i] = std::max(a.upper[i], b.upper[i]);
        }
        return Box(std::move(lo), std::move(hi));
    }

    const SystemModel& model_;
    const MlpNetwork& controller_;
};

/// IBP image of the k-step closed-loop composition over a state box with
/// per-step noise boxes; k = 0 returns the state box unchanged.
inline Box compose_k(const SystemModel& model, const MlpNetwork& controller, const Box& state_box,
                     const std::vector<Box>& noise_boxes) {
    ClosedLoop loop(model, controller);
    Box cur = state_box;
    for (const auto& nb : noise_boxes) cur = loop.step_box(cur, nb);
    return cur;
}

// ---------------------------------------------------------------------------
// Condition checks
// ---------------------------------------------------------------------------

struct Inequality {
    enum class Kind { ge, le, between } kind = Kind::ge;
    double lo = 0.0;  // ge threshold, or lower edge for between
    double hi = 0.0;  // le threshold, or upper edge for between

    static Inequality ge(double c) { return {Kind::ge, c, 0.0}; }
    static Inequality le(double c) { return {Kind::le, 0.0, c}; }
    static Inequality between(double l, double h) { return {Kind::between, l, h}; }

    bool holds(double v) const {
        switch (kind) {
            case Kind::ge: return v >= lo;
            case Kind::le: return v <= hi;
            case Kind::between: return v >= lo && v <= hi;
        }
        return false;
    }

    bool certified(const Interval& v) const {
        switch (kind) {
            case Kind::ge: return v.lo >= lo;
            case Kind::le: return v.hi <= hi;
            case Kind::between: return v.lo >= lo && v.hi <= hi;
        }
        return false;
    }

    /// Amount by which a concrete value misses the requirement.
    double violation(double v) const {
        switch (kind) {
            case Kind::ge: return lo - v;
            case Kind::le: return v - hi;
            case Kind::between: return std::max(lo - v, v - hi);
        }
        return 0.0;
    }
};

namespace detail {

struct Collector {
    std::vector<Counterexample> violations;
    std::vector<Counterexample> undecided;
    std::size_t cap;

    explicit Collector(std::size_t cap_) : cap(cap_) {}

    void merge(Collector&& other) {
        for (auto& c : other.violations)
            if (violations.size() < cap) violations.push_back(std::move(c));
        for (auto& c : other.undecided)
            if (undecided.size() < cap) undecided.push_back(std::move(c));
    }
};

/// Region range check over one box with straddle bisection.
inline void check_box_inequality(const MlpNetwork& barrier, const Box& box, const Inequality& ineq,
                                 const std::string& condition, int depth, Collector& col) {
    if (col.violations.size() >= col.cap) return;
    const Interval range = barrier.ibp_value(box);
    if (ineq.certified(range)) return;
    const Vec center = box.center();
    const double at_center = barrier.value(center);
    if (!ineq.holds(at_center)) {
        col.violations.push_back({center, condition, ineq.violation(at_center)});
        return;
    }
    if (depth <= 0) {
        // IBP looseness must not masquerade as invalidity
        col.undecided.push_back({center, condition, 0.0});
        return;
    }
    for (const Box& child : box.bisect_all())
        check_box_inequality(barrier, child, ineq, condition, depth - 1, col);
}

}  // namespace detail

/// Verify a pointwise range inequality of the barrier over a set of cells
/// (the covering of a region). Straddling cells are bisected up to the
/// depth budget before being declared undecided.
inline void check_region(const MlpNetwork& barrier, const Discretization& disc,
                         const std::function<bool(const GridCell&)>& select, const Inequality& ineq,
                         const std::string& condition, const ValidationOptions& opts,
                         detail::Collector& col) {
    std::vector<std::size_t> targets;
    for (std::size_t i = 0; i < disc.cells.size(); ++i)
        if (select(disc.cells[i])) targets.push_back(i);
    std::vector<detail::Collector> local(targets.size(), detail::Collector(opts.max_counterexamples));
    parallel_for(targets.size(), opts.threads, [&](std::size_t t) {
        detail::check_box_inequality(barrier, disc.cells[targets[t]].box(), ineq, condition,
                                     opts.bisect_depth, local[t]);
    });
    for (auto& l : local) col.merge(std::move(l));
}

/// Standalone single-inequality report (the public check_region surface).
inline ValidationReport check_region(const MlpNetwork& barrier, const Discretization& disc,
                                     const std::function<bool(const GridCell&)>& select,
                                     const Inequality& ineq, const std::string& condition,
                                     const ValidationOptions& opts = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    detail::Collector col(opts.max_counterexamples);
    check_region(barrier, disc, select, ineq, condition, opts, col);
    ValidationReport rep;
    rep.counterexamples = std::move(col.violations);
    rep.undecided = std::move(col.undecided);
    rep.cells_checked = disc.cells.size();
    if (!rep.counterexamples.empty()) {
        rep.verdict = Verdict::invalid;
        rep.failed_condition = condition;
    } else if (!rep.undecided.empty()) {
        rep.verdict = Verdict::inconclusive;
        rep.failed_condition = condition;
    }
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

// ---------------------------------------------------------------------------
// Full per-family validation
// ---------------------------------------------------------------------------

namespace detail {

/// Expectation-side bounds at one grid cell: one-sided bound of
/// E_{delta~mu}[B(f(s~, pi(s~+delta)))] via the noise-cell partition.
/// `clip` zeroes contributions landing outside the state space.
inline double expectation_bound(const ClosedLoop& loop, const MlpNetwork& barrier,
                                const GridCell& cell, const CellPartition& part, BoundSide side,
                                const Box* clip = nullptr) {
    double acc = 0.0;
    for (std::size_t i = 0; i < part.cells.size(); ++i) {
        const Interval v = loop.barrier_after_step(barrier, cell, part.cells[i], clip);
        acc += part.mass[i] * (side == BoundSide::upper ? v.hi : v.lo);
    }
    return acc;
}

/// One-sided bound of E_{Delta^k}[B(g^k(s,Delta^k))] holding uniformly for
/// every s in the cell (the k-step expectation is evaluated over the whole
/// cell box, so no Lipschitz slack is needed on top). With `clip`, any
/// composition that may leave the state space contributes at least zero
/// (exited trajectories are safe-terminated).
inline double k_expectation_bound(const SystemModel& model, const MlpNetwork& controller,
                                  const MlpNetwork& barrier, const GridCell& cell,
                                  const CellPartition& part, int k, BoundSide side,
                                  std::size_t product_cap, const Box* clip = nullptr) {
    double total_combos = std::pow(static_cast<double>(part.size()), k);
    if (total_combos > static_cast<double>(product_cap)) {
        const auto suggest = static_cast<std::size_t>(
            std::floor(std::pow(static_cast<double>(product_cap), 1.0 / k)));
        throw std::runtime_error(
            "k-step product partition has " + std::to_string(static_cast<std::size_t>(total_combos)) +
            " cells per grid point (cap " + std::to_string(product_cap) +
            "); reduce partition_m so that cells^k <= cap (suggested total cells per step: " +
            std::to_string(suggest) + ")");
    }
    const Box cell_box = cell.box();
    ClosedLoop loop(model, controller);
    std::vector<std::size_t> idx(static_cast<std::size_t>(k), 0);
    double acc = 0.0;
    for (;;) {
        double mass = 1.0;
        Box img = cell_box;
        bool may_exit = false;
        for (std::size_t j = 0; j < idx.size(); ++j) {
            mass *= part.mass[idx[j]];
            img = loop.step_box(img, part.cells[idx[j]]);
            if (clip && !clip->contains(img)) may_exit = true;
        }
        Interval v = ClosedLoop::barrier_over(barrier, img, clip);
        if (clip && may_exit) v = v.hull(Interval(0.0, 0.0));
        acc += mass * (side == BoundSide::upper ? v.hi : v.lo);
        std::size_t d = 0;
        while (d < idx.size() && ++idx[d] == part.size()) {
            idx[d] = 0;
            ++d;
        }
        if (d == idx.size()) break;
    }
    return acc;
}

struct ConditionOutcome {
    bool violated = false;
    double amount = 0.0;
};

}  // namespace detail

/// Per-grid-point expectation-condition check for every family that has
/// one. `which` selects the condition when a family has several.
inline void check_decrease(const ClosedLoop& loop, const MlpNetwork& barrier,
                           const Discretization& disc, const CertificateSpec& spec,
                           const CellPartition& part, const ValidationOptions& opts,
                           detail::Collector& col, double& zeta_out) {
    const double L_B = barrier.lipschitz_1norm();
    const double L_f = loop.model().lipschitz_f;
    const double L_pi = loop.lipschitz_pi();

    struct Check {
        std::string name;
        bool on_all_cells;  // quantified over S (vs S \ S_u)
        std::function<detail::ConditionOutcome(const GridCell&, double /*B at center*/)> run;
        MarginKind kind;
        double scale;
    };
    std::vector<Check> checks;

    auto e_ub = [&](const GridCell& cell) {
        return detail::expectation_bound(loop, barrier, cell, part, BoundSide::upper);
    };
    // growth conditions count exits as zero-valued (safe termination)
    const Box* clip = &loop.model().state_space;
    auto e_lb = [&](const GridCell& cell) {
        return detail::expectation_bound(loop, barrier, cell, part, BoundSide::lower, clip);
    };
    auto zeta_for = [&](const GridCell& cell, MarginKind kind, double scale) {
        return margin(cell.tau(), L_B, L_f, L_pi, kind, scale);
    };

    switch (spec.family) {
        case Family::inf_lower:
            checks.push_back({"supermartingale", false,
                              [&](const GridCell& cell, double b) {
                                  const double z = zeta_for(cell, MarginKind::decrease, 1.0);
                                  const double lhs = e_ub(cell);
                                  return detail::ConditionOutcome{lhs > b - z, lhs - (b - z)};
                              },
                              MarginKind::decrease, 1.0});
            break;
        case Family::inf_upper:
            checks.push_back({"gamma_submartingale", false,
                              [&](const GridCell& cell, double b) {
                                  const double z = zeta_for(cell, MarginKind::gamma_scaled, spec.gamma);
                                  const double lhs = spec.gamma * e_lb(cell);
                                  return detail::ConditionOutcome{lhs < b + z, (b + z) - lhs};
                              },
                              MarginKind::gamma_scaled, spec.gamma});
            break;
        case Family::fin_lin_lower:
            checks.push_back({"c_martingale", true,
                              [&](const GridCell& cell, double b) {
                                  const double z = zeta_for(cell, MarginKind::decrease, 1.0);
                                  const double lhs = e_ub(cell);
                                  return detail::ConditionOutcome{lhs > b + spec.c - z,
                                                                  lhs - (b + spec.c - z)};
                              },
                              MarginKind::decrease, 1.0});
            break;
        case Family::fin_exp_lower:
            checks.push_back({"alpha_drift", false,
                              [&](const GridCell& cell, double b) {
                                  const double z = zeta_for(cell, MarginKind::alpha_scaled, spec.alpha);
                                  const double lhs = spec.alpha * e_ub(cell) - b;
                                  return detail::ConditionOutcome{lhs > spec.alpha * spec.beta - z,
                                                                  lhs - (spec.alpha * spec.beta - z)};
                              },
                              MarginKind::alpha_scaled, spec.alpha});
            break;
        case Family::fin_lin_upper:
            checks.push_back({"reverse_c_martingale", false,
                              [&](const GridCell& cell, double b) {
                                  const double z = zeta_for(cell, MarginKind::increase, 1.0);
                                  const double lhs = e_lb(cell);
                                  return detail::ConditionOutcome{lhs < b + spec.c + z,
                                                                  (b + spec.c + z) - lhs};
                              },
                              MarginKind::increase, 1.0});
            break;
        case Family::fin_exp_upper:
            checks.push_back({"ranking_drift", false,
                              [&](const GridCell& cell, double b) {
                                  const double z = zeta_for(cell, MarginKind::decrease, 1.0);
                                  const double lhs = e_ub(cell);
                                  return detail::ConditionOutcome{lhs > b - spec.eps - z,
                                                                  lhs - (b - spec.eps - z)};
                              },
                              MarginKind::decrease, 1.0});
            break;
        case Family::k_inf_lower:
            checks.push_back({"c_martingale", true,
                              [&](const GridCell& cell, double b) {
                                  const double z = zeta_for(cell, MarginKind::decrease, 1.0);
                                  const double lhs = e_ub(cell);
                                  return detail::ConditionOutcome{lhs > b + spec.c - z,
                                                                  lhs - (b + spec.c - z)};
                              },
                              MarginKind::decrease, 1.0});
            break;
        case Family::k_inf_upper:
            checks.push_back({"reverse_c_martingale", true,
                              [&](const GridCell& cell, double b) {
                                  const double z = zeta_for(cell, MarginKind::increase, 1.0);
                                  const double lhs = e_lb(cell);
                                  return detail::ConditionOutcome{lhs < b + spec.c + z,
                                                                  (b + spec.c + z) - lhs};
                              },
                              MarginKind::increase, 1.0});
            break;
        default:
            throw std::invalid_argument("check_decrease: family has no expectation condition");
    }

    for (const auto& chk : checks) {
        std::vector<std::size_t> targets;
        for (std::size_t i = 0; i < disc.cells.size(); ++i)
            if (chk.on_all_cells || !disc.cells[i].unsafe) targets.push_back(i);
        std::vector<detail::ConditionOutcome> results(targets.size());
        parallel_for(targets.size(), opts.threads, [&](std::size_t t) {
            const GridCell& cell = disc.cells[targets[t]];
            results[t] = chk.run(cell, barrier.value(cell.center));
        });
        for (std::size_t t = 0; t < targets.size(); ++t) {
            zeta_out = std::max(zeta_out, zeta_for(disc.cells[targets[t]], chk.kind, chk.scale));
            if (results[t].violated && col.violations.size() < col.cap)
                col.violations.push_back(
                    {disc.cells[targets[t]].center, chk.name, results[t].amount});
        }
    }
}

namespace detail {

/// Entry/exit range conditions for the finite-horizon upper families. The
/// one-step images of safe cells, clipped to the unsafe region, must keep B
/// within [lo, hi]; image mass landing outside the state space (safe
/// termination) must keep B within [exit_lo, exit_hi]. A continuous barrier
/// cannot satisfy the unsafe range on all of S_u together with the safe-side
/// cap, and the bound proofs only evaluate B at the states the stopped
/// process can occupy, so this is the sound checkable form.
inline void check_entry_range(const ClosedLoop& loop, const MlpNetwork& barrier,
                              const Discretization& disc, const NoiseModel& noise, double lo,
                              double hi, double exit_lo, double exit_hi,
                              const std::string& condition, const ValidationOptions& opts,
                              Collector& col) {
    const Box W = noise.support();
    const Region& unsafe = loop.model().unsafe_set;
    const Region state_region{loop.model().state_space};

    std::function<bool(const Box&, int)> check_cell = [&](const Box& cell_box, int depth) -> bool {
        const Box img = loop.step_box(cell_box, W);
        bool ok = true;
        for (const auto& ub : unsafe.boxes) {
            if (!img.intersects(ub)) continue;
            const Interval range = barrier.ibp_value(img.intersection(ub));
            if (range.lo < lo || range.hi > hi) {
                ok = false;
                break;
            }
        }
        if (ok) {
            for (const Box& piece : box_difference(img, state_region)) {
                const Interval range = barrier.ibp_value(piece);
                if (range.lo < exit_lo || range.hi > exit_hi) {
                    ok = false;
                    break;
                }
            }
        }
        if (ok) return true;
        if (depth > 0) {
            bool all_ok = true;
            for (const Box& child : cell_box.bisect_all())
                if (!check_cell(child, depth - 1)) all_ok = false;
            return all_ok;
        }
        return false;
    };

    std::vector<std::size_t> targets;
    for (std::size_t i = 0; i < disc.cells.size(); ++i)
        if (!disc.cells[i].unsafe && disc.cells[i].tau() > 0.0) targets.push_back(i);
    std::vector<char> failed(targets.size(), 0);
    parallel_for(targets.size(), opts.threads, [&](std::size_t t) {
        failed[t] = check_cell(disc.cells[targets[t]].box(), opts.bisect_depth) ? 0 : 1;
    });
    for (std::size_t t = 0; t < targets.size(); ++t) {
        if (!failed[t]) continue;
        const GridCell& cell = disc.cells[targets[t]];
        // try to find a concrete violating entry transition from the center
        Rng rng = Rng::stream(0x9a7, {targets[t]});
        bool concrete = false;
        for (int trial = 0; trial < 64 && !concrete; ++trial) {
            Vec delta = sample(noise, rng);
            Vec obs = cell.center;
            for (std::size_t i = 0; i < obs.size(); ++i) obs[i] += delta[i];
            const Vec nxt =
                loop.model().dynamics.eval(cell.center,
                                           decode_action(loop.model(), loop.controller().forward(obs)));
            if (!loop.model().unsafe_set.contains(nxt)) continue;
            const double v = barrier.value(nxt);
            if (v < lo || v > hi) {
                if (col.violations.size() < col.cap)
                    col.violations.push_back({cell.center, condition, std::max(lo - v, v - hi)});
                concrete = true;
            }
        }
        if (!concrete && col.undecided.size() < col.cap)
            col.undecided.push_back({cell.center, condition, 0.0});
    }
}

}  // namespace detail

/// Almost-sure safety conditions (the per-step qualitative family).
inline void check_qualitative_conditions(const ClosedLoop& loop, const MlpNetwork& barrier,
                                         const Discretization& disc, const NoiseModel& noise,
                                         double lambda, const ValidationOptions& opts,
                                         detail::Collector& col, double& zeta_out) {
    check_region(barrier, disc, [](const GridCell& c) { return c.initial; }, Inequality::le(0.0),
                 "initial_nonpositive", opts, col);
    check_region(barrier, disc, [](const GridCell& c) { return c.unsafe; },
                 Inequality::ge(std::numeric_limits<double>::min()), "unsafe_positive", opts, col);

    const double L_B = barrier.lipschitz_1norm();
    const double L_f = loop.model().lipschitz_f;
    const double L_pi = loop.lipschitz_pi();
    const Box W = noise.support();

    std::vector<detail::ConditionOutcome> results(disc.cells.size());
    parallel_for(disc.cells.size(), opts.threads, [&](std::size_t i) {
        const GridCell& cell = disc.cells[i];
        const double z = margin(cell.tau(), L_B, L_f, L_pi, MarginKind::decrease);
        const double b = barrier.value(cell.center);
        const Interval after = loop.barrier_after_step(barrier, cell, W);
        const double rhs = (1.0 - lambda) * b - z;
        results[i] = {after.hi > rhs, after.hi - rhs};
    });
    for (std::size_t i = 0; i < disc.cells.size(); ++i) {
        zeta_out = std::max(zeta_out, margin(disc.cells[i].tau(), L_B, L_f, L_pi, MarginKind::decrease));
        if (results[i].violated && col.violations.size() < col.cap)
            col.violations.push_back({disc.cells[i].center, "noise_decrease", results[i].amount});
    }
}

/// k-inductive qualitative conditions: the k-step base case over initial
/// cells, unsafe positivity, and the multiplier form of the induction step,
/// all evaluated over whole cell boxes composed through the noise support.
inline void check_k_inductive_qualitative(const ClosedLoop& loop, const MlpNetwork& barrier,
                                          const Discretization& disc, const NoiseModel& noise,
                                          const CertificateSpec& spec, const ValidationOptions& opts,
                                          detail::Collector& col) {
    const Box W = noise.support();
    const int k = spec.k;

    // base case: B(g^i) <= 0 on S_0 for i = 0..k-1
    {
        std::vector<std::size_t> targets;
        for (std::size_t i = 0; i < disc.cells.size(); ++i)
            if (disc.cells[i].initial) targets.push_back(i);
        std::vector<detail::ConditionOutcome> results(targets.size());
        parallel_for(targets.size(), opts.threads, [&](std::size_t t) {
            Box cur = disc.cells[targets[t]].box();
            double worst = 0.0;
            bool bad = false;
            for (int i = 0; i < k; ++i) {
                const Interval v = barrier.ibp_value(cur);
                if (v.hi > 0.0) {
                    bad = true;
                    worst = std::max(worst, v.hi);
                }
                if (i + 1 < k) cur = loop.step_box(cur, W);
            }
            results[t] = {bad, worst};
        });
        for (std::size_t t = 0; t < targets.size(); ++t)
            if (results[t].violated && col.violations.size() < col.cap)
                col.violations.push_back({disc.cells[targets[t]].center, "k_initial", results[t].amount});
    }

    check_region(barrier, disc, [](const GridCell& c) { return c.unsafe; },
                 Inequality::ge(std::numeric_limits<double>::min()), "unsafe_positive", opts, col);

    // induction step with multipliers: B(g^k) <= sum_i tau_i B(g^i) over S x W^k
    {
        std::vector<detail::ConditionOutcome> results(disc.cells.size());
        parallel_for(disc.cells.size(), opts.threads, [&](std::size_t ci) {
            Box cur = disc.cells[ci].box();
            double rhs = 0.0;  // sum tau_i * lower(B(g^i))
            for (int i = 0; i < k; ++i) {
                rhs += spec.taus[static_cast<std::size_t>(i)] * barrier.ibp_value(cur).lo;
                cur = loop.step_box(cur, W);
            }
            const double lhs = barrier.ibp_value(cur).hi;  // upper(B(g^k))
            results[ci] = {lhs > rhs, lhs - rhs};
        });
        for (std::size_t ci = 0; ci < disc.cells.size(); ++ci)
            if (results[ci].violated && col.violations.size() < col.cap)
                col.violations.push_back({disc.cells[ci].center, "k_induction", results[ci].amount});
    }
}

/// Full validation of a candidate against its family's conditions.
inline ValidationReport validate_certificate(const SystemModel& model, const MlpNetwork& controller,
                                             const MlpNetwork& barrier, const Discretization& disc,
                                             const NoiseModel& noise, const CertificateSpec& spec,
                                             const ValidationOptions& opts = {}) {
    spec.validate_constants();
    if (barrier.output_dim() != 1)
        throw std::invalid_argument("validate_certificate: barrier must have scalar output");
    const auto t0 = std::chrono::steady_clock::now();

    ClosedLoop loop(model, controller);
    detail::Collector col(opts.max_counterexamples);
    double zeta = 0.0;

    const auto initial = [](const GridCell& c) { return c.initial; };
    const auto unsafe = [](const GridCell& c) { return c.unsafe; };
    const auto safe = [](const GridCell& c) { return !c.unsafe; };
    const auto all = [](const GridCell&) { return true; };

    const CellPartition part = partition(noise, opts.partition_m);

    switch (spec.family) {
        case Family::qual:
            check_qualitative_conditions(loop, barrier, disc, noise, spec.lambda, opts, col, zeta);
            break;
        case Family::qual_k:
            check_k_inductive_qualitative(loop, barrier, disc, noise, spec, opts, col);
            break;
        case Family::inf_lower:
            check_region(barrier, disc, all, Inequality::ge(0.0), "nonnegative", opts, col);
            check_region(barrier, disc, initial, Inequality::le(spec.eps), "initial_cap", opts, col);
            check_region(barrier, disc, unsafe, Inequality::ge(1.0), "unsafe_floor", opts, col);
            check_decrease(loop, barrier, disc, spec, part, opts, col, zeta);
            break;
        case Family::inf_upper:
            // The printed unsafe cap B <= eps' on S_u is unused by the bound's
            // proof and contradicts the initial floor through the submartingale
            // recursion, so the checked set is {unit range, initial floor,
            // gamma-scaled growth}.
            check_region(barrier, disc, all, Inequality::between(0.0, 1.0), "unit_range", opts, col);
            check_region(barrier, disc, initial, Inequality::ge(spec.eps), "initial_floor", opts, col);
            check_decrease(loop, barrier, disc, spec, part, opts, col, zeta);
            break;
        case Family::fin_lin_lower:
            check_region(barrier, disc, all, Inequality::ge(0.0), "nonnegative", opts, col);
            check_region(barrier, disc, initial, Inequality::le(spec.eps), "initial_cap", opts, col);
            check_region(barrier, disc, unsafe, Inequality::ge(spec.lambda), "unsafe_floor", opts, col);
            check_decrease(loop, barrier, disc, spec, part, opts, col, zeta);
            break;
        case Family::fin_exp_lower:
            check_region(barrier, disc, all, Inequality::ge(0.0), "nonnegative", opts, col);
            check_region(barrier, disc, initial, Inequality::le(spec.gamma), "initial_cap", opts, col);
            check_region(barrier, disc, unsafe, Inequality::ge(1.0), "unsafe_floor", opts, col);
            check_decrease(loop, barrier, disc, spec, part, opts, col, zeta);
            break;
        case Family::fin_lin_upper:
            check_region(barrier, disc, all, Inequality::ge(0.0), "nonnegative", opts, col);
            check_region(barrier, disc, safe, Inequality::le(spec.beta), "safe_cap", opts, col);
            detail::check_entry_range(loop, barrier, disc, noise, spec.alpha, 1.0 + spec.beta, 0.0,
                                      spec.beta, "entry_range", opts, col);
            check_decrease(loop, barrier, disc, spec, part, opts, col, zeta);
            break;
        case Family::fin_exp_upper: {
            check_region(barrier, disc, safe, Inequality::ge(0.0), "safe_nonnegative", opts, col);
            detail::check_entry_range(loop, barrier, disc, noise, spec.K_low, spec.K_high, 0.0,
                                      std::numeric_limits<double>::infinity(), "entry_range", opts,
                                      col);
            check_decrease(loop, barrier, disc, spec, part, opts, col, zeta);
            // step-difference bound over the full noise support
            const double L_B = barrier.lipschitz_1norm();
            const double L_f = model.lipschitz_f;
            const double L_pi = loop.lipschitz_pi();
            const Box W = noise.support();
            std::vector<detail::ConditionOutcome> results(disc.cells.size());
            parallel_for(disc.cells.size(), opts.threads, [&](std::size_t i) {
                const GridCell& cell = disc.cells[i];
                if (cell.unsafe) return;
                const double z = margin(cell.tau(), L_B, L_f, L_pi, MarginKind::decrease);
                const double b = barrier.value(cell.center);
                const Interval after = loop.barrier_after_step(barrier, cell, W);
                const double lo_violation = (spec.a + z) - (after.lo - b);
                const double hi_violation = (after.hi - b) - (spec.b - z);
                const double worst = std::max(lo_violation, hi_violation);
                results[i] = {worst > 0.0, worst};
            });
            for (std::size_t i = 0; i < disc.cells.size(); ++i) {
                if (disc.cells[i].unsafe) continue;
                zeta = std::max(zeta,
                                margin(disc.cells[i].tau(), L_B, L_f, L_pi, MarginKind::decrease));
                if (results[i].violated && col.violations.size() < col.cap)
                    col.violations.push_back({disc.cells[i].center, "difference_bound", results[i].amount});
            }
            break;
        }
        case Family::k_inf_lower: {
            check_region(barrier, disc, all, Inequality::ge(0.0), "nonnegative", opts, col);
            check_region(barrier, disc, initial, Inequality::le(spec.eps), "initial_cap", opts, col);
            check_region(barrier, disc, unsafe, Inequality::ge(1.0), "unsafe_floor", opts, col);
            check_decrease(loop, barrier, disc, spec, part, opts, col, zeta);
            std::vector<detail::ConditionOutcome> results(disc.cells.size());
            parallel_for(disc.cells.size(), opts.threads, [&](std::size_t i) {
                const GridCell& cell = disc.cells[i];
                const double e_ub = detail::k_expectation_bound(model, controller, barrier, cell, part,
                                                                spec.k, BoundSide::upper,
                                                                opts.k_product_cap);
                const double rhs = barrier.ibp_value(cell.box()).lo;
                results[i] = {e_ub > rhs, e_ub - rhs};
            });
            for (std::size_t i = 0; i < disc.cells.size(); ++i)
                if (results[i].violated && col.violations.size() < col.cap)
                    col.violations.push_back({disc.cells[i].center, "k_supermartingale", results[i].amount});
            break;
        }
        case Family::k_inf_upper: {
            // unsafe cap dropped for the same reason as inf_upper
            check_region(barrier, disc, all, Inequality::between(0.0, 1.0), "unit_range", opts, col);
            check_region(barrier, disc, initial, Inequality::ge(spec.eps), "initial_floor", opts, col);
            check_decrease(loop, barrier, disc, spec, part, opts, col, zeta);
            const double gk = std::pow(spec.gamma, spec.k);
            std::vector<detail::ConditionOutcome> results(disc.cells.size());
            parallel_for(disc.cells.size(), opts.threads, [&](std::size_t i) {
                const GridCell& cell = disc.cells[i];
                if (cell.unsafe) return;
                const double e_lb = detail::k_expectation_bound(model, controller, barrier, cell, part,
                                                                spec.k, BoundSide::lower,
                                                                opts.k_product_cap, &model.state_space);
                const double lhs = barrier.ibp_value(cell.box()).hi;
                results[i] = {lhs > gk * e_lb, lhs - gk * e_lb};
            });
            for (std::size_t i = 0; i < disc.cells.size(); ++i)
                if (!disc.cells[i].unsafe && results[i].violated && col.violations.size() < col.cap)
                    col.violations.push_back({disc.cells[i].center, "k_submartingale", results[i].amount});
            break;
        }
    }

    ValidationReport rep;
    rep.counterexamples = std::move(col.violations);
    rep.undecided = std::move(col.undecided);
    rep.zeta = zeta;
    rep.cells_checked = disc.cells.size();
    if (!rep.counterexamples.empty()) {
        rep.verdict = Verdict::invalid;
        rep.failed_condition = rep.counterexamples.front().condition;
    } else if (!rep.undecided.empty()) {
        rep.verdict = Verdict::inconclusive;
        rep.failed_condition = rep.undecided.front().condition;
    }
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

// ---------------------------------------------------------------------------
// Soundness audit: adversarial sampling of the ORIGINAL (un-strengthened)
// conditions behind a valid verdict. Finding any violation means the
// validator produced a false positive, which is a critical bug.
// ---------------------------------------------------------------------------

struct AuditResult {
    bool ok = true;
    std::size_t points_checked = 0;
    std::vector<Counterexample> violations;
};

namespace detail {

inline Vec sample_in_box(const Box& b, Rng& rng, bool boundary_biased) {
    Vec s(b.dim());
    for (std::size_t i = 0; i < b.dim(); ++i) s[i] = rng.uniform(b.lower[i], b.upper[i]);
    if (boundary_biased) {
        const std::size_t axis = static_cast<std::size_t>(rng.uniform_int(b.dim()));
        s[axis] = rng.uniform() < 0.5 ? b.lower[axis] : b.upper[axis];
    }
    return s;
}

inline Vec sample_in_region(const Region& r, Rng& rng, bool boundary_biased) {
    const std::size_t bi = r.boxes.size() == 1 ? 0 : static_cast<std::size_t>(rng.uniform_int(r.boxes.size()));
    return sample_in_box(r.boxes[bi], rng, boundary_biased);
}

}  // namespace detail

inline AuditResult soundness_audit(const SystemModel& model, const MlpNetwork& controller,
                                   const MlpNetwork& barrier, const NoiseModel& noise,
                                   const CertificateSpec& spec, const ValidationReport& report,
                                   std::size_t samples, std::uint64_t seed,
                                   std::size_t expectation_samples = 2000, int threads = 1) {
    if (report.verdict != Verdict::valid)
        throw std::invalid_argument("soundness_audit: report verdict must be valid");

    ClosedLoop loop(model, controller);
    AuditResult res;
    res.points_checked = samples;

    struct Hit {
        bool bad = false;
        Counterexample cex;
    };
    std::vector<Hit> hits(samples);

    const Box S = model.state_space;
    const Region& S0 = model.initial_set;
    const Region& Su = model.unsafe_set;
    const int k = spec.k;

    // Per-point Monte-Carlo estimate of the expectation conditions is done
    // on a subsample; a violation is flagged only beyond five standard
    // errors, plus a sound partition-based detector.
    const std::size_t mc_draws = 64;
    const CellPartition audit_part = partition(noise, 16);

    parallel_for(samples, threads, [&](std::size_t i) {
        Rng rng = Rng::stream(seed, {0xa0dULL, i});
        const bool boundary = rng.uniform() < 0.25;
        Hit& hit = hits[i];
        auto flag = [&](const Vec& s, const char* cond, double amount) {
            hit.bad = true;
            hit.cex = {s, cond, amount};
        };

        auto step_once = [&](const Vec& s, Rng& r) {
            Vec obs = s;
            const Vec d = sample(noise, r);
            for (std::size_t j = 0; j < obs.size(); ++j) obs[j] += d[j];
            return model.dynamics.eval(s, decode_action(model, controller.forward(obs)));
        };
        // exited landings are safe-terminated and count as zero in the
        // growth (>=) conditions, matching the validator
        auto clipped_value = [&](const Vec& s) { return S.contains(s) ? barrier.value(s) : 0.0; };

        auto mc_expectation_violates_ub = [&](const Vec& s, double rhs) {
            // E[B'] <= rhs ? flag only if the estimate exceeds rhs by 5 sigma
            // or the sound lower bound already exceeds it.
            double sum = 0.0, sum2 = 0.0;
            for (std::size_t d = 0; d < mc_draws; ++d) {
                const double v = barrier.value(step_once(s, rng));
                sum += v;
                sum2 += v * v;
            }
            const double mean = sum / mc_draws;
            const double var = std::max(0.0, sum2 / mc_draws - mean * mean);
            const double se = std::sqrt(var / mc_draws);
            if (mean - 5.0 * se > rhs) return mean - rhs;
            return 0.0;
        };
        auto mc_expectation_violates_lb = [&](const Vec& s, double rhs) {
            double sum = 0.0, sum2 = 0.0;
            for (std::size_t d = 0; d < mc_draws; ++d) {
                const double v = clipped_value(step_once(s, rng));
                sum += v;
                sum2 += v * v;
            }
            const double mean = sum / mc_draws;
            const double var = std::max(0.0, sum2 / mc_draws - mean * mean);
            const double se = std::sqrt(var / mc_draws);
            if (mean + 5.0 * se < rhs) return rhs - mean;
            return 0.0;
        };
        auto sound_expectation_lb = [&](const Vec& s) {
            GridCell pt;
            pt.center = s;
            pt.half.assign(s.size(), 0.0);
            return detail::expectation_bound(loop, barrier, pt, audit_part, BoundSide::lower);
        };
        auto sound_expectation_ub = [&](const Vec& s) {
            GridCell pt;
            pt.center = s;
            pt.half.assign(s.size(), 0.0);
            return detail::expectation_bound(loop, barrier, pt, audit_part, BoundSide::upper);
        };

        const bool do_expect = (i % std::max<std::size_t>(1, samples / expectation_samples)) == 0;

        switch (spec.family) {
            case Family::qual: {
                const Vec s0 = detail::sample_in_region(S0, rng, boundary);
                if (barrier.value(s0) > 0.0) return flag(s0, "initial_nonpositive", barrier.value(s0));
                const Vec su = detail::sample_in_region(Su, rng, boundary);
                if (barrier.value(su) <= 0.0) return flag(su, "unsafe_positive", -barrier.value(su));
                const Vec s = detail::sample_in_box(S, rng, boundary);
                Vec obs = s;
                const Vec d = sample(noise, rng);
                for (std::size_t j = 0; j < obs.size(); ++j) obs[j] += d[j];
                const Vec nxt = model.dynamics.eval(s, decode_action(model, controller.forward(obs)));
                const double lhs = barrier.value(nxt) - barrier.value(s) + spec.lambda * barrier.value(s);
                if (lhs > 0.0) return flag(s, "noise_decrease", lhs);
                break;
            }
            case Family::qual_k: {
                const Vec s0 = detail::sample_in_region(S0, rng, boundary);
                Vec cur = s0;
                for (int step_i = 0; step_i < k; ++step_i) {
                    if (barrier.value(cur) > 0.0) return flag(s0, "k_initial", barrier.value(cur));
                    cur = step_once(cur, rng);
                }
                const Vec su = detail::sample_in_region(Su, rng, boundary);
                if (barrier.value(su) <= 0.0) return flag(su, "unsafe_positive", -barrier.value(su));
                const Vec s = detail::sample_in_box(S, rng, boundary);
                cur = s;
                double rhs = 0.0;
                for (int step_i = 0; step_i < k; ++step_i) {
                    rhs += spec.taus[static_cast<std::size_t>(step_i)] * barrier.value(cur);
                    cur = step_once(cur, rng);
                }
                if (barrier.value(cur) > rhs) return flag(s, "k_induction", barrier.value(cur) - rhs);
                break;
            }
            case Family::inf_lower: {
                const Vec s = detail::sample_in_box(S, rng, boundary);
                if (barrier.value(s) < 0.0) return flag(s, "nonnegative", -barrier.value(s));
                const Vec s0 = detail::sample_in_region(S0, rng, boundary);
                if (barrier.value(s0) > spec.eps) return flag(s0, "initial_cap", barrier.value(s0) - spec.eps);
                const Vec su = detail::sample_in_region(Su, rng, boundary);
                if (barrier.value(su) < 1.0) return flag(su, "unsafe_floor", 1.0 - barrier.value(su));
                if (do_expect && !Su.contains(s)) {
                    const double b = barrier.value(s);
                    double amt = mc_expectation_violates_ub(s, b);
                    if (amt <= 0.0 && sound_expectation_lb(s) > b) amt = sound_expectation_lb(s) - b;
                    if (amt > 0.0) return flag(s, "supermartingale", amt);
                }
                break;
            }
            case Family::inf_upper: {
                const Vec s = detail::sample_in_box(S, rng, boundary);
                const double bs = barrier.value(s);
                if (bs < 0.0 || bs > 1.0) return flag(s, "unit_range", std::max(-bs, bs - 1.0));
                const Vec s0 = detail::sample_in_region(S0, rng, boundary);
                if (barrier.value(s0) < spec.eps) return flag(s0, "initial_floor", spec.eps - barrier.value(s0));
                if (do_expect && !Su.contains(s)) {
                    double amt = mc_expectation_violates_lb(s, bs / spec.gamma);
                    if (amt <= 0.0 && spec.gamma * sound_expectation_ub(s) < bs)
                        amt = bs - spec.gamma * sound_expectation_ub(s);
                    if (amt > 0.0) return flag(s, "gamma_submartingale", amt);
                }
                break;
            }
            case Family::fin_lin_lower: {
                const Vec s = detail::sample_in_box(S, rng, boundary);
                if (barrier.value(s) < 0.0) return flag(s, "nonnegative", -barrier.value(s));
                const Vec s0 = detail::sample_in_region(S0, rng, boundary);
                if (barrier.value(s0) > spec.eps) return flag(s0, "initial_cap", barrier.value(s0) - spec.eps);
                const Vec su = detail::sample_in_region(Su, rng, boundary);
                if (barrier.value(su) < spec.lambda)
                    return flag(su, "unsafe_floor", spec.lambda - barrier.value(su));
                if (do_expect) {
                    const double amt = mc_expectation_violates_ub(s, barrier.value(s) + spec.c);
                    if (amt > 0.0) return flag(s, "c_martingale", amt);
                }
                break;
            }
            case Family::fin_exp_lower: {
                const Vec s = detail::sample_in_box(S, rng, boundary);
                if (barrier.value(s) < 0.0) return flag(s, "nonnegative", -barrier.value(s));
                const Vec s0 = detail::sample_in_region(S0, rng, boundary);
                if (barrier.value(s0) > spec.gamma)
                    return flag(s0, "initial_cap", barrier.value(s0) - spec.gamma);
                const Vec su = detail::sample_in_region(Su, rng, boundary);
                if (barrier.value(su) < 1.0) return flag(su, "unsafe_floor", 1.0 - barrier.value(su));
                if (do_expect && !Su.contains(s)) {
                    const double rhs = (spec.alpha * spec.beta + barrier.value(s)) / spec.alpha;
                    const double amt = mc_expectation_violates_ub(s, rhs);
                    if (amt > 0.0) return flag(s, "alpha_drift", amt);
                }
                break;
            }
            case Family::fin_lin_upper: {
                const Vec s = detail::sample_in_box(S, rng, boundary);
                if (barrier.value(s) < 0.0) return flag(s, "nonnegative", -barrier.value(s));
                if (!Su.contains(s)) {
                    if (barrier.value(s) > spec.beta)
                        return flag(s, "safe_cap", barrier.value(s) - spec.beta);
                    const Vec nxt = step_once(s, rng);
                    if (Su.contains(nxt)) {
                        const double v = barrier.value(nxt);
                        if (v < spec.alpha || v > 1.0 + spec.beta)
                            return flag(s, "entry_range", std::max(spec.alpha - v, v - 1.0 - spec.beta));
                    } else if (!S.contains(nxt)) {
                        const double v = barrier.value(nxt);
                        if (v < 0.0 || v > spec.beta)
                            return flag(s, "entry_range", std::max(-v, v - spec.beta));
                    }
                    if (do_expect) {
                        const double amt = mc_expectation_violates_lb(s, barrier.value(s) + spec.c);
                        if (amt > 0.0) return flag(s, "reverse_c_martingale", amt);
                    }
                }
                break;
            }
            case Family::fin_exp_upper: {
                const Vec s = detail::sample_in_box(S, rng, boundary);
                if (!Su.contains(s)) {
                    if (barrier.value(s) < 0.0) return flag(s, "safe_nonnegative", -barrier.value(s));
                    const Vec obs_delta = sample(noise, rng);
                    Vec obs = s;
                    for (std::size_t j = 0; j < obs.size(); ++j) obs[j] += obs_delta[j];
                    const Vec nxt = model.dynamics.eval(s, decode_action(model, controller.forward(obs)));
                    const double diff = barrier.value(nxt) - barrier.value(s);
                    if (diff < spec.a || diff > spec.b)
                        return flag(s, "difference_bound", std::max(spec.a - diff, diff - spec.b));
                    if (Su.contains(nxt)) {
                        const double v = barrier.value(nxt);
                        if (v < spec.K_low || v > spec.K_high)
                            return flag(s, "entry_range", std::max(spec.K_low - v, v - spec.K_high));
                    } else if (!S.contains(nxt) && barrier.value(nxt) < 0.0) {
                        return flag(s, "entry_range", -barrier.value(nxt));
                    }
                    if (do_expect) {
                        const double amt = mc_expectation_violates_ub(s, barrier.value(s) - spec.eps);
                        if (amt > 0.0) return flag(s, "ranking_drift", amt);
                    }
                }
                break;
            }
            case Family::k_inf_lower: {
                const Vec s = detail::sample_in_box(S, rng, boundary);
                if (barrier.value(s) < 0.0) return flag(s, "nonnegative", -barrier.value(s));
                const Vec s0 = detail::sample_in_region(S0, rng, boundary);
                if (barrier.value(s0) > spec.eps) return flag(s0, "initial_cap", barrier.value(s0) - spec.eps);
                const Vec su = detail::sample_in_region(Su, rng, boundary);
                if (barrier.value(su) < 1.0) return flag(su, "unsafe_floor", 1.0 - barrier.value(su));
                if (do_expect) {
                    double amt = mc_expectation_violates_ub(s, barrier.value(s) + spec.c);
                    if (amt > 0.0) return flag(s, "c_martingale", amt);
                    // k-step supermartingale, crude MC over chains
                    double sum = 0.0, sum2 = 0.0;
                    for (std::size_t d = 0; d < mc_draws; ++d) {
                        Vec cur = s;
                        for (int j = 0; j < k; ++j) cur = step_once(cur, rng);
                        const double v = barrier.value(cur);
                        sum += v;
                        sum2 += v * v;
                    }
                    const double mean = sum / mc_draws;
                    const double se =
                        std::sqrt(std::max(0.0, sum2 / mc_draws - mean * mean) / mc_draws);
                    if (mean - 5.0 * se > barrier.value(s))
                        return flag(s, "k_supermartingale", mean - barrier.value(s));
                }
                break;
            }
            case Family::k_inf_upper: {
                const Vec s = detail::sample_in_box(S, rng, boundary);
                const double bs = barrier.value(s);
                if (bs < 0.0 || bs > 1.0) return flag(s, "unit_range", std::max(-bs, bs - 1.0));
                const Vec s0 = detail::sample_in_region(S0, rng, boundary);
                if (barrier.value(s0) < spec.eps) return flag(s0, "initial_floor", spec.eps - barrier.value(s0));
                if (do_expect) {
                    double amt = mc_expectation_violates_lb(s, bs + spec.c);
                    if (amt > 0.0) return flag(s, "reverse_c_martingale", amt);
                    if (!Su.contains(s)) {
                        const double gk = std::pow(spec.gamma, spec.k);
                        double sum = 0.0, sum2 = 0.0;
                        for (std::size_t d = 0; d < mc_draws; ++d) {
                            Vec cur = s;
                            bool exited = false;
                            for (int j = 0; j < k; ++j) {
                                cur = step_once(cur, rng);
                                if (!S.contains(cur)) {
                                    exited = true;
                                    break;
                                }
                            }
                            const double v = exited ? 0.0 : barrier.value(cur);
                            sum += v;
                            sum2 += v * v;
                        }
                        const double mean = sum / mc_draws;
                        const double se =
                            std::sqrt(std::max(0.0, sum2 / mc_draws - mean * mean) / mc_draws);
                        if (gk * (mean + 5.0 * se) < bs)
                            return flag(s, "k_submartingale", bs - gk * mean);
                    }
                }
                break;
            }
        }
    });

    for (auto& h : hits) {
        if (h.bad) {
            res.ok = false;
            if (res.violations.size() < 32) res.violations.push_back(std::move(h.cex));
        }
    }
    return res;
}

}  // namespace nbcert
