#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "nbcert/certificate.hpp"
#include "nbcert/discretize.hpp"
#include "nbcert/env.hpp"
#include "nbcert/nn.hpp"
#include "nbcert/noise.hpp"
#include "nbcert/rng.hpp"
#include "nbcert/sim.hpp"

namespace nbcert {

struct TrainingConfig {
    // loss-term weights
    double k1 = 1.0, k2 = 1.0, k3 = 1.0, k4 = 1.0, k5 = 1.0;
    double zeta_train_factor = 1.5;   // training slack = factor * validation margin
    std::size_t n_successors = 16;    // N sampled successors per grid state
    double learning_rate = 0.02;
    double momentum = 0.9;
    std::size_t epochs = 250;
    std::size_t batch_size = 256;
    double init_scale = 1.0;
    double timeout_seconds = 600.0;
    std::vector<std::size_t> hidden = {64, 64};
    Activation hidden_activation = Activation::relu;
    bool train_c = true;      // drift constant via softplus where the family has one
    bool train_beta = true;   // trainable beta where the family has one
    std::size_t horizon_T = 100;  // T range of the simulation-guided term
    double unsafe_strictness = 0.01;  // training target for strict B > 0 conditions
    int threads = 1;
};

/// Sampled successor chains per grid cell: chains[cell][j][i] is the state
/// after i+1 perturbed closed-loop steps of the j-th sample; inside[cell][j][i]
/// records whether that state (and its whole prefix) stayed in S. The samples
/// are constants during training; gradients flow only through the barrier.
struct SuccessorSet {
    std::vector<std::vector<std::vector<Vec>>> chains;
    std::vector<std::vector<std::vector<char>>> inside;
    std::size_t n = 0;
    int k = 1;
};

inline SuccessorSet sample_successors(const SystemModel& model, const MlpNetwork& controller,
                                      const NoiseModel& noise, const Discretization& disc,
                                      std::size_t n, int k, std::uint64_t seed) {
    SuccessorSet out;
    out.n = n;
    out.k = k;
    out.chains.resize(disc.cells.size());
    out.inside.resize(disc.cells.size());
    for (std::size_t ci = 0; ci < disc.cells.size(); ++ci) {
        auto& per_cell = out.chains[ci];
        auto& per_cell_in = out.inside[ci];
        per_cell.resize(n);
        per_cell_in.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            Rng rng = Rng::stream(seed, {0x5cc, ci, j});
            Vec cur = disc.cells[ci].center;
            bool in = true;
            per_cell[j].reserve(static_cast<std::size_t>(k));
            per_cell_in[j].reserve(static_cast<std::size_t>(k));
            for (int i = 0; i < k; ++i) {
                Vec obs = cur;
                const Vec d = sample(noise, rng);
                for (std::size_t x = 0; x < obs.size(); ++x) obs[x] += d[x];
                cur = model.dynamics.eval(cur, decode_action(model, controller.forward(obs)));
                in = in && model.state_space.contains(cur);
                per_cell[j].push_back(cur);
                per_cell_in[j].push_back(in ? 1 : 0);
            }
        }
    }
    return out;
}

struct LossResult {
    double value = 0.0;
    GradientTape tape;
    double d_c = 0.0;
    double d_beta = 0.0;
    std::vector<double> d_taus;
};

namespace detail {

/// Accumulates d(loss)/d(B(x)) per evaluation point, then runs one backward
/// pass per point with a nonzero coefficient.
class CoefSink {
public:
    explicit CoefSink(std::size_t points) : coefs_(points, 0.0) {}
    void add(std::size_t point, double coef) { coefs_[point] += coef; }
    const Vec& coefs() const { return coefs_; }

private:
    Vec coefs_;
};

inline double hinge(double x) { return x > 0.0 ? x : 0.0; }

}  // namespace detail

/// Loss and exact gradients for one mini-batch of grid cells. The batch
/// lists cell indices; per-term means use the batch's own subset sizes.
/// sim_for_cell[i] may be null for cells without simulation statistics.
inline LossResult compute_loss(const MlpNetwork& barrier, const CertificateSpec& spec,
                               const Discretization& disc, const std::vector<std::size_t>& batch,
                               const SuccessorSet& succ,
                               const std::vector<const SimStats*>& sim_for_cell,
                               const TrainingConfig& cfg, double zeta_train) {
    // ---- collect evaluation points: center first, then chain states -----
    struct CellEval {
        std::size_t cell = 0;
        std::size_t center_point = 0;
        std::vector<std::vector<std::size_t>> chain_points;  // [sample][step]
    };
    std::vector<CellEval> evals;
    std::vector<const Vec*> points;
    evals.reserve(batch.size());
    const int k = spec.k;
    const bool needs_chains = !succ.chains.empty();
    for (std::size_t bi : batch) {
        CellEval ce;
        ce.cell = bi;
        ce.center_point = points.size();
        points.push_back(&disc.cells[bi].center);
        if (needs_chains) {
            ce.chain_points.resize(succ.n);
            for (std::size_t j = 0; j < succ.n; ++j) {
                ce.chain_points[j].resize(succ.chains[bi][j].size());
                for (std::size_t i = 0; i < succ.chains[bi][j].size(); ++i) {
                    ce.chain_points[j][i] = points.size();
                    points.push_back(&succ.chains[bi][j][i]);
                }
            }
        }
        evals.push_back(std::move(ce));
    }

    Vec values(points.size());
    for (std::size_t p = 0; p < points.size(); ++p) values[p] = barrier.value(*points[p]);

    // ---- batch subset sizes for the per-term normalizers ----------------
    std::size_t n_all = 0, n_init = 0, n_unsafe = 0, n_safe = 0;
    for (std::size_t bi : batch) {
        ++n_all;
        if (disc.cells[bi].initial) ++n_init;
        if (disc.cells[bi].unsafe) ++n_unsafe;
        else ++n_safe;
    }
    const double inv_all = n_all ? 1.0 / static_cast<double>(n_all) : 0.0;
    const double inv_init = n_init ? 1.0 / static_cast<double>(n_init) : 0.0;
    const double inv_unsafe = n_unsafe ? 1.0 / static_cast<double>(n_unsafe) : 0.0;
    const double inv_safe = n_safe ? 1.0 / static_cast<double>(n_safe) : 0.0;
    const double inv_n = succ.n ? 1.0 / static_cast<double>(succ.n) : 0.0;

    LossResult res;
    res.d_taus.assign(spec.taus.size(), 0.0);
    detail::CoefSink sink(points.size());
    double loss = 0.0;

    auto mean_chain_value = [&](const CellEval& ce, std::size_t step) {
        double m = 0.0;
        for (std::size_t j = 0; j < succ.n; ++j) m += values[ce.chain_points[j][step]];
        return m * inv_n;
    };
    auto add_chain_coef = [&](const CellEval& ce, std::size_t step, double coef) {
        for (std::size_t j = 0; j < succ.n; ++j) sink.add(ce.chain_points[j][step], coef * inv_n);
    };
    // exited samples count as zero in the growth conditions of upper families
    auto mean_chain_value_clipped = [&](const CellEval& ce, std::size_t step) {
        double m = 0.0;
        for (std::size_t j = 0; j < succ.n; ++j)
            if (succ.inside[ce.cell][j][step]) m += values[ce.chain_points[j][step]];
        return m * inv_n;
    };
    auto add_chain_coef_clipped = [&](const CellEval& ce, std::size_t step, double coef) {
        for (std::size_t j = 0; j < succ.n; ++j)
            if (succ.inside[ce.cell][j][step]) sink.add(ce.chain_points[j][step], coef * inv_n);
    };

    const double T_loss = static_cast<double>(cfg.horizon_T);

    for (const CellEval& ce : evals) {
        const GridCell& cell = disc.cells[ce.cell];
        const double h = values[ce.center_point];
        const SimStats* sim = sim_for_cell.empty() ? nullptr : sim_for_cell[ce.cell];
        auto f_at = [&](std::size_t t) {
            if (!sim) return 1.0;
            return sim->f_t[std::min(t, sim->f_t.size() - 1)];
        };

        switch (spec.family) {
            case Family::qual: {
                if (cell.initial && h > 0.0) {
                    loss += cfg.k2 * inv_init * h;
                    sink.add(ce.center_point, cfg.k2 * inv_init);
                }
                if (cell.unsafe && cfg.unsafe_strictness - h > 0.0) {
                    loss += cfg.k3 * inv_unsafe * (cfg.unsafe_strictness - h);
                    sink.add(ce.center_point, -cfg.k3 * inv_unsafe);
                }
                const double drift = mean_chain_value(ce, 0) - (1.0 - spec.lambda) * h + zeta_train;
                if (drift > 0.0) {
                    loss += cfg.k4 * inv_all * drift;
                    add_chain_coef(ce, 0, cfg.k4 * inv_all);
                    sink.add(ce.center_point, -cfg.k4 * inv_all * (1.0 - spec.lambda));
                }
                break;
            }
            case Family::qual_k: {
                if (cell.initial) {
                    for (std::size_t j = 0; j < succ.n; ++j) {
                        // chain state i (0-based) is the state after i+1 steps;
                        // the base case covers steps 0..k-1, step 0 being the center
                        if (h > 0.0) {
                            loss += cfg.k2 * inv_init * inv_n * h / static_cast<double>(k);
                            sink.add(ce.center_point, cfg.k2 * inv_init * inv_n / static_cast<double>(k));
                        }
                        for (int i = 0; i + 1 < k; ++i) {
                            const double v = values[ce.chain_points[j][static_cast<std::size_t>(i)]];
                            if (v > 0.0) {
                                loss += cfg.k2 * inv_init * inv_n * v / static_cast<double>(k);
                                sink.add(ce.chain_points[j][static_cast<std::size_t>(i)],
                                         cfg.k2 * inv_init * inv_n / static_cast<double>(k));
                            }
                        }
                    }
                }
                if (cell.unsafe && cfg.unsafe_strictness - h > 0.0) {
                    loss += cfg.k3 * inv_unsafe * (cfg.unsafe_strictness - h);
                    sink.add(ce.center_point, -cfg.k3 * inv_unsafe);
                }
                for (std::size_t j = 0; j < succ.n; ++j) {
                    double rhs = spec.taus[0] * h;
                    for (int i = 1; i < k; ++i)
                        rhs += spec.taus[static_cast<std::size_t>(i)] *
                               values[ce.chain_points[j][static_cast<std::size_t>(i - 1)]];
                    const double lhs = values[ce.chain_points[j][static_cast<std::size_t>(k - 1)]];
                    const double gap = lhs - rhs + zeta_train;
                    if (gap > 0.0) {
                        const double w = cfg.k4 * inv_all * inv_n;
                        loss += w * gap;
                        sink.add(ce.chain_points[j][static_cast<std::size_t>(k - 1)], w);
                        sink.add(ce.center_point, -w * spec.taus[0]);
                        res.d_taus[0] += -w * h;
                        for (int i = 1; i < k; ++i) {
                            const double vi = values[ce.chain_points[j][static_cast<std::size_t>(i - 1)]];
                            sink.add(ce.chain_points[j][static_cast<std::size_t>(i - 1)],
                                     -w * spec.taus[static_cast<std::size_t>(i)]);
                            res.d_taus[static_cast<std::size_t>(i)] += -w * vi;
                        }
                    }
                }
                break;
            }
            case Family::inf_lower: {
                if (-h > 0.0) {
                    loss += cfg.k1 * inv_all * (-h);
                    sink.add(ce.center_point, -cfg.k1 * inv_all);
                }
                if (cell.initial && h - spec.eps > 0.0) {
                    loss += cfg.k2 * inv_init * (h - spec.eps);
                    sink.add(ce.center_point, cfg.k2 * inv_init);
                }
                if (cell.unsafe && 1.0 - h > 0.0) {
                    loss += cfg.k3 * inv_unsafe * (1.0 - h);
                    sink.add(ce.center_point, -cfg.k3 * inv_unsafe);
                }
                if (!cell.unsafe) {
                    const double drift = mean_chain_value(ce, 0) - h + zeta_train;
                    if (drift > 0.0) {
                        loss += cfg.k4 * inv_safe * drift;
                        add_chain_coef(ce, 0, cfg.k4 * inv_safe);
                        sink.add(ce.center_point, -cfg.k4 * inv_safe);
                    }
                }
                if (cell.initial && sim) {
                    const double g = sim->f_s + h - 1.0;
                    if (g > 0.0) {
                        loss += cfg.k5 * inv_init * g;
                        sink.add(ce.center_point, cfg.k5 * inv_init);
                    }
                }
                break;
            }
            case Family::inf_upper: {
                if (h - 1.0 > 0.0) {
                    loss += cfg.k1 * inv_all * (h - 1.0);
                    sink.add(ce.center_point, cfg.k1 * inv_all);
                }
                if (-h > 0.0) {
                    loss += cfg.k1 * inv_all * (-h);
                    sink.add(ce.center_point, -cfg.k1 * inv_all);
                }
                if (cell.initial && spec.eps - h > 0.0) {
                    loss += cfg.k2 * inv_init * (spec.eps - h);
                    sink.add(ce.center_point, -cfg.k2 * inv_init);
                }
                // no unsafe-cap term: the checked family drops B <= eps' on S_u
                if (!cell.unsafe) {
                    const double drift = h - spec.gamma * mean_chain_value_clipped(ce, 0) + zeta_train;
                    if (drift > 0.0) {
                        loss += cfg.k4 * inv_safe * drift;
                        sink.add(ce.center_point, cfg.k4 * inv_safe);
                        add_chain_coef_clipped(ce, 0, -cfg.k4 * inv_safe * spec.gamma);
                    }
                }
                if (cell.initial && sim) {
                    const double g = 1.0 - sim->f_s - h;
                    if (g > 0.0) {
                        loss += cfg.k5 * inv_init * g;
                        sink.add(ce.center_point, -cfg.k5 * inv_init);
                    }
                }
                break;
            }
            case Family::fin_lin_lower: {
                if (-h > 0.0) {
                    loss += cfg.k1 * inv_all * (-h);
                    sink.add(ce.center_point, -cfg.k1 * inv_all);
                }
                if (cell.initial && h - spec.eps > 0.0) {
                    loss += cfg.k2 * inv_init * (h - spec.eps);
                    sink.add(ce.center_point, cfg.k2 * inv_init);
                }
                if (cell.unsafe && spec.lambda - h > 0.0) {
                    loss += cfg.k3 * inv_unsafe * (spec.lambda - h);
                    sink.add(ce.center_point, -cfg.k3 * inv_unsafe);
                }
                {
                    const double drift = mean_chain_value(ce, 0) - h - spec.c + zeta_train;
                    if (drift > 0.0) {
                        loss += cfg.k4 * inv_all * drift;
                        add_chain_coef(ce, 0, cfg.k4 * inv_all);
                        sink.add(ce.center_point, -cfg.k4 * inv_all);
                        res.d_c += -cfg.k4 * inv_all;
                    }
                }
                if (cell.initial && sim) {
                    for (std::size_t t = 1; t <= static_cast<std::size_t>(T_loss); ++t) {
                        const double g =
                            f_at(t) - 1.0 + (h + spec.c * static_cast<double>(t)) / spec.lambda;
                        if (g > 0.0) {
                            loss += cfg.k5 * inv_init * g;
                            sink.add(ce.center_point, cfg.k5 * inv_init / spec.lambda);
                            res.d_c += cfg.k5 * inv_init * static_cast<double>(t) / spec.lambda;
                        }
                    }
                }
                break;
            }
            case Family::fin_exp_lower: {
                if (-h > 0.0) {
                    loss += cfg.k1 * inv_all * (-h);
                    sink.add(ce.center_point, -cfg.k1 * inv_all);
                }
                if (cell.initial && h - spec.gamma > 0.0) {
                    loss += cfg.k2 * inv_init * (h - spec.gamma);
                    sink.add(ce.center_point, cfg.k2 * inv_init);
                }
                if (cell.unsafe && 1.0 - h > 0.0) {
                    loss += cfg.k3 * inv_unsafe * (1.0 - h);
                    sink.add(ce.center_point, -cfg.k3 * inv_unsafe);
                }
                if (!cell.unsafe) {
                    const double drift =
                        spec.alpha * mean_chain_value(ce, 0) - h - spec.alpha * spec.beta + zeta_train;
                    if (drift > 0.0) {
                        loss += cfg.k4 * inv_safe * drift;
                        add_chain_coef(ce, 0, cfg.k4 * inv_safe * spec.alpha);
                        sink.add(ce.center_point, -cfg.k4 * inv_safe);
                        res.d_beta += -cfg.k4 * inv_safe * spec.alpha;
                    }
                }
                if (cell.initial && sim) {
                    const double C = spec.alpha * spec.beta / (spec.alpha - 1.0);
                    const double dC_dbeta = spec.alpha / (spec.alpha - 1.0);
                    for (std::size_t t = 1; t <= static_cast<std::size_t>(T_loss); ++t) {
                        const double at = std::pow(spec.alpha, -static_cast<double>(t));
                        const double g = f_at(t) - 1.0 + C - (C - h) * at;
                        if (g > 0.0) {
                            loss += cfg.k5 * inv_init * g;
                            sink.add(ce.center_point, cfg.k5 * inv_init * at);
                            res.d_beta += cfg.k5 * inv_init * dC_dbeta * (1.0 - at);
                        }
                    }
                }
                break;
            }
            case Family::fin_lin_upper: {
                if (-h > 0.0) {
                    loss += cfg.k1 * inv_all * (-h);
                    sink.add(ce.center_point, -cfg.k1 * inv_all);
                }
                if (!cell.unsafe && h - spec.beta > 0.0) {
                    loss += cfg.k2 * inv_safe * (h - spec.beta);
                    sink.add(ce.center_point, cfg.k2 * inv_safe);
                    res.d_beta += -cfg.k2 * inv_safe;
                }
                if (cell.unsafe) {
                    if (spec.alpha - h > 0.0) {
                        loss += cfg.k3 * inv_unsafe * (spec.alpha - h);
                        sink.add(ce.center_point, -cfg.k3 * inv_unsafe);
                        // alpha tracks beta at a fixed gap when beta is trained
                        res.d_beta += cfg.k3 * inv_unsafe;
                    }
                    if (h - 1.0 - spec.beta > 0.0) {
                        loss += cfg.k3 * inv_unsafe * (h - 1.0 - spec.beta);
                        sink.add(ce.center_point, cfg.k3 * inv_unsafe);
                        res.d_beta += -cfg.k3 * inv_unsafe;
                    }
                }
                if (!cell.unsafe) {
                    const double drift = spec.c - mean_chain_value_clipped(ce, 0) + h + zeta_train;
                    if (drift > 0.0) {
                        loss += cfg.k4 * inv_safe * drift;
                        add_chain_coef_clipped(ce, 0, -cfg.k4 * inv_safe);
                        sink.add(ce.center_point, cfg.k4 * inv_safe);
                        res.d_c += cfg.k4 * inv_safe;
                    }
                }
                if (cell.initial && sim) {
                    for (std::size_t t = 1; t <= static_cast<std::size_t>(T_loss); ++t) {
                        const double g =
                            1.0 - h - 0.5 * spec.c * static_cast<double>(t) + spec.beta - f_at(t);
                        if (g > 0.0) {
                            loss += cfg.k5 * inv_init * g;
                            sink.add(ce.center_point, -cfg.k5 * inv_init);
                            res.d_c += -cfg.k5 * inv_init * 0.5 * static_cast<double>(t);
                            res.d_beta += cfg.k5 * inv_init;
                        }
                    }
                }
                break;
            }
            case Family::fin_exp_upper: {
                if (!cell.unsafe && -h > 0.0) {
                    loss += cfg.k1 * inv_safe * (-h);
                    sink.add(ce.center_point, -cfg.k1 * inv_safe);
                }
                if (cell.unsafe) {
                    if (spec.K_low - h > 0.0) {
                        loss += cfg.k2 * inv_unsafe * (spec.K_low - h);
                        sink.add(ce.center_point, -cfg.k2 * inv_unsafe);
                    }
                    if (h - spec.K_high > 0.0) {
                        loss += cfg.k2 * inv_unsafe * (h - spec.K_high);
                        sink.add(ce.center_point, cfg.k2 * inv_unsafe);
                    }
                }
                if (!cell.unsafe) {
                    const double drift = mean_chain_value(ce, 0) - h + spec.eps + zeta_train;
                    if (drift > 0.0) {
                        loss += cfg.k3 * inv_safe * drift;
                        add_chain_coef(ce, 0, cfg.k3 * inv_safe);
                        sink.add(ce.center_point, -cfg.k3 * inv_safe);
                    }
                    for (std::size_t j = 0; j < succ.n; ++j) {
                        const double hv = values[ce.chain_points[j][0]];
                        const double w = cfg.k4 * inv_safe * inv_n;
                        if (hv - h - spec.b + zeta_train > 0.0) {
                            loss += w * (hv - h - spec.b + zeta_train);
                            sink.add(ce.chain_points[j][0], w);
                            sink.add(ce.center_point, -w);
                        }
                        if (spec.a - hv + h + zeta_train > 0.0) {
                            loss += w * (spec.a - hv + h + zeta_train);
                            sink.add(ce.chain_points[j][0], -w);
                            sink.add(ce.center_point, w);
                        }
                    }
                }
                if (cell.initial && sim) {
                    const double bma2 = (spec.b - spec.a) * (spec.b - spec.a);
                    for (std::size_t t = 1; t <= static_cast<std::size_t>(T_loss); ++t) {
                        const double td = static_cast<double>(t);
                        const double num = spec.eps * td - h;
                        if (num <= 0.0) continue;  // bound vacuous at this t
                        const double e = std::exp(-2.0 * num * num / (td * bma2));
                        const double g = e - f_at(t);
                        if (g > 0.0) {
                            loss += cfg.k5 * inv_init * g;
                            sink.add(ce.center_point, cfg.k5 * inv_init * e * 4.0 * num / (td * bma2));
                        }
                    }
                }
                break;
            }
            case Family::k_inf_lower: {
                if (-h > 0.0) {
                    loss += cfg.k1 * inv_all * (-h);
                    sink.add(ce.center_point, -cfg.k1 * inv_all);
                }
                if (cell.initial && h - spec.eps > 0.0) {
                    loss += cfg.k2 * inv_init * (h - spec.eps);
                    sink.add(ce.center_point, cfg.k2 * inv_init);
                }
                if (cell.unsafe && 1.0 - h > 0.0) {
                    loss += cfg.k3 * inv_unsafe * (1.0 - h);
                    sink.add(ce.center_point, -cfg.k3 * inv_unsafe);
                }
                {
                    const double drift1 = mean_chain_value(ce, 0) - h - spec.c + zeta_train;
                    if (drift1 > 0.0) {
                        loss += cfg.k4 * inv_all * drift1;
                        add_chain_coef(ce, 0, cfg.k4 * inv_all);
                        sink.add(ce.center_point, -cfg.k4 * inv_all);
                        res.d_c += -cfg.k4 * inv_all;
                    }
                    const double driftk =
                        mean_chain_value(ce, static_cast<std::size_t>(k - 1)) - h + zeta_train;
                    if (driftk > 0.0) {
                        loss += cfg.k4 * inv_all * driftk;
                        add_chain_coef(ce, static_cast<std::size_t>(k - 1), cfg.k4 * inv_all);
                        sink.add(ce.center_point, -cfg.k4 * inv_all);
                    }
                }
                if (cell.initial && sim) {
                    const double kk = static_cast<double>(k);
                    const double g = sim->f_s - 1.0 + kk * h + 0.5 * kk * (kk - 1.0) * spec.c;
                    if (g > 0.0) {
                        loss += cfg.k5 * inv_init * g;
                        sink.add(ce.center_point, cfg.k5 * inv_init * kk);
                        res.d_c += cfg.k5 * inv_init * 0.5 * kk * (kk - 1.0);
                    }
                }
                break;
            }
            case Family::k_inf_upper: {
                if (h - 1.0 > 0.0) {
                    loss += cfg.k1 * inv_all * (h - 1.0);
                    sink.add(ce.center_point, cfg.k1 * inv_all);
                }
                if (-h > 0.0) {
                    loss += cfg.k1 * inv_all * (-h);
                    sink.add(ce.center_point, -cfg.k1 * inv_all);
                }
                if (cell.initial && spec.eps - h > 0.0) {
                    loss += cfg.k2 * inv_init * (spec.eps - h);
                    sink.add(ce.center_point, -cfg.k2 * inv_init);
                }
                {
                    const double drift1 = spec.c - (mean_chain_value_clipped(ce, 0) - h) + zeta_train;
                    if (drift1 > 0.0) {
                        loss += cfg.k4 * inv_all * drift1;
                        add_chain_coef_clipped(ce, 0, -cfg.k4 * inv_all);
                        sink.add(ce.center_point, cfg.k4 * inv_all);
                        res.d_c += cfg.k4 * inv_all;
                    }
                }
                if (!cell.unsafe) {
                    const double gk = std::pow(spec.gamma, k);
                    const double driftk =
                        h - gk * mean_chain_value_clipped(ce, static_cast<std::size_t>(k - 1)) +
                        zeta_train;
                    if (driftk > 0.0) {
                        loss += cfg.k4 * inv_safe * driftk;
                        sink.add(ce.center_point, cfg.k4 * inv_safe);
                        add_chain_coef_clipped(ce, static_cast<std::size_t>(k - 1),
                                               -cfg.k4 * inv_safe * gk);
                    }
                }
                if (cell.initial && sim) {
                    const double kk = static_cast<double>(k);
                    const double g = 1.0 - kk * h - 0.5 * kk * (kk - 1.0) * spec.c - sim->f_s;
                    if (g > 0.0) {
                        loss += cfg.k5 * inv_init * g;
                        sink.add(ce.center_point, -cfg.k5 * inv_init * kk);
                        res.d_c += -cfg.k5 * inv_init * 0.5 * kk * (kk - 1.0);
                    }
                }
                break;
            }
        }
    }

    // ---- one backward pass per active point ------------------------------
    res.tape = barrier.zero_tape();
    for (std::size_t p = 0; p < points.size(); ++p) {
        const double coef = sink.coefs()[p];
        if (coef == 0.0) continue;
        res.tape.add_scaled(barrier.gradients(*points[p], {coef}), 1.0);
    }
    res.value = loss;
    return res;
}

}  // namespace nbcert
