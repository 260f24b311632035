#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <vector>

#include "nbcert/loss.hpp"
#include "nbcert/validate.hpp"

namespace nbcert {

struct TrainResult {
    MlpNetwork net;
    CertificateSpec spec;  // trained constants frozen in
    double best_loss = 0.0;
    std::size_t epochs_run = 0;
    bool hit_timeout = false;
};

namespace detail {

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline double softplus_derivative(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(std::max(y, 1e-9))); }

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double sigmoid_inverse(double y) {
    const double c = std::clamp(y, 1e-9, 1.0 - 1e-9);
    return std::log(c / (1.0 - c));
}

/// Trainable scalar constants, reparameterized so that their family
/// constraints hold by construction while gradient descent runs free.
struct Extras {
    bool has_c = false, c_negative = false;
    bool has_beta = false, beta_unit = false;  // unit: beta in (0,1) via sigmoid
    std::size_t n_taus = 0;
    double theta_c = 0.0, theta_beta = 0.0;
    Vec theta_taus;
    double alpha_gap = 0.5;  // fin_lin_upper keeps alpha = beta + gap

    static Extras for_spec(const CertificateSpec& spec, const TrainingConfig& cfg) {
        Extras e;
        switch (spec.family) {
            case Family::fin_lin_lower:
            case Family::k_inf_lower:
                e.has_c = cfg.train_c;
                break;
            case Family::k_inf_upper:
                e.has_c = cfg.train_c;
                e.c_negative = true;
                break;
            case Family::fin_lin_upper:
                e.has_c = cfg.train_c;
                e.has_beta = cfg.train_beta;
                e.beta_unit = true;
                e.alpha_gap = spec.alpha - spec.beta;
                break;
            case Family::fin_exp_lower:
                e.has_beta = cfg.train_beta;
                break;
            case Family::qual_k:
                e.n_taus = spec.taus.size();
                break;
            default:
                break;
        }
        if (e.has_c) e.theta_c = softplus_inverse(std::abs(spec.c) > 1e-9 ? std::abs(spec.c) : 0.05);
        if (e.has_beta)
            e.theta_beta = e.beta_unit ? sigmoid_inverse(spec.beta > 0.0 ? spec.beta : 0.2) : spec.beta;
        e.theta_taus.assign(e.n_taus, 0.0);
        for (std::size_t i = 0; i < e.n_taus; ++i)
            e.theta_taus[i] = softplus_inverse(spec.taus[i] > 1e-9 ? spec.taus[i] : 0.3);
        return e;
    }

    /// Write the current constant values into a spec.
    void apply(CertificateSpec& spec) const {
        if (has_c) spec.c = (c_negative ? -1.0 : 1.0) * softplus(theta_c);
        if (has_beta) spec.beta = beta_unit ? sigmoid(theta_beta) : theta_beta;
        if (spec.family == Family::fin_lin_upper) spec.alpha = spec.beta + alpha_gap;
        for (std::size_t i = 0; i < n_taus; ++i) spec.taus[i] = softplus(theta_taus[i]);
    }

    /// Chain rule from d(loss)/d(constant) to the free parameters.
    void gradient_step(const LossResult& g, double lr, double mom, Extras& velocity) {
        if (has_c) {
            const double d_theta = g.d_c * (c_negative ? -1.0 : 1.0) * softplus_derivative(theta_c);
            velocity.theta_c = mom * velocity.theta_c - lr * d_theta;
            theta_c += velocity.theta_c;
        }
        if (has_beta) {
            const double s = beta_unit ? sigmoid(theta_beta) * (1.0 - sigmoid(theta_beta)) : 1.0;
            velocity.theta_beta = mom * velocity.theta_beta - lr * g.d_beta * s;
            theta_beta += velocity.theta_beta;
        }
        for (std::size_t i = 0; i < n_taus; ++i) {
            const double d_theta = g.d_taus[i] * softplus_derivative(theta_taus[i]);
            velocity.theta_taus[i] = mom * velocity.theta_taus[i] - lr * d_theta;
            theta_taus[i] += velocity.theta_taus[i];
        }
    }
};

inline MarginKind margin_kind_for(Family f) {
    switch (f) {
        case Family::inf_upper:
        case Family::k_inf_upper: return MarginKind::gamma_scaled;
        case Family::fin_exp_lower: return MarginKind::alpha_scaled;
        case Family::fin_lin_upper: return MarginKind::increase;
        default: return MarginKind::decrease;
    }
}

inline double margin_scale_for(const CertificateSpec& spec) {
    switch (spec.family) {
        case Family::inf_upper:
        case Family::k_inf_upper: return spec.gamma;
        case Family::fin_exp_lower: return spec.alpha;
        default: return 1.0;
    }
}

}  // namespace detail

/// Training slack: the validation margin of the current grid under the
/// candidate's Lipschitz bound, scaled by the configured factor so training
/// targets a strictly stronger condition than validation will check.
inline double training_slack(const CertificateSpec& spec, const Discretization& disc,
                             const SystemModel& model, const MlpNetwork& controller,
                             const MlpNetwork& barrier, double factor) {
    const double L_pi = model.decoding == ActionDecoding::argmax ? 0.0 : controller.lipschitz_1norm();
    return factor * margin(disc.max_tau(), barrier.lipschitz_1norm(), model.lipschitz_f, L_pi,
                           detail::margin_kind_for(spec.family), detail::margin_scale_for(spec));
}

/// Stochastic gradient descent with momentum over shuffled mini-batches of
/// grid cells; returns the parameters achieving the lowest full-grid loss.
/// sim_stats must align with the initial cells of `disc` in index order
/// (empty when the simulation-guided term is disabled).
inline TrainResult train(const CertificateSpec& spec_in, const Discretization& disc,
                         const std::vector<SimStats>& sim_stats, const SystemModel& model,
                         const MlpNetwork& controller, const NoiseModel& noise,
                         const TrainingConfig& cfg, std::uint64_t seed,
                         std::optional<double> zeta_override = std::nullopt) {
    const auto t0 = std::chrono::steady_clock::now();
    CertificateSpec spec = spec_in;
    detail::Extras extras = detail::Extras::for_spec(spec, cfg);
    detail::Extras velocity = extras;
    velocity.theta_c = velocity.theta_beta = 0.0;
    std::fill(velocity.theta_taus.begin(), velocity.theta_taus.end(), 0.0);
    extras.apply(spec);

    Rng init_rng = Rng::stream(seed, {0x171});
    MlpNetwork net = MlpNetwork::random(
        disc.state_dim, cfg.hidden, 1, cfg.hidden_activation,
        spec.wants_unit_range_output() ? Activation::sigmoid : Activation::linear, init_rng,
        cfg.init_scale);

    // simulation stats pointer per cell (initial cells in index order)
    std::vector<const SimStats*> sim_for_cell(disc.cells.size(), nullptr);
    {
        std::size_t si = 0;
        for (std::size_t i = 0; i < disc.cells.size(); ++i) {
            if (!disc.cells[i].initial) continue;
            if (si < sim_stats.size()) sim_for_cell[i] = &sim_stats[si];
            ++si;
        }
    }

    const SuccessorSet succ = sample_successors(model, controller, noise, disc,
                                                std::max<std::size_t>(1, cfg.n_successors),
                                                std::max(1, spec.k), seed);

    const double zeta_train =
        zeta_override ? *zeta_override
                      : training_slack(spec, disc, model, controller, net, cfg.zeta_train_factor);

    std::vector<std::size_t> all_cells(disc.cells.size());
    std::iota(all_cells.begin(), all_cells.end(), 0);

    auto full_loss = [&](const MlpNetwork& candidate, const CertificateSpec& s) {
        return compute_loss(candidate, s, disc, all_cells, succ, sim_for_cell, cfg, zeta_train).value;
    };

    TrainResult best;
    best.net = net;
    best.spec = spec;
    best.best_loss = full_loss(net, spec);

    GradientTape net_velocity = net.zero_tape();
    const std::size_t batch_size = std::max<std::size_t>(1, cfg.batch_size);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (elapsed > cfg.timeout_seconds) {
            best.hit_timeout = true;
            break;
        }
        // deterministic shuffle per epoch
        Rng shuffle_rng = Rng::stream(seed, {0x5f1e, epoch});
        std::vector<std::size_t> order = all_cells;
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);

        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t end = std::min(start + batch_size, order.size());
            std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(end));
            const LossResult g = compute_loss(net, spec, disc, batch, succ, sim_for_cell, cfg, zeta_train);
            if (g.value == 0.0) continue;
            // momentum update
            net_velocity.scale(cfg.momentum);
            net_velocity.add_scaled(g.tape, -cfg.learning_rate);
            net.apply_update(net_velocity, 1.0);
            extras.gradient_step(g, cfg.learning_rate, cfg.momentum, velocity);
            extras.apply(spec);
        }

        best.epochs_run = epoch + 1;
        const double l = full_loss(net, spec);
        if (l < best.best_loss) {
            best.best_loss = l;
            best.net = net;
            best.spec = spec;
        }
        if (best.best_loss == 0.0) break;
    }
    return best;
}

}  // namespace nbcert
