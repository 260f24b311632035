#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "nbcert/env.hpp"
#include "nbcert/io.hpp"
#include "nbcert/noise.hpp"
#include "nbcert/parallel.hpp"
#include "nbcert/rng.hpp"

namespace nbcert {

struct Trajectory {
    std::vector<Vec> states;
    std::optional<std::size_t> unsafe_entry;  // first t with states[t] in S_u
};

/// Closed-loop rollout under observation noise:
///   s_{t+1} = f(s_t, decode(pi(s_t + delta_t))).
/// Stops at unsafe entry, at the horizon, or when the state leaves S
/// (safe-terminated: the theorems quantify over the compact S only).
inline Trajectory rollout(const SystemModel& model, const MlpNetwork& controller,
                          const NoiseModel& noise, const Vec& s0, std::size_t horizon, Rng& rng) {
    if (!model.initial_set.contains(s0))
        throw std::invalid_argument("rollout: s0 is not in the initial set");
    Trajectory traj;
    traj.states.push_back(s0);
    Vec s = s0;
    for (std::size_t t = 0; t < horizon; ++t) {
        Vec observed = s;
        if (!noise.is_zero()) {
            const Vec d = sample(noise, rng);
            for (std::size_t i = 0; i < observed.size(); ++i) observed[i] += d[i];
        }
        s = step(model, s, controller.forward(observed));
        traj.states.push_back(s);
        if (model.unsafe_set.contains(s)) {
            traj.unsafe_entry = t + 1;
            break;
        }
        if (!model.state_space.contains(s)) break;  // exited S: safe-terminated
    }
    return traj;
}

/// Safety frequencies of one initial state: f_t[t] is the fraction of
/// episodes with no unsafe entry at or before step t; f_s = f_t[horizon].
struct SimStats {
    Vec f_t;
    double f_s = 1.0;
    std::size_t episodes = 0;
    std::size_t horizon = 0;
};

namespace detail {

inline SimStats stats_for_state(const SystemModel& model, const MlpNetwork& controller,
                                const NoiseModel& noise, const Vec& s0, std::size_t episodes,
                                std::size_t horizon, std::uint64_t seed, std::size_t state_index) {
    std::vector<std::size_t> unsafe_at(horizon + 1, 0);  // episodes entering S_u exactly at t
    for (std::size_t e = 0; e < episodes; ++e) {
        Rng rng = Rng::stream(seed, {0x51u, state_index, e});
        const Trajectory traj = rollout(model, controller, noise, s0, horizon, rng);
        if (traj.unsafe_entry) ++unsafe_at[*traj.unsafe_entry];
    }
    SimStats st;
    st.episodes = episodes;
    st.horizon = horizon;
    st.f_t.assign(horizon + 1, 1.0);
    std::size_t cum = 0;
    for (std::size_t t = 0; t <= horizon; ++t) {
        cum += unsafe_at[t];
        st.f_t[t] = static_cast<double>(episodes - cum) / static_cast<double>(episodes);
    }
    st.f_s = st.f_t[horizon];
    return st;
}

}  // namespace detail

/// Monte-Carlo safety frequencies for a list of initial states. Episodes
/// draw their noise streams from (seed, state index, episode index), so the
/// result is identical for every worker count.
inline std::vector<SimStats> safety_frequency(const SystemModel& model, const MlpNetwork& controller,
                                              const NoiseModel& noise,
                                              const std::vector<Vec>& initial_states,
                                              std::size_t episodes, std::size_t horizon,
                                              std::uint64_t seed, int threads = 1) {
    if (initial_states.empty()) throw std::invalid_argument("safety_frequency: no initial states");
    if (episodes == 0) throw std::invalid_argument("safety_frequency: episodes must be >= 1");
    std::vector<SimStats> out(initial_states.size());
    parallel_for(initial_states.size(), threads, [&](std::size_t i) {
        out[i] = detail::stats_for_state(model, controller, noise, initial_states[i], episodes,
                                         horizon, seed, i);
    });
    return out;
}

/// Long-format CSV: state components..., t, frequency. The row with t = -1
/// carries the overall frequency f_s.
inline std::string sim_stats_csv(const std::vector<Vec>& states, const std::vector<SimStats>& stats) {
    if (states.empty()) return {};
    std::vector<std::string> header;
    for (std::size_t i = 0; i < states[0].size(); ++i) header.push_back("s" + std::to_string(i));
    header.push_back("t");
    header.push_back("frequency");
    CsvWriter csv(header);
    for (std::size_t i = 0; i < states.size(); ++i) {
        std::vector<double> row = states[i];
        row.push_back(-1.0);
        row.push_back(stats[i].f_s);
        csv.row(row);
        for (std::size_t t = 0; t < stats[i].f_t.size(); ++t) {
            std::vector<double> r = states[i];
            r.push_back(static_cast<double>(t));
            r.push_back(stats[i].f_t[t]);
            csv.row(r);
        }
    }
    return csv.str();
}

/// Wilson score interval for a binomial proportion (used by acceptance
/// checks comparing certified bounds against simulation).
struct WilsonInterval {
    double lower = 0.0;
    double upper = 1.0;
};

inline WilsonInterval wilson_interval(double frequency, std::size_t n, double z = 2.576) {
    if (n == 0) return {};
    const double nf = static_cast<double>(n);
    const double z2 = z * z;
    const double denom = 1.0 + z2 / nf;
    const double center = frequency + z2 / (2.0 * nf);
    const double half = z * std::sqrt(frequency * (1.0 - frequency) / nf + z2 / (4.0 * nf * nf));
    return {std::max(0.0, (center - half) / denom), std::min(1.0, (center + half) / denom)};
}

}  // namespace nbcert
