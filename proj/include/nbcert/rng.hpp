#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace nbcert {

/// Counter-based splittable generator. Every consumer derives its own
/// stream from (seed, path of task ids), so results are reproducible and
/// independent of scheduling or worker count.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(mix(seed ^ 0x9e3779b97f4a7c15ULL)) {}

    /// Derive a child stream for a task identified by a path of ids.
    static Rng stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
        std::uint64_t s = mix(seed ^ 0x9e3779b97f4a7c15ULL);
        for (std::uint64_t id : path) s = mix(s ^ mix(id + 0x632be59bd9b4e019ULL));
        return Rng(s, tag{});
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

    /// Standard normal via Box-Muller (used only for weight init).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    struct tag {};
    Rng(std::uint64_t raw_state, tag) : state_(raw_state) {}

    // SplitMix64 finalizer.
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

}  // namespace nbcert
