#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nbcert/certificate.hpp"
#include "nbcert/io.hpp"
#include "nbcert/nn.hpp"

namespace nbcert {

struct BoundValue {
    double value = 0.0;      // clamped to [0,1]
    double pre_clamp = 0.0;  // raw formula value, kept for provenance
    bool vacuous = false;    // fin_exp_upper with T <= B(s0)/eps
};

/// Exact evaluation of the family's certified-bound formula at one initial
/// value b0 = B(s0), then clamped to the unit interval.
inline BoundValue evaluate_bound(const CertificateSpec& spec, double b0,
                                 std::optional<double> T = std::nullopt,
                                 std::optional<int> k = std::nullopt) {
    spec.validate_constants();
    const int kk = k.value_or(spec.k);
    auto need_T = [&]() -> double {
        if (!T) throw std::invalid_argument("evaluate_bound: family requires a horizon T");
        if (*T <= 0.0) throw std::invalid_argument("evaluate_bound: T must be positive");
        return *T;
    };

    BoundValue out;
    switch (spec.family) {
        case Family::inf_lower:
        case Family::inf_upper:
            out.pre_clamp = 1.0 - b0;
            break;
        case Family::fin_lin_lower:
            out.pre_clamp = 1.0 - (b0 + spec.c * need_T()) / spec.lambda;
            break;
        case Family::fin_exp_lower: {
            const double C = spec.alpha * spec.beta / (spec.alpha - 1.0);
            out.pre_clamp = 1.0 - C + (C - b0) * std::pow(spec.alpha, -need_T());
            break;
        }
        case Family::fin_lin_upper:
            out.pre_clamp = 1.0 - b0 - 0.5 * spec.c * need_T() + spec.beta;
            break;
        case Family::fin_exp_upper: {
            const double Tv = need_T();
            if (Tv <= b0 / spec.eps) {
                out.pre_clamp = 1.0;
                out.vacuous = true;
            } else {
                const double num = spec.eps * Tv - b0;
                out.pre_clamp = std::exp(-2.0 * num * num / (Tv * (spec.b - spec.a) * (spec.b - spec.a)));
            }
            break;
        }
        case Family::k_inf_lower:
        case Family::k_inf_upper: {
            const double kd = static_cast<double>(kk);
            out.pre_clamp = 1.0 - kd * b0 - 0.5 * kd * (kd - 1.0) * spec.c;
            break;
        }
        case Family::qual:
        case Family::qual_k:
            throw std::invalid_argument("evaluate_bound: qualitative families have no bound formula");
    }
    out.value = std::clamp(out.pre_clamp, 0.0, 1.0);
    return out;
}

/// Largest k >= 1 with k*b0 + k(k-1)c/2 < 1 (strict, so that the
/// k-inductive bound stays non-trivial), found by direct search. Returns 0
/// when even k = 1 is infeasible, and the cap when every k qualifies.
inline std::size_t feasible_k_max(double b0, double c, std::size_t cap = 64) {
    if (c < 0.0) throw std::invalid_argument("feasible_k_max: c must be nonnegative");
    std::size_t best = 0;
    for (std::size_t k = 1; k <= cap; ++k) {
        const double kd = static_cast<double>(k);
        if (kd * b0 + 0.5 * kd * (kd - 1.0) * c < 1.0) best = k;
        else break;
    }
    return best;
}

/// Per-initial-state bounds plus the aggregate statistics used for
/// system-level reporting.
struct BoundResult {
    Family family = Family::inf_lower;
    std::vector<Vec> states;
    Vec values;
    Vec pre_clamp;
    double mean = 0.0, min = 1.0, max = 0.0;
    std::optional<double> T;
    std::optional<int> k;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["schema"] = "nbcert-bounds-v1";
        j["family"] = family_name(family);
        if (T) j["T"] = *T;
        if (k) j["k"] = *k;
        j["mean"] = mean;
        j["min"] = min;
        j["max"] = max;
        j["per_state"] = nlohmann::json::array();
        for (std::size_t i = 0; i < states.size(); ++i)
            j["per_state"].push_back(
                {{"state", states[i]}, {"bound", values[i]}, {"pre_clamp", pre_clamp[i]}});
        return j;
    }

    /// CSV rows: state components..., bound, pre_clamp; final row is the
    /// aggregate (state columns empty-coded as the mean state).
    std::string to_csv() const {
        if (states.empty()) return {};
        std::vector<std::string> header;
        for (std::size_t i = 0; i < states[0].size(); ++i) header.push_back("s" + std::to_string(i));
        header.push_back("bound");
        header.push_back("pre_clamp");
        CsvWriter csv(header);
        for (std::size_t i = 0; i < states.size(); ++i) {
            std::vector<double> row = states[i];
            row.push_back(values[i]);
            row.push_back(pre_clamp[i]);
            csv.row(row);
        }
        return csv.str();
    }
};

/// Evaluate B(s0) per initial state and map through the bound formula.
/// The caller is responsible for only aggregating over validated
/// certificates (enforced by the pipeline).
inline BoundResult aggregate(const MlpNetwork& barrier, const CertificateSpec& spec,
                             const std::vector<Vec>& initial_states,
                             std::optional<double> T = std::nullopt,
                             std::optional<int> k = std::nullopt) {
    if (initial_states.empty()) throw std::invalid_argument("aggregate: empty initial-state list");
    BoundResult r;
    r.family = spec.family;
    r.T = T;
    if (k) r.k = k;
    else if (spec.is_k_family()) r.k = spec.k;
    r.states = initial_states;
    r.values.reserve(initial_states.size());
    r.pre_clamp.reserve(initial_states.size());
    double sum = 0.0;
    for (const Vec& s : initial_states) {
        const BoundValue bv = evaluate_bound(spec, barrier.value(s), T, k);
        r.values.push_back(bv.value);
        r.pre_clamp.push_back(bv.pre_clamp);
        sum += bv.value;
        r.min = std::min(r.min, bv.value);
        r.max = std::max(r.max, bv.value);
    }
    r.mean = sum / static_cast<double>(initial_states.size());
    return r;
}

}  // namespace nbcert
