#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nbcert/bounds.hpp"
#include "nbcert/discretize.hpp"
#include "nbcert/sim.hpp"
#include "nbcert/train.hpp"
#include "nbcert/validate.hpp"

namespace nbcert {

struct CegisOptions {
    double tau0 = 0.05;            // initial grid granularity
    double tau_floor = 1e-4;       // refinement stops below this
    std::size_t cell_cap = 400000;
    std::size_t max_iterations = 4;
    double timeout_seconds = 300.0;
    TrainingConfig training;
    ValidationOptions validation;
    bool run_audit = true;
    std::size_t audit_samples = 20000;
    std::size_t sim_episodes = 200;  // episodes per initial grid cell for the L5 term
    std::size_t sim_horizon = 200;
    // test hook: replaces the real validator when set
    std::function<ValidationReport(const MlpNetwork&, const CertificateSpec&, const Discretization&)>
        validator_override;
};

struct CegisOutcome {
    bool success = false;
    MlpNetwork barrier;
    CertificateSpec spec;
    ValidationReport report;
    std::size_t iterations = 0;
    double seconds = 0.0;
    std::string failure_reason;
    std::vector<std::size_t> counterexample_counts;  // per iteration
    bool audit_failed = false;
};

/// Train -> validate -> refine loop. On a valid verdict the certificate is
/// additionally screened by the sampling audit before being accepted.
inline CegisOutcome cegis(const CertificateSpec& spec, const SystemModel& model,
                          const MlpNetwork& controller, const NoiseModel& noise,
                          const CegisOptions& opts, std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&]() {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    CegisOutcome out;
    out.spec = spec;
    if (opts.max_iterations == 0 || opts.timeout_seconds <= 0.0) {
        out.failure_reason = "timeout";
        out.seconds = elapsed();
        return out;
    }

    Discretization disc;
    try {
        disc = discretize(model, opts.tau0, opts.cell_cap);
    } catch (const GridCapExceeded& e) {
        out.failure_reason = e.what();
        out.seconds = elapsed();
        return out;
    }

    const bool wants_sim = opts.training.k5 > 0.0 && spec.family != Family::qual &&
                           spec.family != Family::qual_k;

    for (std::size_t iter = 0; iter < opts.max_iterations; ++iter) {
        out.iterations = iter + 1;
        if (elapsed() > opts.timeout_seconds) {
            out.failure_reason = "timeout";
            break;
        }

        std::vector<SimStats> sim_stats;
        if (wants_sim) {
            std::vector<Vec> initial_centers;
            for (const auto& c : disc.cells)
                if (c.initial) initial_centers.push_back(c.center);
            if (!initial_centers.empty())
                sim_stats = safety_frequency(model, controller, noise, initial_centers,
                                             opts.sim_episodes, opts.sim_horizon,
                                             Rng::stream(seed, {0x9e5, iter}).next_u64(),
                                             opts.training.threads);
        }

        TrainingConfig tcfg = opts.training;
        tcfg.timeout_seconds = std::min(tcfg.timeout_seconds, opts.timeout_seconds - elapsed());
        const TrainResult trained =
            train(out.spec, disc, sim_stats, model, controller, noise, tcfg,
                  Rng::stream(seed, {0x7a1, iter}).next_u64());

        ValidationReport report;
        if (opts.validator_override) {
            report = opts.validator_override(trained.net, trained.spec, disc);
        } else {
            report = validate_certificate(model, controller, trained.net, disc, noise, trained.spec,
                                          opts.validation);
        }
        out.counterexample_counts.push_back(report.counterexamples.size() + report.undecided.size());

        if (report.verdict == Verdict::valid) {
            if (opts.run_audit && !opts.validator_override) {
                const AuditResult audit = soundness_audit(model, controller, trained.net, noise,
                                                          trained.spec, report, opts.audit_samples,
                                                          Rng::stream(seed, {0xa1d, iter}).next_u64(),
                                                          2000, opts.training.threads);
                if (!audit.ok) {
                    out.audit_failed = true;
                    out.failure_reason = "soundness audit found a violation of the original conditions";
                    out.barrier = trained.net;
                    out.spec = trained.spec;
                    out.report = report;
                    break;
                }
            }
            out.success = true;
            out.barrier = trained.net;
            out.spec = trained.spec;
            out.report = report;
            break;
        }

        // refine around the recorded points and retrain
        const std::vector<Vec> points = report.refinement_points();
        if (points.empty()) {
            out.failure_reason = "validation failed without refinement points";
            out.barrier = trained.net;
            out.spec = trained.spec;
            out.report = report;
            break;
        }
        try {
            disc = refine(disc, model, points, opts.tau_floor);
        } catch (const RefinementExhausted& e) {
            out.failure_reason = e.what();
            out.barrier = trained.net;
            out.spec = trained.spec;
            out.report = report;
            break;
        }
        out.barrier = trained.net;
        out.spec = trained.spec;
        out.report = report;
        if (iter + 1 == opts.max_iterations) out.failure_reason = "iteration budget exhausted";
    }
    if (!out.success && out.failure_reason.empty()) out.failure_reason = "timeout";
    out.seconds = elapsed();
    return out;
}

// ---------------------------------------------------------------------------
// The three-step unified verification
// ---------------------------------------------------------------------------

struct PipelineConfig {
    double delta_safe = 0.1;              // stop after step 2 when mean l_inf reaches this
    std::vector<int> k_values = {1, 2};   // qualitative k-induction fallbacks
    std::vector<double> horizons = {25.0, 50.0, 100.0};
    std::size_t aggregate_states = 1000;  // initial-state sample for bound aggregation
    bool try_k_quantitative = false;      // k-inductive fallbacks in step 2
    int k_quantitative = 2;
    CegisOptions cegis;
    CertificateSpec defaults;  // constants copied into each family's spec
};

struct FamilyRun {
    Family family = Family::inf_lower;
    bool attempted = false;
    bool validated = false;
    double seconds = 0.0;
    std::size_t iterations = 0;
    std::string failure_reason;
    CertificateSpec spec;
    MlpNetwork barrier;
};

struct VerificationOutcome {
    std::string qualitative = "unknown";  // "almost_surely_safe" | "unknown"
    std::optional<int> qualitative_k_used;
    std::optional<BoundResult> inf_lower;
    std::optional<BoundResult> inf_upper;
    // finite horizon: per validated family, one BoundResult per configured T
    std::vector<std::pair<Family, std::vector<BoundResult>>> finite;
    std::vector<FamilyRun> runs;
    std::vector<Vec> aggregate_sample;
    std::vector<std::string> notes;
    bool timed_out = false;
    bool audit_failed = false;
    double total_seconds = 0.0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["schema"] = "nbcert-outcome-v1";
        j["qualitative"] = qualitative;
        if (qualitative_k_used) j["qualitative_k_used"] = *qualitative_k_used;
        if (inf_lower) j["inf_lower"] = inf_lower->to_json();
        if (inf_upper) j["inf_upper"] = inf_upper->to_json();
        j["finite"] = nlohmann::json::array();
        for (const auto& [fam, results] : finite) {
            nlohmann::json entry;
            entry["family"] = family_name(fam);
            entry["bounds"] = nlohmann::json::array();
            for (const auto& r : results) entry["bounds"].push_back(r.to_json());
            j["finite"].push_back(std::move(entry));
        }
        j["runs"] = nlohmann::json::array();
        for (const auto& r : runs) {
            j["runs"].push_back({{"family", family_name(r.family)},
                                 {"attempted", r.attempted},
                                 {"validated", r.validated},
                                 {"seconds", r.seconds},
                                 {"iterations", r.iterations},
                                 {"failure_reason", r.failure_reason},
                                 {"k", r.spec.k}});
        }
        j["notes"] = notes;
        j["timed_out"] = timed_out;
        j["audit_failed"] = audit_failed;
        j["total_seconds"] = total_seconds;
        return j;
    }
};

/// Low-discrepancy (stratified jittered-lattice) sample of the initial set,
/// proportional to box volume, deterministic in the seed.
inline std::vector<Vec> stratified_initial_sample(const Region& initial, std::size_t count,
                                                  std::uint64_t seed) {
    std::vector<Vec> out;
    double total_volume = 0.0;
    for (const auto& b : initial.boxes) total_volume += std::max(b.volume(), 1e-300);
    for (std::size_t bi = 0; bi < initial.boxes.size(); ++bi) {
        const Box& box = initial.boxes[bi];
        std::size_t quota = static_cast<std::size_t>(std::round(
            static_cast<double>(count) * std::max(box.volume(), 1e-300) / total_volume));
        if (bi + 1 == initial.boxes.size()) quota = count - std::min(count, out.size());
        if (quota == 0) continue;
        const std::size_t n = box.dim();
        const auto per_axis = static_cast<std::size_t>(
            std::max(1.0, std::ceil(std::pow(static_cast<double>(quota), 1.0 / static_cast<double>(n)))));
        std::vector<std::size_t> idx(n, 0);
        std::size_t made = 0;
        for (std::size_t cell = 0; made < quota; ++cell) {
            Rng rng = Rng::stream(seed, {0x1a77, bi, cell});
            Vec s(n);
            for (std::size_t d = 0; d < n; ++d) {
                const double w = (box.upper[d] - box.lower[d]) / static_cast<double>(per_axis);
                s[d] = box.lower[d] + w * (static_cast<double>(idx[d]) + rng.uniform());
            }
            out.push_back(std::move(s));
            ++made;
            std::size_t d = 0;
            while (d < n && ++idx[d] == per_axis) {
                idx[d] = 0;
                ++d;
            }
            if (d == n) std::fill(idx.begin(), idx.end(), 0);
        }
    }
    return out;
}

namespace detail {

inline CertificateSpec spec_for_family(Family f, const CertificateSpec& defaults) {
    CertificateSpec s = defaults;
    s.family = f;
    s.k = 1;
    s.taus.clear();
    if (f == Family::fin_lin_upper) {
        // keep beta < alpha < 1 + beta regardless of the default alpha
        if (!(s.beta > 0.0 && s.beta < 1.0)) s.beta = 0.2;
        s.alpha = s.beta + 0.5;
        if (!(s.c >= 0.0)) s.c = 0.0;
    }
    if (f == Family::fin_lin_lower && !(s.lambda > s.eps)) s.lambda = 1.0;
    if (f == Family::fin_exp_lower && s.alpha == 1.0) s.alpha = 1.05;
    if (f == Family::k_inf_upper && s.c > 0.0) s.c = -s.c;
    return s;
}

}  // namespace detail

/// Step 1 qualitative, Step 2 infinite-horizon quantitative, Step 3
/// finite-horizon quantitative, each via CEGIS; later steps run only while
/// earlier ones leave the question open.
inline VerificationOutcome verify(const SystemModel& model, const MlpNetwork& controller,
                                  const NoiseModel& noise, const PipelineConfig& config,
                                  std::uint64_t seed) {
    if (model.initial_set.intersects(model.unsafe_set))
        throw std::invalid_argument("verify: initial and unsafe sets overlap");
    const auto t0 = std::chrono::steady_clock::now();
    VerificationOutcome out;
    out.aggregate_sample =
        stratified_initial_sample(model.initial_set, config.aggregate_states, seed);

    auto run_family = [&](const CertificateSpec& spec, std::uint64_t run_tag) {
        FamilyRun run;
        run.family = spec.family;
        run.attempted = true;
        const CegisOutcome c = cegis(spec, model, controller, noise, config.cegis,
                                     Rng::stream(seed, {run_tag}).next_u64());
        run.validated = c.success;
        run.seconds = c.seconds;
        run.iterations = c.iterations;
        run.failure_reason = c.failure_reason;
        run.spec = c.spec;
        if (c.success) run.barrier = c.barrier;
        if (c.audit_failed) out.audit_failed = true;
        return run;
    };

    // ---- Step 1: qualitative --------------------------------------------
    {
        CertificateSpec qual = detail::spec_for_family(Family::qual, config.defaults);
        FamilyRun run = run_family(qual, 0x100);
        out.runs.push_back(run);
        if (run.validated) {
            out.qualitative = "almost_surely_safe";
            out.qualitative_k_used = 1;
        } else {
            for (int k : config.k_values) {
                if (k <= 1) continue;
                CertificateSpec qk = detail::spec_for_family(Family::qual_k, config.defaults);
                qk.family = Family::qual_k;
                qk.k = k;
                qk.taus.assign(static_cast<std::size_t>(k), 0.3);
                FamilyRun krun = run_family(qk, 0x110 + static_cast<std::uint64_t>(k));
                out.runs.push_back(krun);
                if (krun.validated) {
                    out.qualitative = "almost_surely_safe";
                    out.qualitative_k_used = k;
                    break;
                }
            }
        }
    }
    if (out.qualitative == "almost_surely_safe") {
        out.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return out;
    }

    // ---- Step 2: infinite-horizon bounds ---------------------------------
    double mean_l_inf = 0.0;
    {
        FamilyRun lower = run_family(detail::spec_for_family(Family::inf_lower, config.defaults), 0x200);
        if (!lower.validated && config.try_k_quantitative) {
            CertificateSpec ks = detail::spec_for_family(Family::k_inf_lower, config.defaults);
            ks.k = config.k_quantitative;
            out.runs.push_back(lower);
            lower = run_family(ks, 0x210);
        }
        out.runs.push_back(lower);
        if (lower.validated) {
            out.inf_lower = aggregate(lower.barrier, lower.spec, out.aggregate_sample);
            mean_l_inf = out.inf_lower->mean;
        } else {
            out.notes.push_back("infinite-horizon lower bound unavailable: " + lower.failure_reason);
        }

        FamilyRun upper = run_family(detail::spec_for_family(Family::inf_upper, config.defaults), 0x201);
        if (!upper.validated && config.try_k_quantitative) {
            CertificateSpec ks = detail::spec_for_family(Family::k_inf_upper, config.defaults);
            ks.k = config.k_quantitative;
            out.runs.push_back(upper);
            upper = run_family(ks, 0x211);
        }
        out.runs.push_back(upper);
        if (upper.validated) {
            out.inf_upper = aggregate(upper.barrier, upper.spec, out.aggregate_sample);
        } else {
            out.notes.push_back("infinite-horizon upper bound unavailable: " + upper.failure_reason);
        }
    }
    if (out.inf_lower && mean_l_inf >= config.delta_safe) {
        out.notes.push_back("mean infinite-horizon lower bound meets the safety threshold");
        out.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return out;
    }

    // ---- Step 3: finite-horizon bounds ------------------------------------
    for (Family f : {Family::fin_lin_lower, Family::fin_exp_lower, Family::fin_lin_upper,
                     Family::fin_exp_upper}) {
        FamilyRun run = run_family(detail::spec_for_family(f, config.defaults),
                                   0x300 + static_cast<std::uint64_t>(f));
        out.runs.push_back(run);
        if (!run.validated) {
            out.notes.push_back(std::string(family_name(f)) + " unavailable: " + run.failure_reason);
            continue;
        }
        std::vector<BoundResult> per_T;
        per_T.reserve(config.horizons.size());
        for (double T : config.horizons)
            per_T.push_back(aggregate(run.barrier, run.spec, out.aggregate_sample, T));
        out.finite.emplace_back(f, std::move(per_T));
    }

    out.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

}  // namespace nbcert
