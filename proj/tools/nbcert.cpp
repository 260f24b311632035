// Command-line front end: verify / train / validate / simulate / bounds.
// Exit codes: 0 completed run, 2 invalid input, 3 timeout, 4 soundness-audit
// failure.

#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "nbcert/config.hpp"
#include "nbcert/io.hpp"
#include "nbcert/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitInput = 2;
constexpr int kExitTimeout = 3;
constexpr int kExitAudit = 4;

struct GlobalFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<double> timeout;
    std::optional<std::string> out_dir;
    bool as_json = false;
    bool strict = false;
    bool gnuplot = false;
};

void emit_error(const GlobalFlags& flags, const std::string& stage, const std::string& message) {
    if (flags.as_json) {
        json j{{"error", {{"stage", stage}, {"message", message}}}};
        std::cout << j.dump() << "\n";
    } else {
        std::cerr << "error (" << stage << "): " << message << "\n";
    }
}

nbcert::RunConfig load_config(const GlobalFlags& flags) {
    nbcert::RunConfig cfg = nbcert::RunConfig::load(flags.config_path);
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.threads) {
        cfg.threads = *flags.threads;
        cfg.pipeline.cegis.training.threads = *flags.threads;
        cfg.pipeline.cegis.validation.threads = *flags.threads;
    }
    if (flags.timeout) cfg.pipeline.cegis.timeout_seconds = *flags.timeout;
    if (flags.out_dir) cfg.output_dir = *flags.out_dir;
    return cfg;
}

std::string bounds_csv(const nbcert::VerificationOutcome& outcome) {
    std::string body = "family,T,k";
    if (!outcome.aggregate_sample.empty())
        for (std::size_t i = 0; i < outcome.aggregate_sample[0].size(); ++i)
            body += ",s" + std::to_string(i);
    body += ",bound,pre_clamp\n";
    auto emit = [&](const nbcert::BoundResult& r) {
        for (std::size_t i = 0; i < r.states.size(); ++i) {
            body += nbcert::family_name(r.family);
            body += ',';
            body += r.T ? nbcert::format_double(*r.T) : std::string("inf");
            body += ',';
            body += r.k ? std::to_string(*r.k) : std::string("1");
            for (double v : r.states[i]) {
                body += ',';
                body += nbcert::format_double(v);
            }
            body += ',';
            body += nbcert::format_double(r.values[i]);
            body += ',';
            body += nbcert::format_double(r.pre_clamp[i]);
            body += '\n';
        }
    };
    if (outcome.inf_lower) emit(*outcome.inf_lower);
    if (outcome.inf_upper) emit(*outcome.inf_upper);
    for (const auto& [fam, results] : outcome.finite)
        for (const auto& r : results) emit(r);
    return body;
}

const char* kGnuplotScript = R"(# Bound-vs-simulation chart; run: gnuplot plots.gp
set datafile separator ','
set key outside
set xlabel 'time horizon T'
set ylabel 'safety probability'
set yrange [0:1.05]
set terminal pngcairo size 900,600
set output 'bounds.png'
# aggregate simulation frequency per t (column t>=0 rows only)
plot 'sim.csv' using 2:($2 >= 0 ? $3 : 1/0) with points pt 7 ps 0.3 title 'simulation', \
     'bounds.csv' using ($2 eq 'inf' ? 1/0 : $2):($1 eq 'fin_lin_lower' ? $7 : 1/0) with points pt 5 title 'linear lower', \
     'bounds.csv' using ($2 eq 'inf' ? 1/0 : $2):($1 eq 'fin_exp_lower' ? $7 : 1/0) with points pt 9 title 'exp lower', \
     'bounds.csv' using ($2 eq 'inf' ? 1/0 : $2):($1 eq 'fin_lin_upper' ? $7 : 1/0) with points pt 4 title 'linear upper', \
     'bounds.csv' using ($2 eq 'inf' ? 1/0 : $2):($1 eq 'fin_exp_upper' ? $7 : 1/0) with points pt 8 title 'exp upper'
)";

int cmd_verify(const GlobalFlags& flags) {
    const nbcert::RunConfig cfg = load_config(flags);
    fs::create_directories(cfg.output_dir);

    const nbcert::VerificationOutcome outcome =
        nbcert::verify(cfg.model, cfg.controller, cfg.noise, cfg.pipeline, cfg.seed);

    json oj = outcome.to_json();
    oj["seed"] = cfg.seed;
    oj["model"] = cfg.model.name;
    nbcert::write_file((fs::path(cfg.output_dir) / "outcome.json").string(), oj.dump(2) + "\n");
    nbcert::write_file((fs::path(cfg.output_dir) / "bounds.csv").string(), bounds_csv(outcome));

    // simulation frequencies over the same aggregate sample
    std::vector<nbcert::Vec> sim_states = outcome.aggregate_sample;
    if (sim_states.size() > cfg.sim_initial_states) sim_states.resize(cfg.sim_initial_states);
    const auto stats = nbcert::safety_frequency(cfg.model, cfg.controller, cfg.noise, sim_states,
                                                cfg.sim_episodes, cfg.sim_horizon, cfg.seed,
                                                cfg.threads);
    nbcert::write_file((fs::path(cfg.output_dir) / "sim.csv").string(),
                       nbcert::sim_stats_csv(sim_states, stats));
    if (flags.gnuplot)
        nbcert::write_file((fs::path(cfg.output_dir) / "plots.gp").string(), kGnuplotScript);

    if (flags.as_json) {
        std::cout << oj.dump() << "\n";
    } else {
        std::cout << "qualitative: " << outcome.qualitative;
        if (outcome.qualitative_k_used) std::cout << " (k=" << *outcome.qualitative_k_used << ")";
        std::cout << "\n";
        if (outcome.inf_lower)
            std::cout << "infinite-horizon lower bound: mean " << outcome.inf_lower->mean << "\n";
        if (outcome.inf_upper)
            std::cout << "infinite-horizon upper bound: mean " << outcome.inf_upper->mean << "\n";
        for (const auto& [fam, results] : outcome.finite)
            for (const auto& r : results)
                std::cout << nbcert::family_name(fam) << " T=" << (r.T ? *r.T : 0.0) << ": mean "
                          << r.mean << "\n";
        for (const auto& n : outcome.notes) std::cout << "note: " << n << "\n";
        std::cout << "outputs written to " << cfg.output_dir << "\n";
    }
    if (outcome.audit_failed) return kExitAudit;
    return kExitOk;
}

int cmd_train(const GlobalFlags& flags) {
    const nbcert::RunConfig cfg = load_config(flags);
    fs::create_directories(cfg.output_dir);

    const nbcert::CegisOutcome out = nbcert::cegis(cfg.certificate, cfg.model, cfg.controller,
                                                   cfg.noise, cfg.pipeline.cegis, cfg.seed);

    json rj = out.report.to_json();
    rj["success"] = out.success;
    rj["iterations"] = out.iterations;
    rj["seconds"] = out.seconds;
    rj["failure_reason"] = out.failure_reason;
    nbcert::write_file((fs::path(cfg.output_dir) / "training_report.json").string(),
                       rj.dump(2) + "\n");
    if (out.success || !out.barrier.layers().empty()) {
        nbcert::save_weights(out.barrier,
                             (fs::path(cfg.output_dir) / "certificate.weights.json").string());
        nbcert::write_file((fs::path(cfg.output_dir) / "certificate.spec.json").string(),
                           out.spec.to_json().dump(2) + "\n");
    }
    if (flags.as_json) std::cout << rj.dump() << "\n";
    else
        std::cout << (out.success ? "certificate validated" : "synthesis failed: " + out.failure_reason)
                  << " after " << out.iterations << " iteration(s)\n";
    if (out.audit_failed) return kExitAudit;
    if (!out.success && out.failure_reason.find("timeout") != std::string::npos) return kExitTimeout;
    return out.success ? kExitOk : kExitInvalid;
}

int cmd_validate(const GlobalFlags& flags) {
    const nbcert::RunConfig cfg = load_config(flags);
    fs::create_directories(cfg.output_dir);
    const fs::path out_dir(cfg.output_dir);

    const nbcert::MlpNetwork barrier =
        nbcert::load_weights((out_dir / "certificate.weights.json").string());
    const nbcert::CertificateSpec spec = nbcert::CertificateSpec::from_json(
        json::parse(nbcert::read_file((out_dir / "certificate.spec.json").string())));

    const nbcert::Discretization disc =
        nbcert::discretize(cfg.model, cfg.pipeline.cegis.tau0, cfg.pipeline.cegis.cell_cap);
    nbcert::ValidationReport report = nbcert::validate_certificate(
        cfg.model, cfg.controller, barrier, disc, cfg.noise, spec, cfg.pipeline.cegis.validation);

    bool audit_ok = true;
    if (report.verdict == nbcert::Verdict::valid && cfg.pipeline.cegis.run_audit) {
        const nbcert::AuditResult audit =
            nbcert::soundness_audit(cfg.model, cfg.controller, barrier, cfg.noise, spec, report,
                                    cfg.pipeline.cegis.audit_samples, cfg.seed, 2000, cfg.threads);
        audit_ok = audit.ok;
    }

    json rj = report.to_json();
    rj["audit_ok"] = audit_ok;
    nbcert::write_file((out_dir / "validation.json").string(), rj.dump(2) + "\n");
    if (flags.as_json) std::cout << rj.dump() << "\n";
    else
        std::cout << "verdict: " << nbcert::verdict_name(report.verdict)
                  << (audit_ok ? "" : " (AUDIT FAILED)") << "\n";

    if (!audit_ok) return kExitAudit;
    if (report.verdict != nbcert::Verdict::valid && flags.strict) return kExitInvalid;
    return kExitOk;
}

int cmd_simulate(const GlobalFlags& flags) {
    const nbcert::RunConfig cfg = load_config(flags);
    fs::create_directories(cfg.output_dir);

    const std::vector<nbcert::Vec> states =
        nbcert::stratified_initial_sample(cfg.model.initial_set, cfg.sim_initial_states, cfg.seed);
    const auto stats = nbcert::safety_frequency(cfg.model, cfg.controller, cfg.noise, states,
                                                cfg.sim_episodes, cfg.sim_horizon, cfg.seed,
                                                cfg.threads);
    nbcert::write_file((fs::path(cfg.output_dir) / "sim.csv").string(),
                       nbcert::sim_stats_csv(states, stats));

    double mean_fs = 0.0;
    for (const auto& s : stats) mean_fs += s.f_s;
    mean_fs /= static_cast<double>(stats.size());
    if (flags.as_json)
        std::cout << json{{"mean_f_s", mean_fs}, {"states", states.size()}}.dump() << "\n";
    else
        std::cout << "mean safety frequency over " << states.size() << " states: " << mean_fs << "\n";
    return kExitOk;
}

int cmd_bounds(const GlobalFlags& flags) {
    const nbcert::RunConfig cfg = load_config(flags);
    fs::create_directories(cfg.output_dir);
    const fs::path out_dir(cfg.output_dir);

    const nbcert::MlpNetwork barrier =
        nbcert::load_weights((out_dir / "certificate.weights.json").string());
    const nbcert::CertificateSpec spec = nbcert::CertificateSpec::from_json(
        json::parse(nbcert::read_file((out_dir / "certificate.spec.json").string())));

    const std::vector<nbcert::Vec> states = nbcert::stratified_initial_sample(
        cfg.model.initial_set, cfg.pipeline.aggregate_states, cfg.seed);

    json all = json::array();
    std::string csv;
    if (spec.is_finite_horizon()) {
        for (double T : cfg.pipeline.horizons) {
            const nbcert::BoundResult r = nbcert::aggregate(barrier, spec, states, T);
            all.push_back(r.to_json());
            csv += r.to_csv();
        }
    } else {
        const nbcert::BoundResult r = nbcert::aggregate(barrier, spec, states);
        all.push_back(r.to_json());
        csv = r.to_csv();
    }
    nbcert::write_file((out_dir / "bounds.json").string(), all.dump(2) + "\n");
    nbcert::write_file((out_dir / "bounds_recomputed.csv").string(), csv);
    if (flags.gnuplot) nbcert::write_file((out_dir / "plots.gp").string(), kGnuplotScript);
    if (flags.as_json) std::cout << all.dump() << "\n";
    else
        std::cout << "recomputed " << all.size() << " bound set(s) over " << states.size()
                  << " states\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neural barrier certificate synthesis and sound safety verification"};
    app.require_subcommand(1);

    GlobalFlags flags;
    app.add_option("--config", flags.config_path, "run configuration (TOML)")->required();
    std::uint64_t seed_opt = 0;
    int threads_opt = 0;
    double timeout_opt = 0.0;
    std::string out_opt;
    auto* seed_flag = app.add_option("--seed", seed_opt, "override the config seed");
    auto* threads_flag = app.add_option("--threads", threads_opt, "worker threads");
    auto* timeout_flag = app.add_option("--timeout", timeout_opt, "per-synthesis timeout (seconds)");
    auto* out_flag = app.add_option("--out", out_opt, "output directory");
    app.add_flag("--json", flags.as_json, "machine-readable output and error records");
    app.add_flag("--strict", flags.strict, "nonzero exit when validation is not valid");
    app.add_flag("--gnuplot", flags.gnuplot, "emit a gnuplot script next to the CSV data");

    auto* verify = app.add_subcommand("verify", "run the full three-step verification");
    auto* train = app.add_subcommand("train", "synthesize one certificate family via CEGIS");
    auto* validate = app.add_subcommand("validate", "re-validate a saved certificate");
    auto* simulate = app.add_subcommand("simulate", "Monte-Carlo safety frequencies");
    auto* bounds = app.add_subcommand("bounds", "recompute bounds from a saved certificate");

    CLI11_PARSE(app, argc, argv);

    if (*seed_flag) flags.seed = seed_opt;
    if (*threads_flag) flags.threads = threads_opt;
    if (*timeout_flag) flags.timeout = timeout_opt;
    if (*out_flag) flags.out_dir = out_opt;

    try {
        if (verify->parsed()) return cmd_verify(flags);
        if (train->parsed()) return cmd_train(flags);
        if (validate->parsed()) return cmd_validate(flags);
        if (simulate->parsed()) return cmd_simulate(flags);
        if (bounds->parsed()) return cmd_bounds(flags);
    } catch (const nbcert::toml::ParseError& e) {
        emit_error(flags, "config", e.what());
        return kExitInput;
    } catch (const std::invalid_argument& e) {
        emit_error(flags, "input", e.what());
        return kExitInput;
    } catch (const std::exception& e) {
        emit_error(flags, "run", e.what());
        return kExitInput;
    }
    return kExitInput;
}
