#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nbcert/certificate.hpp"
#include "nbcert/env.hpp"
#include "nbcert/noise.hpp"
#include "nbcert/pipeline.hpp"
#include "nbcert/toml.hpp"

namespace nbcert {

/// Everything a run needs, parsed and validated up front so that bad
/// sections fail before any work starts.
struct RunConfig {
    std::uint64_t seed = 1;
    int threads = 1;
    std::string output_dir = "out";

    SystemModel model;
    std::string controller_path;
    MlpNetwork controller;
    NoiseModel noise = NoiseModel::zero(1);

    CertificateSpec certificate;  // family + constants for train/validate/bounds
    PipelineConfig pipeline;

    std::size_t sim_episodes = 1000;
    std::size_t sim_horizon = 200;
    std::size_t sim_initial_states = 100;

    static RunConfig load(const std::string& path) {
        const toml::Value root = toml::parse_file(path);
        const std::filesystem::path base = std::filesystem::path(path).parent_path();
        RunConfig cfg;

        cfg.seed = static_cast<std::uint64_t>(root.int_or("seed", 1));
        cfg.threads = static_cast<int>(root.int_or("threads", 1));
        cfg.output_dir = root.string_or("output_dir", "out");

        // ---- model -------------------------------------------------------
        if (!root.has("model")) throw std::invalid_argument(path + ": missing [model] section");
        const toml::Value& mt = root.at("model");
        if (mt.has("builtin")) {
            cfg.model = builtin_model(mt.at("builtin").as_string());
        } else if (mt.has("file")) {
            cfg.model = load_model_toml((base / mt.at("file").as_string()).string());
        } else if (mt.has("state_dim")) {
            cfg.model = model_from_toml(root);
        } else {
            throw std::invalid_argument(path + ": [model] needs 'builtin', 'file', or an inline model");
        }

        // ---- controller ----------------------------------------------------
        if (!root.has("controller") || !root.at("controller").has("weights"))
            throw std::invalid_argument(path + ": missing [controller] weights path");
        cfg.controller_path = (base / root.at("controller").at("weights").as_string()).string();
        cfg.controller = load_weights(cfg.controller_path);
        if (cfg.controller.input_dim() != cfg.model.state_dim)
            throw std::invalid_argument(path + ": controller input dim does not match the model");
        const std::size_t expected_out = cfg.model.decoding == ActionDecoding::argmax
                                             ? cfg.model.discrete_actions.size()
                                             : cfg.model.action_dim;
        if (cfg.controller.output_dim() != expected_out)
            throw std::invalid_argument(path + ": controller output dim does not match the action space");

        // ---- noise ---------------------------------------------------------
        if (root.has("noise")) {
            const toml::Value& nt = root.at("noise");
            const std::string kind = nt.string_or("kind", "uniform");
            if (kind == "zero") {
                cfg.noise = NoiseModel::zero(cfg.model.state_dim);
            } else if (kind == "uniform") {
                Vec radius = nt.at("radius").as_double_array();
                if (radius.size() == 1 && cfg.model.state_dim > 1)
                    radius.assign(cfg.model.state_dim, radius[0]);
                if (radius.size() != cfg.model.state_dim)
                    throw std::invalid_argument(path + ": noise radius dimension mismatch");
                cfg.noise = NoiseModel::uniform(radius);
            } else {
                throw std::invalid_argument(path + ": unknown noise kind '" + kind + "'");
            }
        } else {
            cfg.noise = NoiseModel::zero(cfg.model.state_dim);
        }

        // ---- certificate constants ----------------------------------------
        if (root.has("certificate")) {
            const toml::Value& ct = root.at("certificate");
            CertificateSpec& s = cfg.certificate;
            s.family = family_from_name(ct.string_or("family", "inf_lower"));
            s.lambda = ct.number_or("lambda", s.lambda);
            s.eps = ct.number_or("eps", s.eps);
            s.eps_prime = ct.number_or("eps_prime", s.eps_prime);
            s.gamma = ct.number_or("gamma", s.gamma);
            s.c = ct.number_or("c", s.c);
            s.alpha = ct.number_or("alpha", s.alpha);
            s.beta = ct.number_or("beta", s.beta);
            s.K_low = ct.number_or("K_low", s.K_low);
            s.K_high = ct.number_or("K_high", s.K_high);
            s.a = ct.number_or("a", s.a);
            s.b = ct.number_or("b", s.b);
            s.k = static_cast<int>(ct.int_or("k", s.k));
            if (const toml::Value* taus = ct.find("taus")) s.taus = taus->as_double_array();
            if (s.family == Family::qual_k && s.taus.empty())
                s.taus.assign(static_cast<std::size_t>(s.k), 0.3);
            s.validate_constants();
        }
        cfg.pipeline.defaults = cfg.certificate;
        cfg.pipeline.defaults.family = Family::inf_lower;
        cfg.pipeline.defaults.k = 1;
        cfg.pipeline.defaults.taus.clear();

        // ---- training ------------------------------------------------------
        TrainingConfig& t = cfg.pipeline.cegis.training;
        if (root.has("training")) {
            const toml::Value& tt = root.at("training");
            t.k1 = tt.number_or("k1", t.k1);
            t.k2 = tt.number_or("k2", t.k2);
            t.k3 = tt.number_or("k3", t.k3);
            t.k4 = tt.number_or("k4", t.k4);
            t.k5 = tt.number_or("k5", t.k5);
            t.zeta_train_factor = tt.number_or("zeta_train_factor", t.zeta_train_factor);
            t.n_successors = static_cast<std::size_t>(tt.int_or("n_successors", 16));
            t.learning_rate = tt.number_or("learning_rate", t.learning_rate);
            t.momentum = tt.number_or("momentum", t.momentum);
            t.epochs = static_cast<std::size_t>(tt.int_or("epochs", 250));
            t.batch_size = static_cast<std::size_t>(tt.int_or("batch_size", 256));
            t.init_scale = tt.number_or("init_scale", t.init_scale);
            t.timeout_seconds = tt.number_or("timeout", t.timeout_seconds);
            if (const toml::Value* h = tt.find("hidden")) {
                t.hidden.clear();
                for (const auto& v : h->as_array())
                    t.hidden.push_back(static_cast<std::size_t>(v.as_int()));
            }
            t.hidden_activation = activation_from_name(tt.string_or("hidden_activation", "relu"));
            t.train_c = tt.bool_or("train_c", t.train_c);
            t.train_beta = tt.bool_or("train_beta", t.train_beta);
            t.horizon_T = static_cast<std::size_t>(tt.int_or("horizon_T", 100));
            if (!(t.zeta_train_factor >= 1.0))
                throw std::invalid_argument(path + ": zeta_train_factor must be >= 1");
        }

        // ---- validation ----------------------------------------------------
        CegisOptions& cg = cfg.pipeline.cegis;
        if (root.has("validation")) {
            const toml::Value& vt = root.at("validation");
            cg.tau0 = vt.number_or("tau0", cg.tau0);
            cg.tau_floor = vt.number_or("tau_floor", cg.tau_floor);
            cg.cell_cap = static_cast<std::size_t>(vt.int_or("cell_cap", 400000));
            cg.validation.partition_m = static_cast<std::size_t>(vt.int_or("partition_m", 8));
            cg.validation.bisect_depth = static_cast<int>(vt.int_or("bisect_depth", 6));
            cg.validation.max_counterexamples =
                static_cast<std::size_t>(vt.int_or("max_counterexamples", 64));
            cg.run_audit = vt.bool_or("run_audit", cg.run_audit);
            cg.audit_samples = static_cast<std::size_t>(vt.int_or("audit_samples", 20000));
            if (!(cg.tau0 > 0.0) || !(cg.tau_floor > 0.0))
                throw std::invalid_argument(path + ": granularities must be positive");
        }

        // ---- simulation ----------------------------------------------------
        if (root.has("simulation")) {
            const toml::Value& st = root.at("simulation");
            cfg.sim_episodes = static_cast<std::size_t>(st.int_or("episodes", 1000));
            cfg.sim_horizon = static_cast<std::size_t>(st.int_or("horizon", 200));
            cfg.sim_initial_states = static_cast<std::size_t>(st.int_or("initial_states", 100));
            cg.sim_episodes = static_cast<std::size_t>(st.int_or("l5_episodes", 200));
            cg.sim_horizon = cfg.sim_horizon;
            if (cfg.sim_episodes == 0) throw std::invalid_argument(path + ": episodes must be >= 1");
        }

        // ---- pipeline ------------------------------------------------------
        if (root.has("pipeline")) {
            const toml::Value& pt = root.at("pipeline");
            cfg.pipeline.delta_safe = pt.number_or("delta_safe", cfg.pipeline.delta_safe);
            if (!(cfg.pipeline.delta_safe > 0.0 && cfg.pipeline.delta_safe < 1.0))
                throw std::invalid_argument(path + ": delta_safe must lie in (0,1)");
            if (const toml::Value* ks = pt.find("k_values")) {
                cfg.pipeline.k_values.clear();
                for (const auto& v : ks->as_array())
                    cfg.pipeline.k_values.push_back(static_cast<int>(v.as_int()));
            }
            if (const toml::Value* hs = pt.find("horizons")) {
                cfg.pipeline.horizons.clear();
                for (const auto& v : hs->as_array()) cfg.pipeline.horizons.push_back(v.as_double());
            }
            cfg.pipeline.aggregate_states =
                static_cast<std::size_t>(pt.int_or("aggregate_states", 1000));
            cg.max_iterations = static_cast<std::size_t>(pt.int_or("max_iterations", 4));
            cg.timeout_seconds = pt.number_or("timeout", cg.timeout_seconds);
            cfg.pipeline.try_k_quantitative = pt.bool_or("try_k_quantitative", false);
            cfg.pipeline.k_quantitative = static_cast<int>(pt.int_or("k_quantitative", 2));
            if (cg.timeout_seconds <= 0.0)
                throw std::invalid_argument(path + ": pipeline timeout must be positive");
        }

        cfg.pipeline.cegis.training.threads = cfg.threads;
        cfg.pipeline.cegis.validation.threads = cfg.threads;
        return cfg;
    }
};

}  // namespace nbcert
