#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nbcert/interval.hpp"

namespace nbcert {

/// The certificate condition families. Each corresponds to one set of
/// barrier conditions with its own constants and bound formula.
enum class Family {
    qual,           // almost-sure safety, per-step decrease
    qual_k,         // almost-sure safety, k-inductive
    inf_lower,      // infinite-horizon lower bound (supermartingale)
    inf_upper,      // infinite-horizon upper bound (gamma-scaled submartingale)
    fin_lin_lower,  // finite-horizon linear lower bound (c-martingale)
    fin_exp_lower,  // finite-horizon exponential lower bound
    fin_lin_upper,  // finite-horizon linear upper bound
    fin_exp_upper,  // finite-horizon exponential upper bound
    k_inf_lower,    // k-inductive infinite-horizon lower bound
    k_inf_upper,    // k-inductive infinite-horizon upper bound
};

inline const char* family_name(Family f) {
    switch (f) {
        case Family::qual: return "qual";
        case Family::qual_k: return "qual_k";
        case Family::inf_lower: return "inf_lower";
        case Family::inf_upper: return "inf_upper";
        case Family::fin_lin_lower: return "fin_lin_lower";
        case Family::fin_exp_lower: return "fin_exp_lower";
        case Family::fin_lin_upper: return "fin_lin_upper";
        case Family::fin_exp_upper: return "fin_exp_upper";
        case Family::k_inf_lower: return "k_inf_lower";
        case Family::k_inf_upper: return "k_inf_upper";
    }
    return "?";
}

inline Family family_from_name(const std::string& s) {
    for (Family f : {Family::qual, Family::qual_k, Family::inf_lower, Family::inf_upper,
                     Family::fin_lin_lower, Family::fin_exp_lower, Family::fin_lin_upper,
                     Family::fin_exp_upper, Family::k_inf_lower, Family::k_inf_upper})
        if (s == family_name(f)) return f;
    throw std::invalid_argument("unknown certificate family: " + s);
}

/// Which theorem family a candidate must satisfy, plus every scalar
/// constant the family's conditions and bound formula mention.
struct CertificateSpec {
    Family family = Family::inf_lower;

    double lambda = 1.0;      // qual: decrease rate in (0, 1]
    double eps = 0.1;         // initial cap (lower families) / initial floor (upper)
    double eps_prime = 0.01;  // unsafe cap, upper families
    double gamma = 0.9;       // submartingale scale (upper) / initial cap (fin_exp_lower)
    double c = 0.0;           // martingale drift allowance
    double alpha = 1.05;      // exponential-rate constant
    double beta = 0.0;        // drift (fin_exp_lower) / safe cap (fin_lin_upper)
    double K_low = -2.0;      // unsafe floor, fin_exp_upper (K')
    double K_high = -0.1;     // unsafe cap, fin_exp_upper (K), K' <= K < 0
    double a = -1.0;          // step-difference bounds, fin_exp_upper
    double b = 1.0;
    int k = 1;                  // induction depth (1 for non-inductive families)
    std::vector<double> taus;   // qual_k multipliers, size k, all >= 0

    bool is_k_family() const {
        return family == Family::qual_k || family == Family::k_inf_lower ||
               family == Family::k_inf_upper;
    }

    bool is_upper_bound() const {
        return family == Family::inf_upper || family == Family::fin_lin_upper ||
               family == Family::fin_exp_upper || family == Family::k_inf_upper;
    }

    bool is_finite_horizon() const {
        return family == Family::fin_lin_lower || family == Family::fin_exp_lower ||
               family == Family::fin_lin_upper || family == Family::fin_exp_upper;
    }

    /// Families whose range conditions force B into [0,1]; these get a
    /// sigmoid output unit so the range holds by construction.
    bool wants_unit_range_output() const {
        return family == Family::inf_upper || family == Family::k_inf_upper;
    }

    void validate_constants() const {
        auto fail = [&](const std::string& msg) {
            throw std::invalid_argument(std::string(family_name(family)) + ": " + msg);
        };
        switch (family) {
            case Family::qual:
                if (!(lambda > 0.0 && lambda <= 1.0)) fail("requires lambda in (0,1]");
                break;
            case Family::qual_k:
                if (k < 1) fail("requires k >= 1");
                if (taus.size() != static_cast<std::size_t>(k)) fail("requires k multipliers");
                for (double t : taus)
                    if (t < 0.0) fail("requires multipliers >= 0");
                break;
            case Family::inf_lower:
                if (!(eps >= 0.0 && eps <= 1.0)) fail("requires eps in [0,1]");
                break;
            case Family::inf_upper:
                if (!(gamma > 0.0 && gamma < 1.0)) fail("requires gamma in (0,1)");
                if (!(0.0 <= eps_prime && eps_prime < eps && eps <= 1.0))
                    fail("requires 0 <= eps' < eps <= 1");
                break;
            case Family::fin_lin_lower:
                if (!(lambda > eps && eps >= 0.0)) fail("requires lambda > eps >= 0");
                if (!(c >= 0.0)) fail("requires c >= 0");
                break;
            case Family::fin_exp_lower:
                if (!(alpha > 0.0) || alpha == 1.0) fail("requires alpha > 0, alpha != 1");
                if (!(gamma >= 0.0 && gamma < 1.0)) fail("requires gamma in [0,1)");
                break;
            case Family::fin_lin_upper:
                if (!(beta > 0.0 && beta < 1.0)) fail("requires beta in (0,1)");
                if (!(beta < alpha && alpha < 1.0 + beta)) fail("requires beta < alpha < 1+beta");
                if (!(c >= 0.0)) fail("requires c >= 0");
                break;
            case Family::fin_exp_upper:
                if (!(K_low <= K_high && K_high < 0.0)) fail("requires K' <= K < 0");
                if (!(eps > 0.0)) fail("requires eps > 0");
                if (!(a <= b)) fail("requires a <= b");
                break;
            case Family::k_inf_lower:
                if (!(eps >= 0.0 && eps <= 1.0)) fail("requires eps in [0,1]");
                if (!(c >= 0.0)) fail("requires c >= 0");
                if (k < 1) fail("requires k >= 1");
                break;
            case Family::k_inf_upper:
                if (!(gamma > 0.0 && gamma < 1.0)) fail("requires gamma in (0,1)");
                if (!(0.0 <= eps_prime && eps_prime < eps && eps <= 1.0))
                    fail("requires 0 <= eps' < eps <= 1");
                if (!(c <= 0.0)) fail("requires c <= 0");
                if (k < 1) fail("requires k >= 1");
                break;
        }
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["schema"] = "nbcert-certificate-spec-v1";
        j["family"] = family_name(family);
        j["lambda"] = lambda;
        j["eps"] = eps;
        j["eps_prime"] = eps_prime;
        j["gamma"] = gamma;
        j["c"] = c;
        j["alpha"] = alpha;
        j["beta"] = beta;
        j["K_low"] = K_low;
        j["K_high"] = K_high;
        j["a"] = a;
        j["b"] = b;
        j["k"] = k;
        j["taus"] = taus;
        return j;
    }

    static CertificateSpec from_json(const nlohmann::json& j) {
        CertificateSpec s;
        s.family = family_from_name(j.at("family").get<std::string>());
        s.lambda = j.value("lambda", s.lambda);
        s.eps = j.value("eps", s.eps);
        s.eps_prime = j.value("eps_prime", s.eps_prime);
        s.gamma = j.value("gamma", s.gamma);
        s.c = j.value("c", s.c);
        s.alpha = j.value("alpha", s.alpha);
        s.beta = j.value("beta", s.beta);
        s.K_low = j.value("K_low", s.K_low);
        s.K_high = j.value("K_high", s.K_high);
        s.a = j.value("a", s.a);
        s.b = j.value("b", s.b);
        s.k = j.value("k", s.k);
        s.taus = j.value("taus", s.taus);
        s.validate_constants();
        return s;
    }
};

}  // namespace nbcert
