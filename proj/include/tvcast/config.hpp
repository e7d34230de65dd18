#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include <json.hpp>

#include "tvcast/common.hpp"

namespace tvcast {

enum class OutcomeKind { kContinuous, kBinary };

inline std::string to_string(OutcomeKind kind) {
    return kind == OutcomeKind::kContinuous ? "continuous" : "binary";
}

inline OutcomeKind outcome_kind_from_string(const std::string& s) {
    if (s == "continuous") return OutcomeKind::kContinuous;
    if (s == "binary") return OutcomeKind::kBinary;
    throw DataError("unknown outcome kind: " + s);
}

// Inverse-gamma prior on one variance: density ~ x^-(shape+1) exp(-rate/x).
struct VariancePrior {
    double shape = 0.001;
    double rate = 0.001;
};

struct ModelConfig {
    bool include_trend = true;
    OutcomeKind outcome_kind = OutcomeKind::kContinuous;
    int n_chains = 4;
    int n_warmup = 1000;
    int n_keep = 2000;  // total draws = n_chains * n_keep (default 8000)
    std::uint64_t master_seed = 1;
    VariancePrior prior_var_y;
    VariancePrior prior_var_beta;
    VariancePrior prior_var_alpha;
    VariancePrior prior_var_eta;
    double init_state_sd = 1000.0;  // diffuse prior sd for alpha_1p, nu_1p
    double interval_mass = 0.95;
    bool add_intercept = false;
    // When true, sigma2_beta / sigma2_alpha / sigma2_eta are sampled per
    // predictor instead of shared across all of them.
    bool per_predictor_variances = false;

    void validate() const {
        require(n_chains >= 1, "n_chains must be >= 1");
        require(n_warmup >= 1, "n_warmup must be >= 1");
        require(n_keep >= 1, "n_keep must be >= 1");
        require(init_state_sd > 0.0, "init_state_sd must be > 0");
        require(interval_mass > 0.0 && interval_mass < 1.0, "interval_mass must be in (0,1)");
        for (const VariancePrior* pr :
             {&prior_var_y, &prior_var_beta, &prior_var_alpha, &prior_var_eta})
            require(pr->shape > 0.0 && pr->rate > 0.0,
                    "variance prior hyperparameters must be strictly positive");
    }
};

namespace detail {
inline void read_prior(const nlohmann::json& j, const std::string& key, VariancePrior& out) {
    if (!j.contains(key)) return;
    const auto& p = j.at(key);
    if (p.contains("shape")) out.shape = p.at("shape").get<double>();
    if (p.contains("rate")) out.rate = p.at("rate").get<double>();
}
}  // namespace detail

inline nlohmann::json to_json(const ModelConfig& c) {
    return nlohmann::json{
        {"include_trend", c.include_trend},
        {"outcome_kind", to_string(c.outcome_kind)},
        {"n_chains", c.n_chains},
        {"n_warmup", c.n_warmup},
        {"n_keep", c.n_keep},
        {"master_seed", c.master_seed},
        {"variance_priors",
         {{"var_y", {{"shape", c.prior_var_y.shape}, {"rate", c.prior_var_y.rate}}},
          {"var_beta", {{"shape", c.prior_var_beta.shape}, {"rate", c.prior_var_beta.rate}}},
          {"var_alpha", {{"shape", c.prior_var_alpha.shape}, {"rate", c.prior_var_alpha.rate}}},
          {"var_eta", {{"shape", c.prior_var_eta.shape}, {"rate", c.prior_var_eta.rate}}}}},
        {"init_state_sd", c.init_state_sd},
        {"interval_mass", c.interval_mass},
        {"add_intercept", c.add_intercept},
        {"per_predictor_variances", c.per_predictor_variances},
    };
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    if (j.contains("include_trend")) c.include_trend = j.at("include_trend").get<bool>();
    if (j.contains("outcome_kind"))
        c.outcome_kind = outcome_kind_from_string(j.at("outcome_kind").get<std::string>());
    if (j.contains("n_chains")) c.n_chains = j.at("n_chains").get<int>();
    if (j.contains("n_warmup")) c.n_warmup = j.at("n_warmup").get<int>();
    if (j.contains("n_keep")) c.n_keep = j.at("n_keep").get<int>();
    if (j.contains("master_seed")) c.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("variance_priors")) {
        const auto& vp = j.at("variance_priors");
        detail::read_prior(vp, "var_y", c.prior_var_y);
        detail::read_prior(vp, "var_beta", c.prior_var_beta);
        detail::read_prior(vp, "var_alpha", c.prior_var_alpha);
        detail::read_prior(vp, "var_eta", c.prior_var_eta);
    }
    if (j.contains("init_state_sd")) c.init_state_sd = j.at("init_state_sd").get<double>();
    if (j.contains("interval_mass")) c.interval_mass = j.at("interval_mass").get<double>();
    if (j.contains("add_intercept")) c.add_intercept = j.at("add_intercept").get<bool>();
    if (j.contains("per_predictor_variances"))
        c.per_predictor_variances = j.at("per_predictor_variances").get<bool>();
    c.validate();
    return c;
}

inline ModelConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid JSON in " + path + ": " + e.what());
    }
    return config_from_json(j);
}

}  // namespace tvcast
