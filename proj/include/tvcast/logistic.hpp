#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tvcast/config.hpp"
#include "tvcast/dataset.hpp"
#include "tvcast/draws.hpp"
#include "tvcast/gibbs.hpp"
#include "tvcast/rng.hpp"

namespace tvcast {

// log(sigmoid(z)) without overflow for any finite z.
inline double log_sigmoid(double z) {
    return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

// Adaptive random-walk proposal scales, one per time point. Adaptation runs
// in windows during warmup and freezes before any kept draw, so the recorded
// part of the chain uses a fixed kernel.
struct MetropolisTuner {
    Eigen::VectorXd scales;
    double target_rate = 0.234;
    int window = 50;
    int freeze_at = 0;  // sweep index at which adaptation stops (= n_warmup)

    Eigen::VectorXi window_accepts;
    int window_sweeps = 0;

    MetropolisTuner(int T, int n_warmup, double initial_scale = 0.5)
        : scales(Eigen::VectorXd::Constant(T, initial_scale)),
          freeze_at(n_warmup),
          window_accepts(Eigen::VectorXi::Zero(T)) {}

    void record(int t, bool accepted) {
        if (accepted) window_accepts[t - 1] += 1;
    }

    void end_sweep(int sweep) {
        if (sweep >= freeze_at) return;
        if (++window_sweeps < window) return;
        for (Eigen::Index i = 0; i < scales.size(); ++i) {
            const double rate = static_cast<double>(window_accepts[i]) / window_sweeps;
            scales[i] = std::clamp(scales[i] * std::exp(rate - target_rate), 1.0e-6, 1.0e6);
        }
        window_accepts.setZero();
        window_sweeps = 0;
    }
};

// Unnormalized log conditional of beta_t under the logistic observation
// model: sum_i [y_i log sigmoid(x_i'b) + (1-y_i) log sigmoid(-x_i'b)]
// - ||b - alpha_t||^2 / (2 var_beta), evaluated entirely in the log domain.
inline double logistic_log_target(const Eigen::VectorXd& beta_t, const Eigen::VectorXd& alpha_t,
                                  const Eigen::VectorXd& var_beta, const Dataset& ds,
                                  std::span<const int> rows) {
    double lp = -0.5 * ((beta_t - alpha_t).array().square() / var_beta.array()).sum();
    for (int idx : rows) {
        const Observation& obs = ds.observations[idx];
        const double z = obs.x.dot(beta_t);
        lp += obs.y > 0.5 ? log_sigmoid(z) : log_sigmoid(-z);
    }
    require_numeric(std::isfinite(lp), "non-finite logistic log target");
    return lp;
}

// One Metropolis step on beta_t with a spherical Gaussian random-walk
// proposal. Returns the new value and whether the proposal was accepted.
// The acceptance uniform is always consumed, keeping the draw stream
// independent of accept/reject outcomes.
inline std::pair<Eigen::VectorXd, bool> sample_beta_block_logistic(
    const Dataset& ds, std::span<const int> rows, const Eigen::VectorXd& alpha_t,
    const Eigen::VectorXd& var_beta, const Eigen::VectorXd& current_beta_t, double proposal_scale,
    Rng& rng) {
    const int P = static_cast<int>(current_beta_t.size());
    Eigen::VectorXd proposal(P);
    for (int p = 0; p < P; ++p) proposal[p] = current_beta_t[p] + proposal_scale * rng.normal();
    const double log_ratio = logistic_log_target(proposal, alpha_t, var_beta, ds, rows) -
                             logistic_log_target(current_beta_t, alpha_t, var_beta, ds, rows);
    const double u = rng.uniform();
    if (std::log(u) < log_ratio) return {std::move(proposal), true};
    return {current_beta_t, false};
}

namespace detail {

struct BinaryChainOutput {
    Eigen::MatrixXd draws;
    std::vector<double> accept_rates;  // per time point, over kept sweeps
};

inline BinaryChainOutput run_binary_chain(const FitData& fd, const ModelConfig& config,
                                          const ParamLayout& layout, int chain_index) {
    const int T = fd.T();
    const int P = fd.P();
    ChainState state =
        init_chain_state(fd, config, derive_seed(config.master_seed, chain_index));
    MetropolisTuner tuner(T, config.n_warmup);
    BinaryChainOutput out;
    out.draws.resize(config.n_keep, layout.n_params());
    std::vector<long> kept_accepts(T, 0);

    const int total = config.n_warmup + config.n_keep;
    for (int sweep = 0; sweep < total; ++sweep) {
        try {
            for (int t = 1; t <= T; ++t) {
                auto [beta_t, accepted] = sample_beta_block_logistic(
                    *fd.dataset, fd.rows[t - 1], state.alpha.row(t - 1), state.var_beta,
                    state.beta.row(t - 1), tuner.scales[t - 1], state.rng);
                state.beta.row(t - 1) = beta_t;
                tuner.record(t, accepted);
                if (sweep >= config.n_warmup && accepted) kept_accepts[t - 1] += 1;
            }
            for (int p = 0; p < P; ++p) {
                FfbsModel model;
                model.obs_var = state.var_beta[p];
                model.level_var = state.var_alpha[p];
                model.trend_var = state.var_eta[p];
                model.include_trend = config.include_trend;
                model.init_var = config.init_state_sd * config.init_state_sd;
                auto [alpha_col, nu_col] = ffbs_states(state.beta.col(p), model, state.rng);
                state.alpha.col(p) = alpha_col;
                if (config.include_trend) state.nu.col(p) = nu_col;
            }
            sample_variances(state, fd, config);  // no var_y block in binary mode
        } catch (const NumericalError& e) {
            throw NumericalError("binary chain " + std::to_string(chain_index + 1) + " sweep " +
                                 std::to_string(sweep + 1) + ": " + e.what());
        }
        tuner.end_sweep(sweep);
        if (sweep < config.n_warmup) continue;
        const int iter = sweep - config.n_warmup;
        for (int t = 1; t <= T; ++t)
            for (int p = 0; p < P; ++p) {
                out.draws(iter, layout.beta_index(t, p)) = state.beta(t - 1, p);
                out.draws(iter, layout.alpha_index(t, p)) = state.alpha(t - 1, p);
                if (config.include_trend)
                    out.draws(iter, layout.nu_index(t, p)) = state.nu(t - 1, p);
            }
        const int n_var = config.per_predictor_variances ? P : 1;
        for (int p = 0; p < n_var; ++p) {
            out.draws(iter, layout.var_beta_index(p)) = state.var_beta[p];
            out.draws(iter, layout.var_alpha_index(p)) = state.var_alpha[p];
            if (config.include_trend) out.draws(iter, layout.var_eta_index(p)) = state.var_eta[p];
        }
    }
    out.accept_rates.resize(T);
    for (int t = 0; t < T; ++t)
        out.accept_rates[t] = static_cast<double>(kept_accepts[t]) / config.n_keep;
    return out;
}

}  // namespace detail

// Binary-outcome engine: the same chain orchestration as run_gibbs with the
// beta block swapped for Metropolis-within-Gibbs and no observation-variance
// block. Completion does not imply convergence; the diagnostics report that.
inline DrawStore run_binary(const Dataset& dataset, const ModelConfig& config,
                            int max_threads = 0) {
    config.validate();
    require(config.outcome_kind == OutcomeKind::kBinary,
            "run_binary requires outcome_kind = binary");
    require(dataset.binary, "run_binary requires a dataset validated in binary mode");
    const FitData fd = prepare_fit_data(dataset);
    const ParamLayout layout = make_layout(fd.T(), fd.P(), config);
    DrawStore store = DrawStore::allocate(layout, config.n_chains, config.n_keep);
    store.accept_rates.assign(config.n_chains, {});
    detail::run_chains_parallel(config.n_chains, max_threads, [&](int c) {
        auto out = detail::run_binary_chain(fd, config, layout, c);
        store.chains[c] = std::move(out.draws);
        store.accept_rates[c] = std::move(out.accept_rates);
    });
    return store;
}

}  // namespace tvcast
