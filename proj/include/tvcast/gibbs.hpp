#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <atomic>
#include <exception>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "tvcast/config.hpp"
#include "tvcast/dataset.hpp"
#include "tvcast/draws.hpp"
#include "tvcast/ffbs.hpp"
#include "tvcast/rng.hpp"

namespace tvcast {

// Per-time-point sufficient statistics, computed once and shared read-only by
// all chains.
struct TimeSlice {
    int n = 0;
    Eigen::MatrixXd xtx;  // P x P
    Eigen::VectorXd xty;  // P
    double yty = 0.0;
};

struct FitData {
    const Dataset* dataset = nullptr;
    std::vector<TimeSlice> slices;          // index t-1; gaps have n = 0
    std::vector<std::vector<int>> rows;     // observation indices per time point
    int N = 0;

    int T() const { return dataset->T; }
    int P() const { return dataset->P; }
};

inline FitData prepare_fit_data(const Dataset& ds) {
    FitData fd;
    fd.dataset = &ds;
    fd.N = static_cast<int>(ds.size());
    fd.slices.resize(ds.T);
    fd.rows.resize(ds.T);
    for (TimeSlice& s : fd.slices) {
        s.xtx = Eigen::MatrixXd::Zero(ds.P, ds.P);
        s.xty = Eigen::VectorXd::Zero(ds.P);
    }
    for (std::size_t i = 0; i < ds.observations.size(); ++i) {
        const Observation& obs = ds.observations[i];
        TimeSlice& s = fd.slices[obs.t - 1];
        s.n += 1;
        s.xtx.noalias() += obs.x * obs.x.transpose();
        s.xty.noalias() += obs.x * obs.y;
        s.yty += obs.y * obs.y;
        fd.rows[obs.t - 1].push_back(static_cast<int>(i));
    }
    return fd;
}

// One Gibbs state. Variances are carried per predictor; in shared mode all
// entries of a vector stay equal and move together.
struct ChainState {
    Eigen::MatrixXd beta;   // T x P
    Eigen::MatrixXd alpha;  // T x P
    Eigen::MatrixXd nu;     // T x P, all-zero and frozen when trend is off
    double var_y = 1.0;
    Eigen::VectorXd var_beta;
    Eigen::VectorXd var_alpha;
    Eigen::VectorXd var_eta;
    Rng rng;

    ChainState(int T, int P, std::uint64_t seed)
        : beta(Eigen::MatrixXd::Zero(T, P)),
          alpha(Eigen::MatrixXd::Zero(T, P)),
          nu(Eigen::MatrixXd::Zero(T, P)),
          var_beta(Eigen::VectorXd::Ones(P)),
          var_alpha(Eigen::VectorXd::Ones(P)),
          var_eta(Eigen::VectorXd::Ones(P)),
          rng(seed) {}
};

// Exact Gaussian conditional of beta_t given alpha_t, the variances and the
// time slice: precision X'X/var_y + diag(1/var_beta), mean solving
// precision * m = X'y/var_y + alpha_t/var_beta. Exposed for oracle tests.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> beta_conditional_moments(
    const TimeSlice& slice, const Eigen::VectorXd& alpha_t, double var_y,
    const Eigen::VectorXd& var_beta) {
    const int P = static_cast<int>(alpha_t.size());
    Eigen::MatrixXd precision = slice.xtx / var_y;
    precision.diagonal() += var_beta.cwiseInverse();
    const Eigen::VectorXd rhs = slice.xty / var_y + alpha_t.cwiseQuotient(var_beta);
    const Eigen::LLT<Eigen::MatrixXd> llt(precision);
    require_numeric(llt.info() == Eigen::Success,
                    "Cholesky failure in beta block (non-finite inputs?)");
    const Eigen::VectorXd mean = llt.solve(rhs);
    const Eigen::MatrixXd cov =
        llt.solve(Eigen::MatrixXd::Identity(P, P));
    return {mean, cov};
}

// One draw from the beta_t conditional. With n_t = 0 this degenerates to
// Normal(alpha_t, diag(var_beta)).
inline Eigen::VectorXd sample_beta_block(const TimeSlice& slice, const Eigen::VectorXd& alpha_t,
                                         double var_y, const Eigen::VectorXd& var_beta, Rng& rng) {
    const int P = static_cast<int>(alpha_t.size());
    Eigen::MatrixXd precision = slice.xtx / var_y;
    precision.diagonal() += var_beta.cwiseInverse();
    const Eigen::VectorXd rhs = slice.xty / var_y + alpha_t.cwiseQuotient(var_beta);
    const Eigen::LLT<Eigen::MatrixXd> llt(precision);
    require_numeric(llt.info() == Eigen::Success,
                    "Cholesky failure in beta block (non-finite inputs?)");
    const Eigen::VectorXd mean = llt.solve(rhs);
    Eigen::VectorXd z(P);
    for (int p = 0; p < P; ++p) z[p] = rng.normal();
    // precision = L L'; mean + L^-T z has covariance precision^-1
    const Eigen::VectorXd draw =
        mean + llt.matrixU().solve(z);
    require_numeric(draw.allFinite(), "non-finite beta draw");
    return draw;
}

struct PosteriorIg {
    std::string name;
    double shape = 0.0;
    double rate = 0.0;
};

// Conjugate inverse-gamma posteriors for the four variances given the current
// state. Exposed so tests can check the parameters against hand algebra.
inline std::vector<PosteriorIg> variance_posterior_params(const ChainState& state,
                                                          const FitData& fd,
                                                          const ModelConfig& config) {
    const int T = fd.T();
    const int P = fd.P();
    std::vector<PosteriorIg> out;

    if (config.outcome_kind == OutcomeKind::kContinuous) {
        double sse_y = 0.0;
        for (int t = 0; t < T; ++t) {
            const TimeSlice& s = fd.slices[t];
            if (s.n == 0) continue;
            const Eigen::VectorXd b = state.beta.row(t);
            sse_y += s.yty - 2.0 * b.dot(s.xty) + b.dot(s.xtx * b);
        }
        sse_y = std::max(sse_y, 0.0);  // quadratic-form cancellation guard
        out.push_back({"var_y", config.prior_var_y.shape + 0.5 * fd.N,
                       config.prior_var_y.rate + 0.5 * sse_y});
    }

    const auto add_block = [&](const std::string& name, const VariancePrior& prior,
                               auto residual_sq, int n_terms_per_p) {
        if (config.per_predictor_variances) {
            for (int p = 0; p < P; ++p)
                out.push_back({name + "[" + std::to_string(p) + "]",
                               prior.shape + 0.5 * n_terms_per_p,
                               prior.rate + 0.5 * residual_sq(p)});
        } else {
            double total = 0.0;
            for (int p = 0; p < P; ++p) total += residual_sq(p);
            out.push_back({name, prior.shape + 0.5 * n_terms_per_p * P,
                           prior.rate + 0.5 * total});
        }
    };

    add_block(
        "var_beta", config.prior_var_beta,
        [&](int p) { return (state.beta.col(p) - state.alpha.col(p)).squaredNorm(); }, T);
    add_block(
        "var_alpha", config.prior_var_alpha,
        [&](int p) {
            double sum = 0.0;
            for (int t = 0; t + 1 < T; ++t) {
                const double r = state.alpha(t + 1, p) - state.alpha(t, p) - state.nu(t, p);
                sum += r * r;
            }
            return sum;
        },
        T - 1);
    if (config.include_trend)
        add_block(
            "var_eta", config.prior_var_eta,
            [&](int p) {
                double sum = 0.0;
                for (int t = 0; t + 1 < T; ++t) {
                    const double r = state.nu(t + 1, p) - state.nu(t, p);
                    sum += r * r;
                }
                return sum;
            },
            T - 1);
    return out;
}

// Independent inverse-gamma draws for all variances; var_eta is left frozen
// when the trend is off, var_y untouched in binary mode.
inline void sample_variances(ChainState& state, const FitData& fd, const ModelConfig& config) {
    const auto posteriors = variance_posterior_params(state, fd, config);
    const int P = fd.P();
    for (const PosteriorIg& post : posteriors) {
        const double draw = state.rng.inverse_gamma(post.shape, post.rate);
        require_numeric(std::isfinite(draw) && draw > 0.0,
                        "non-finite variance draw for " + post.name);
        const std::string& n = post.name;
        if (n == "var_y") {
            state.var_y = draw;
        } else if (config.per_predictor_variances) {
            const int p = std::stoi(n.substr(n.find('[') + 1));
            if (n.rfind("var_beta", 0) == 0) state.var_beta[p] = draw;
            else if (n.rfind("var_alpha", 0) == 0) state.var_alpha[p] = draw;
            else state.var_eta[p] = draw;
        } else {
            if (n == "var_beta") state.var_beta.setConstant(P, draw);
            else if (n == "var_alpha") state.var_alpha.setConstant(P, draw);
            else state.var_eta.setConstant(P, draw);
        }
    }
}

// One full sweep: beta block per time point, FFBS per predictor, variances.
inline void gibbs_sweep(ChainState& state, const FitData& fd, const ModelConfig& config) {
    const int T = fd.T();
    const int P = fd.P();
    for (int t = 0; t < T; ++t)
        state.beta.row(t) =
            sample_beta_block(fd.slices[t], state.alpha.row(t), state.var_y, state.var_beta,
                              state.rng);
    for (int p = 0; p < P; ++p) {
        FfbsModel model;
        model.obs_var = state.var_beta[p];
        model.level_var = state.var_alpha[p];
        model.trend_var = state.var_eta[p];
        model.include_trend = config.include_trend;
        model.init_mean = 0.0;
        model.init_var = config.init_state_sd * config.init_state_sd;
        auto [alpha_col, nu_col] = ffbs_states(state.beta.col(p), model, state.rng);
        state.alpha.col(p) = alpha_col;
        if (config.include_trend) state.nu.col(p) = nu_col;
    }
    sample_variances(state, fd, config);
}

// Pooled least-squares start: every beta_t (and alpha_t) at the pooled
// coefficients, trend at zero, var_y at the pooled residual variance.
inline ChainState init_chain_state(const FitData& fd, const ModelConfig& config,
                                   std::uint64_t seed) {
    const int T = fd.T();
    const int P = fd.P();
    ChainState state(T, P, seed);

    Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(P, P);
    Eigen::VectorXd xty = Eigen::VectorXd::Zero(P);
    double yty = 0.0;
    for (const TimeSlice& s : fd.slices) {
        xtx += s.xtx;
        xty += s.xty;
        yty += s.yty;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(xtx);
    if (llt.info() != Eigen::Success) {
        Eigen::MatrixXd ridged = xtx;
        ridged.diagonal().array() += 1.0e-6;
        llt.compute(ridged);
        require_numeric(llt.info() == Eigen::Success, "pooled least-squares init failed");
    }
    const Eigen::VectorXd b = llt.solve(xty);
    state.beta = b.transpose().replicate(T, 1);
    state.alpha = state.beta;
    if (config.outcome_kind == OutcomeKind::kContinuous) {
        const double sse = std::max(yty - b.dot(xty), 0.0);
        const double dof = std::max(fd.N - P, 1);
        state.var_y = std::max(sse / dof, 1.0e-8);
    }
    return state;
}

// All recorded draws for one chain, as an n_keep x n_params matrix matching
// the layout. The chain seed is derive_seed(master_seed, chain_index).
inline Eigen::MatrixXd run_chain(const FitData& fd, const ModelConfig& config,
                                 const ParamLayout& layout, int chain_index) {
    ChainState state = init_chain_state(fd, config, derive_seed(config.master_seed, chain_index));
    Eigen::MatrixXd draws(config.n_keep, layout.n_params());
    const int total = config.n_warmup + config.n_keep;
    for (int sweep = 0; sweep < total; ++sweep) {
        try {
            gibbs_sweep(state, fd, config);
        } catch (const NumericalError& e) {
            throw NumericalError("chain " + std::to_string(chain_index + 1) + " sweep " +
                                 std::to_string(sweep + 1) + ": " + e.what());
        }
        if (sweep < config.n_warmup) continue;
        const int iter = sweep - config.n_warmup;
        const int T = fd.T();
        const int P = fd.P();
        for (int t = 1; t <= T; ++t)
            for (int p = 0; p < P; ++p) {
                draws(iter, layout.beta_index(t, p)) = state.beta(t - 1, p);
                draws(iter, layout.alpha_index(t, p)) = state.alpha(t - 1, p);
                if (config.include_trend)
                    draws(iter, layout.nu_index(t, p)) = state.nu(t - 1, p);
            }
        if (layout.has_var_y) draws(iter, layout.var_y_index()) = state.var_y;
        const int n_var = config.per_predictor_variances ? P : 1;
        for (int p = 0; p < n_var; ++p) {
            draws(iter, layout.var_beta_index(p)) = state.var_beta[p];
            draws(iter, layout.var_alpha_index(p)) = state.var_alpha[p];
            if (config.include_trend) draws(iter, layout.var_eta_index(p)) = state.var_eta[p];
        }
    }
    return draws;
}

inline ParamLayout make_layout(int T, int P, const ModelConfig& config) {
    ParamLayout layout;
    layout.T = T;
    layout.P = P;
    layout.include_trend = config.include_trend;
    layout.has_var_y = config.outcome_kind == OutcomeKind::kContinuous;
    layout.per_predictor_variances = config.per_predictor_variances;
    return layout;
}

namespace detail {

// Runs `chain_body(chain_index)` for every chain on up to max_threads
// workers. Results are keyed by chain index, so scheduling cannot change
// the assembled store.
template <typename Body>
void run_chains_parallel(int n_chains, int max_threads, Body&& chain_body) {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    const int n_workers = std::max(1, std::min({n_chains, max_threads > 0 ? max_threads : hw}));
    if (n_workers == 1) {
        for (int c = 0; c < n_chains; ++c) chain_body(c);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(n_chains);
    std::vector<std::thread> workers;
    workers.reserve(n_workers);
    for (int w = 0; w < n_workers; ++w)
        workers.emplace_back([&] {
            for (int c = next.fetch_add(1); c < n_chains; c = next.fetch_add(1)) {
                try {
                    chain_body(c);
                } catch (...) {
                    errors[c] = std::current_exception();
                }
            }
        });
    for (std::thread& t : workers) t.join();
    for (const std::exception_ptr& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace detail

// The continuous-outcome engine: n_chains independent chains, assembled into
// a DrawStore. max_threads = 0 picks the hardware default; the result is
// identical for any thread count.
inline DrawStore run_gibbs(const Dataset& dataset, const ModelConfig& config,
                           int max_threads = 0) {
    config.validate();
    require(config.outcome_kind == OutcomeKind::kContinuous,
            "run_gibbs handles continuous outcomes; use run_binary for binary");
    require(!dataset.binary, "dataset was validated in binary mode");
    const FitData fd = prepare_fit_data(dataset);
    const ParamLayout layout = make_layout(fd.T(), fd.P(), config);
    DrawStore store = DrawStore::allocate(layout, config.n_chains, config.n_keep);
    detail::run_chains_parallel(config.n_chains, max_threads, [&](int c) {
        store.chains[c] = run_chain(fd, config, layout, c);
    });
    return store;
}

}  // namespace tvcast
