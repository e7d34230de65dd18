#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "tvcast/common.hpp"
#include "tvcast/dataset.hpp"
#include "tvcast/diagnostics.hpp"
#include "tvcast/draws.hpp"
#include "tvcast/rng.hpp"

namespace tvcast {

namespace detail {

// Forecast sub-streams: state propagation and observation noise use separate
// per-draw streams so the result is independent of evaluation order.
inline std::uint64_t forecast_stream(std::uint64_t seed, std::uint64_t purpose,
                                     std::uint64_t draw) {
    return derive_seed(derive_seed(seed, purpose), draw);
}

inline double variance_at(const DrawStore& store, int chain, int iter,
                          int (ParamLayout::*index)(int) const, int p) {
    const ParamLayout& l = store.layout;
    return store.at(chain, iter, (l.*index)(l.per_predictor_variances ? p : 0));
}

}  // namespace detail

// Sampled future trajectories plus per-draw conditional means. The sampled
// paths carry the full propagation uncertainty for interval estimates; the
// mean path is averaged analytically per draw (the propagation noise is
// zero-mean, so E[alpha_{T+h}] = alpha_T + h nu_T within each draw).
struct StateForecast {
    int T_train = 0;
    int P = 0;
    int horizon = 0;
    int n_draws = 0;
    bool include_trend = false;
    std::vector<Eigen::MatrixXd> alpha_draws;  // [draw], horizon x P
    std::vector<Eigen::MatrixXd> beta_draws;   // [draw], horizon x P
    Eigen::MatrixXd alpha_mean;                // horizon x P
    Eigen::MatrixXd nu_mean;                   // horizon x P
    Eigen::MatrixXd beta_mean;                 // horizon x P
};

// Iterates the state (and trend) equations forward from (alpha_T, nu_T) for
// each posterior draw, using that draw's own variances, then draws beta
// around the propagated level.
inline StateForecast forecast_states(const DrawStore& store, int horizon, std::uint64_t seed) {
    require(horizon >= 1, "horizon must be >= 1");
    require(store.n_chains >= 1 && store.n_keep >= 1, "forecast from empty draw store");
    const ParamLayout& layout = store.layout;
    StateForecast fc;
    fc.T_train = layout.T;
    fc.P = layout.P;
    fc.horizon = horizon;
    fc.n_draws = store.total_draws();
    fc.include_trend = layout.include_trend;
    fc.alpha_draws.resize(fc.n_draws);
    fc.beta_draws.resize(fc.n_draws);
    fc.alpha_mean = Eigen::MatrixXd::Zero(horizon, fc.P);
    fc.nu_mean = Eigen::MatrixXd::Zero(horizon, fc.P);

    const int T = layout.T;
    for (int d = 0; d < fc.n_draws; ++d) {
        const int chain = d / store.n_keep;
        const int iter = d % store.n_keep;
        Rng rng(detail::forecast_stream(seed, 0, static_cast<std::uint64_t>(d)));
        Eigen::MatrixXd alpha(horizon, fc.P), beta(horizon, fc.P);
        for (int p = 0; p < fc.P; ++p) {
            double level = store.at(chain, iter, layout.alpha_index(T, p));
            double slope =
                fc.include_trend ? store.at(chain, iter, layout.nu_index(T, p)) : 0.0;
            const double sd_alpha = std::sqrt(
                detail::variance_at(store, chain, iter, &ParamLayout::var_alpha_index, p));
            const double sd_eta =
                fc.include_trend
                    ? std::sqrt(detail::variance_at(store, chain, iter,
                                                    &ParamLayout::var_eta_index, p))
                    : 0.0;
            const double sd_beta = std::sqrt(
                detail::variance_at(store, chain, iter, &ParamLayout::var_beta_index, p));
            const double level0 = level;
            const double slope0 = slope;
            for (int h = 1; h <= horizon; ++h) {
                const double next_level = level + slope + rng.normal(0.0, sd_alpha);
                if (fc.include_trend) slope += rng.normal(0.0, sd_eta);
                level = next_level;
                alpha(h - 1, p) = level;
                beta(h - 1, p) = rng.normal(level, sd_beta);
                fc.alpha_mean(h - 1, p) += level0 + h * slope0;
                fc.nu_mean(h - 1, p) += slope0;
            }
        }
        require_numeric(alpha.allFinite() && beta.allFinite(), "non-finite forecast draw");
        fc.alpha_draws[d] = std::move(alpha);
        fc.beta_draws[d] = std::move(beta);
    }
    fc.alpha_mean /= static_cast<double>(fc.n_draws);
    fc.nu_mean /= static_cast<double>(fc.n_draws);
    fc.beta_mean = fc.alpha_mean;  // beta centers on the propagated level
    return fc;
}

// Equal-tailed interval summaries of the sampled future state paths.
struct StatePathSummary {
    Eigen::MatrixXd alpha_mean, alpha_qlow, alpha_qhigh;  // horizon x P
    Eigen::MatrixXd beta_mean, beta_qlow, beta_qhigh;
    Eigen::MatrixXd nu_mean;
};

inline StatePathSummary summarize_states(const StateForecast& fc, double interval_mass) {
    const double tail = (1.0 - interval_mass) / 2.0;
    StatePathSummary s;
    s.alpha_mean = fc.alpha_mean;
    s.beta_mean = fc.beta_mean;
    s.nu_mean = fc.nu_mean;
    s.alpha_qlow.resize(fc.horizon, fc.P);
    s.alpha_qhigh.resize(fc.horizon, fc.P);
    s.beta_qlow.resize(fc.horizon, fc.P);
    s.beta_qhigh.resize(fc.horizon, fc.P);
    std::vector<double> buf(fc.n_draws);
    const auto fill = [&](const std::vector<Eigen::MatrixXd>& draws, Eigen::MatrixXd& qlow,
                          Eigen::MatrixXd& qhigh) {
        for (int h = 0; h < fc.horizon; ++h)
            for (int p = 0; p < fc.P; ++p) {
                for (int d = 0; d < fc.n_draws; ++d) buf[d] = draws[d](h, p);
                std::sort(buf.begin(), buf.end());
                qlow(h, p) = quantile_type7(buf, tail);
                qhigh(h, p) = quantile_type7(buf, 1.0 - tail);
            }
    };
    fill(fc.alpha_draws, s.alpha_qlow, s.alpha_qhigh);
    fill(fc.beta_draws, s.beta_qlow, s.beta_qhigh);
    return s;
}

struct OutcomePrediction {
    int t = 0;
    long id = 0;
    double y_true = 0.0;
    double mean = 0.0;
    double q_low = 0.0;
    double q_high = 0.0;
    double sd = 0.0;  // posterior-predictive standard deviation
};

// Full posterior predictive for each held-out observation: per draw,
// y = x'beta_t + N(0, var_y). Interval quantiles come from the sampled
// predictive draws; the reported mean is the average of x'beta over draws.
// Binary fits summarize the event probability logit^-1(x'beta) instead.
inline std::vector<OutcomePrediction> predict_outcomes(const StateForecast& fc,
                                                       const Dataset& test, const DrawStore& store,
                                                       OutcomeKind outcome_kind,
                                                       double interval_mass, std::uint64_t seed) {
    require(!test.observations.empty(), "empty test dataset");
    require(test.P == fc.P, "test dataset predictor count does not match the fit");
    for (const Observation& obs : test.observations) {
        const int h = obs.t - fc.T_train;
        require(h >= 1 && h <= fc.horizon,
                "test observation at t=" + std::to_string(obs.t) +
                    " outside forecast horizon (train T=" + std::to_string(fc.T_train) +
                    ", horizon=" + std::to_string(fc.horizon) + ")");
    }
    const std::size_t n_obs = test.observations.size();
    const double tail = (1.0 - interval_mass) / 2.0;
    Eigen::MatrixXd draws(fc.n_draws, n_obs);
    std::vector<double> mean_acc(n_obs, 0.0);
    for (int d = 0; d < fc.n_draws; ++d) {
        const int chain = d / store.n_keep;
        const int iter = d % store.n_keep;
        Rng rng(detail::forecast_stream(seed, 1, static_cast<std::uint64_t>(d)));
        const double sd_y = store.layout.has_var_y
                                ? std::sqrt(store.at(chain, iter, store.layout.var_y_index()))
                                : 0.0;
        for (std::size_t k = 0; k < n_obs; ++k) {
            const Observation& obs = test.observations[k];
            const int h = obs.t - fc.T_train;
            const double mu = obs.x.dot(fc.beta_draws[d].row(h - 1));
            if (outcome_kind == OutcomeKind::kBinary) {
                const double prob = 1.0 / (1.0 + std::exp(-mu));
                draws(d, k) = prob;
                mean_acc[k] += prob;
            } else {
                draws(d, k) = mu + rng.normal(0.0, sd_y);
                mean_acc[k] += mu;
            }
        }
    }
    std::vector<OutcomePrediction> out(n_obs);
    std::vector<double> buf(fc.n_draws);
    for (std::size_t k = 0; k < n_obs; ++k) {
        const Observation& obs = test.observations[k];
        OutcomePrediction& pred = out[k];
        pred.t = obs.t;
        pred.id = obs.id;
        pred.y_true = obs.y;
        pred.mean = mean_acc[k] / static_cast<double>(fc.n_draws);
        for (int d = 0; d < fc.n_draws; ++d) buf[d] = draws(d, k);
        const double mu = draws.col(k).mean();
        pred.sd = std::sqrt((draws.col(k).array() - mu).square().sum() /
                            std::max<double>(fc.n_draws - 1, 1));
        std::sort(buf.begin(), buf.end());
        pred.q_low = quantile_type7(buf, tail);
        pred.q_high = quantile_type7(buf, 1.0 - tail);
    }
    return out;
}

struct ForecastMetrics {
    int n_test = 0;
    double interval_mass = 0.95;
    double coverage = 0.0;
    double rmse = 0.0;
    double mean_signed_error = 0.0;  // mean(prediction - truth); <= 0 means underprediction
    double mean_predictive_sd = 0.0;
    // With simulation truth: per-predictor fraction of training time points
    // whose credibility interval contains the true coefficient, and the
    // correlation of the posterior-mean level path with the driving series.
    std::vector<double> coef_coverage;
    double alpha0_ts_correlation = kNan;
};

namespace detail {

inline std::array<double, 3> pooled_mean_interval(const DrawStore& store, int param,
                                                  double interval_mass) {
    const Eigen::VectorXd pooled = store.pooled(param);
    std::vector<double> sorted(pooled.data(), pooled.data() + pooled.size());
    std::sort(sorted.begin(), sorted.end());
    const double tail = (1.0 - interval_mass) / 2.0;
    return {pooled.mean(), quantile_type7(sorted, tail), quantile_type7(sorted, 1.0 - tail)};
}

inline double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::ArrayXd da = a.array() - a.mean();
    const Eigen::ArrayXd db = b.array() - b.mean();
    const double denom = std::sqrt(da.square().sum() * db.square().sum());
    if (!(denom > 0.0)) return kNan;
    return (da * db).sum() / denom;
}

}  // namespace detail

// Interval coverage, RMSE and signed bias over the held-out outcomes; when
// the fit draws and simulation truth are supplied, adds per-predictor
// coefficient coverage across training time points and the correlation of
// the posterior-mean alpha[.,0] path with the true series.
inline ForecastMetrics evaluate(const std::vector<OutcomePrediction>& outcomes,
                                double interval_mass, const DrawStore* fit_store = nullptr,
                                const Eigen::MatrixXd* beta_truth = nullptr) {
    require(!outcomes.empty(), "evaluate on empty forecast result");
    ForecastMetrics m;
    m.n_test = static_cast<int>(outcomes.size());
    m.interval_mass = interval_mass;
    double sq = 0.0;
    for (const OutcomePrediction& o : outcomes) {
        if (o.y_true >= o.q_low && o.y_true <= o.q_high) m.coverage += 1.0;
        const double err = o.mean - o.y_true;
        sq += err * err;
        m.mean_signed_error += err;
        m.mean_predictive_sd += o.sd;
    }
    m.coverage /= m.n_test;
    m.rmse = std::sqrt(sq / m.n_test);
    m.mean_signed_error /= m.n_test;
    m.mean_predictive_sd /= m.n_test;

    if (fit_store != nullptr && beta_truth != nullptr) {
        const ParamLayout& layout = fit_store->layout;
        require(beta_truth->rows() >= layout.T && beta_truth->cols() >= layout.P,
                "truth matrix does not cover the fitted time range");
        m.coef_coverage.assign(layout.P, 0.0);
        for (int p = 0; p < layout.P; ++p) {
            int hits = 0;
            for (int t = 1; t <= layout.T; ++t) {
                const auto [mean, lo, hi] = detail::pooled_mean_interval(
                    *fit_store, layout.beta_index(t, p), interval_mass);
                (void)mean;
                const double truth = (*beta_truth)(t - 1, p);
                if (truth >= lo && truth <= hi) ++hits;
            }
            m.coef_coverage[p] = static_cast<double>(hits) / layout.T;
        }
        Eigen::VectorXd alpha0_mean(layout.T), ts(layout.T);
        for (int t = 1; t <= layout.T; ++t) {
            alpha0_mean[t - 1] = fit_store->pooled(layout.alpha_index(t, 0)).mean();
            ts[t - 1] = (*beta_truth)(t - 1, 0);
        }
        m.alpha0_ts_correlation = detail::pearson(alpha0_mean, ts);
    }
    return m;
}

inline nlohmann::json to_json(const ForecastMetrics& m) {
    nlohmann::json j{{"n_test", m.n_test},
                     {"interval_mass", m.interval_mass},
                     {"coverage", m.coverage},
                     {"rmse", m.rmse},
                     {"mean_signed_error", m.mean_signed_error},
                     {"mean_predictive_sd", m.mean_predictive_sd}};
    if (!m.coef_coverage.empty()) j["coef_coverage"] = m.coef_coverage;
    if (!std::isnan(m.alpha0_ts_correlation))
        j["alpha0_ts_correlation"] = m.alpha0_ts_correlation;
    return j;
}

struct PlotPaths {
    std::string smoothed_series;  // per-t level path, train + test phases
    std::string coefficients;     // per-(t,p) coefficient paths
    std::string predictions;      // per-test-observation predictive summaries
};

// The three figure-data files.
//   smoothed series: t,ts_true,alpha0_mean,alpha0_qlow,alpha0_qhigh,phase
//   coefficients:    t,p,beta_mean,beta_qlow,beta_qhigh,beta_true
//   predictions:     t,id,y_true,y_pred_mean,y_pred_qlow,y_pred_qhigh
// Truth columns are left empty when no truth file is supplied. Coefficient
// rows skip the intercept column when the fit carried one.
inline void export_plot_data(const DrawStore& fit_store, const StatePathSummary& future,
                             const std::vector<OutcomePrediction>& outcomes,
                             const Eigen::MatrixXd* beta_truth, bool has_intercept,
                             double interval_mass, const PlotPaths& paths) {
    const ParamLayout& layout = fit_store.layout;
    const int T_train = layout.T;
    const int horizon = static_cast<int>(future.alpha_mean.rows());
    const auto truth_at = [&](int t, int p) -> std::string {
        if (beta_truth == nullptr || t > beta_truth->rows() || p >= beta_truth->cols())
            return {};
        const double v = (*beta_truth)(t - 1, p);
        return std::isnan(v) ? std::string() : format_double(v, 10);
    };

    {
        csv::Writer w(paths.smoothed_series);
        w.row({"t", "ts_true", "alpha0_mean", "alpha0_qlow", "alpha0_qhigh", "phase"});
        for (int t = 1; t <= T_train; ++t) {
            const auto [mean, lo, hi] =
                detail::pooled_mean_interval(fit_store, layout.alpha_index(t, 0), interval_mass);
            w.row({std::to_string(t), truth_at(t, 0), format_double(mean, 10),
                   format_double(lo, 10), format_double(hi, 10), "train"});
        }
        for (int h = 1; h <= horizon; ++h) {
            const int t = T_train + h;
            w.row({std::to_string(t), truth_at(t, 0), format_double(future.alpha_mean(h - 1, 0), 10),
                   format_double(future.alpha_qlow(h - 1, 0), 10),
                   format_double(future.alpha_qhigh(h - 1, 0), 10), "test"});
        }
    }
    {
        csv::Writer w(paths.coefficients);
        w.row({"t", "p", "beta_mean", "beta_qlow", "beta_qhigh", "beta_true"});
        const int p_start = has_intercept ? 1 : 0;
        for (int t = 1; t <= T_train + horizon; ++t)
            for (int p = p_start; p < layout.P; ++p) {
                std::array<double, 3> s{};
                if (t <= T_train) {
                    s = detail::pooled_mean_interval(fit_store, layout.beta_index(t, p),
                                                     interval_mass);
                } else {
                    const int h = t - T_train;
                    s = {future.beta_mean(h - 1, p), future.beta_qlow(h - 1, p),
                         future.beta_qhigh(h - 1, p)};
                }
                w.row({std::to_string(t), std::to_string(p), format_double(s[0], 10),
                       format_double(s[1], 10), format_double(s[2], 10), truth_at(t, p)});
            }
    }
    {
        csv::Writer w(paths.predictions);
        w.row({"t", "id", "y_true", "y_pred_mean", "y_pred_qlow", "y_pred_qhigh"});
        for (const OutcomePrediction& o : outcomes)
            w.row({std::to_string(o.t), std::to_string(o.id), format_double(o.y_true, 10),
                   format_double(o.mean, 10), format_double(o.q_low, 10),
                   format_double(o.q_high, 10)});
    }
}

}  // namespace tvcast
