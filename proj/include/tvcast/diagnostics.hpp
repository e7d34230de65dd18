#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "tvcast/common.hpp"
#include "tvcast/csv.hpp"
#include "tvcast/draws.hpp"

namespace tvcast {

// Linear interpolation between order statistics ("type 7"): with n sorted
// values the q-quantile sits at rank (n-1)q.
inline double quantile_type7(std::vector<double> sorted, double q) {
    require(!sorted.empty(), "quantile of empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

namespace detail {

// Each chain contributes its first and second half as separate sequences.
// Odd lengths drop the middle draw.
inline std::vector<Eigen::VectorXd> split_halves(const std::vector<Eigen::VectorXd>& chains) {
    std::vector<Eigen::VectorXd> halves;
    halves.reserve(2 * chains.size());
    for (const Eigen::VectorXd& chain : chains) {
        const Eigen::Index n = chain.size() / 2;
        halves.push_back(chain.head(n));
        halves.push_back(chain.tail(n));
    }
    return halves;
}

struct PooledVariance {
    double w = 0.0;         // mean within-sequence variance
    double var_plus = 0.0;  // (n-1)/n W + B/n
    Eigen::Index n = 0;
    std::vector<double> means;
    std::vector<double> vars;
};

inline PooledVariance pooled_variance(const std::vector<Eigen::VectorXd>& seqs) {
    PooledVariance pv;
    pv.n = seqs.front().size();
    const double m = static_cast<double>(seqs.size());
    double grand = 0.0;
    for (const Eigen::VectorXd& s : seqs) {
        const double mean = s.mean();
        pv.means.push_back(mean);
        pv.vars.push_back((s.array() - mean).square().sum() / (static_cast<double>(pv.n) - 1.0));
        grand += mean / m;
    }
    for (double v : pv.vars) pv.w += v / m;
    double b_over_n = 0.0;
    if (seqs.size() > 1) {
        for (double mu : pv.means) b_over_n += (mu - grand) * (mu - grand) / (m - 1.0);
    }
    const double n = static_cast<double>(pv.n);
    pv.var_plus = (n - 1.0) / n * pv.w + b_over_n;
    return pv;
}

}  // namespace detail

// Split-chain potential scale reduction factor. Returns NaN (an "undefined"
// sentinel) for zero-variance sequences.
inline double split_rhat(const std::vector<Eigen::VectorXd>& chains) {
    require(!chains.empty(), "split_rhat needs at least one chain");
    for (const Eigen::VectorXd& c : chains)
        require(c.size() >= 4, "split_rhat needs >= 4 draws per chain");
    const auto halves = detail::split_halves(chains);
    const auto pv = detail::pooled_variance(halves);
    if (!(pv.w > 0.0)) return kNan;
    return std::sqrt(pv.var_plus / pv.w);
}

// Autocorrelation-based effective sample size over the split sequences, with
// Geyer initial-positive-sequence truncation (pair sums kept positive and
// monotone). tau is clamped at 1 so ESS never exceeds the total draw count.
inline double ess(const std::vector<Eigen::VectorXd>& chains) {
    require(!chains.empty(), "ess needs at least one chain");
    for (const Eigen::VectorXd& c : chains) require(c.size() >= 4, "ess needs >= 4 draws per chain");
    const auto halves = detail::split_halves(chains);
    const auto pv = detail::pooled_variance(halves);
    if (!(pv.w > 0.0) || !(pv.var_plus > 0.0)) return kNan;

    const Eigen::Index n = pv.n;
    const std::size_t m = halves.size();
    // lag-k autocovariance (biased, /n) averaged across sequences
    const auto mean_autocov = [&](Eigen::Index k) {
        double total = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const Eigen::VectorXd& s = halves[j];
            const double mu = pv.means[j];
            double acc = 0.0;
            for (Eigen::Index i = 0; i + k < n; ++i) acc += (s[i] - mu) * (s[i + k] - mu);
            total += acc / static_cast<double>(n);
        }
        return total / static_cast<double>(m);
    };

    const auto rho = [&](Eigen::Index k) { return 1.0 - (pv.w - mean_autocov(k)) / pv.var_plus; };

    double tau = 0.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; 2 * k + 1 < n; ++k) {
        double pair = (2 * k == 0 ? 1.0 : rho(2 * k)) + rho(2 * k + 1);
        if (pair <= 0.0) break;
        pair = std::min(pair, prev_pair);
        prev_pair = pair;
        tau += 2.0 * pair;
    }
    tau = std::max(tau - 1.0, 1.0);
    return static_cast<double>(m) * static_cast<double>(n) / tau;
}

struct SummaryRow {
    std::string parameter;
    int t = -1;  // -1 renders as an empty CSV field
    int p = -1;
    double mean = 0.0;
    double sd = 0.0;
    double q_low = 0.0;
    double q_high = 0.0;
    double rhat = kNan;  // NaN = undefined (degenerate draws)
    double ess = kNan;
    double accept_rate = kNan;  // binary runs only

    bool degenerate() const { return std::isnan(rhat); }
};

// Pooled posterior summaries with equal-tailed intervals at interval_mass,
// plus per-parameter R-hat and ESS. Output order follows the layout and is
// independent of chain ordering.
inline std::vector<SummaryRow> summarize(const DrawStore& store, double interval_mass) {
    require(store.n_chains >= 1 && store.n_keep >= 1, "summarize on empty draw store");
    require(interval_mass > 0.0 && interval_mass < 1.0, "interval_mass must be in (0,1)");
    const double tail = (1.0 - interval_mass) / 2.0;
    const int n_params = store.layout.n_params();
    std::vector<SummaryRow> rows;
    rows.reserve(n_params);
    std::vector<Eigen::VectorXd> chain_cols(store.n_chains);
    for (int j = 0; j < n_params; ++j) {
        SummaryRow row;
        row.parameter = store.layout.name(j);
        std::tie(row.t, row.p) = store.layout.t_p(j);
        const Eigen::VectorXd pooled = store.pooled(j);
        row.mean = pooled.mean();
        row.sd = std::sqrt((pooled.array() - row.mean).square().sum() /
                           std::max<double>(pooled.size() - 1, 1));
        std::vector<double> sorted(pooled.data(), pooled.data() + pooled.size());
        std::sort(sorted.begin(), sorted.end());
        row.q_low = quantile_type7(sorted, tail);
        row.q_high = quantile_type7(sorted, 1.0 - tail);
        for (int c = 0; c < store.n_chains; ++c) chain_cols[c] = store.chains[c].col(j);
        if (store.n_keep >= 4) {
            row.rhat = split_rhat(chain_cols);
            row.ess = ess(chain_cols);
        }
        // per-t Metropolis acceptance, averaged across chains
        if (!store.accept_rates.empty() && row.t >= 1 && row.parameter.rfind("beta[", 0) == 0) {
            double acc = 0.0;
            for (const auto& per_chain : store.accept_rates) acc += per_chain[row.t - 1];
            row.accept_rate = acc / static_cast<double>(store.accept_rates.size());
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

struct ConvergenceReport {
    bool converged = false;
    double threshold = 1.05;
    std::vector<std::string> not_mixed;   // rhat above threshold
    std::vector<std::string> degenerate;  // zero-variance draws, rhat undefined
    std::string worst_parameter;
    double worst_rhat = kNan;
};

// Explicit mixed / not-mixed verdict per parameter. Degenerate parameters are
// listed separately and do not flip the verdict on their own.
inline ConvergenceReport convergence_report(const std::vector<SummaryRow>& summaries,
                                            double rhat_threshold = 1.05) {
    ConvergenceReport report;
    report.threshold = rhat_threshold;
    for (const SummaryRow& row : summaries) {
        if (row.degenerate()) {
            report.degenerate.push_back(row.parameter);
            continue;
        }
        if (std::isnan(report.worst_rhat) || row.rhat > report.worst_rhat) {
            report.worst_rhat = row.rhat;
            report.worst_parameter = row.parameter;
        }
        if (row.rhat > rhat_threshold) report.not_mixed.push_back(row.parameter);
    }
    report.converged = report.not_mixed.empty();
    return report;
}

inline nlohmann::json to_json(const ConvergenceReport& r) {
    nlohmann::json j{{"converged", r.converged},
                     {"rhat_threshold", r.threshold},
                     {"not_mixed", r.not_mixed},
                     {"degenerate", r.degenerate}};
    if (!std::isnan(r.worst_rhat)) {
        j["worst_parameter"] = r.worst_parameter;
        j["worst_rhat"] = r.worst_rhat;
    }
    return j;
}

// Summary CSV: parameter,t,p,mean,sd,q_low,q_high,rhat,ess with an extra
// accept_rate column when any row carries one. Undefined values render empty.
inline void write_summary_csv(const std::vector<SummaryRow>& rows, const std::string& path) {
    bool with_accept = false;
    for (const SummaryRow& r : rows)
        if (!std::isnan(r.accept_rate)) with_accept = true;
    csv::Writer w(path);
    std::vector<std::string> header = {"parameter", "t", "p",    "mean", "sd",
                                       "q_low",     "q_high", "rhat", "ess"};
    if (with_accept) header.push_back("accept_rate");
    w.row(header);
    const auto opt = [](double v) { return std::isnan(v) ? std::string() : format_double(v, 10); };
    std::vector<std::string> fields;
    for (const SummaryRow& r : rows) {
        fields.clear();
        fields.push_back(r.parameter);
        fields.push_back(r.t >= 1 ? std::to_string(r.t) : std::string());
        fields.push_back(r.p >= 0 ? std::to_string(r.p) : std::string());
        fields.push_back(format_double(r.mean, 10));
        fields.push_back(format_double(r.sd, 10));
        fields.push_back(format_double(r.q_low, 10));
        fields.push_back(format_double(r.q_high, 10));
        fields.push_back(opt(r.rhat));
        fields.push_back(opt(r.ess));
        if (with_accept) fields.push_back(opt(r.accept_rate));
        w.row(fields);
    }
}

}  // namespace tvcast
