#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "tvcast/common.hpp"
#include "tvcast/csv.hpp"
#include "tvcast/dataset.hpp"
#include "tvcast/rng.hpp"

namespace tvcast {

// The driving series ts_t. The repository bundles the 100-point Nile annual
// flow series under data/nile.csv; any user series with the same schema works.
struct SeriesSpec {
    Eigen::VectorXd values;
    std::string source;

    int T() const { return static_cast<int>(values.size()); }
};

// Series CSV schema: t,value with t = 1..T contiguous.
inline SeriesSpec load_series(const std::string& path) {
    const csv::Table table = csv::read_table(path);
    require(table.header.size() == 2 && table.header[0] == "t" && table.header[1] == "value",
            "series CSV must have header t,value in " + path);
    SeriesSpec spec;
    spec.source = path;
    spec.values.resize(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const std::string ctx = path + " row " + std::to_string(i + 2);
        require(table.rows[i].size() == 2, "wrong field count in " + ctx);
        const long t = csv::parse_long(table.rows[i][0], ctx);
        require(t == static_cast<long>(i) + 1,
                "series time indices must be contiguous from 1; got t=" + std::to_string(t) +
                    " at row " + std::to_string(i + 2) + " of " + path);
        const double v = csv::parse_double(table.rows[i][1], ctx);
        require(std::isfinite(v), "non-finite series value in " + ctx);
        spec.values[i] = v;
    }
    require(spec.T() >= 2, "series needs at least 2 time points, got " + std::to_string(spec.T()));
    return spec;
}

inline SeriesSpec truncate_series(SeriesSpec spec, int t_max) {
    require(t_max >= 2 && t_max <= spec.T(),
            "t_max must be in [2, " + std::to_string(spec.T()) + "]");
    spec.values.conservativeResize(t_max);
    return spec;
}

enum class SimScheme { kContinuous, kBinary1, kBinary2, kBinary3 };

inline std::string to_string(SimScheme s) {
    switch (s) {
        case SimScheme::kContinuous: return "continuous";
        case SimScheme::kBinary1: return "b1";
        case SimScheme::kBinary2: return "b2";
        case SimScheme::kBinary3: return "b3";
    }
    throw DataError("bad scheme");
}

inline SimScheme scheme_from_string(const std::string& s) {
    if (s == "continuous") return SimScheme::kContinuous;
    if (s == "b1") return SimScheme::kBinary1;
    if (s == "b2") return SimScheme::kBinary2;
    if (s == "b3") return SimScheme::kBinary3;
    throw DataError("unknown scheme: " + s + " (expected continuous|b1|b2|b3)");
}

struct SimParams {
    int n_per_t = 5;
    double coef1 = 30.0;
    double coef2 = 0.0;
    double noise_sd = 5.0;  // the N(0, 5) outcome noise, read as a standard deviation
    double x1_sd = 1.0;
    double x2_sd = 20.0;
    double threshold = 900.0;  // scheme b3 cutoff
    std::uint64_t seed = 1;

    void validate() const {
        require(n_per_t >= 1, "n_per_t must be >= 1");
        require(noise_sd >= 0.0, "noise_sd must be >= 0");
        require(x1_sd > 0.0 && x2_sd > 0.0, "covariate sds must be > 0");
    }
};

struct SimTruth {
    Eigen::MatrixXd beta_true;  // T x 3: intercept path ts_t, coef1, coef2
    Eigen::VectorXd series;
    double noise_sd = 0.0;
    SimScheme scheme = SimScheme::kContinuous;
    std::uint64_t seed = 0;
    std::vector<double> y_continuous;  // pre-threshold outcomes, one per row
};

namespace detail {

// Row order and draw order are fixed: for each t, for each individual,
// draw x1, x2, noise (plus one uniform for the b1 Bernoulli). Binary schemes
// consume the identical stream as the continuous generator plus that uniform.
inline std::pair<Dataset, SimTruth> generate(SimScheme scheme, const SeriesSpec& series,
                                             const SimParams& params) {
    params.validate();
    const int T = series.T();
    SimTruth truth;
    truth.scheme = scheme;
    truth.seed = params.seed;
    truth.noise_sd = params.noise_sd;
    truth.series = series.values;
    truth.beta_true.resize(T, 3);
    truth.beta_true.col(0) = series.values;
    truth.beta_true.col(1).setConstant(params.coef1);
    truth.beta_true.col(2).setConstant(params.coef2);

    const double series_mean = series.values.mean();
    Rng rng(derive_seed(params.seed, 0));
    std::vector<RawRecord> records;
    records.reserve(static_cast<std::size_t>(T) * params.n_per_t);
    truth.y_continuous.reserve(records.capacity());
    long id = 0;
    for (int t = 1; t <= T; ++t) {
        const double ts = series.values[t - 1];
        for (int i = 0; i < params.n_per_t; ++i) {
            const double x1 = rng.normal(0.0, params.x1_sd);
            const double x2 = rng.normal(0.0, params.x2_sd);
            const double signal = ts + params.coef1 * x1 + params.coef2 * x2;
            const double y_cont = signal + rng.normal(0.0, params.noise_sd);
            truth.y_continuous.push_back(y_cont);
            RawRecord r;
            r.t = t;
            r.id = ++id;
            r.x = {1.0, x1, x2};
            switch (scheme) {
                case SimScheme::kContinuous:
                    r.y = y_cont;
                    break;
                case SimScheme::kBinary1: {
                    const double z = ts - series_mean + params.coef1 * x1 + params.coef2 * x2;
                    const double p = 1.0 / (1.0 + std::exp(-z));
                    r.y = rng.bernoulli(p) ? 1.0 : 0.0;
                    break;
                }
                case SimScheme::kBinary2:
                    r.y = y_cont > signal ? 1.0 : 0.0;
                    break;
                case SimScheme::kBinary3:
                    r.y = y_cont > params.threshold ? 1.0 : 0.0;
                    break;
            }
            records.push_back(std::move(r));
        }
    }
    Dataset ds = validate_dataset(records, scheme != SimScheme::kContinuous, false);
    return {std::move(ds), std::move(truth)};
}

}  // namespace detail

// §-style continuous generator: y = ts_t + coef1*x1 + coef2*x2 + noise with
// x1 ~ N(0, x1_sd^2), x2 ~ N(0, x2_sd^2). The dataset carries an explicit
// intercept column, so the true coefficient paths are
// beta[t,0] = ts_t, beta[t,1] = coef1, beta[t,2] = coef2.
inline std::pair<Dataset, SimTruth> gen_continuous(const SeriesSpec& series,
                                                   const SimParams& params) {
    return detail::generate(SimScheme::kContinuous, series, params);
}

// Binary generators: identical continuous internals, then
//   b1: y ~ Bernoulli(logit^-1(ts_t - mean(ts) + coef1*x1 + coef2*x2))
//   b2: y = 1 if y_cont exceeds its own noise-free signal
//   b3: y = 1 if y_cont > threshold
inline std::pair<Dataset, SimTruth> gen_binary(SimScheme scheme, const SeriesSpec& series,
                                               const SimParams& params) {
    require(scheme != SimScheme::kContinuous, "gen_binary requires a binary scheme");
    return detail::generate(scheme, series, params);
}

// Truth CSV schema: t,p,beta_true
inline void write_truth_csv(const SimTruth& truth, const std::string& path) {
    csv::Writer w(path);
    w.row({"t", "p", "beta_true"});
    for (int t = 1; t <= truth.beta_true.rows(); ++t)
        for (int p = 0; p < truth.beta_true.cols(); ++p)
            w.row({std::to_string(t), std::to_string(p),
                   format_double(truth.beta_true(t - 1, p))});
}

// Returns a T x P matrix of true coefficient paths.
inline Eigen::MatrixXd read_truth_csv(const std::string& path) {
    const csv::Table table = csv::read_table(path);
    require(table.header == std::vector<std::string>{"t", "p", "beta_true"},
            "truth CSV must have header t,p,beta_true in " + path);
    int T = 0, P = 0;
    for (const auto& row : table.rows) {
        require(row.size() == 3, "wrong field count in truth CSV " + path);
        T = std::max(T, static_cast<int>(csv::parse_long(row[0], path)));
        P = std::max(P, static_cast<int>(csv::parse_long(row[1], path)) + 1);
    }
    require(T >= 1 && P >= 1, "empty truth CSV " + path);
    Eigen::MatrixXd out = Eigen::MatrixXd::Constant(T, P, kNan);
    for (const auto& row : table.rows) {
        const int t = static_cast<int>(csv::parse_long(row[0], path));
        const int p = static_cast<int>(csv::parse_long(row[1], path));
        require(t >= 1 && p >= 0, "bad truth indices in " + path);
        out(t - 1, p) = csv::parse_double(row[2], path);
    }
    return out;
}

inline void write_series_csv(const SeriesSpec& series, const std::string& path) {
    csv::Writer w(path);
    w.row({"t", "value"});
    for (int t = 1; t <= series.T(); ++t)
        w.row({std::to_string(t), format_double(series.values[t - 1])});
}

}  // namespace tvcast
