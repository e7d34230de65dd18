#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "tvcast/common.hpp"
#include "tvcast/csv.hpp"

namespace tvcast {

// Flat indexing of every sampled parameter. Order: beta[t,p] (t-major),
// alpha[t,p], nu[t,p] (trend only), var_y (continuous only), then
// var_beta / var_alpha / var_eta (scalars, or one per predictor).
struct ParamLayout {
    int T = 0;
    int P = 0;
    bool include_trend = false;
    bool has_var_y = true;
    bool per_predictor_variances = false;

    int n_state_params() const { return T * P * (include_trend ? 3 : 2); }
    int n_variance_params() const {
        const int per = per_predictor_variances ? P : 1;
        return (has_var_y ? 1 : 0) + per * (include_trend ? 3 : 2);
    }
    int n_params() const { return n_state_params() + n_variance_params(); }

    int beta_index(int t, int p) const { return (t - 1) * P + p; }
    int alpha_index(int t, int p) const { return T * P + (t - 1) * P + p; }
    int nu_index(int t, int p) const { return 2 * T * P + (t - 1) * P + p; }
    int var_y_index() const { return n_state_params(); }
    int var_beta_index(int p = 0) const {
        return n_state_params() + (has_var_y ? 1 : 0) + (per_predictor_variances ? p : 0);
    }
    int var_alpha_index(int p = 0) const {
        return var_beta_index(0) + (per_predictor_variances ? P : 1) +
               (per_predictor_variances ? p : 0);
    }
    int var_eta_index(int p = 0) const {
        return var_alpha_index(0) + (per_predictor_variances ? P : 1) +
               (per_predictor_variances ? p : 0);
    }

    // Parameter names as they appear in draws and summary files, e.g.
    // "beta[12,0]" (t 1-based, p 0-based) or "var_y".
    std::string name(int index) const {
        const int tp = T * P;
        auto cell = [&](const char* base, int offset) {
            const int t = offset / P + 1;
            const int p = offset % P;
            return std::string(base) + "[" + std::to_string(t) + "," + std::to_string(p) + "]";
        };
        if (index < tp) return cell("beta", index);
        if (index < 2 * tp) return cell("alpha", index - tp);
        if (include_trend && index < 3 * tp) return cell("nu", index - 2 * tp);
        int rest = index - n_state_params();
        if (has_var_y) {
            if (rest == 0) return "var_y";
            --rest;
        }
        const int per = per_predictor_variances ? P : 1;
        const char* bases[] = {"var_beta", "var_alpha", "var_eta"};
        for (const char* base : bases) {
            if (rest < per)
                return per_predictor_variances ? std::string(base) + "[" + std::to_string(rest) + "]"
                                               : std::string(base);
            rest -= per;
        }
        throw DataError("parameter index out of range: " + std::to_string(index));
    }

    // (t, p) of a state parameter, or (-1, -1) for variances / (-1, p) for
    // per-predictor variances.
    std::pair<int, int> t_p(int index) const {
        const int tp = T * P;
        const int states = n_state_params();
        if (index < states) {
            const int offset = index % tp;
            return {offset / P + 1, offset % P};
        }
        if (per_predictor_variances) {
            int rest = index - states - (has_var_y ? 1 : 0);
            if (rest >= 0) return {-1, rest % P};
        }
        return {-1, -1};
    }

    std::unordered_map<std::string, int> name_index() const {
        std::unordered_map<std::string, int> map;
        map.reserve(n_params());
        for (int i = 0; i < n_params(); ++i) map.emplace(name(i), i);
        return map;
    }
};

// All post-warmup draws. chains[c] is n_keep x n_params; each column holds
// one parameter's draws in generation order.
struct DrawStore {
    ParamLayout layout;
    int n_chains = 0;
    int n_keep = 0;
    std::vector<Eigen::MatrixXd> chains;
    // Metropolis acceptance rates per chain and time point (binary runs only).
    std::vector<std::vector<double>> accept_rates;

    static DrawStore allocate(const ParamLayout& layout, int n_chains, int n_keep) {
        DrawStore store;
        store.layout = layout;
        store.n_chains = n_chains;
        store.n_keep = n_keep;
        store.chains.assign(n_chains, Eigen::MatrixXd::Zero(n_keep, layout.n_params()));
        return store;
    }

    double at(int chain, int iter, int param) const { return chains[chain](iter, param); }
    double& at(int chain, int iter, int param) { return chains[chain](iter, param); }

    int total_draws() const { return n_chains * n_keep; }

    // One parameter pooled across chains, chain-major.
    Eigen::VectorXd pooled(int param) const {
        Eigen::VectorXd out(total_draws());
        for (int c = 0; c < n_chains; ++c) out.segment(c * n_keep, n_keep) = chains[c].col(param);
        return out;
    }
};

// Long-format draws CSV: chain,iter,parameter,value (chain and iter 1-based).
inline void write_draws_csv(const DrawStore& store, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open file for writing: " + path);
    out << "chain,iter,parameter,value\n";
    const int n_params = store.layout.n_params();
    std::vector<std::string> names(n_params);
    for (int j = 0; j < n_params; ++j) names[j] = store.layout.name(j);
    for (int c = 0; c < store.n_chains; ++c)
        for (int i = 0; i < store.n_keep; ++i)
            for (int j = 0; j < n_params; ++j)
                out << (c + 1) << ',' << (i + 1) << ',' << names[j] << ','
                    << format_double(store.at(c, i, j)) << '\n';
}

inline DrawStore read_draws_csv(const std::string& path, const ParamLayout& layout) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "empty draws file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    require(line == "chain,iter,parameter,value", "unexpected draws header in " + path);

    const auto index = layout.name_index();
    int n_chains = 0, n_keep = 0;
    std::vector<std::tuple<int, int, int, double>> entries;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = csv::split_line(line);
        require(fields.size() == 4, "bad draws row in " + path + ": " + line);
        const int chain = static_cast<int>(csv::parse_long(fields[0], path));
        const int iter = static_cast<int>(csv::parse_long(fields[1], path));
        const auto it = index.find(fields[2]);
        require(it != index.end(), "unknown parameter '" + fields[2] + "' in " + path);
        entries.emplace_back(chain, iter, it->second, csv::parse_double(fields[3], path));
        n_chains = std::max(n_chains, chain);
        n_keep = std::max(n_keep, iter);
    }
    require(n_chains >= 1 && n_keep >= 1, "no draws in " + path);
    require(entries.size() ==
                static_cast<std::size_t>(n_chains) * n_keep * layout.n_params(),
            "draws file " + path + " does not cover every (chain, iter, parameter)");
    DrawStore store = DrawStore::allocate(layout, n_chains, n_keep);
    for (const auto& [chain, iter, param, value] : entries)
        store.at(chain - 1, iter - 1, param) = value;
    return store;
}

}  // namespace tvcast
