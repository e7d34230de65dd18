#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "tvcast/common.hpp"
#include "tvcast/rng.hpp"

namespace tvcast {

// Per-predictor state block: the beta column plays the role of a complete
// pseudo-observation series for a local-level model (dim 1) or a
// local-linear-trend model (dim 2, transition [[1,1],[0,1]]).
struct FfbsModel {
    double obs_var = 1.0;    // fluctuation variance around the level
    double level_var = 1.0;  // level innovation variance
    double trend_var = 1.0;  // slope innovation variance (trend only)
    bool include_trend = false;
    double init_mean = 0.0;
    double init_var = 1.0e6;  // diffuse prior variance on the initial state

    int dim() const { return include_trend ? 2 : 1; }

    void check() const {
        require_numeric(obs_var > 0.0 && level_var > 0.0, "state block variances must be > 0");
        if (include_trend) require_numeric(trend_var > 0.0, "trend variance must be > 0");
        require_numeric(init_var > 0.0, "initial state variance must be > 0");
    }
};

// Kalman recursion intermediates, kept for the backward pass and for tests.
struct FilterMoments {
    int dim = 1;
    std::vector<Eigen::Vector2d> pred_mean;      // a_t
    std::vector<Eigen::Matrix2d> pred_cov;       // R_t
    std::vector<Eigen::Vector2d> filtered_mean;  // m_t
    std::vector<Eigen::Matrix2d> filtered_cov;   // P_t
};

namespace detail {

inline void symmetrize(Eigen::Matrix2d& m) { m = 0.5 * (m + m.transpose()); }

// Cholesky factor of a symmetric PSD 2x2 (or 1x1) matrix, clamping the tiny
// negative diagonals that appear when process variances are pinned near zero.
inline Eigen::Matrix2d psd_cholesky(const Eigen::Matrix2d& c, int dim) {
    Eigen::Matrix2d l = Eigen::Matrix2d::Zero();
    l(0, 0) = std::sqrt(std::max(c(0, 0), 0.0));
    if (dim == 2) {
        l(1, 0) = l(0, 0) > 0.0 ? c(1, 0) / l(0, 0) : 0.0;
        l(1, 1) = std::sqrt(std::max(c(1, 1) - l(1, 0) * l(1, 0), 0.0));
    }
    return l;
}

inline Eigen::Vector2d draw_gaussian(const Eigen::Vector2d& mean, const Eigen::Matrix2d& cov,
                                     int dim, Rng& rng) {
    const Eigen::Matrix2d l = psd_cholesky(cov, dim);
    Eigen::Vector2d z = Eigen::Vector2d::Zero();
    for (int i = 0; i < dim; ++i) z[i] = rng.normal();
    return mean + l * z;
}

inline Eigen::Matrix2d transition(const FfbsModel& model) {
    Eigen::Matrix2d f = Eigen::Matrix2d::Identity();
    if (model.include_trend) f(0, 1) = 1.0;
    return f;
}

inline Eigen::Matrix2d process_cov(const FfbsModel& model) {
    Eigen::Matrix2d q = Eigen::Matrix2d::Zero();
    q(0, 0) = model.level_var;
    if (model.include_trend) q(1, 1) = model.trend_var;
    return q;
}

inline Eigen::Matrix2d invert(const Eigen::Matrix2d& m, int dim) {
    Eigen::Matrix2d inv = Eigen::Matrix2d::Zero();
    if (dim == 1) {
        require_numeric(m(0, 0) > 0.0, "singular predicted covariance in backward pass");
        inv(0, 0) = 1.0 / m(0, 0);
        return inv;
    }
    const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    require_numeric(det > 0.0 && std::isfinite(det),
                    "singular predicted covariance in backward pass");
    inv(0, 0) = m(1, 1) / det;
    inv(1, 1) = m(0, 0) / det;
    inv(0, 1) = -m(0, 1) / det;
    inv(1, 0) = -m(1, 0) / det;
    return inv;
}

}  // namespace detail

// Forward Kalman filter over the complete pseudo-observation series. Every
// time point carries an observation, so predict and update both run at each t.
inline FilterMoments kalman_filter(const Eigen::VectorXd& pseudo_obs, const FfbsModel& model) {
    model.check();
    const int T = static_cast<int>(pseudo_obs.size());
    require_numeric(T >= 1, "empty pseudo-observation series");
    const int dim = model.dim();
    const Eigen::Matrix2d f = detail::transition(model);
    const Eigen::Matrix2d q = detail::process_cov(model);

    FilterMoments fm;
    fm.dim = dim;
    fm.pred_mean.resize(T);
    fm.pred_cov.resize(T);
    fm.filtered_mean.resize(T);
    fm.filtered_cov.resize(T);

    Eigen::Vector2d m = Eigen::Vector2d::Zero();
    Eigen::Matrix2d p = Eigen::Matrix2d::Zero();
    for (int t = 0; t < T; ++t) {
        Eigen::Vector2d a;
        Eigen::Matrix2d r;
        if (t == 0) {
            a = Eigen::Vector2d::Constant(model.init_mean);
            if (dim == 1) a[1] = 0.0;
            r = Eigen::Matrix2d::Zero();
            for (int i = 0; i < dim; ++i) r(i, i) = model.init_var;
        } else {
            a = f * m;
            r = f * p * f.transpose() + q;
        }
        detail::symmetrize(r);
        const double innovation = pseudo_obs[t] - a[0];
        const double s = r(0, 0) + model.obs_var;
        require_numeric(s > 0.0 && std::isfinite(s), "non-finite innovation variance in filter");
        const Eigen::Vector2d gain = r.col(0) / s;
        m = a + gain * innovation;
        p = r - gain * r.row(0);
        detail::symmetrize(p);
        require_numeric(m.head(dim).allFinite() && p.topLeftCorner(dim, dim).allFinite(),
                        "non-finite filter moments at t=" + std::to_string(t + 1));
        fm.pred_mean[t] = a;
        fm.pred_cov[t] = r;
        fm.filtered_mean[t] = m;
        fm.filtered_cov[t] = p;
    }
    return fm;
}

// One exact joint draw of (alpha_{1..T}, nu_{1..T}) from the conditional given
// the beta column and variances: filter forward, sample backward.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> ffbs_states(const Eigen::VectorXd& beta_column,
                                                               const FfbsModel& model, Rng& rng) {
    const FilterMoments fm = kalman_filter(beta_column, model);
    const int T = static_cast<int>(beta_column.size());
    const int dim = fm.dim;
    const Eigen::Matrix2d f = detail::transition(model);

    std::vector<Eigen::Vector2d> states(T);
    states[T - 1] = detail::draw_gaussian(fm.filtered_mean[T - 1], fm.filtered_cov[T - 1], dim, rng);
    for (int t = T - 2; t >= 0; --t) {
        const Eigen::Matrix2d r_inv = detail::invert(fm.pred_cov[t + 1], dim);
        const Eigen::Matrix2d j = fm.filtered_cov[t] * f.transpose() * r_inv;
        const Eigen::Vector2d mean =
            fm.filtered_mean[t] + j * (states[t + 1] - fm.pred_mean[t + 1]);
        Eigen::Matrix2d cov = fm.filtered_cov[t] - j * fm.pred_cov[t + 1] * j.transpose();
        detail::symmetrize(cov);
        states[t] = detail::draw_gaussian(mean, cov, dim, rng);
    }

    Eigen::VectorXd alpha(T), nu(T);
    for (int t = 0; t < T; ++t) {
        alpha[t] = states[t][0];
        nu[t] = dim == 2 ? states[t][1] : 0.0;
    }
    require_numeric(alpha.allFinite() && nu.allFinite(), "non-finite sampled states");
    return {std::move(alpha), std::move(nu)};
}

}  // namespace tvcast
