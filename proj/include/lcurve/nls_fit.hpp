#pragma once

// Weighted nonlinear least squares for the power-law curve.
//
// The default objective works on per-size means:
//     sum_m  w_m * (mean_y_m - f(n_m; a, b, c))^2,   w_m = k_eff_m / max(var_y_m, v_floor)
// minimised by Levenberg-Marquardt over (logit a, log b, logit c). With
// `raw_points` every repeat becomes its own residual with weight
// 1 / max(var_y_m, v_floor) instead.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lcurve/curve_model.hpp"
#include "lcurve/errors.hpp"
#include "lcurve/linalg.hpp"
#include "lcurve/prediction.hpp"
#include "lcurve/stats.hpp"

namespace lcurve {

struct AggregatedPoint {
    std::size_t n = 1;
    double mean_y = 0.0;
    double var_y = 0.0;
    std::size_t k_eff = 1;
};

inline constexpr double kDefaultVarianceFloor = 1e-6;

inline double nls_weight(const AggregatedPoint& p, double variance_floor = kDefaultVarianceFloor) {
    return static_cast<double>(p.k_eff) / std::max(p.var_y, variance_floor);
}

inline void check_performance_points(std::span<const PerformancePoint> points) {
    for (const auto& p : points) {
        if (p.n < 1) throw InvalidArgument("performance point with n < 1");
        if (!(p.y >= 0.0 && p.y <= 1.0)) throw InvalidArgument("performance value outside [0, 1]");
    }
}

// One point per distinct size, ascending. Throws IdentifiabilityError when
// fewer than `min_sizes` distinct sizes are present.
inline std::vector<AggregatedPoint> aggregate(std::span<const PerformancePoint> points,
                                              std::size_t min_sizes = 3) {
    std::map<std::size_t, std::vector<double>> by_size;
    for (const auto& p : points) by_size[p.n].push_back(p.y);
    if (by_size.size() < min_sizes || by_size.empty()) {
        throw IdentifiabilityError("need at least " + std::to_string(std::max<std::size_t>(min_sizes, 1)) +
                                   " distinct sizes, got " + std::to_string(by_size.size()));
    }
    std::vector<AggregatedPoint> out;
    out.reserve(by_size.size());
    for (const auto& [n, ys] : by_size) {
        out.push_back({n, stats::mean(ys), stats::variance(ys), ys.size()});
    }
    return out;
}

struct LmOptions {
    double initial_damping = 1e-3;
    double damping_factor = 10.0;
    int max_iterations = 200;
    double rss_rel_tol = 1e-10;
    double step_tol = 1e-8;
    double variance_floor = kDefaultVarianceFloor;
    bool raw_points = false;
    bool record_trace = false;
};

// Present on fits produced by nls_anchor: b and c were frozen at the values
// of an external fit and carry that fit's standard errors.
struct NlsAnchorInfo {
    std::string external_digest;
    double se_b = 0.0;
    double se_c = 0.0;
};

struct NlsFit {
    CurveParams params;
    Eigen::Matrix3d tcov = Eigen::Matrix3d::Zero();
    double rss = 0.0;
    bool converged = false;
    int iterations = 0;
    std::vector<std::size_t> size_grid;
    std::optional<NlsAnchorInfo> anchor;

    // Filled when LmOptions::record_trace is set.
    std::vector<double> rss_trace;            // rss after every accepted step
    std::vector<CurveParams> iterate_trace;   // every proposed iterate

    struct NaturalSe {
        double a, b, c;
    };

    // Delta-method standard errors on the natural scale.
    NaturalSe natural_se() const {
        const auto& p = params;
        const double se_a = p.a * (1.0 - p.a) * std::sqrt(std::max(tcov(0, 0), 0.0));
        if (anchor) return {se_a, anchor->se_b, anchor->se_c};
        return {se_a, p.b * std::sqrt(std::max(tcov(1, 1), 0.0)),
                p.c * (1.0 - p.c) * std::sqrt(std::max(tcov(2, 2), 0.0))};
    }
};

namespace detail {

struct Residuals {
    std::vector<double> n;
    std::vector<double> y;
    std::vector<double> sqrt_w;
};

inline Residuals build_residuals(std::span<const PerformancePoint> points,
                                 const std::vector<AggregatedPoint>& agg, const LmOptions& opt) {
    Residuals r;
    if (!opt.raw_points) {
        for (const auto& a : agg) {
            r.n.push_back(static_cast<double>(a.n));
            r.y.push_back(a.mean_y);
            r.sqrt_w.push_back(std::sqrt(nls_weight(a, opt.variance_floor)));
        }
        return r;
    }
    std::map<std::size_t, double> var_at;
    for (const auto& a : agg) var_at[a.n] = a.var_y;
    for (const auto& p : points) {
        r.n.push_back(static_cast<double>(p.n));
        r.y.push_back(p.y);
        r.sqrt_w.push_back(std::sqrt(1.0 / std::max(var_at[p.n], opt.variance_floor)));
    }
    return r;
}

inline double weighted_rss(const Residuals& r, const CurveParams& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < r.n.size(); ++i) {
        const double e = r.sqrt_w[i] * (r.y[i] - eval_power_law(p, r.n[i]));
        s += e * e;
    }
    return s;
}

inline double rss_scale(const Residuals& r) {
    double s = 0.0;
    for (std::size_t i = 0; i < r.n.size(); ++i) s += r.sqrt_w[i] * r.sqrt_w[i] * (1.0 + r.y[i] * r.y[i]);
    return s;
}

inline Eigen::MatrixXd jacobian(const Residuals& r, const CurveParams& p) {
    Eigen::MatrixXd j(static_cast<Eigen::Index>(r.n.size()), 3);
    for (std::size_t i = 0; i < r.n.size(); ++i) {
        const auto g = power_law_gradient(p, r.n[i]);
        const auto row = static_cast<Eigen::Index>(i);
        j(row, 0) = r.sqrt_w[i] * g.d_ta;
        j(row, 1) = r.sqrt_w[i] * g.d_tb;
        j(row, 2) = r.sqrt_w[i] * g.d_tc;
    }
    return j;
}

inline Eigen::VectorXd residual_vector(const Residuals& r, const CurveParams& p) {
    Eigen::VectorXd e(static_cast<Eigen::Index>(r.n.size()));
    for (std::size_t i = 0; i < r.n.size(); ++i) {
        e(static_cast<Eigen::Index>(i)) = r.sqrt_w[i] * (r.y[i] - eval_power_law(p, r.n[i]));
    }
    return e;
}

inline std::vector<double> as_vector(const TransformedParams& t) { return {t.ta, t.tb, t.tc}; }

} // namespace detail

// Deterministic starting point: a from the observed maximum, c = 0.5, b
// solving the curve exactly at the smallest size.
inline CurveParams default_nls_init(const std::vector<AggregatedPoint>& agg) {
    double max_y = agg.front().mean_y;
    for (const auto& a : agg) max_y = std::max(max_y, a.mean_y);
    const double a0 = std::clamp(1.0 - max_y - 0.01, 0.01, 0.99);
    const double c0 = 0.5;
    const auto& first = agg.front();
    const double b0 = std::clamp(((1.0 - a0) - first.mean_y) * std::pow(static_cast<double>(first.n), c0), 1e-3, 1e3);
    return {a0, b0, c0};
}

inline NlsFit fit_nls(std::span<const PerformancePoint> points, std::optional<CurveParams> init = std::nullopt,
                      const LmOptions& opt = {}) {
    check_performance_points(points);
    const auto agg = aggregate(points, 3);
    const auto res = detail::build_residuals(points, agg, opt);

    NlsFit fit;
    for (const auto& a : agg) fit.size_grid.push_back(a.n);

    CurveParams start = init.value_or(default_nls_init(agg));
    if (!start.valid()) throw InvalidArgument("initial curve parameters are outside their domain");
    TransformedParams theta = to_transformed(start);
    CurveParams cur = from_transformed(theta);
    double rss = detail::weighted_rss(res, cur);
    if (!std::isfinite(rss)) throw NumericalFailure("non-finite objective at the initial point", detail::as_vector(theta));
    const double abs_tol = 1e-24 * detail::rss_scale(res);

    if (opt.record_trace) {
        fit.rss_trace.push_back(rss);
        fit.iterate_trace.push_back(cur);
    }

    double lambda = opt.initial_damping;
    bool converged = false;
    int it = 0;
    for (; it < opt.max_iterations && !converged; ++it) {
        const Eigen::MatrixXd j = detail::jacobian(res, cur);
        const Eigen::Matrix3d a = j.transpose() * j;
        const Eigen::Vector3d g = j.transpose() * detail::residual_vector(res, cur);

        Eigen::Vector3d d = a.diagonal();
        const double dmax = d.maxCoeff();
        for (int i = 0; i < 3; ++i) d(i) = std::max(d(i), 1e-12 * (1.0 + dmax));

        const Eigen::Matrix3d damped = a + lambda * Eigen::Matrix3d(d.asDiagonal());
        const Eigen::Vector3d step = damped.ldlt().solve(g);
        if (!step.allFinite()) throw NumericalFailure("non-finite LM step", detail::as_vector(theta));

        const TransformedParams cand{theta.ta + step(0), theta.tb + step(1), theta.tc + step(2)};
        const CurveParams cand_p = from_transformed(cand);
        const double cand_rss = detail::weighted_rss(res, cand_p);
        if (opt.record_trace) fit.iterate_trace.push_back(cand_p);
        if (!std::isfinite(cand_rss)) throw NumericalFailure("non-finite objective during LM iteration", detail::as_vector(theta));

        const double step_norm = step.norm();
        const double rel_change = std::abs(rss - cand_rss) / std::max(rss, std::numeric_limits<double>::min());
        const bool small_step = step_norm < opt.step_tol;

        if (cand_rss <= rss) {
            theta = cand;
            cur = cand_p;
            converged = small_step && (rel_change < opt.rss_rel_tol || cand_rss <= abs_tol);
            rss = cand_rss;
            lambda /= opt.damping_factor;
            if (opt.record_trace) fit.rss_trace.push_back(rss);
        } else {
            // An increase this small with a tiny step is round-off at the minimum.
            converged = small_step && rel_change < opt.rss_rel_tol;
            lambda *= opt.damping_factor;
            if (lambda > 1e20) break;
        }
    }

    fit.params = cur;
    fit.rss = rss;
    fit.converged = converged;
    fit.iterations = it;

    const Eigen::MatrixXd j = detail::jacobian(res, cur);
    const auto dof = static_cast<long>(res.n.size()) - 3;
    const double s2 = dof > 0 ? rss / static_cast<double>(dof) : 1.0;
    fit.tcov = psd_inverse(j.transpose() * j) * s2;
    return fit;
}

// Delta-method prediction: mean is the fitted curve; the interval propagates
// tcov through the transform and the curve. Refuses non-converged fits unless
// `allow_nonconverged` is set.
inline CurvePrediction predict_nls(const NlsFit& fit, std::span<const double> sizes, double level = 0.95,
                                   bool allow_nonconverged = false) {
    if (!fit.converged && !allow_nonconverged) {
        throw RefusalError("NLS fit did not converge; pass the override to predict anyway");
    }
    if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("level must be in (0, 1)");
    const double z = stats::two_sided_z(level);
    CurvePrediction out;
    out.level = level;
    for (double n : sizes) {
        if (!(n >= 1.0)) throw InvalidArgument("prediction sizes must be >= 1");
        const auto g = power_law_gradient(fit.params, n);
        const Eigen::Vector3d gv(g.d_ta, g.d_tb, g.d_tc);
        const double var = std::max(gv.dot(fit.tcov * gv), 0.0);
        const double m = eval_power_law(fit.params, n);
        const double half = z * std::sqrt(var);
        out.sizes.push_back(n);
        out.mean.push_back(m);
        out.lower.push_back(m - half);
        out.upper.push_back(m + half);
    }
    return out;
}

} // namespace lcurve
