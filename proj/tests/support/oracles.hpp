#pragma once

// Independent reference computations for the tests. Nothing here calls into
// the library except plain data types.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "lcurve/metrics.hpp"

namespace oracle {

// AUC by counting every (positive, negative) pair.
inline double auc_pairs(const std::vector<double>& s, const std::vector<int>& y) {
    double hits = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (y[i] != 1) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[j] != 0) continue;
            pairs += 1.0;
            if (s[i] > s[j]) hits += 1.0;
            else if (s[i] == s[j]) hits += 0.5;
        }
    }
    return hits / pairs;
}

// Kaplan-Meier estimate of the censoring survivor function just before t,
// computed directly from its product-limit definition.
inline double censoring_survival_before(const std::vector<lcurve::SurvivalOutcome>& o, double t) {
    std::vector<double> times;
    for (const auto& x : o) {
        if (!x.event && x.time < t) times.push_back(x.time);
    }
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    double g = 1.0;
    for (double s : times) {
        double d = 0.0;
        double r = 0.0;
        for (const auto& x : o) {
            if (x.time >= s) r += 1.0;
            if (x.time == s && !x.event) d += 1.0;
        }
        g *= 1.0 - d / r;
    }
    return g;
}

// Uno's C written out as the weighted double sum over (i, j).
inline double uno_literal(const std::vector<double>& risk, const std::vector<lcurve::SurvivalOutcome>& o, double tau) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < o.size(); ++i) {
        if (!o[i].event || !(o[i].time < tau)) continue;
        const double g = censoring_survival_before(o, o[i].time);
        for (std::size_t j = 0; j < o.size(); ++j) {
            if (!(o[i].time < o[j].time) || g <= 0.0) continue;
            const double w = 1.0 / (g * g);
            den += w;
            if (risk[i] > risk[j]) num += w;
            else if (risk[i] == risk[j]) num += 0.5 * w;
        }
    }
    return num / den;
}

// Solve A X = B by Gauss-Jordan elimination with partial pivoting.
inline std::vector<std::vector<double>> gauss_jordan_solve(std::vector<std::vector<double>> a,
                                                           std::vector<std::vector<double>> b) {
    const std::size_t n = a.size();
    const std::size_t m = b.empty() ? 0 : b[0].size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        }
        std::swap(a[col], a[piv]);
        std::swap(b[col], b[piv]);
        const double d = a[col][col];
        for (std::size_t c = 0; c < n; ++c) a[col][c] /= d;
        for (std::size_t c = 0; c < m; ++c) b[col][c] /= d;
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a[r][col];
            for (std::size_t c = 0; c < n; ++c) a[r][c] -= f * a[col][c];
            for (std::size_t c = 0; c < m; ++c) b[r][c] -= f * b[col][c];
        }
    }
    return b;
}

struct Conditional {
    std::vector<double> mean;
    std::vector<std::vector<double>> cov;
};

// Condition a joint Gaussian over (observed, predicted) on the observed block.
inline Conditional mvn_condition(const std::vector<double>& mu_o, const std::vector<double>& mu_p,
                                 const std::vector<std::vector<double>>& s_oo,
                                 const std::vector<std::vector<double>>& s_op,
                                 const std::vector<std::vector<double>>& s_pp, const std::vector<double>& y_o) {
    const std::size_t m = mu_o.size();
    const std::size_t p = mu_p.size();
    std::vector<std::vector<double>> rhs(m, std::vector<double>(p + 1));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < p; ++j) rhs[i][j] = s_op[i][j];
        rhs[i][p] = y_o[i] - mu_o[i];
    }
    const auto sol = gauss_jordan_solve(s_oo, rhs);
    Conditional out;
    out.mean = mu_p;
    out.cov = s_pp;
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t i = 0; i < m; ++i) out.mean[j] += s_op[i][j] * sol[i][p];
        for (std::size_t k = 0; k < p; ++k) {
            for (std::size_t i = 0; i < m; ++i) out.cov[j][k] -= s_op[i][j] * sol[i][k];
        }
    }
    return out;
}

inline double phi_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Standard normal quantile by bisection on erfc.
inline double phi_inv(double p) {
    double lo = -40.0;
    double hi = 40.0;
    for (int i = 0; i < 300; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (phi_cdf(mid) < p) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

struct PowerLaw {
    double a, b, c;
};

// Recover (a, b, c) from three exact curve points by bisection on c.
inline PowerLaw three_point_solve(double n1, double y1, double n2, double y2, double n3, double y3) {
    const double target = (y3 - y2) / (y2 - y1);
    auto ratio = [&](double c) {
        return (std::pow(n2, -c) - std::pow(n3, -c)) / (std::pow(n1, -c) - std::pow(n2, -c));
    };
    double lo = 1e-9;
    double hi = 1.0 - 1e-9;
    const bool increasing = ratio(hi) > ratio(lo);
    for (int i = 0; i < 300; ++i) {
        const double mid = 0.5 * (lo + hi);
        if ((ratio(mid) < target) == increasing) lo = mid;
        else hi = mid;
    }
    const double c = 0.5 * (lo + hi);
    const double b = (y2 - y1) / (std::pow(n1, -c) - std::pow(n2, -c));
    const double a = 1.0 - y1 - b * std::pow(n1, -c);
    return {a, b, c};
}

// AUC of the optimal score for labels ~ Bernoulli(sigmoid(eta)) with
// eta ~ N(mu, s^2): P(eta_case > eta_control) by trapezoidal integration of
// the class-conditional densities.
inline double bayes_auc_logistic(double mu, double s, int steps = 200000) {
    if (s == 0.0) return 0.5;
    const double lo = mu - 12.0 * s;
    const double hi = mu + 12.0 * s;
    const double h = (hi - lo) / steps;
    auto dens = [&](double u) { return std::exp(-0.5 * ((u - mu) / s) * ((u - mu) / s)) / (s * std::sqrt(2.0 * std::numbers::pi)); };
    auto sig = [](double u) { return 1.0 / (1.0 + std::exp(-u)); };
    double prev_case = dens(lo) * sig(lo);
    double prev_ctrl = dens(lo) * (1.0 - sig(lo));
    double cum_ctrl = 0.0;
    double prev_integrand = prev_case * cum_ctrl;
    double num = 0.0;
    double p_case = 0.0;
    for (int k = 1; k <= steps; ++k) {
        const double u = lo + h * k;
        const double cs = dens(u) * sig(u);
        const double ct = dens(u) * (1.0 - sig(u));
        cum_ctrl += 0.5 * h * (prev_ctrl + ct);
        const double integrand = cs * cum_ctrl;
        num += 0.5 * h * (prev_integrand + integrand);
        p_case += 0.5 * h * (prev_case + cs);
        prev_case = cs;
        prev_ctrl = ct;
        prev_integrand = integrand;
    }
    return num / (p_case * (1.0 - p_case));
}

} // namespace oracle
