#pragma once

// Anchoring a small target cohort's learning curve to an external fit.
//
// NLS: b and c are frozen at the external estimates and only a is
// re-estimated from the target data.
// GP: the external posterior of (b, c, phi) is moment-matched into the prior
// families used by the target fit; a, rho and sigma_y keep their defaults.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "lcurve/curve_model.hpp"
#include "lcurve/errors.hpp"
#include "lcurve/gp_fit.hpp"
#include "lcurve/nls_fit.hpp"
#include "lcurve/stats.hpp"

namespace lcurve {

namespace detail {

class Fnv1a {
public:
    void add(double v) {
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof v);
        for (unsigned char b : bytes) {
            h_ ^= b;
            h_ *= 0x100000001b3ULL;
        }
    }

    std::string hex() const {
        char buf[24];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h_));
        return buf;
    }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

} // namespace detail

// Content digest of a fit, used to record which external fit an anchored
// fit came from.
inline std::string fit_digest(const NlsFit& f) {
    detail::Fnv1a h;
    h.add(f.params.a);
    h.add(f.params.b);
    h.add(f.params.c);
    for (int i = 0; i < 9; ++i) h.add(f.tcov(i / 3, i % 3));
    h.add(f.rss);
    for (auto n : f.size_grid) h.add(static_cast<double>(n));
    return h.hex();
}

inline std::string fit_digest(const GpFit& f) {
    detail::Fnv1a h;
    h.add(static_cast<double>(f.seed));
    for (const auto& d : f.draws) {
        h.add(d.params.a);
        h.add(d.params.b);
        h.add(d.params.c);
        h.add(d.phi);
        h.add(d.rho);
        h.add(d.sigma_y);
    }
    for (const auto& p : f.data) {
        h.add(static_cast<double>(p.n));
        h.add(p.mean_y);
        h.add(p.var_y);
        h.add(static_cast<double>(p.k_eff));
    }
    return h.hex();
}

// Weighted least squares for a alone with b, c fixed at the external values.
// The model is linear in a, so the minimiser is the weighted mean of
// 1 - b n^-c - y; it is kept strictly inside (0, 1) and flagged
// non-converged when the unconstrained optimum lies outside.
inline NlsFit nls_anchor(const NlsFit& external, std::span<const PerformancePoint> target,
                         const LmOptions& opt = {}) {
    if (!external.converged) throw RefusalError("external NLS fit did not converge");
    check_performance_points(target);
    const auto agg = aggregate(target, 1);
    const double b = external.params.b;
    const double c = external.params.c;

    double sw = 0.0;
    double swz = 0.0;
    for (const auto& p : agg) {
        const double w = nls_weight(p, opt.variance_floor);
        sw += w;
        swz += w * (1.0 - b * std::pow(static_cast<double>(p.n), -c) - p.mean_y);
    }
    const double a_hat = swz / sw;
    constexpr double edge = 1e-9;
    const bool interior = a_hat > 0.0 && a_hat < 1.0;

    NlsFit fit;
    fit.params = {std::clamp(a_hat, edge, 1.0 - edge), b, c};
    fit.converged = interior;
    fit.iterations = 1;
    for (const auto& p : agg) fit.size_grid.push_back(p.n);

    double rss = 0.0;
    double info = 0.0;
    const double da = fit.params.a * (1.0 - fit.params.a);
    for (const auto& p : agg) {
        const double w = nls_weight(p, opt.variance_floor);
        const double e = p.mean_y - eval_power_law(fit.params, static_cast<double>(p.n));
        rss += w * e * e;
        info += w * da * da;
    }
    fit.rss = rss;
    const double s2 = agg.size() > 1 ? rss / static_cast<double>(agg.size() - 1) : 1.0;
    fit.tcov.setZero();
    fit.tcov(0, 0) = s2 / info;

    const auto ext_se = external.natural_se();
    fit.anchor = NlsAnchorInfo{fit_digest(external), ext_se.b, ext_se.c};
    return fit;
}

struct AnchorOptions {
    double inflation = 1.5;
    double min_sd_b = 1e-3;
    double min_sd_c = 1e-3;
    double min_sd_log_phi = 1e-3;
    PriorSpec base{}; // source of the a, rho and sigma_y priors
};

struct AnchoredPriors {
    PriorSpec priors;
    double inflation = 1.5;
    std::string external_digest;
    std::vector<std::string> floored; // parameters whose matched sd hit a floor
};

// Beta(alpha, beta) with the given mean and variance. The variance is capped
// at 99% of mean(1 - mean) so both shapes stay positive.
inline BetaPrior beta_from_moments(double mean, double var) {
    const double m = std::clamp(mean, 1e-6, 1.0 - 1e-6);
    const double v = std::min(var, 0.99 * m * (1.0 - m));
    const double common = m * (1.0 - m) / v - 1.0;
    return {m * common, (1.0 - m) * common};
}

inline AnchoredPriors gp_anchor_priors(const GpFit& external, const AnchorOptions& opt = {}) {
    if (external.draws.empty()) throw InvalidArgument("external GP fit has no draws");
    if (!(opt.inflation > 0.0)) throw InvalidArgument("inflation must be positive");

    std::vector<double> b, c, log_phi;
    for (const auto& d : external.draws) {
        b.push_back(d.params.b);
        c.push_back(d.params.c);
        log_phi.push_back(std::log(d.phi));
    }
    AnchoredPriors out;
    out.priors = opt.base;
    out.inflation = opt.inflation;
    out.external_digest = fit_digest(external);

    auto widened = [&](double sd, double floor, const char* name) {
        const double s = sd * opt.inflation;
        if (!(s >= floor)) {
            out.floored.emplace_back(name);
            return floor;
        }
        return s;
    };

    out.priors.b = {stats::mean(b), widened(std::sqrt(stats::variance(b)), opt.min_sd_b, "b")};

    const double c_mean = stats::mean(c);
    const double c_sd = widened(std::sqrt(stats::variance(c)), opt.min_sd_c, "c");
    out.priors.c = beta_from_moments(c_mean, c_sd * c_sd);

    out.priors.phi = {stats::mean(log_phi), widened(std::sqrt(stats::variance(log_phi)), opt.min_sd_log_phi, "phi")};
    return out;
}

// fit_gp with transferred priors; a single distinct target size suffices.
inline GpFit fit_gp_anchored(std::span<const PerformancePoint> target, const AnchoredPriors& anchor,
                             const McmcConfig& mcmc = {}, double rescale = kDefaultSizeRescale) {
    GpFit fit = detail::fit_gp_impl(target, anchor.priors, mcmc, 1, rescale);
    fit.provenance = {true, anchor.external_digest, anchor.inflation};
    return fit;
}

} // namespace lcurve
