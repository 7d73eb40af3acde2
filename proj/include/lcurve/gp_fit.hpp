#pragma once

// Bayesian learning curve: a Gaussian process centred on the power law.
//
//   mean_y(n_m) ~ N( mu(n), Sigma + D )
//   mu(n)       = (1 - a) - b n^(-c)
//   Sigma_ij    = phi^2 exp(-rho (x_i - x_j)^2),   x = n / rescale
//   D           = diag(sigma_y^2 / k_eff)
//
// The posterior over (a, b, c, phi, rho, sigma_y) is sampled with an adaptive
// component-wise random-walk Metropolis sampler on
// (logit a, log b, logit c, log phi, log rho, log sigma_y). Predictions
// condition each draw's GP on the observed means and pool the resulting
// normals as an equal-weight mixture.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lcurve/curve_model.hpp"
#include "lcurve/errors.hpp"
#include "lcurve/linalg.hpp"
#include "lcurve/nls_fit.hpp"
#include "lcurve/prediction.hpp"
#include "lcurve/random.hpp"
#include "lcurve/stats.hpp"

namespace lcurve {

inline constexpr double kDefaultSizeRescale = 1000.0;

struct GpHyper {
    CurveParams params;
    double phi = 0.05;
    double rho = 1.0;
    double sigma_y = 0.05;

    bool valid() const noexcept {
        return params.valid() && phi > 0.0 && rho > 0.0 && sigma_y > 0.0 && std::isfinite(phi) &&
               std::isfinite(rho) && std::isfinite(sigma_y);
    }
};

struct BetaPrior {
    double alpha = 2.0;
    double beta = 2.0;
};

struct NormalPrior {
    double mu = 1.0;
    double sd = 5.0;
};

struct LogNormalPrior {
    double mu = 0.0; // mean of log x
    double sd = 1.0; // sd of log x
};

// Priors for the GP hyperparameters. b's normal prior is evaluated on b > 0
// only (the log parameterisation never proposes b <= 0).
struct PriorSpec {
    BetaPrior a{2.0, 2.0};
    BetaPrior c{2.0, 2.0};
    NormalPrior b{1.0, 5.0};
    LogNormalPrior phi{0.0, 1.0};
    LogNormalPrior rho{0.0, 1.0};
    LogNormalPrior sigma_y{0.0, 1.0};

    bool valid() const noexcept {
        auto pos = [](double x) { return x > 0.0 && std::isfinite(x); };
        return pos(a.alpha) && pos(a.beta) && pos(c.alpha) && pos(c.beta) && pos(b.sd) && pos(phi.sd) &&
               pos(rho.sd) && pos(sigma_y.sd) && std::isfinite(b.mu) && std::isfinite(phi.mu) &&
               std::isfinite(rho.mu) && std::isfinite(sigma_y.mu);
    }
};

struct McmcConfig {
    int iterations = 5000;
    int burn_in = 2500;
    std::uint64_t seed = 1;
    double target_acceptance = 0.3;
    // Proposal sds on the transformed scale, in the order
    // (logit a, log b, logit c, log phi, log rho, log sigma_y).
    std::array<double, 6> initial_scales{0.1, 0.1, 0.1, 0.1, 0.1, 0.1};
    int adapt_batch = 50;
};

struct GpProvenance {
    bool anchored = false;
    std::string external_digest;
    double inflation = 0.0;
};

struct GpFit {
    std::vector<GpHyper> draws;
    std::vector<AggregatedPoint> data;
    double acceptance_rate = 0.0;
    std::uint64_t seed = 0;
    double rescale = kDefaultSizeRescale;
    PriorSpec priors;
    GpProvenance provenance;
    std::vector<std::string> warnings;
};

// Squared-exponential covariance on already-rescaled sizes.
inline double se_kernel(double n_i, double n_j, double phi, double rho) noexcept {
    const double d = n_i - n_j;
    return phi * phi * std::exp(-rho * d * d);
}

namespace detail {

inline Eigen::MatrixXd observed_covariance(const GpHyper& h, std::span<const AggregatedPoint> data,
                                           double rescale) {
    const auto m = static_cast<Eigen::Index>(data.size());
    Eigen::MatrixXd k(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double xi = static_cast<double>(data[static_cast<std::size_t>(i)].n) / rescale;
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double xj = static_cast<double>(data[static_cast<std::size_t>(j)].n) / rescale;
            k(i, j) = k(j, i) = se_kernel(xi, xj, h.phi, h.rho);
        }
        k(i, i) += h.sigma_y * h.sigma_y / static_cast<double>(data[static_cast<std::size_t>(i)].k_eff);
    }
    return k;
}

inline Eigen::VectorXd mean_residual(const CurveParams& p, std::span<const AggregatedPoint> data) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
        r(static_cast<Eigen::Index>(i)) = data[i].mean_y - eval_power_law(p, static_cast<double>(data[i].n));
    }
    return r;
}

// Factorised observed covariance, reusable while only the mean parameters change.
struct FactoredCovariance {
    JitteredCholesky chol;
    double half_logdet = 0.0;
};

inline FactoredCovariance factor_covariance(const GpHyper& h, std::span<const AggregatedPoint> data,
                                            double rescale) {
    FactoredCovariance f{jittered_cholesky(observed_covariance(h, data, rescale)), 0.0};
    const Eigen::MatrixXd& l = f.chol.llt.matrixLLT();
    for (Eigen::Index i = 0; i < l.rows(); ++i) f.half_logdet += std::log(l(i, i));
    return f;
}

inline double gaussian_loglik(const FactoredCovariance& f, const Eigen::VectorXd& r) {
    const Eigen::VectorXd z = f.chol.llt.matrixL().solve(r);
    return -0.5 * z.squaredNorm() - f.half_logdet -
           0.5 * static_cast<double>(r.size()) * std::log(2.0 * std::numbers::pi);
}

inline std::array<double, 6> to_vector(const GpHyper& h) {
    const auto t = to_transformed(h.params);
    return {t.ta, t.tb, t.tc, std::log(h.phi), std::log(h.rho), std::log(h.sigma_y)};
}

inline GpHyper from_vector(const std::array<double, 6>& v) {
    GpHyper h;
    h.params = from_transformed({v[0], v[1], v[2]});
    constexpr double lo = std::numeric_limits<double>::min();
    constexpr double hi = std::numeric_limits<double>::max();
    h.phi = std::clamp(std::exp(v[3]), lo, hi);
    h.rho = std::clamp(std::exp(v[4]), lo, hi);
    h.sigma_y = std::clamp(std::exp(v[5]), lo, hi);
    return h;
}

} // namespace detail

// Log marginal likelihood of the aggregated means. phi = 0 is accepted
// (pure power law plus noise).
inline double gp_log_likelihood(const GpHyper& h, std::span<const AggregatedPoint> data,
                                double rescale = kDefaultSizeRescale) {
    const auto f = detail::factor_covariance(h, data, rescale);
    return detail::gaussian_loglik(f, detail::mean_residual(h.params, data));
}

// Sum of the prior log densities on the natural scale.
inline double gp_log_prior(const GpHyper& h, const PriorSpec& pr) {
    const auto& p = h.params;
    return stats::log_beta_pdf(p.a, pr.a.alpha, pr.a.beta) + stats::log_beta_pdf(p.c, pr.c.alpha, pr.c.beta) +
           stats::log_normal_pdf(p.b, pr.b.mu, pr.b.sd) + stats::log_lognormal_pdf(h.phi, pr.phi.mu, pr.phi.sd) +
           stats::log_lognormal_pdf(h.rho, pr.rho.mu, pr.rho.sd) +
           stats::log_lognormal_pdf(h.sigma_y, pr.sigma_y.mu, pr.sigma_y.sd);
}

// log p(h | data) up to a constant, natural-scale densities.
inline double log_posterior(const GpHyper& h, std::span<const AggregatedPoint> data, const PriorSpec& priors,
                            double rescale = kDefaultSizeRescale) {
    return gp_log_likelihood(h, data, rescale) + gp_log_prior(h, priors);
}

// log-|Jacobian| of the map from the transformed vector to the natural scale.
inline double gp_log_jacobian(const GpHyper& h) {
    const auto& p = h.params;
    return std::log(p.a) + std::log1p(-p.a) + std::log(p.b) + std::log(p.c) + std::log1p(-p.c) +
           std::log(h.phi) + std::log(h.rho) + std::log(h.sigma_y);
}

// Posterior density of the transformed vector (the sampler's target).
inline double log_posterior_transformed(const GpHyper& h, std::span<const AggregatedPoint> data,
                                        const PriorSpec& priors, double rescale = kDefaultSizeRescale) {
    return log_posterior(h, data, priors, rescale) + gp_log_jacobian(h);
}

namespace detail {

// Sampler state: the current point, its log target and the cached factor of
// the observed covariance.
class GpChain {
public:
    GpChain(std::span<const AggregatedPoint> data, const PriorSpec& priors, double rescale)
        : data_(data), priors_(priors), rescale_(rescale) {}

    // Returns -inf for points where the covariance cannot be factorised.
    double evaluate(const GpHyper& h, std::optional<FactoredCovariance>& factor) const {
        try {
            factor = factor_covariance(h, data_, rescale_);
        } catch (const NumericalFailure&) {
            factor.reset();
            return -std::numeric_limits<double>::infinity();
        }
        return target(h, *factor);
    }

    double target(const GpHyper& h, const FactoredCovariance& factor) const {
        const double v = gaussian_loglik(factor, mean_residual(h.params, data_)) + gp_log_prior(h, priors_) +
                         gp_log_jacobian(h);
        return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
    }

private:
    std::span<const AggregatedPoint> data_;
    const PriorSpec& priors_;
    double rescale_;
};

inline GpHyper initial_hyper(std::span<const PerformancePoint> points, const std::vector<AggregatedPoint>& agg,
                             const PriorSpec& priors, const GpChain& chain) {
    std::vector<CurveParams> mean_candidates;
    if (agg.size() >= 3) {
        try {
            mean_candidates.push_back(fit_nls(points).params);
        } catch (const Error&) {
        }
    }
    {
        // Prior-centred shape, a solved at the smallest size.
        const double c = std::clamp(priors.c.alpha / (priors.c.alpha + priors.c.beta), 0.01, 0.99);
        const double b = priors.b.mu > 1e-3 ? priors.b.mu : 1.0;
        const auto& first = agg.front();
        const double a = std::clamp(1.0 - first.mean_y - b * std::pow(static_cast<double>(first.n), -c), 0.01, 0.99);
        mean_candidates.push_back({a, b, c});
    }
    double pooled_var = 0.0;
    for (const auto& p : agg) pooled_var += p.var_y;
    pooled_var /= static_cast<double>(agg.size());
    const double sigma_guess = std::clamp(std::sqrt(pooled_var), 1e-3, 1.0);

    struct Kern {
        double phi, rho, sigma;
    };
    const std::array<Kern, 2> kern_candidates{
        Kern{0.05, 1.0, sigma_guess},
        Kern{std::exp(priors.phi.mu), std::exp(priors.rho.mu), std::exp(priors.sigma_y.mu)}};

    GpHyper best;
    double best_lp = -std::numeric_limits<double>::infinity();
    bool have = false;
    for (const auto& mc : mean_candidates) {
        for (const auto& kc : kern_candidates) {
            GpHyper h{mc, kc.phi, kc.rho, kc.sigma};
            if (!h.valid()) continue;
            std::optional<FactoredCovariance> f;
            const double lp = chain.evaluate(h, f);
            if (!have || lp > best_lp) {
                best = h;
                best_lp = lp;
                have = true;
            }
        }
    }
    return best;
}

inline GpFit fit_gp_impl(std::span<const PerformancePoint> points, const PriorSpec& priors, const McmcConfig& mcmc,
                         std::size_t min_sizes, double rescale) {
    check_performance_points(points);
    if (!priors.valid()) throw InvalidArgument("prior specification has non-positive scales");
    if (mcmc.iterations <= mcmc.burn_in || mcmc.burn_in < 0) {
        throw InvalidArgument("MCMC iterations must exceed burn-in");
    }
    if (!(rescale > 0.0)) throw InvalidArgument("size rescale must be positive");

    GpFit fit;
    fit.data = aggregate(points, min_sizes);
    fit.seed = mcmc.seed;
    fit.rescale = rescale;
    fit.priors = priors;

    GpChain chain(fit.data, fit.priors, rescale);
    GpHyper cur_h = initial_hyper(points, fit.data, fit.priors, chain);
    std::optional<FactoredCovariance> cur_f;
    double cur_lp = chain.evaluate(cur_h, cur_f);
    if (!cur_f || !std::isfinite(cur_lp)) {
        throw NumericalFailure("GP posterior is not finite at the initial point", [&] {
            const auto v = detail::to_vector(cur_h);
            return std::vector<double>(v.begin(), v.end());
        }());
    }
    auto cur_v = to_vector(cur_h);

    std::array<double, 6> log_scale{};
    for (std::size_t k = 0; k < 6; ++k) log_scale[k] = std::log(mcmc.initial_scales[k]);
    std::array<int, 6> batch_accept{};
    int batch_index = 0;
    std::size_t kept_accept = 0;

    Rng rng = make_stream(mcmc.seed, {stream::kMcmc});
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    const auto n_keep = static_cast<std::size_t>(mcmc.iterations - mcmc.burn_in);
    fit.draws.reserve(n_keep);
    const int batch = std::max(1, mcmc.adapt_batch);

    for (int it = 0; it < mcmc.iterations; ++it) {
        for (std::size_t k = 0; k < 6; ++k) {
            auto prop_v = cur_v;
            prop_v[k] += std::exp(log_scale[k]) * gauss(rng);
            const GpHyper prop_h = from_vector(prop_v);
            const double u = unif(rng);
            double prop_lp;
            std::optional<FactoredCovariance> prop_f;
            if (k < 3) {
                prop_lp = chain.target(prop_h, *cur_f); // kernel unchanged
            } else {
                prop_lp = chain.evaluate(prop_h, prop_f);
            }
            if (std::isfinite(prop_lp) && std::log(u) < prop_lp - cur_lp) {
                cur_v = prop_v;
                cur_h = prop_h;
                cur_lp = prop_lp;
                if (k >= 3) cur_f = std::move(prop_f);
                if (it < mcmc.burn_in) ++batch_accept[k];
                else ++kept_accept;
            }
        }
        if (it < mcmc.burn_in && (it + 1) % batch == 0) {
            ++batch_index;
            const double delta = std::min(0.5, 1.0 / std::sqrt(static_cast<double>(batch_index)));
            for (std::size_t k = 0; k < 6; ++k) {
                const double rate = static_cast<double>(batch_accept[k]) / batch;
                log_scale[k] += rate > mcmc.target_acceptance ? delta : -delta;
                batch_accept[k] = 0;
            }
        }
        if (it >= mcmc.burn_in) fit.draws.push_back(cur_h);
    }
    fit.acceptance_rate = static_cast<double>(kept_accept) / (6.0 * static_cast<double>(n_keep));
    if (fit.acceptance_rate < 0.05 || fit.acceptance_rate > 0.6) {
        fit.warnings.push_back("acceptance rate " + std::to_string(fit.acceptance_rate) +
                               " outside [0.05, 0.6] after adaptation");
    }
    return fit;
}

} // namespace detail

inline GpFit fit_gp(std::span<const PerformancePoint> points, const PriorSpec& priors = {},
                    const McmcConfig& mcmc = {}, double rescale = kDefaultSizeRescale) {
    return detail::fit_gp_impl(points, priors, mcmc, 3, rescale);
}

// Gaussian conditional of the latent curve at `sizes` given the observed
// means, for one fixed set of hyperparameters:
//   mean = mu_p + S_po S_oo^-1 (y_o - mu_o)
//   cov  = S_pp - S_po S_oo^-1 S_op
// S_oo includes the noise diagonal; S_pp includes sigma_y^2 only when
// `include_noise` is set.
struct GpConditional {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

inline GpConditional gp_conditional(const GpHyper& h, std::span<const AggregatedPoint> data,
                                    std::span<const double> sizes, double rescale = kDefaultSizeRescale,
                                    bool include_noise = false) {
    const auto f = detail::factor_covariance(h, data, rescale);
    const auto m = static_cast<Eigen::Index>(data.size());
    const auto p = static_cast<Eigen::Index>(sizes.size());

    Eigen::MatrixXd k_op(m, p);
    Eigen::MatrixXd k_pp(p, p);
    Eigen::VectorXd mu_p(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double nj = sizes[static_cast<std::size_t>(j)];
        const double xj = nj / rescale;
        mu_p(j) = eval_power_law(h.params, nj);
        for (Eigen::Index i = 0; i < m; ++i) {
            const double xi = static_cast<double>(data[static_cast<std::size_t>(i)].n) / rescale;
            k_op(i, j) = se_kernel(xi, xj, h.phi, h.rho);
        }
        for (Eigen::Index i = 0; i <= j; ++i) {
            k_pp(i, j) = k_pp(j, i) = se_kernel(sizes[static_cast<std::size_t>(i)] / rescale, xj, h.phi, h.rho);
        }
        if (include_noise) k_pp(j, j) += h.sigma_y * h.sigma_y;
    }
    const Eigen::VectorXd r = detail::mean_residual(h.params, data);
    const Eigen::VectorXd alpha = f.chol.llt.solve(r);
    const Eigen::MatrixXd v = f.chol.llt.matrixL().solve(k_op);
    GpConditional out;
    out.mean = mu_p + k_op.transpose() * alpha;
    out.cov = k_pp - v.transpose() * v;
    return out;
}

namespace detail {

// Quantile of an equal-weight mixture of normals N(means[d], sds[d]^2).
inline double mixture_quantile(const std::vector<double>& means, const std::vector<double>& sds, double p) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t d = 0; d < means.size(); ++d) {
        lo = std::min(lo, means[d] - 12.0 * sds[d]);
        hi = std::max(hi, means[d] + 12.0 * sds[d]);
    }
    if (!(hi > lo)) return lo;
    auto cdf = [&](double q) {
        double s = 0.0;
        for (std::size_t d = 0; d < means.size(); ++d) {
            if (sds[d] > 0.0) s += stats::normal_cdf((q - means[d]) / sds[d]);
            else s += q >= means[d] ? 1.0 : 0.0;
        }
        return s / static_cast<double>(means.size());
    };
    for (int it = 0; it < 200 && hi - lo > 1e-13 * (1.0 + std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (cdf(mid) < p) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

inline CurvePrediction predict_gp(const GpFit& fit, std::span<const double> sizes, double level = 0.95,
                                  bool include_noise = false) {
    if (fit.draws.empty()) throw InvalidArgument("GP fit has no posterior draws");
    if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("level must be in (0, 1)");
    for (double n : sizes) {
        if (!(n >= 1.0)) throw InvalidArgument("prediction sizes must be >= 1");
    }
    const std::size_t p = sizes.size();
    const std::size_t d = fit.draws.size();
    std::vector<std::vector<double>> means(p, std::vector<double>(d));
    std::vector<std::vector<double>> sds(p, std::vector<double>(d));
    for (std::size_t k = 0; k < d; ++k) {
        const auto cond = gp_conditional(fit.draws[k], fit.data, sizes, fit.rescale, include_noise);
        for (std::size_t j = 0; j < p; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            means[j][k] = cond.mean(jj);
            sds[j][k] = std::sqrt(std::max(cond.cov(jj, jj), 0.0));
        }
    }
    CurvePrediction out;
    out.level = level;
    const double tail = 0.5 * (1.0 - level);
    for (std::size_t j = 0; j < p; ++j) {
        const double m = stats::mean(means[j]);
        const double lo = d == 1 && sds[j][0] == 0.0 ? means[j][0] : detail::mixture_quantile(means[j], sds[j], tail);
        const double hi =
            d == 1 && sds[j][0] == 0.0 ? means[j][0] : detail::mixture_quantile(means[j], sds[j], 1.0 - tail);
        out.sizes.push_back(sizes[j]);
        out.mean.push_back(m);
        out.lower.push_back(std::min(lo, m));
        out.upper.push_back(std::max(hi, m));
    }
    return out;
}

// Posterior summary of one curve parameter across draws.
struct ParamSummary {
    double mean = 0.0;
    double sd = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

enum class CurveParam { a, b, c };

inline ParamSummary summarize_param(const GpFit& fit, CurveParam which, double level = 0.95) {
    std::vector<double> v;
    v.reserve(fit.draws.size());
    for (const auto& h : fit.draws) {
        v.push_back(which == CurveParam::a ? h.params.a : which == CurveParam::b ? h.params.b : h.params.c);
    }
    const double tail = 0.5 * (1.0 - level);
    return {stats::mean(v), std::sqrt(stats::variance(v)), stats::quantile(v, tail), stats::quantile(v, 1.0 - tail)};
}

} // namespace lcurve
