#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "lcurve/transfer.hpp"
#include "support/curves.hpp"

using namespace lcurve;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

NlsFit exact_external(const CurveParams& p) {
    NlsFit f;
    f.params = p;
    f.converged = true;
    f.tcov = Eigen::Matrix3d::Identity() * 1e-4;
    return f;
}

McmcConfig short_chain(std::uint64_t seed) {
    McmcConfig m;
    m.iterations = 2000;
    m.burn_in = 1000;
    m.seed = seed;
    return m;
}

GpFit fit_with_draws(const std::vector<GpHyper>& d) {
    GpFit f;
    f.draws = d;
    return f;
}

} // namespace

TEST_CASE("anchored NLS recovers a shifted asymptote") {
    const auto ext = exact_external({0.20, 1.0, 0.5});
    const auto target = testsupport::exact_curve({0.30, 1.0, 0.5}, testsupport::linear_sizes(30, 50, 20));
    const auto fit = nls_anchor(ext, target);
    CHECK(fit.converged);
    CHECK_THAT(fit.params.a, WithinAbs(0.30, 1e-6));
    CHECK(fit.params.b == ext.params.b);
    CHECK(fit.params.c == ext.params.c);
    REQUIRE(fit.anchor.has_value());
    CHECK(fit.anchor->external_digest == fit_digest(ext));
    CHECK(fit.anchor->se_b == ext.natural_se().b);
    CHECK(fit.natural_se().c == ext.natural_se().c);
}

TEST_CASE("anchored NLS from a single target point solves the curve there") {
    const auto ext = exact_external({0.25, 1.7, 0.35});
    const std::vector<PerformancePoint> one{{50, 0.55, 0}};
    const auto fit = nls_anchor(ext, one);
    CHECK_THAT(eval_power_law(fit.params, 50.0), WithinAbs(0.55, 1e-12));
}

TEST_CASE("anchored NLS with an unshifted target returns the external asymptote") {
    const CurveParams truth{0.2, 1.0, 0.5};
    const auto sizes = testsupport::linear_sizes(50, 2000, 20);
    const auto ext = fit_nls(testsupport::noisy_curve(truth, sizes, 50, 0.02, 1));
    REQUIRE(ext.converged);
    const auto fit = nls_anchor(ext, testsupport::noisy_curve(truth, testsupport::linear_sizes(30, 60, 5), 50, 0.02, 2));
    CHECK_THAT(fit.params.a, WithinAbs(ext.params.a, 0.02));
    const std::vector<double> at{1500.0};
    CHECK_NOTHROW(predict_nls(fit, at));
}

TEST_CASE("anchoring to a non-converged fit is refused") {
    auto ext = exact_external({0.2, 1.0, 0.5});
    ext.converged = false;
    const std::vector<PerformancePoint> one{{50, 0.55, 0}};
    CHECK_THROWS_AS(nls_anchor(ext, one), RefusalError);
}

TEST_CASE("Beta moment matching") {
    const auto b = beta_from_moments(0.5, 0.02);
    CHECK_THAT(b.alpha, WithinAbs(5.75, 0.01));
    CHECK_THAT(b.beta, WithinAbs(5.75, 0.01));
    const auto capped = beta_from_moments(0.5, 1.0);
    CHECK(capped.alpha > 0.0);
    CHECK(capped.beta > 0.0);
}

TEST_CASE("matched c prior before inflation") {
    // c draws 0.5 +/- sqrt(0.02 * (n - 1) / n) give sample variance 0.02
    const int n = 400;
    const double half = std::sqrt(0.02 * (n - 1) / n);
    std::vector<GpHyper> d;
    for (int i = 0; i < n; ++i) d.push_back({{0.2, 1.0, 0.5 + (i % 2 ? half : -half)}, 0.05, 1.0, 0.05});
    AnchorOptions opt;
    opt.inflation = 1.0;
    const auto ap = gp_anchor_priors(fit_with_draws(d), opt);
    CHECK_THAT(ap.priors.c.alpha, WithinAbs(5.75, 0.01));
    CHECK_THAT(ap.priors.c.beta, WithinAbs(5.75, 0.01));
}

TEST_CASE("identical draws hit the sd floor") {
    std::vector<GpHyper> d(50, GpHyper{{0.2, 1.2, 0.4}, 0.05, 1.0, 0.05});
    const auto ap = gp_anchor_priors(fit_with_draws(d));
    CHECK_THAT(ap.priors.b.mu, WithinRel(1.2, 1e-14));
    CHECK(ap.priors.b.sd == 1e-3);
    CHECK(std::find(ap.floored.begin(), ap.floored.end(), "b") != ap.floored.end());
    CHECK_THAT(ap.priors.phi.mu, WithinRel(std::log(0.05), 1e-14));
    // untouched priors keep their defaults
    CHECK(ap.priors.a.alpha == 2.0);
    CHECK(ap.priors.rho.sd == 1.0);
    CHECK(ap.priors.sigma_y.mu == 0.0);
}

TEST_CASE("sampling from matched priors reproduces the draw means") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<GpHyper> d;
    for (int i = 0; i < 2000; ++i) {
        d.push_back({{0.2, 1.0 + 0.1 * g(rng), std::clamp(0.5 + 0.05 * g(rng), 0.01, 0.99)}, std::exp(-3 + 0.3 * g(rng)),
                     1.0, 0.05});
    }
    double mb = 0, mc = 0, mlp = 0;
    for (const auto& h : d) {
        mb += h.params.b / d.size();
        mc += h.params.c / d.size();
        mlp += std::log(h.phi) / d.size();
    }
    const auto ap = gp_anchor_priors(fit_with_draws(d));
    std::normal_distribution<double> nb(ap.priors.b.mu, ap.priors.b.sd);
    std::gamma_distribution<double> ga(ap.priors.c.alpha, 1.0), gb(ap.priors.c.beta, 1.0);
    std::normal_distribution<double> nphi(ap.priors.phi.mu, ap.priors.phi.sd);
    const int m = 20000;
    double sb = 0, sc = 0, sp = 0;
    for (int i = 0; i < m; ++i) {
        sb += nb(rng) / m;
        const double x = ga(rng), y = gb(rng);
        sc += x / (x + y) / m;
        sp += nphi(rng) / m;
    }
    CHECK_THAT(sb, WithinAbs(mb, 4 * 0.15 / std::sqrt(m)));
    CHECK_THAT(sc, WithinAbs(mc, 4 * 0.08 / std::sqrt(m)));
    CHECK_THAT(sp, WithinAbs(mlp, 4 * 0.45 / std::sqrt(m)));
}

TEST_CASE("anchored GP with default priors matches the unanchored fit") {
    const auto pts = testsupport::noisy_curve({0.2, 1.0, 0.5}, testsupport::linear_sizes(50, 500, 4), 10, 0.02, 3);
    AnchoredPriors ap;
    ap.priors = PriorSpec{};
    const auto anchored = fit_gp_anchored(pts, ap, short_chain(5));
    const auto plain = fit_gp(pts, {}, short_chain(5));
    REQUIRE(anchored.draws.size() == plain.draws.size());
    bool same = true;
    for (std::size_t i = 0; i < plain.draws.size(); ++i) same = same && anchored.draws[i].params == plain.draws[i].params;
    CHECK(same);
    CHECK(anchored.provenance.anchored);
    CHECK_FALSE(plain.provenance.anchored);
}

TEST_CASE("anchored GP accepts a single target size and concentrates under tight priors") {
    const CurveParams truth{0.25, 1.0, 0.5};
    const std::vector<PerformancePoint> pts{{50, eval_power_law(truth, 50.0), 0}};
    AnchoredPriors ap;
    const double conc = 1e7;
    ap.priors.a = {0.25 * conc, 0.75 * conc};
    ap.priors.c = {0.5 * conc, 0.5 * conc};
    ap.priors.b = {1.0, 1e-5};
    const auto fit = fit_gp_anchored(pts, ap, short_chain(6));
    CHECK_THAT(summarize_param(fit, CurveParam::a).mean, WithinAbs(0.25, 1e-3));
    CHECK_THAT(summarize_param(fit, CurveParam::b).mean, WithinAbs(1.0, 1e-3));
    CHECK_THAT(summarize_param(fit, CurveParam::c).mean, WithinAbs(0.5, 1e-3));
}
