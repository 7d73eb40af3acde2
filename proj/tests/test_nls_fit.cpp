#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "lcurve/nls_fit.hpp"
#include "support/curves.hpp"
#include "support/oracles.hpp"

using namespace lcurve;
using Catch::Matchers::WithinAbs;

namespace {
const CurveParams kTruth{0.2, 1.0, 0.5};
}

TEST_CASE("aggregate computes per-size mean and unbiased variance") {
    const std::vector<PerformancePoint> pts{{50, 0.6, 0}, {50, 0.8, 1}, {100, 0.7, 0}, {200, 0.75, 0}};
    const auto agg = aggregate(pts);
    REQUIRE(agg.size() == 3);
    CHECK(agg[0].n == 50);
    CHECK_THAT(agg[0].mean_y, WithinAbs(0.7, 1e-15));
    CHECK_THAT(agg[0].var_y, WithinAbs(0.02, 1e-15));
    CHECK(agg[0].k_eff == 2);
    CHECK_THAT(agg[1].mean_y, WithinAbs(0.7, 1e-15));
    CHECK_THAT(agg[2].mean_y, WithinAbs(0.75, 1e-15));
}

TEST_CASE("aggregate with one repeat per size") {
    const std::vector<PerformancePoint> pts{{50, 0.6, 0}, {100, 0.7, 0}, {200, 0.75, 0}};
    for (const auto& a : aggregate(pts)) {
        CHECK(a.var_y == 0.0);
        CHECK(a.k_eff == 1);
    }
}

TEST_CASE("two distinct sizes are not identifiable") {
    const std::vector<PerformancePoint> pts{{50, 0.6, 0}, {50, 0.62, 1}, {100, 0.7, 0}};
    CHECK_THROWS_AS(aggregate(pts), IdentifiabilityError);
    CHECK_THROWS_AS(fit_nls(pts), IdentifiabilityError);
}

TEST_CASE("performance values outside [0, 1] are rejected") {
    const std::vector<PerformancePoint> pts{{50, 0.6, 0}, {100, 1.2, 0}, {200, 0.75, 0}};
    CHECK_THROWS_AS(fit_nls(pts), InvalidArgument);
}

TEST_CASE("weight doubles when the repeat count doubles at fixed variance") {
    AggregatedPoint p{100, 0.7, 0.004, 10};
    AggregatedPoint q = p;
    q.k_eff = 20;
    CHECK(nls_weight(q) == 2.0 * nls_weight(p));
    p.var_y = 0.0;
    CHECK(nls_weight(p) == 10.0 / kDefaultVarianceFloor);
}

TEST_CASE("noiseless data recovers the generating curve") {
    const auto sizes = testsupport::linear_sizes(50, 2000, 20);
    const auto fit = fit_nls(testsupport::exact_curve(kTruth, sizes));
    CHECK(fit.converged);
    CHECK_THAT(fit.params.a, WithinAbs(0.2, 1e-4));
    CHECK_THAT(fit.params.b, WithinAbs(1.0, 1e-4));
    CHECK_THAT(fit.params.c, WithinAbs(0.5, 1e-4));

    // independent recovery from three of the points
    const auto o = oracle::three_point_solve(50, eval_power_law(kTruth, 50), 500, eval_power_law(kTruth, 500), 2000,
                                             eval_power_law(kTruth, 2000));
    CHECK_THAT(fit.params.a, WithinAbs(o.a, 1e-4));
    CHECK_THAT(fit.params.b, WithinAbs(o.b, 1e-4));
    CHECK_THAT(fit.params.c, WithinAbs(o.c, 1e-4));

    const std::vector<double> far{1e6};
    const auto pred = predict_nls(fit, far);
    CHECK(pred.mean[0] > 0.795);
    CHECK(pred.mean[0] < 0.800);
}

TEST_CASE("flat data drives b toward zero") {
    std::vector<PerformancePoint> pts;
    for (std::size_t n : {50u, 100u, 200u, 400u, 800u}) {
        for (std::size_t r = 0; r < 3; ++r) pts.push_back({n, 0.7, r});
    }
    const auto fit = fit_nls(pts);
    CHECK_THAT(fit.params.a, WithinAbs(0.3, 1e-3));
    CHECK(fit.params.b * std::pow(50.0, -fit.params.c) < 1e-3);
}

TEST_CASE("LM objective never increases across accepted steps") {
    LmOptions opt;
    opt.record_trace = true;
    const auto pts = testsupport::noisy_curve(kTruth, testsupport::linear_sizes(50, 2000, 15), 20, 0.02, 3);
    const auto fit = fit_nls(pts, std::nullopt, opt);
    REQUIRE(fit.rss_trace.size() >= 2);
    for (std::size_t i = 1; i < fit.rss_trace.size(); ++i) CHECK(fit.rss_trace[i] <= fit.rss_trace[i - 1]);
    for (const auto& p : fit.iterate_trace) CHECK(p.valid());
}

TEST_CASE("zero covariance gives a zero-width interval at the curve value") {
    NlsFit fit;
    fit.params = {0.25, 1.5, 0.4};
    fit.converged = true;
    const std::vector<double> sizes{10.0, 100.0, 1000.0};
    const auto pred = predict_nls(fit, sizes);
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        CHECK(pred.mean[i] == eval_power_law(fit.params, sizes[i]));
        CHECK(pred.lower[i] == pred.mean[i]);
        CHECK(pred.upper[i] == pred.mean[i]);
    }
}

TEST_CASE("non-converged fits are refused unless overridden") {
    NlsFit fit;
    fit.converged = false;
    const std::vector<double> sizes{100.0};
    CHECK_THROWS_AS(predict_nls(fit, sizes), RefusalError);
    CHECK_NOTHROW(predict_nls(fit, sizes, 0.95, true));
}

TEST_CASE("interval widens beyond the largest observed size") {
    const auto sizes = testsupport::linear_sizes(50, 2000, 50);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto fit = fit_nls(testsupport::noisy_curve(kTruth, sizes, 100, 0.02, seed));
        REQUIRE(fit.converged);
        std::vector<double> beyond;
        for (double n = 2000; n <= 64000; n *= 2) beyond.push_back(n);
        const auto pred = predict_nls(fit, beyond);
        for (std::size_t i = 1; i < beyond.size(); ++i) {
            CHECK(pred.upper[i] - pred.lower[i] > pred.upper[i - 1] - pred.lower[i - 1]);
        }
    }
}

TEST_CASE("predicted mean equals the fitted curve") {
    const auto fit = fit_nls(testsupport::noisy_curve(kTruth, testsupport::linear_sizes(50, 2000, 10), 30, 0.02, 9));
    const std::vector<double> sizes{75.0, 5000.0};
    const auto pred = predict_nls(fit, sizes);
    CHECK(pred.mean[0] == eval_power_law(fit.params, 75.0));
    CHECK(pred.lower[1] < pred.mean[1]);
    CHECK(pred.upper[1] > pred.mean[1]);
}

TEST_CASE("fitting is deterministic") {
    const auto pts = testsupport::noisy_curve(kTruth, testsupport::linear_sizes(50, 2000, 10), 30, 0.02, 4);
    const auto f1 = fit_nls(pts);
    const auto f2 = fit_nls(pts);
    CHECK(f1.params == f2.params);
    CHECK(f1.tcov == f2.tcov);
}
