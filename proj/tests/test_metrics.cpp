#include <catch_amalgamated.hpp>

#include <random>
#include <vector>

#include "lcurve/metrics.hpp"
#include "support/oracles.hpp"

using namespace lcurve;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<SurvivalOutcome> outcomes(const std::vector<double>& t, const std::vector<int>& e) {
    std::vector<SurvivalOutcome> o;
    for (std::size_t i = 0; i < t.size(); ++i) o.push_back({t[i], e[i] == 1});
    return o;
}

} // namespace

TEST_CASE("AUC on small hand examples") {
    CHECK(auc_binary(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}) == 1.0);
    CHECK(auc_binary(std::vector<double>{0.5, 0.5}, std::vector<int>{0, 1}) == 0.5);
    CHECK(auc_binary(std::vector<double>{0.4, 0.3, 0.2, 0.8}, std::vector<int>{0, 1, 0, 1}) == 0.75);
}

TEST_CASE("AUC is undefined with a single class") {
    CHECK_THROWS_AS(auc_binary(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), UndefinedMetric);
    CHECK_THROWS_AS(auc_binary(std::vector<double>{0.1, 0.2}, std::vector<int>{0, 0}), UndefinedMetric);
}

TEST_CASE("AUC equals brute-force pair counting with heavy ties") {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 100; ++rep) {
        const int n = 2 + static_cast<int>(rng() % 40);
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (int i = 0; i < n; ++i) {
            s[i] = static_cast<double>(rng() % 5);
            y[i] = static_cast<int>(rng() % 2);
        }
        y[0] = 0;
        y[1] = 1;
        CHECK(auc_binary(s, y) == oracle::auc_pairs(s, y));
    }
}

TEST_CASE("Kaplan-Meier by hand") {
    const auto km = km_estimator(outcomes({2, 4, 5}, {1, 0, 1}));
    CHECK_THAT(km(2.0), WithinAbs(2.0 / 3.0, 1e-15));
    CHECK_THAT(km(4.0), WithinAbs(2.0 / 3.0, 1e-15));
    CHECK(km(5.0) == 0.0);
    CHECK(km(1.0) == 1.0);
    CHECK(km.left_limit(2.0) == 1.0);
    CHECK_THAT(km.left_limit(5.0), WithinAbs(2.0 / 3.0, 1e-15));
}

TEST_CASE("Kaplan-Meier with no events stays at one") {
    const auto km = km_estimator(outcomes({1, 2, 3}, {0, 0, 0}));
    for (double t : {0.5, 1.0, 2.5, 100.0}) CHECK(km(t) == 1.0);
}

TEST_CASE("Kaplan-Meier with a single event") {
    const auto km = km_estimator(outcomes({1}, {1}));
    CHECK(km(1.0) == 0.0);
    CHECK(km(7.0) == 0.0);
    CHECK(km(0.5) == 1.0);
}

TEST_CASE("Uno's C with perfect concordance and discordance") {
    const auto o = outcomes({1, 2, 3}, {1, 1, 1});
    CHECK(uno_c(std::vector<double>{3, 2, 1}, o, 10.0) == 1.0);
    CHECK(uno_c(std::vector<double>{1, 2, 3}, o, 10.0) == 0.0);
}

TEST_CASE("Uno's C matches the literal double sum") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> risk(30);
        std::vector<SurvivalOutcome> o(30);
        for (int i = 0; i < 30; ++i) {
            risk[i] = u(rng);
            o[i] = {std::ceil(10.0 * u(rng)) / 2.0, u(rng) < 0.7}; // coarse times force ties
        }
        o[0] = {0.5, true};
        o[1] = {5.0, false};
        CHECK(uno_c(risk, o, 4.0) == oracle::uno_literal(risk, o, 4.0));
    }
}

TEST_CASE("Uno's C equals Harrell's C without censoring") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<double> risk(25);
        std::vector<SurvivalOutcome> o(25);
        for (int i = 0; i < 25; ++i) o[i] = {u(rng) * 5.0, true}, risk[i] = u(rng);
        CHECK(uno_c(risk, o, 3.0) == harrell_c(risk, o, 3.0));
    }
}

TEST_CASE("Uno's C reports the usable pair count") {
    const auto o = outcomes({1, 2, 3, 3}, {1, 0, 1, 0});
    const auto r = uno_c_detail(std::vector<double>{4, 3, 2, 1}, o, 10.0);
    CHECK(r.usable_pairs == 3); // only the event at t=1 has later subjects
    CHECK(r.excluded_zero_weight == 0);
    CHECK(r.value == 1.0);
}

TEST_CASE("Uno's C without usable pairs is undefined") {
    const auto o = outcomes({1, 2}, {0, 0});
    CHECK_THROWS_AS(uno_c(std::vector<double>{1, 2}, o, 10.0), UndefinedMetric);
}
