#include <catch_amalgamated.hpp>

#include <cmath>

#include "lcurve/curve_model.hpp"

using namespace lcurve;
using Catch::Matchers::WithinAbs;

TEST_CASE("power law at a known parameter set") {
    // 0.76 - 2.26 * 100^-0.68, evaluated by hand through exp/log
    const double hand = 0.76 - 2.26 * std::exp(-0.68 * std::log(100.0));
    CHECK_THAT(eval_power_law({0.24, 2.26, 0.68}, 100.0), WithinAbs(0.6613, 1e-4));
    CHECK_THAT(eval_power_law({0.24, 2.26, 0.68}, 100.0), WithinAbs(hand, 1e-14));
}

TEST_CASE("power law with vanishing b is flat at 1 - a") {
    for (double n : {1.0, 50.0, 1e6}) CHECK_THAT(eval_power_law({0.2, 0.0, 0.5}, n), WithinAbs(0.8, 1e-15));
}

TEST_CASE("power law approaches 1 - a for large n") {
    const CurveParams p{0.3, 5.0, 0.4};
    CHECK_THAT(eval_power_law(p, 1e15), WithinAbs(0.7, 1e-5));
    CHECK(eval_power_law(p, 1e3) < eval_power_law(p, 1e4));
}

TEST_CASE("transform to unconstrained scale") {
    CHECK(to_transformed({0.5, 1.0, 0.5}).ta == 0.0);
    CHECK(to_transformed({0.5, 1.0, 0.5}).tb == 0.0);
    CHECK_THAT(to_transformed({0.24, 1.0, 0.5}).ta, WithinAbs(-1.1527, 1e-4));
    CHECK_THAT(to_transformed({0.24, 1.0, 0.5}).ta, WithinAbs(std::log(0.24 / 0.76), 1e-15));
}

TEST_CASE("transform back to the natural scale") {
    const auto p = from_transformed({0.0, 0.0, 0.0});
    CHECK(p.a == 0.5);
    CHECK(p.b == 1.0);
    CHECK(p.c == 0.5);
    CHECK_THAT(from_transformed({-1.1527, 0.0, 0.0}).a, WithinAbs(0.24, 1e-4));

    const CurveParams q{0.24, 2.26, 0.68};
    const auto r = from_transformed(to_transformed(q));
    CHECK_THAT(r.a, WithinAbs(q.a, 1e-12));
    CHECK_THAT(r.b, WithinAbs(q.b, 1e-12));
    CHECK_THAT(r.c, WithinAbs(q.c, 1e-12));
}

TEST_CASE("extreme transformed values stay in the parameter domain") {
    for (double t : {-800.0, -40.0, 40.0, 800.0}) {
        const auto p = from_transformed({t, t, t});
        CHECK(p.a > 0.0);
        CHECK(p.a < 1.0);
        CHECK(p.c > 0.0);
        CHECK(p.c < 1.0);
        CHECK(p.b > 0.0);
        CHECK(std::isfinite(p.b));
    }
}

TEST_CASE("analytic gradient matches central differences") {
    const CurveParams p{0.24, 2.26, 0.68};
    const auto t = to_transformed(p);
    const double n = 350.0;
    const double h = 1e-6;
    auto f = [&](TransformedParams u) { return eval_power_law(from_transformed(u), n); };
    const auto g = power_law_gradient(p, n);
    CHECK_THAT(g.d_ta, WithinAbs((f({t.ta + h, t.tb, t.tc}) - f({t.ta - h, t.tb, t.tc})) / (2 * h), 1e-8));
    CHECK_THAT(g.d_tb, WithinAbs((f({t.ta, t.tb + h, t.tc}) - f({t.ta, t.tb - h, t.tc})) / (2 * h), 1e-8));
    CHECK_THAT(g.d_tc, WithinAbs((f({t.ta, t.tb, t.tc + h}) - f({t.ta, t.tb, t.tc - h})) / (2 * h), 1e-8));
}
