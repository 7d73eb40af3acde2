#pragma once

// Inverse power-law learning curve  y(n) = (1 - a) - b * n^(-c)
//
//   a  minimum achievable error, in (0, 1); the curve tends to 1 - a
//   b  learning rate, > 0
//   c  decay rate, in (0, 1)
//
// Both fitters work on the unconstrained vector (logit a, log b, logit c) so
// every iterate is a valid parameter triple.

#include <cmath>
#include <cstddef>
#include <limits>

namespace lcurve {

struct CurveParams {
    double a = 0.5;
    double b = 1.0;
    double c = 0.5;

    bool valid() const noexcept {
        return a > 0.0 && a < 1.0 && b > 0.0 && std::isfinite(b) && c > 0.0 && c < 1.0;
    }

    friend bool operator==(const CurveParams&, const CurveParams&) = default;
};

struct TransformedParams {
    double ta = 0.0; // logit(a)
    double tb = 0.0; // log(b)
    double tc = 0.0; // logit(c)

    friend bool operator==(const TransformedParams&, const TransformedParams&) = default;
};

// One observed performance estimate: training-pool size n, value y, repeat index.
struct PerformancePoint {
    std::size_t n = 1;
    double y = 0.0;
    std::size_t repeat = 0;
};

inline double logit(double p) noexcept { return std::log(p) - std::log1p(-p); }

// Sigmoid kept strictly inside (0, 1) for every finite input.
inline double sigmoid(double t) noexcept {
    double s;
    if (t >= 0.0) {
        s = 1.0 / (1.0 + std::exp(-t));
    } else {
        const double e = std::exp(t);
        s = e / (1.0 + e);
    }
    constexpr double lo = std::numeric_limits<double>::min();
    const double hi = std::nextafter(1.0, 0.0);
    return s < lo ? lo : (s > hi ? hi : s);
}

inline double eval_power_law(const CurveParams& p, double n) noexcept {
    return (1.0 - p.a) - p.b * std::pow(n, -p.c);
}

inline TransformedParams to_transformed(const CurveParams& p) noexcept {
    return {logit(p.a), std::log(p.b), logit(p.c)};
}

inline CurveParams from_transformed(const TransformedParams& t) noexcept {
    double b = std::exp(t.tb);
    constexpr double bmin = std::numeric_limits<double>::min();
    constexpr double bmax = std::numeric_limits<double>::max();
    b = b < bmin ? bmin : (b > bmax ? bmax : b);
    return {sigmoid(t.ta), b, sigmoid(t.tc)};
}

// Gradient of eval_power_law with respect to (ta, tb, tc) at n.
struct CurveGradient {
    double d_ta;
    double d_tb;
    double d_tc;
};

inline CurveGradient power_law_gradient(const CurveParams& p, double n) noexcept {
    const double decay = p.b * std::pow(n, -p.c);
    return {-p.a * (1.0 - p.a), -decay, decay * std::log(n) * p.c * (1.0 - p.c)};
}

} // namespace lcurve
