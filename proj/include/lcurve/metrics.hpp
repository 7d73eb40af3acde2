#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "lcurve/errors.hpp"

namespace lcurve {

struct SurvivalOutcome {
    double time = 1.0;  // follow-up, > 0
    bool event = false; // true = event observed, false = censored
};

// Right-continuous, non-increasing step function with value 1 before the
// first breakpoint.
struct StepFunction {
    std::vector<double> breakpoints;
    std::vector<double> values;

    double operator()(double t) const {
        const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), t);
        if (it == breakpoints.begin()) return 1.0;
        return values[static_cast<std::size_t>(it - breakpoints.begin()) - 1];
    }

    // Left limit S(t-).
    double left_limit(double t) const {
        const auto it = std::lower_bound(breakpoints.begin(), breakpoints.end(), t);
        if (it == breakpoints.begin()) return 1.0;
        return values[static_cast<std::size_t>(it - breakpoints.begin()) - 1];
    }
};

// Area under the ROC curve: fraction of (positive, negative) pairs ranked
// correctly, ties counted one half. Computed through mid-ranks.
inline double auc_binary(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw InvalidArgument("scores and labels differ in length");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return scores[i] < scores[j]; });

    double pos_rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double mid_rank = 0.5 * static_cast<double>(i + 1 + j); // average of ranks i+1..j
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) {
                pos_rank_sum += mid_rank;
                ++n_pos;
            } else if (labels[order[k]] != 0) {
                throw InvalidArgument("labels must be 0 or 1");
            }
        }
        i = j;
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw UndefinedMetric("AUC needs both classes");
    const double np = static_cast<double>(n_pos);
    const double u = pos_rank_sum - np * (np + 1.0) / 2.0;
    return u / (np * static_cast<double>(n_neg));
}

// Kaplan-Meier product-limit estimate over distinct event times.
inline StepFunction km_estimator(std::span<const SurvivalOutcome> outcomes) {
    std::vector<SurvivalOutcome> s(outcomes.begin(), outcomes.end());
    std::sort(s.begin(), s.end(), [](const auto& x, const auto& y) { return x.time < y.time; });
    StepFunction f;
    double surv = 1.0;
    std::size_t at_risk = s.size();
    for (std::size_t i = 0; i < s.size();) {
        std::size_t j = i;
        std::size_t deaths = 0;
        while (j < s.size() && s[j].time == s[i].time) {
            if (s[j].event) ++deaths;
            ++j;
        }
        if (deaths > 0) {
            surv *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
            f.breakpoints.push_back(s[i].time);
            f.values.push_back(surv);
        }
        at_risk -= j - i;
        i = j;
    }
    return f;
}

struct ConcordanceResult {
    double value = 0.0;
    std::size_t usable_pairs = 0;
    std::size_t excluded_zero_weight = 0; // pairs dropped because G(T_i-) = 0
};

// Uno's censoring-adjusted concordance truncated at tau:
//
//   sum_{i,j} D_i G(T_i-)^-2 I(T_i < T_j, T_i < tau) [I(r_i > r_j) + 0.5 I(r_i = r_j)]
//   ---------------------------------------------------------------------------------
//   sum_{i,j} D_i G(T_i-)^-2 I(T_i < T_j, T_i < tau)
//
// G is the Kaplan-Meier estimate of the censoring distribution. Higher risk
// means earlier expected event.
inline ConcordanceResult uno_c_detail(std::span<const double> risk, std::span<const SurvivalOutcome> outcomes,
                                      double tau) {
    if (risk.size() != outcomes.size()) throw InvalidArgument("risk and outcomes differ in length");
    if (outcomes.size() < 2) throw UndefinedMetric("Uno's C needs at least two subjects");
    if (!(tau > 0.0)) throw InvalidArgument("tau must be positive");

    std::vector<SurvivalOutcome> censoring(outcomes.begin(), outcomes.end());
    for (auto& o : censoring) o.event = !o.event;
    const StepFunction g = km_estimator(censoring);

    ConcordanceResult res;
    double num = 0.0;
    double den = 0.0;
    const std::size_t n = outcomes.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& oi = outcomes[i];
        if (!oi.event || !(oi.time < tau)) continue;
        const double gi = g.left_limit(oi.time);
        for (std::size_t j = 0; j < n; ++j) {
            if (!(oi.time < outcomes[j].time)) continue;
            if (gi <= 0.0) {
                ++res.excluded_zero_weight;
                continue;
            }
            const double w = 1.0 / (gi * gi);
            ++res.usable_pairs;
            den += w;
            if (risk[i] > risk[j]) num += w;
            else if (risk[i] == risk[j]) num += 0.5 * w;
        }
    }
    if (res.usable_pairs == 0 || !(den > 0.0)) throw UndefinedMetric("Uno's C has no usable pairs");
    res.value = num / den;
    return res;
}

inline double uno_c(std::span<const double> risk, std::span<const SurvivalOutcome> outcomes, double tau) {
    return uno_c_detail(risk, outcomes, tau).value;
}

// Harrell's C over the same usable pairs (T_i < T_j, subject i has an event
// before tau), unweighted.
inline double harrell_c(std::span<const double> risk, std::span<const SurvivalOutcome> outcomes, double tau) {
    if (risk.size() != outcomes.size()) throw InvalidArgument("risk and outcomes differ in length");
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (!outcomes[i].event || !(outcomes[i].time < tau)) continue;
        for (std::size_t j = 0; j < outcomes.size(); ++j) {
            if (!(outcomes[i].time < outcomes[j].time)) continue;
            den += 1.0;
            if (risk[i] > risk[j]) num += 1.0;
            else if (risk[i] == risk[j]) num += 0.5;
        }
    }
    if (den == 0.0) throw UndefinedMetric("Harrell's C has no usable pairs");
    return num / den;
}

} // namespace lcurve
