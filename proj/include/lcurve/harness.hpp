#pragma once

// Repeated-subsampling evaluation harness.
//
// For every size s on the grid and every repeat r:
//   1. draw s subjects without replacement from the pool of total_n subjects;
//   2. split them train/test, stratified on the outcome;
//   3. fit the predictor on train, score test, compute the metric.
// Each (size index, repeat) pair has its own RNG stream, so the table does
// not depend on execution order or thread count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "lcurve/curve_model.hpp"
#include "lcurve/data.hpp"
#include "lcurve/errors.hpp"
#include "lcurve/metrics.hpp"
#include "lcurve/predictors.hpp"
#include "lcurve/random.hpp"
#include "lcurve/sampling.hpp"
#include "lcurve/stats.hpp"

namespace lcurve {

enum class GridSpacing { linear, log };

// redraw: a fresh subsample for every repeat.
// resplit: one subsample per size, re-split for every repeat.
enum class ResampleMode { redraw, resplit };

struct HarnessConfig {
    std::size_t total_n = 0;
    std::size_t m = 50;
    std::size_t s1 = 50;
    std::size_t k = 100;
    double split_fraction = 0.7;
    std::uint64_t seed = 1;
    std::string predictor = "logistic"; // logistic | cox | adapter:<command>
    std::string metric = "auc";         // auc | uno
    double tau = 10.0;
    bool calibrate = false; // Platt-calibrate binary predictors
    GridSpacing spacing = GridSpacing::linear;
    ResampleMode mode = ResampleMode::redraw;
    unsigned threads = 1;
    bool record_indices = false;
};

// m points from s1 to N (linear or log spaced), rounded half up and
// deduplicated; always starts at s1 and ends at N.
inline std::vector<std::size_t> make_size_grid(std::size_t s1, std::size_t n, std::size_t m,
                                               GridSpacing spacing = GridSpacing::linear) {
    if (s1 < 1 || s1 > n) throw InvalidArgument("size grid needs 1 <= s1 <= N");
    if (m < 2) throw InvalidArgument("size grid needs m >= 2");
    std::vector<std::size_t> out;
    out.reserve(m);
    const double lo = static_cast<double>(s1);
    const double hi = static_cast<double>(n);
    for (std::size_t i = 0; i < m; ++i) {
        double v;
        if (i == 0) v = lo;
        else if (i + 1 == m) v = hi;
        else if (spacing == GridSpacing::linear) v = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(m - 1);
        else v = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * static_cast<double>(i) / static_cast<double>(m - 1));
        const auto r = static_cast<std::size_t>(std::floor(v + 0.5));
        if (out.empty() || r != out.back()) out.push_back(r);
    }
    return out;
}

struct RepeatRecord {
    std::size_t size_index = 0;
    std::size_t size = 0;
    std::size_t repeat = 0;
    double value = std::numeric_limits<double>::quiet_NaN();
    std::string status = "ok"; // "ok" or the error kind
    std::string message;
    std::size_t singleton_strata = 0;
    std::vector<std::size_t> subsample; // filled when record_indices is set
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;

    bool ok() const { return status == "ok"; }
};

struct SizeSummary {
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;
    std::size_t k_eff = 0;
    double lower = 0.0; // 2.5% quantile of the raw estimates
    double upper = 0.0; // 97.5% quantile
};

struct PerformanceTable {
    HarnessConfig config;
    std::vector<std::size_t> grid;
    std::vector<RepeatRecord> records; // size-major, repeat-minor
    std::vector<PerformancePoint> points;
    std::size_t missing = 0;
    std::size_t pool_size = 0;

    std::vector<SizeSummary> summaries() const {
        std::vector<SizeSummary> out;
        for (std::size_t g = 0; g < grid.size(); ++g) {
            std::vector<double> v;
            for (const auto& r : records) {
                if (r.size_index == g && r.ok()) v.push_back(r.value);
            }
            SizeSummary s;
            s.n = grid[g];
            s.k_eff = v.size();
            if (!v.empty()) {
                s.mean = stats::mean(v);
                s.sd = std::sqrt(stats::variance(v));
                s.lower = stats::quantile(v, 0.025);
                s.upper = stats::quantile(v, 0.975);
            } else {
                s.mean = s.sd = s.lower = s.upper = std::numeric_limits<double>::quiet_NaN();
            }
            out.push_back(s);
        }
        return out;
    }
};

inline std::shared_ptr<const PredictorAdapter> make_predictor(const std::string& id, bool calibrate) {
    std::shared_ptr<const PredictorAdapter> base;
    if (id == "logistic") base = std::make_shared<LogisticAdapter>();
    else if (id == "cox") base = std::make_shared<CoxAdapter>();
    else if (id.rfind("adapter:", 0) == 0 && id.size() > 8) base = std::make_shared<SubprocessAdapter>(id.substr(8));
    else throw ConfigError("unknown predictor '" + id + "'");
    if (calibrate) {
        if (!base->supports(OutcomeKind::binary)) throw ConfigError("Platt calibration needs a binary predictor");
        return std::make_shared<PlattCalibratedAdapter>(base);
    }
    return base;
}

inline void validate_config(const HarnessConfig& c, const Cohort& cohort, const PredictorAdapter& predictor) {
    if (c.total_n == 0) throw ConfigError("total_n must be positive");
    if (c.s1 < 10) throw ConfigError("s1 must be at least 10");
    if (c.s1 > c.total_n) throw ConfigError("s1 exceeds total_n");
    if (c.m < 3) throw ConfigError("m must be at least 3");
    if (c.k < 1) throw ConfigError("k must be at least 1");
    if (!(c.split_fraction > 0.0 && c.split_fraction < 1.0)) throw ConfigError("split fraction must be in (0, 1)");
    if (cohort.size() < c.total_n) throw ConfigError("cohort has fewer subjects than total_n");
    if (cohort.outcome.size() != cohort.size()) throw ConfigError("cohort outcome length differs from row count");
    const auto kind = cohort.outcome.kind;
    if (c.metric == "auc") {
        if (kind != OutcomeKind::binary) throw ConfigError("metric 'auc' needs a binary outcome");
    } else if (c.metric == "uno") {
        if (kind != OutcomeKind::survival) throw ConfigError("metric 'uno' needs a survival outcome");
        if (!(c.tau > 0.0)) throw ConfigError("tau must be positive");
    } else {
        throw ConfigError("unknown metric '" + c.metric + "'");
    }
    if (!predictor.supports(kind)) {
        throw ConfigError("predictor '" + predictor.name() + "' does not support " + to_string(kind) + " outcomes");
    }
}

namespace detail {

inline double evaluate_metric(const HarnessConfig& c, const std::vector<double>& scores, const Outcome& test) {
    if (c.metric == "auc") return auc_binary(scores, test.labels);
    return uno_c(scores, test.survival, c.tau);
}

inline void run_repeat(const Cohort& cohort, const HarnessConfig& c, const PredictorAdapter& predictor,
                       const std::vector<std::size_t>& pool, const std::vector<std::vector<std::size_t>>& fixed_subsamples,
                       RepeatRecord& rec) {
    Rng rng = make_stream(c.seed, {stream::kRepeat, rec.size_index, rec.repeat});
    try {
        std::vector<std::size_t> sub = c.mode == ResampleMode::redraw
                                           ? subsample_without_replacement(pool, rec.size, rng)
                                           : fixed_subsamples[rec.size_index];
        std::vector<int> keys(sub.size());
        for (std::size_t i = 0; i < sub.size(); ++i) keys[i] = cohort.outcome.stratum(sub[i]);
        Split split = stratified_split(sub, keys, c.split_fraction, rng);
        rec.singleton_strata = split.singleton_strata;
        if (c.record_indices) {
            rec.subsample = sub;
            rec.train = split.train;
            rec.test = split.test;
        }
        if (split.test.empty()) throw UndefinedMetric("empty test split");
        const auto model = predictor.fit(cohort.features.select_rows(split.train), cohort.outcome.select(split.train),
                                         derive_seed(c.seed, {stream::kRepeat, rec.size_index, rec.repeat, 1}));
        const auto scores = model->score(cohort.features.select_rows(split.test));
        rec.value = evaluate_metric(c, scores, cohort.outcome.select(split.test));
        if (!std::isfinite(rec.value)) throw NumericalFailure("non-finite metric value");
        rec.status = "ok";
    } catch (const Error& e) {
        rec.value = std::numeric_limits<double>::quiet_NaN();
        rec.status = e.kind();
        rec.message = e.what();
    }
}

} // namespace detail

inline PerformanceTable run_harness(const Cohort& cohort, const HarnessConfig& config,
                                    const PredictorAdapter& predictor) {
    validate_config(config, cohort, predictor);

    PerformanceTable table;
    table.config = config;
    table.grid = make_size_grid(config.s1, config.total_n, config.m, config.spacing);

    std::vector<std::size_t> all(cohort.size());
    std::iota(all.begin(), all.end(), 0);
    std::vector<std::size_t> pool;
    if (config.total_n < cohort.size()) {
        Rng rng = make_stream(config.seed, {stream::kPool});
        pool = subsample_without_replacement(all, config.total_n, rng);
    } else {
        pool = std::move(all);
    }
    table.pool_size = pool.size();

    std::vector<std::vector<std::size_t>> fixed;
    if (config.mode == ResampleMode::resplit) {
        for (std::size_t g = 0; g < table.grid.size(); ++g) {
            Rng rng = make_stream(config.seed, {stream::kSubsample, g});
            fixed.push_back(subsample_without_replacement(pool, table.grid[g], rng));
        }
    }

    table.records.resize(table.grid.size() * config.k);
    for (std::size_t g = 0; g < table.grid.size(); ++g) {
        for (std::size_t r = 0; r < config.k; ++r) {
            auto& rec = table.records[g * config.k + r];
            rec.size_index = g;
            rec.size = table.grid[g];
            rec.repeat = r;
        }
    }

    const unsigned workers = std::max(1u, config.threads);
    if (workers == 1) {
        for (auto& rec : table.records) detail::run_repeat(cohort, config, predictor, pool, fixed, rec);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> threads;
        for (unsigned w = 0; w < workers; ++w) {
            threads.emplace_back([&] {
                for (std::size_t i = next++; i < table.records.size(); i = next++) {
                    detail::run_repeat(cohort, config, predictor, pool, fixed, table.records[i]);
                }
            });
        }
        for (auto& t : threads) t.join();
    }

    for (const auto& rec : table.records) {
        if (rec.ok()) table.points.push_back({rec.size, rec.value, rec.repeat});
        else ++table.missing;
    }
    return table;
}

inline PerformanceTable run_harness(const Cohort& cohort, const HarnessConfig& config) {
    const auto predictor = make_predictor(config.predictor, config.calibrate);
    return run_harness(cohort, config, *predictor);
}

} // namespace lcurve
