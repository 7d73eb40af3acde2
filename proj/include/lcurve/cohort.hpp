#pragma once

// Cohort ingestion from CSV plus synthetic cohort generation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcurve/csv.hpp"
#include "lcurve/data.hpp"
#include "lcurve/errors.hpp"
#include "lcurve/random.hpp"

namespace lcurve {

struct FeatureSpec {
    std::string name;
    bool categorical = false;
};

// {"label": col} or {"time": col, "event": col}, plus
// "features": [{"name": col, "type": "numeric" | "categorical"}].
struct CohortSchema {
    std::optional<std::string> label;
    std::optional<std::string> time;
    std::optional<std::string> event;
    std::vector<FeatureSpec> features;

    OutcomeKind kind() const { return label ? OutcomeKind::binary : OutcomeKind::survival; }

    static CohortSchema from_json(const nlohmann::json& j) {
        CohortSchema s;
        try {
            if (j.contains("label")) s.label = j.at("label").get<std::string>();
            if (j.contains("time")) s.time = j.at("time").get<std::string>();
            if (j.contains("event")) s.event = j.at("event").get<std::string>();
            for (const auto& f : j.at("features")) {
                FeatureSpec fs;
                fs.name = f.at("name").get<std::string>();
                const auto type = f.value("type", std::string("numeric"));
                if (type == "categorical") fs.categorical = true;
                else if (type != "numeric") throw ConfigError("feature '" + fs.name + "': unknown type '" + type + "'");
                s.features.push_back(fs);
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("malformed schema: ") + e.what());
        }
        if (s.label && (s.time || s.event)) throw ConfigError("schema names both a label and a time/event pair");
        if (!s.label && !(s.time && s.event)) throw ConfigError("schema needs 'label' or both 'time' and 'event'");
        if (s.features.empty()) throw ConfigError("schema lists no features");
        return s;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        if (label) j["label"] = *label;
        if (time) j["time"] = *time;
        if (event) j["event"] = *event;
        j["features"] = nlohmann::json::array();
        for (const auto& f : features) {
            j["features"].push_back({{"name", f.name}, {"type", f.categorical ? "categorical" : "numeric"}});
        }
        return j;
    }
};

namespace detail {

inline int parse_flag(const std::string& cell, std::size_t row, const std::string& col) {
    double v = 0.0;
    if (!csv::parse_double(cell, v) || (v != 0.0 && v != 1.0)) {
        throw LoadError("row " + std::to_string(row) + ", column '" + col + "': expected 0 or 1, got '" + cell + "'");
    }
    return v == 1.0 ? 1 : 0;
}

} // namespace detail

// Rows with a missing value in any used column are dropped and counted.
// Categorical columns become indicators "col=level" for every level except
// the first in sorted order. Row numbers in diagnostics are 1-based data rows.
inline Cohort load_cohort(const csv::Table& table, const CohortSchema& schema, const std::string& name = "") {
    std::vector<std::size_t> used;
    std::vector<std::string> used_names;
    auto add = [&](const std::string& col) {
        used.push_back(table.column(col));
        used_names.push_back(col);
    };
    if (schema.label) add(*schema.label);
    else {
        add(*schema.time);
        add(*schema.event);
    }
    for (const auto& f : schema.features) add(f.name);

    Cohort cohort;
    cohort.name = name;
    std::vector<std::size_t> kept;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        bool missing = false;
        for (auto c : used) missing = missing || csv::is_missing(row[c]);
        if (missing) ++cohort.dropped_rows;
        else kept.push_back(r);
    }
    if (kept.empty()) throw LoadError("no rows left after dropping missing values");

    const std::size_t first_feature = schema.label ? 1 : 2;
    std::vector<std::vector<std::string>> levels(schema.features.size());
    std::size_t ncols = 0;
    for (std::size_t f = 0; f < schema.features.size(); ++f) {
        if (schema.features[f].categorical) {
            std::set<std::string> lv;
            for (auto r : kept) lv.insert(table.rows[r][used[first_feature + f]]);
            levels[f].assign(lv.begin(), lv.end());
            ncols += levels[f].size() - 1;
        } else {
            ncols += 1;
        }
    }
    if (ncols == 0) throw LoadError("no feature columns after reference coding");

    auto& X = cohort.features;
    X.values.setZero(static_cast<Eigen::Index>(kept.size()), static_cast<Eigen::Index>(ncols));
    for (std::size_t f = 0; f < schema.features.size(); ++f) {
        const auto& fs = schema.features[f];
        if (fs.categorical) {
            for (std::size_t l = 1; l < levels[f].size(); ++l) X.names.push_back(fs.name + "=" + levels[f][l]);
        } else {
            X.names.push_back(fs.name);
        }
    }

    std::vector<int> labels;
    std::vector<SurvivalOutcome> surv;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        const auto& row = table.rows[kept[i]];
        const std::size_t row_no = kept[i] + 1;
        if (schema.label) {
            labels.push_back(detail::parse_flag(row[used[0]], row_no, *schema.label));
        } else {
            double t = 0.0;
            if (!csv::parse_double(row[used[0]], t)) {
                throw LoadError("row " + std::to_string(row_no) + ", column '" + *schema.time + "': unparseable value '" +
                                row[used[0]] + "'");
            }
            if (!(t > 0.0)) {
                throw LoadError("row " + std::to_string(row_no) + ", column '" + *schema.time +
                                "': time must be positive, got '" + row[used[0]] + "'");
            }
            surv.push_back({t, detail::parse_flag(row[used[1]], row_no, *schema.event) == 1});
        }
        Eigen::Index col = 0;
        for (std::size_t f = 0; f < schema.features.size(); ++f) {
            const auto& cell = row[used[first_feature + f]];
            if (schema.features[f].categorical) {
                for (std::size_t l = 1; l < levels[f].size(); ++l) {
                    X.values(static_cast<Eigen::Index>(i), col++) = cell == levels[f][l] ? 1.0 : 0.0;
                }
            } else {
                double v = 0.0;
                if (!csv::parse_double(cell, v)) {
                    throw LoadError("row " + std::to_string(row_no) + ", column '" + schema.features[f].name +
                                    "': unparseable value '" + cell + "'");
                }
                X.values(static_cast<Eigen::Index>(i), col++) = v;
            }
        }
    }
    cohort.outcome = schema.label ? Outcome::binary(std::move(labels)) : Outcome::time_to_event(std::move(surv));
    cohort.provenance = "csv";
    return cohort;
}

inline Cohort load_cohort(const std::string& path, const CohortSchema& schema) {
    auto c = load_cohort(csv::read_file(path), schema, path);
    c.provenance = "csv:" + path;
    return c;
}

enum class SynthKind { binary_logistic, survival_exponential };

struct SynthSpec {
    SynthKind kind = SynthKind::binary_logistic;
    std::size_t n = 1000;
    std::vector<double> coefficients{1.0};
    double intercept = 0.0;        // binary
    double baseline_hazard = 0.1;  // survival
    double censoring_rate = 0.0;   // survival, target fraction censored
    std::uint64_t seed = 1;
};

namespace detail {

// Upper bound u of Uniform(0, u) censoring such that the expected censored
// fraction over the given event times equals target.
inline double censoring_bound(const std::vector<double>& t, double target) {
    auto censored = [&](double u) {
        double s = 0.0;
        for (double ti : t) s += std::min(ti, u) / u;
        return s / static_cast<double>(t.size());
    };
    double lo = std::log(*std::min_element(t.begin(), t.end())) - 30.0;
    double hi = std::log(*std::max_element(t.begin(), t.end())) + 30.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (censored(std::exp(mid)) > target) lo = mid;
        else hi = mid;
    }
    return std::exp(0.5 * (lo + hi));
}

} // namespace detail

inline Cohort generate_synthetic(const SynthSpec& spec) {
    if (spec.n < 10) throw InvalidArgument("synthetic cohort needs n >= 10");
    if (spec.coefficients.empty()) throw InvalidArgument("synthetic cohort needs at least one coefficient");
    if (!(spec.censoring_rate >= 0.0 && spec.censoring_rate < 1.0)) throw InvalidArgument("censoring rate must be in [0, 1)");
    if (spec.kind == SynthKind::survival_exponential && !(spec.baseline_hazard > 0.0)) {
        throw InvalidArgument("baseline hazard must be positive");
    }

    Rng rng = make_stream(spec.seed, {stream::kSynthetic});
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    const auto p = spec.coefficients.size();
    Cohort c;
    c.name = "synthetic";
    c.features.values.resize(static_cast<Eigen::Index>(spec.n), static_cast<Eigen::Index>(p));
    for (std::size_t j = 0; j < p; ++j) c.features.names.push_back("x" + std::to_string(j + 1));
    std::vector<double> eta(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        double lp = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            const double x = normal(rng);
            c.features.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x;
            lp += spec.coefficients[j] * x;
        }
        eta[i] = lp;
    }

    if (spec.kind == SynthKind::binary_logistic) {
        std::vector<int> y(spec.n);
        for (std::size_t i = 0; i < spec.n; ++i) {
            const double prob = 1.0 / (1.0 + std::exp(-(spec.intercept + eta[i])));
            y[i] = unif(rng) < prob ? 1 : 0;
        }
        c.outcome = Outcome::binary(std::move(y));
        c.provenance = "synthetic:binary-logistic";
    } else {
        std::vector<double> t(spec.n);
        for (std::size_t i = 0; i < spec.n; ++i) {
            const double rate = spec.baseline_hazard * std::exp(eta[i]);
            t[i] = -std::log1p(-unif(rng)) / rate;
            if (!(t[i] > 0.0)) t[i] = std::numeric_limits<double>::min();
        }
        std::vector<SurvivalOutcome> s(spec.n);
        const double u = spec.censoring_rate > 0.0 ? detail::censoring_bound(t, spec.censoring_rate) : 0.0;
        for (std::size_t i = 0; i < spec.n; ++i) {
            if (spec.censoring_rate > 0.0) {
                double ci = u * unif(rng);
                if (!(ci > 0.0)) ci = std::numeric_limits<double>::min();
                s[i] = ci < t[i] ? SurvivalOutcome{ci, false} : SurvivalOutcome{t[i], true};
            } else {
                s[i] = {t[i], true};
            }
        }
        c.outcome = Outcome::time_to_event(std::move(s));
        c.provenance = "synthetic:survival-exponential";
    }
    return c;
}

// Schema matching the columns written by write_cohort_csv.
inline CohortSchema schema_for(const Cohort& c) {
    CohortSchema s;
    if (c.outcome.kind == OutcomeKind::binary) s.label = "label";
    else {
        s.time = "time";
        s.event = "event";
    }
    for (const auto& n : c.features.names) s.features.push_back({n, false});
    return s;
}

inline void write_cohort_csv(const Cohort& c, std::ostream& out) {
    const bool binary = c.outcome.kind == OutcomeKind::binary;
    out << (binary ? "label" : "time,event");
    for (const auto& n : c.features.names) out << ',' << csv::quote_if_needed(n);
    out << '\n';
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (binary) out << c.outcome.labels[i];
        else out << csv::format_double(c.outcome.survival[i].time) << ',' << (c.outcome.survival[i].event ? 1 : 0);
        for (std::size_t j = 0; j < c.features.cols(); ++j) {
            out << ',' << csv::format_double(c.features.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        }
        out << '\n';
    }
}

} // namespace lcurve
