#pragma once

// JSON and CSV persistence for fits, performance tables and predictions.
// nlohmann::json writes doubles in shortest round-trip form, so a fit read
// back from JSON predicts bit-identically to the in-memory one.

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcurve/csv.hpp"
#include "lcurve/errors.hpp"
#include "lcurve/gp_fit.hpp"
#include "lcurve/harness.hpp"
#include "lcurve/nls_fit.hpp"
#include "lcurve/prediction.hpp"

namespace lcurve {

using json = nlohmann::json;

namespace detail {

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline double number_or_nan(const json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

template <class F>
auto guarded(const char* what, F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw LoadError(std::string("malformed ") + what + ": " + e.what());
    }
}

} // namespace detail

// ---- NLS fit ----

inline json to_json(const NlsFit& f) {
    const auto se = f.natural_se();
    json j{{"method", "nls"},
           {"a", f.params.a},
           {"b", f.params.b},
           {"c", f.params.c},
           {"se_a", se.a},
           {"se_b", se.b},
           {"se_c", se.c},
           {"rss", f.rss},
           {"converged", f.converged},
           {"iterations", f.iterations},
           {"size_grid", f.size_grid}};
    json tcov = json::array();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) tcov.push_back(f.tcov(r, c));
    j["tcov"] = tcov;
    if (f.anchor) {
        j["anchored"] = {{"external_digest", f.anchor->external_digest},
                         {"se_b", f.anchor->se_b},
                         {"se_c", f.anchor->se_c}};
    } else {
        j["anchored"] = nullptr;
    }
    return j;
}

inline NlsFit nls_fit_from_json(const json& j) {
    return detail::guarded("NLS fit JSON", [&] {
        if (j.at("method") != "nls") throw LoadError("fit JSON is not an NLS fit");
        NlsFit f;
        f.params = {j.at("a").get<double>(), j.at("b").get<double>(), j.at("c").get<double>()};
        const auto& t = j.at("tcov");
        if (t.size() != 9) throw LoadError("tcov must have 9 entries");
        for (int i = 0; i < 9; ++i) f.tcov(i / 3, i % 3) = t.at(static_cast<std::size_t>(i)).get<double>();
        f.rss = j.at("rss").get<double>();
        f.converged = j.at("converged").get<bool>();
        f.iterations = j.at("iterations").get<int>();
        f.size_grid = j.at("size_grid").get<std::vector<std::size_t>>();
        if (j.contains("anchored") && !j.at("anchored").is_null()) {
            const auto& a = j.at("anchored");
            f.anchor = NlsAnchorInfo{a.at("external_digest").get<std::string>(), a.at("se_b").get<double>(),
                                     a.at("se_c").get<double>()};
        }
        return f;
    });
}

// ---- GP fit ----

inline json to_json(const PriorSpec& p) {
    return {{"a", {{"alpha", p.a.alpha}, {"beta", p.a.beta}}},
            {"c", {{"alpha", p.c.alpha}, {"beta", p.c.beta}}},
            {"b", {{"mu", p.b.mu}, {"sd", p.b.sd}}},
            {"phi", {{"mu", p.phi.mu}, {"sd", p.phi.sd}}},
            {"rho", {{"mu", p.rho.mu}, {"sd", p.rho.sd}}},
            {"sigma_y", {{"mu", p.sigma_y.mu}, {"sd", p.sigma_y.sd}}}};
}

inline PriorSpec prior_spec_from_json(const json& j) {
    PriorSpec p;
    p.a = {j.at("a").at("alpha").get<double>(), j.at("a").at("beta").get<double>()};
    p.c = {j.at("c").at("alpha").get<double>(), j.at("c").at("beta").get<double>()};
    p.b = {j.at("b").at("mu").get<double>(), j.at("b").at("sd").get<double>()};
    p.phi = {j.at("phi").at("mu").get<double>(), j.at("phi").at("sd").get<double>()};
    p.rho = {j.at("rho").at("mu").get<double>(), j.at("rho").at("sd").get<double>()};
    p.sigma_y = {j.at("sigma_y").at("mu").get<double>(), j.at("sigma_y").at("sd").get<double>()};
    return p;
}

inline json to_json(const GpFit& f) {
    json draws = json::array();
    for (const auto& d : f.draws) {
        draws.push_back({d.params.a, d.params.b, d.params.c, d.phi, d.rho, d.sigma_y});
    }
    json data = json::array();
    for (const auto& p : f.data) {
        data.push_back({{"n", p.n}, {"mean", p.mean_y}, {"var", p.var_y}, {"k_eff", p.k_eff}});
    }
    json prov{{"anchored", f.provenance.anchored}};
    if (f.provenance.anchored) {
        prov["external_digest"] = f.provenance.external_digest;
        prov["inflation"] = f.provenance.inflation;
    }
    return {{"method", "gp"},
            {"seed", f.seed},
            {"acceptance_rate", f.acceptance_rate},
            {"rescale", f.rescale},
            {"draw_columns", {"a", "b", "c", "phi", "rho", "sigma_y"}},
            {"draws", draws},
            {"data", data},
            {"priors", to_json(f.priors)},
            {"warnings", f.warnings},
            {"provenance", prov}};
}

inline GpFit gp_fit_from_json(const json& j) {
    return detail::guarded("GP fit JSON", [&] {
        if (j.at("method") != "gp") throw LoadError("fit JSON is not a GP fit");
        GpFit f;
        f.seed = j.at("seed").get<std::uint64_t>();
        f.acceptance_rate = j.at("acceptance_rate").get<double>();
        f.rescale = j.at("rescale").get<double>();
        for (const auto& d : j.at("draws")) {
            if (d.size() != 6) throw LoadError("each draw must have 6 entries");
            GpHyper h;
            h.params = {d[0].get<double>(), d[1].get<double>(), d[2].get<double>()};
            h.phi = d[3].get<double>();
            h.rho = d[4].get<double>();
            h.sigma_y = d[5].get<double>();
            f.draws.push_back(h);
        }
        for (const auto& p : j.at("data")) {
            f.data.push_back({p.at("n").get<std::size_t>(), p.at("mean").get<double>(), p.at("var").get<double>(),
                              p.at("k_eff").get<std::size_t>()});
        }
        f.priors = prior_spec_from_json(j.at("priors"));
        f.warnings = j.value("warnings", std::vector<std::string>{});
        const auto& prov = j.at("provenance");
        f.provenance.anchored = prov.at("anchored").get<bool>();
        if (f.provenance.anchored) {
            f.provenance.external_digest = prov.at("external_digest").get<std::string>();
            f.provenance.inflation = prov.at("inflation").get<double>();
        }
        return f;
    });
}

using AnyFit = std::variant<NlsFit, GpFit>;

inline AnyFit fit_from_json(const json& j) {
    const auto method = detail::guarded("fit JSON", [&] { return j.at("method").get<std::string>(); });
    if (method == "nls") return nls_fit_from_json(j);
    if (method == "gp") return gp_fit_from_json(j);
    throw LoadError("unknown fit method '" + method + "'");
}

// ---- performance table ----

inline const char* to_string(GridSpacing s) { return s == GridSpacing::linear ? "linear" : "log"; }
inline const char* to_string(ResampleMode m) { return m == ResampleMode::redraw ? "redraw" : "resplit"; }

inline json to_json(const HarnessConfig& c) {
    return {{"total_n", c.total_n},   {"m", c.m},
            {"s1", c.s1},             {"k", c.k},
            {"split_fraction", c.split_fraction},
            {"seed", c.seed},         {"predictor", c.predictor},
            {"metric", c.metric},     {"tau", c.tau},
            {"calibrate", c.calibrate},
            {"spacing", to_string(c.spacing)},
            {"mode", to_string(c.mode)}};
}

// Size-major rows: size, repeat, metric_value, status. Missing values are NA.
inline void write_table_csv(const PerformanceTable& t, std::ostream& out) {
    out << "size,repeat,metric_value,status\n";
    for (const auto& r : t.records) {
        out << r.size << ',' << r.repeat << ',' << csv::format_double(r.value) << ',' << r.status << '\n';
    }
}

inline json to_json(const PerformanceTable& t) {
    json summaries = json::array();
    for (const auto& s : t.summaries()) {
        summaries.push_back({{"size", s.n},
                             {"mean", detail::number_or_null(s.mean)},
                             {"sd", detail::number_or_null(s.sd)},
                             {"k_eff", s.k_eff},
                             {"lower", detail::number_or_null(s.lower)},
                             {"upper", detail::number_or_null(s.upper)}});
    }
    json records = json::array();
    for (const auto& r : t.records) {
        json rec{{"size", r.size},
                 {"repeat", r.repeat},
                 {"metric_value", detail::number_or_null(r.value)},
                 {"status", r.status}};
        if (!r.message.empty()) rec["message"] = r.message;
        if (r.singleton_strata) rec["singleton_strata"] = r.singleton_strata;
        if (t.config.record_indices) {
            rec["subsample"] = r.subsample;
            rec["train"] = r.train;
            rec["test"] = r.test;
        }
        records.push_back(rec);
    }
    return {{"config", to_json(t.config)}, {"grid", t.grid},        {"pool_size", t.pool_size},
            {"missing", t.missing},        {"summaries", summaries}, {"records", records}};
}

// Performance points from either table format; rows whose status is not
// "ok" are skipped.
inline std::vector<PerformancePoint> points_from_table_csv(std::istream& in) {
    const auto t = csv::read_stream(in);
    const auto ci = t.column("size");
    const auto cr = t.column("repeat");
    const auto cv = t.column("metric_value");
    const auto cs = t.column("status");
    std::vector<PerformancePoint> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        if (row[cs] != "ok") continue;
        double n = 0.0, rep = 0.0, v = 0.0;
        if (!csv::parse_double(row[ci], n) || !csv::parse_double(row[cr], rep) || !csv::parse_double(row[cv], v)) {
            throw LoadError("table row " + std::to_string(r + 1) + ": unparseable value");
        }
        out.push_back({static_cast<std::size_t>(n), v, static_cast<std::size_t>(rep)});
    }
    return out;
}

inline std::vector<PerformancePoint> points_from_table_json(const json& j) {
    return detail::guarded("performance table JSON", [&] {
        std::vector<PerformancePoint> out;
        for (const auto& r : j.at("records")) {
            if (r.at("status") != "ok") continue;
            out.push_back({r.at("size").get<std::size_t>(), r.at("metric_value").get<double>(),
                           r.at("repeat").get<std::size_t>()});
        }
        return out;
    });
}

// ---- predictions and report ----

inline void write_prediction_csv(const CurvePrediction& p, std::ostream& out) {
    out << "size,mean,lower,upper,level\n";
    for (std::size_t i = 0; i < p.sizes.size(); ++i) {
        out << csv::format_double(p.sizes[i]) << ',' << csv::format_double(p.mean[i]) << ','
            << csv::format_double(p.lower[i]) << ',' << csv::format_double(p.upper[i]) << ','
            << csv::format_double(p.level) << '\n';
    }
}

struct ReportRow {
    double size = 0.0;
    double observed_mean = std::numeric_limits<double>::quiet_NaN(); // NA off the observed grid
    double fitted_mean = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

// Observed per-size means joined with a fitted curve on the union of the
// observed sizes and any extra sizes.
inline std::vector<ReportRow> make_report(std::span<const PerformancePoint> points, const CurvePrediction& fitted) {
    std::vector<ReportRow> rows;
    const auto agg = aggregate(points, 1);
    for (std::size_t i = 0; i < fitted.sizes.size(); ++i) {
        ReportRow r;
        r.size = fitted.sizes[i];
        for (const auto& a : agg) {
            if (static_cast<double>(a.n) == r.size) r.observed_mean = a.mean_y;
        }
        r.fitted_mean = fitted.mean[i];
        r.lower = fitted.lower[i];
        r.upper = fitted.upper[i];
        rows.push_back(r);
    }
    return rows;
}

inline void write_report_csv(const std::vector<ReportRow>& rows, std::ostream& out) {
    out << "size,observed_mean,fitted_mean,lower,upper\n";
    for (const auto& r : rows) {
        out << csv::format_double(r.size) << ',' << csv::format_double(r.observed_mean) << ','
            << csv::format_double(r.fitted_mean) << ',' << csv::format_double(r.lower) << ','
            << csv::format_double(r.upper) << '\n';
    }
}

} // namespace lcurve
