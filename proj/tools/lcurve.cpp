// lcurve: command-line front end.
//
//   lcurve simulate  --n 2000 --coef 1,0.5 --out cohort.csv --schema-out schema.json
//   lcurve simulate  --curve 0.2,1,0.5 --s1 50 --n 2000 --m 20 --k 50 --noise 0.02 --out table.csv
//   lcurve harness   --cohort cohort.csv --schema schema.json --n 2000 --out table.csv
//   lcurve fit       --table table.csv --method nls --out fit.json
//   lcurve predict   --fit fit.json --at 1000,10000 --out pred.csv
//   lcurve anchor    --external fit.json --table target.csv --out anchored.json
//   lcurve report    --table table.csv --fit fit.json --out report.csv
//
// Failures print one JSON line {"error": <kind>, "message": <text>} on
// stderr and exit with status 1 (2 for command-line usage errors).

#include <cstdint>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lcurve/lcurve.hpp"

namespace {

using namespace lcurve;

int fail(const std::string& kind, const std::string& message) {
    std::cerr << json{{"error", kind}, {"message", message}}.dump() << std::endl;
    return kind == "usage" ? 2 : 1;
}

std::vector<double> parse_list(const std::string& s, const char* what) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        double v = 0.0;
        if (!csv::parse_double(item, v)) throw ConfigError(std::string("bad number in ") + what + ": '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError(std::string("empty list for ") + what);
    return out;
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw LoadError("'" + path + "' is not valid JSON: " + e.what());
    }
}

std::vector<PerformancePoint> read_points(const std::string& path) {
    if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) return points_from_table_json(read_json(path));
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open '" + path + "'");
    return points_from_table_csv(in);
}

// Writes to `path`, or stdout when the path is empty or "-".
template <class F>
void emit(const std::string& path, F&& write) {
    if (path.empty() || path == "-") {
        write(std::cout);
        std::cout.flush();
        return;
    }
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write '" + path + "'");
    write(out);
}

CurvePrediction predict_any(const AnyFit& fit, const std::vector<double>& at, double level, bool noise,
                            bool allow_nonconverged) {
    if (const auto* n = std::get_if<NlsFit>(&fit)) return predict_nls(*n, at, level, allow_nonconverged);
    return predict_gp(std::get<GpFit>(fit), at, level, noise);
}

json fit_json(const AnyFit& f) {
    return std::visit([](const auto& x) { return to_json(x); }, f);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learning-curve estimation and extrapolation"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Write a synthetic cohort, or a synthetic performance table with --curve");
    std::string sim_kind = "binary", sim_coef = "1", sim_curve, sim_out, sim_schema_out;
    std::size_t sim_n = 1000, sim_m = 20, sim_s1 = 50, sim_k = 50;
    double sim_intercept = 0.0, sim_hazard = 0.1, sim_censoring = 0.0, sim_noise = 0.02;
    std::uint64_t sim_seed = 1;
    sim->add_option("--kind", sim_kind, "binary | survival")->check(CLI::IsMember({"binary", "survival"}));
    sim->add_option("--n", sim_n, "Cohort size, or largest size with --curve");
    sim->add_option("--coef", sim_coef, "Comma-separated coefficients");
    sim->add_option("--intercept", sim_intercept);
    sim->add_option("--hazard", sim_hazard, "Baseline hazard (survival)");
    sim->add_option("--censoring", sim_censoring, "Target censored fraction (survival)");
    sim->add_option("--curve", sim_curve, "a,b,c: emit a performance table from this curve instead");
    sim->add_option("--m", sim_m);
    sim->add_option("--s1", sim_s1);
    sim->add_option("--k", sim_k);
    sim->add_option("--noise", sim_noise, "Gaussian noise sd per repeat (with --curve)");
    sim->add_option("--seed", sim_seed);
    sim->add_option("--out", sim_out);
    sim->add_option("--schema-out", sim_schema_out, "Also write a matching schema JSON");

    // harness
    auto* har = app.add_subcommand("harness", "Run the repeated-subsampling harness on a cohort");
    std::string har_cohort, har_schema, har_out, har_json, har_spacing = "linear", har_mode = "redraw";
    HarnessConfig hc;
    har->add_option("--cohort", har_cohort)->required();
    har->add_option("--schema", har_schema)->required();
    har->add_option("--n", hc.total_n, "Total sample size N (default: whole cohort)");
    har->add_option("--m", hc.m);
    har->add_option("--s1", hc.s1);
    har->add_option("--k", hc.k);
    har->add_option("--split", hc.split_fraction);
    har->add_option("--seed", hc.seed);
    har->add_option("--predictor", hc.predictor, "logistic | cox | adapter:<command>");
    har->add_option("--metric", hc.metric, "auc | uno");
    har->add_option("--tau", hc.tau);
    har->add_flag("--calibrate", hc.calibrate, "Platt-calibrate a binary predictor");
    har->add_option("--spacing", har_spacing)->check(CLI::IsMember({"linear", "log"}));
    har->add_option("--mode", har_mode)->check(CLI::IsMember({"redraw", "resplit"}));
    har->add_option("--threads", hc.threads);
    har->add_flag("--log-indices", hc.record_indices, "Record subsample and split indices in the JSON table");
    har->add_option("--out", har_out, "CSV table");
    har->add_option("--json", har_json, "JSON table with config echo and summaries");

    // fit
    auto* fit = app.add_subcommand("fit", "Fit a learning curve to a performance table");
    std::string fit_table, fit_method = "nls", fit_out;
    McmcConfig fit_mcmc;
    fit->add_option("--table", fit_table)->required();
    fit->add_option("--method", fit_method)->check(CLI::IsMember({"nls", "gp"}));
    fit->add_option("--seed", fit_mcmc.seed);
    fit->add_option("--iterations", fit_mcmc.iterations);
    fit->add_option("--burn-in", fit_mcmc.burn_in);
    fit->add_option("--out", fit_out);

    // predict
    auto* pre = app.add_subcommand("predict", "Extrapolate a fitted curve");
    std::string pre_fit, pre_at, pre_out;
    double pre_level = 0.95;
    bool pre_noise = false, pre_force = false;
    pre->add_option("--fit", pre_fit)->required();
    pre->add_option("--at", pre_at, "Comma-separated sizes")->required();
    pre->add_option("--level", pre_level);
    pre->add_flag("--include-noise", pre_noise, "GP: include observation noise in the interval");
    pre->add_flag("--allow-nonconverged", pre_force, "NLS: predict from a non-converged fit");
    pre->add_option("--out", pre_out);

    // anchor
    auto* anc = app.add_subcommand("anchor", "Fit a target table anchored to an external fit");
    std::string anc_external, anc_table, anc_out;
    AnchorOptions anc_opt;
    McmcConfig anc_mcmc;
    anc->add_option("--external", anc_external)->required();
    anc->add_option("--table", anc_table)->required();
    anc->add_option("--inflation", anc_opt.inflation, "GP: prior sd inflation");
    anc->add_option("--seed", anc_mcmc.seed);
    anc->add_option("--iterations", anc_mcmc.iterations);
    anc->add_option("--burn-in", anc_mcmc.burn_in);
    anc->add_option("--out", anc_out);

    // report
    auto* rep = app.add_subcommand("report", "Plot-ready CSV of observed and fitted curves");
    std::string rep_table, rep_fit, rep_at, rep_out;
    double rep_level = 0.95;
    rep->add_option("--table", rep_table)->required();
    rep->add_option("--fit", rep_fit)->required();
    rep->add_option("--at", rep_at, "Extra sizes beyond the observed grid");
    rep->add_option("--level", rep_level);
    rep->add_option("--out", rep_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what());
    }

    try {
        if (*sim) {
            if (!sim_curve.empty()) {
                const auto p = parse_list(sim_curve, "--curve");
                if (p.size() != 3) throw ConfigError("--curve needs a,b,c");
                const CurveParams cp{p[0], p[1], p[2]};
                if (!cp.valid()) throw ConfigError("--curve parameters outside their domain");
                if (sim_n < sim_s1 || sim_s1 < 1) throw ConfigError("--curve needs 1 <= s1 <= n");
                const auto grid = make_size_grid(sim_s1, sim_n, sim_m);
                HarnessConfig cfg;
                cfg.total_n = sim_n;
                cfg.m = sim_m;
                cfg.s1 = sim_s1;
                cfg.k = sim_k;
                cfg.seed = sim_seed;
                PerformanceTable t;
                t.config = cfg;
                t.grid = grid;
                Rng rng = make_stream(sim_seed, {stream::kSynthetic});
                std::normal_distribution<double> noise(0.0, sim_noise);
                for (std::size_t g = 0; g < grid.size(); ++g) {
                    const double f = eval_power_law(cp, static_cast<double>(grid[g]));
                    for (std::size_t r = 0; r < sim_k; ++r) {
                        RepeatRecord rec;
                        rec.size_index = g;
                        rec.size = grid[g];
                        rec.repeat = r;
                        rec.value = std::clamp(f + (sim_noise > 0 ? noise(rng) : 0.0), 0.0, 1.0);
                        t.records.push_back(rec);
                    }
                }
                emit(sim_out, [&](std::ostream& os) { write_table_csv(t, os); });
            } else {
                SynthSpec s;
                s.kind = sim_kind == "binary" ? SynthKind::binary_logistic : SynthKind::survival_exponential;
                s.n = sim_n;
                s.coefficients = parse_list(sim_coef, "--coef");
                s.intercept = sim_intercept;
                s.baseline_hazard = sim_hazard;
                s.censoring_rate = sim_censoring;
                s.seed = sim_seed;
                const auto c = generate_synthetic(s);
                emit(sim_out, [&](std::ostream& os) { write_cohort_csv(c, os); });
                if (!sim_schema_out.empty()) {
                    emit(sim_schema_out, [&](std::ostream& os) { os << schema_for(c).to_json().dump(2) << '\n'; });
                }
            }
        } else if (*har) {
            const auto schema = CohortSchema::from_json(read_json(har_schema));
            const auto cohort = load_cohort(har_cohort, schema);
            if (hc.total_n == 0) hc.total_n = cohort.size();
            hc.spacing = har_spacing == "log" ? GridSpacing::log : GridSpacing::linear;
            hc.mode = har_mode == "resplit" ? ResampleMode::resplit : ResampleMode::redraw;
            const auto table = run_harness(cohort, hc);
            emit(har_out, [&](std::ostream& os) { write_table_csv(table, os); });
            if (!har_json.empty()) {
                auto j = to_json(table);
                j["cohort"] = {{"name", cohort.name}, {"rows", cohort.size()}, {"dropped_rows", cohort.dropped_rows}};
                emit(har_json, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
            }
        } else if (*fit) {
            const auto pts = read_points(fit_table);
            json j;
            if (fit_method == "nls") j = to_json(fit_nls(pts));
            else j = to_json(fit_gp(pts, {}, fit_mcmc));
            emit(fit_out, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
        } else if (*pre) {
            const auto f = fit_from_json(read_json(pre_fit));
            const auto at = parse_list(pre_at, "--at");
            const auto p = predict_any(f, at, pre_level, pre_noise, pre_force);
            emit(pre_out, [&](std::ostream& os) { write_prediction_csv(p, os); });
        } else if (*anc) {
            const auto ext = fit_from_json(read_json(anc_external));
            const auto pts = read_points(anc_table);
            AnyFit out;
            if (const auto* n = std::get_if<NlsFit>(&ext)) out = nls_anchor(*n, pts);
            else out = fit_gp_anchored(pts, gp_anchor_priors(std::get<GpFit>(ext), anc_opt), anc_mcmc);
            emit(anc_out, [&](std::ostream& os) { os << fit_json(out).dump(2) << '\n'; });
        } else if (*rep) {
            const auto pts = read_points(rep_table);
            const auto f = fit_from_json(read_json(rep_fit));
            std::set<double> sizes;
            for (const auto& p : pts) sizes.insert(static_cast<double>(p.n));
            if (!rep_at.empty()) {
                for (double v : parse_list(rep_at, "--at")) sizes.insert(v);
            }
            const std::vector<double> at(sizes.begin(), sizes.end());
            const auto pred = predict_any(f, at, rep_level, false, true);
            emit(rep_out, [&](std::ostream& os) { write_report_csv(make_report(pts, pred), os); });
        }
    } catch (const Error& e) {
        return fail(e.kind(), e.what());
    } catch (const std::exception& e) {
        return fail("internal", e.what());
    }
    return 0;
}
