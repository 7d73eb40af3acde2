#pragma once

// Built-in modelling strategies: logistic regression (IRLS / Newton) and the
// Cox proportional hazards model (Newton on the Breslow partial likelihood),
// Platt calibration, and the adapter interface used by the harness.
//
// Both fitters use step-halving so the objective never decreases. When the
// unpenalised fit fails to converge or shows separation (a coefficient whose
// per-sd effect exceeds `separation_bound`), the fit is repeated with a ridge
// penalty escalating through `ridge_ladder`; the model records the penalty
// used and reports converged = false.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>

#include "lcurve/csv.hpp"
#include "lcurve/curve_model.hpp"
#include "lcurve/data.hpp"
#include "lcurve/errors.hpp"
#include "lcurve/random.hpp"
#include "lcurve/sampling.hpp"

namespace lcurve {

struct FitControl {
    int max_iterations = 100;
    double rel_tol = 1e-10;
    double separation_bound = 10.0;
    std::array<double, 3> ridge_ladder{1e-8, 1e-4, 1e-2};
};

struct LogisticModel {
    double intercept = 0.0;
    std::vector<double> coefficients;
    std::vector<std::string> names;
    bool converged = false;
    double ridge_used = 0.0;
    int iterations = 0;
    std::vector<double> trace; // penalised log-likelihood, start then one entry per iteration
};

struct CoxModel {
    std::vector<double> coefficients;
    std::vector<std::string> names;
    bool converged = false;
    double ridge_used = 0.0;
    std::string ties_method = "breslow";
    int iterations = 0;
    std::vector<double> trace; // penalised log partial likelihood
};

namespace detail {

struct NewtonEval {
    double value = 0.0;
    Eigen::VectorXd grad;
    Eigen::MatrixXd info; // negative Hessian
};

struct NewtonResult {
    Eigen::VectorXd beta;
    bool converged = false;
    int iterations = 0;
    std::vector<double> trace;
};

template <class Eval>
NewtonResult newton_maximize(Eigen::VectorXd beta, Eval&& eval, const FitControl& ctl) {
    NewtonResult res;
    NewtonEval cur = eval(beta, true);
    res.trace.push_back(cur.value);
    for (int it = 0; it < ctl.max_iterations; ++it) {
        res.iterations = it + 1;
        const Eigen::VectorXd step = cur.info.ldlt().solve(cur.grad);
        if (!step.allFinite()) break;
        double t = 1.0;
        Eigen::VectorXd cand;
        NewtonEval next;
        bool improved = false;
        for (int h = 0; h < 40; ++h, t *= 0.5) {
            cand = beta + t * step;
            next = eval(cand, false);
            if (std::isfinite(next.value) && next.value >= cur.value) {
                improved = true;
                break;
            }
        }
        if (!improved) {
            // No ascent direction left at working precision.
            res.converged = true;
            break;
        }
        const double old_value = cur.value;
        beta = cand;
        cur = eval(beta, true);
        res.trace.push_back(cur.value);
        const double rel = std::abs(cur.value - old_value) / std::max(std::abs(old_value), 1e-300);
        if (rel < ctl.rel_tol) {
            res.converged = true;
            break;
        }
    }
    res.beta = beta;
    return res;
}

inline double log1pexp(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline Eigen::VectorXd column_sd(const Eigen::MatrixXd& x) {
    Eigen::VectorXd sd(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double m = x.col(j).mean();
        const double ss = (x.col(j).array() - m).square().sum();
        sd(j) = x.rows() > 1 ? std::sqrt(ss / static_cast<double>(x.rows() - 1)) : 0.0;
    }
    return sd;
}

inline bool looks_separated(const Eigen::VectorXd& coef, const Eigen::VectorXd& sd, double bound) {
    if (!coef.allFinite()) return true;
    for (Eigen::Index j = 0; j < coef.size(); ++j) {
        if (std::abs(coef(j)) * sd(j) > bound) return true;
    }
    return false;
}

inline NewtonResult logistic_path(const Eigen::MatrixXd& x1, const Eigen::VectorXd& y, double ridge,
                                  const FitControl& ctl) {
    const auto p = x1.cols();
    auto eval = [&](const Eigen::VectorXd& beta, bool derivs) {
        NewtonEval e;
        const Eigen::VectorXd eta = x1 * beta;
        double v = 0.0;
        for (Eigen::Index i = 0; i < eta.size(); ++i) v += y(i) * eta(i) - log1pexp(eta(i));
        v -= 0.5 * ridge * beta.tail(p - 1).squaredNorm();
        e.value = v;
        if (derivs) {
            Eigen::VectorXd prob(eta.size());
            Eigen::VectorXd w(eta.size());
            for (Eigen::Index i = 0; i < eta.size(); ++i) {
                prob(i) = sigmoid(eta(i));
                w(i) = prob(i) * (1.0 - prob(i));
            }
            e.grad = x1.transpose() * (y - prob);
            e.info = x1.transpose() * w.asDiagonal() * x1;
            for (Eigen::Index j = 1; j < p; ++j) {
                e.grad(j) -= ridge * beta(j);
                e.info(j, j) += ridge;
            }
        }
        return e;
    };
    return newton_maximize(Eigen::VectorXd::Zero(p), eval, ctl);
}

inline NewtonResult cox_path(const Eigen::MatrixXd& xc, std::span<const SurvivalOutcome> s, double ridge,
                             const FitControl& ctl) {
    const auto n = xc.rows();
    const auto p = xc.cols();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
        return s[static_cast<std::size_t>(i)].time > s[static_cast<std::size_t>(j)].time;
    });

    auto eval = [&](const Eigen::VectorXd& beta, bool derivs) {
        NewtonEval e;
        const Eigen::VectorXd eta = xc * beta;
        double s0 = 0.0;
        Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
        Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
        double v = 0.0;
        if (derivs) {
            e.grad = Eigen::VectorXd::Zero(p);
            e.info = Eigen::MatrixXd::Zero(p, p);
        }
        // Walk from the latest time backwards so the risk set only grows.
        for (std::size_t k = 0; k < order.size();) {
            const double t = s[static_cast<std::size_t>(order[k])].time;
            std::size_t j = k;
            int deaths = 0;
            Eigen::VectorXd xsum = Eigen::VectorXd::Zero(p);
            double eta_sum = 0.0;
            for (; j < order.size() && s[static_cast<std::size_t>(order[j])].time == t; ++j) {
                const auto i = order[j];
                const double r = std::exp(eta(i));
                s0 += r;
                if (derivs) {
                    s1 += r * xc.row(i).transpose();
                    s2 += r * xc.row(i).transpose() * xc.row(i);
                }
                if (s[static_cast<std::size_t>(i)].event) {
                    ++deaths;
                    eta_sum += eta(i);
                    if (derivs) xsum += xc.row(i).transpose();
                }
            }
            if (deaths > 0) {
                const double d = deaths;
                v += eta_sum - d * std::log(s0);
                if (derivs) {
                    const Eigen::VectorXd mean = s1 / s0;
                    e.grad += xsum - d * mean;
                    e.info += d * (s2 / s0 - mean * mean.transpose());
                }
            }
            k = j;
        }
        v -= 0.5 * ridge * beta.squaredNorm();
        e.value = v;
        if (derivs) {
            e.grad -= ridge * beta;
            e.info += ridge * Eigen::MatrixXd::Identity(p, p);
        }
        return e;
    };
    return newton_maximize(Eigen::VectorXd::Zero(p), eval, ctl);
}

inline void check_schema(const std::vector<std::string>& model_names, const FeatureMatrix& x) {
    if (model_names != x.names) throw SchemaError("feature columns do not match the fitted model");
}

} // namespace detail

inline LogisticModel fit_logistic(const FeatureMatrix& x, std::span<const int> y, const FitControl& ctl = {}) {
    x.validate();
    if (y.size() != x.rows()) throw InvalidArgument("label count differs from row count");
    std::size_t pos = 0;
    for (int v : y) {
        if (v != 0 && v != 1) throw InvalidArgument("labels must be 0 or 1");
        pos += static_cast<std::size_t>(v);
    }
    if (pos == 0 || pos == y.size()) throw FittingError("logistic regression needs both classes");

    const auto n = static_cast<Eigen::Index>(x.rows());
    Eigen::MatrixXd x1(n, x.values.cols() + 1);
    x1.col(0).setOnes();
    x1.rightCols(x.values.cols()) = x.values;
    Eigen::VectorXd yv(n);
    for (Eigen::Index i = 0; i < n; ++i) yv(i) = y[static_cast<std::size_t>(i)];
    const Eigen::VectorXd sd = detail::column_sd(x.values);

    auto to_model = [&](const detail::NewtonResult& r, bool converged, double ridge) {
        LogisticModel m;
        m.intercept = r.beta(0);
        m.coefficients.assign(r.beta.data() + 1, r.beta.data() + r.beta.size());
        m.names = x.names;
        m.converged = converged;
        m.ridge_used = ridge;
        m.iterations = r.iterations;
        m.trace = r.trace;
        return m;
    };

    auto plain = detail::logistic_path(x1, yv, 0.0, ctl);
    if (plain.converged && !detail::looks_separated(plain.beta.tail(x1.cols() - 1), sd, ctl.separation_bound)) {
        return to_model(plain, true, 0.0);
    }
    detail::NewtonResult last;
    double last_ridge = 0.0;
    for (double ridge : ctl.ridge_ladder) {
        last = detail::logistic_path(x1, yv, ridge, ctl);
        last_ridge = ridge;
        if (last.converged && !detail::looks_separated(last.beta.tail(x1.cols() - 1), sd, ctl.separation_bound)) {
            break;
        }
    }
    return to_model(last, false, last_ridge);
}

inline std::vector<double> logistic_linear_predictor(const LogisticModel& m, const FeatureMatrix& x) {
    detail::check_schema(m.names, x);
    const Eigen::Map<const Eigen::VectorXd> beta(m.coefficients.data(), static_cast<Eigen::Index>(m.coefficients.size()));
    const Eigen::VectorXd eta = (x.values * beta).array() + m.intercept;
    return {eta.data(), eta.data() + eta.size()};
}

inline std::vector<double> predict_logistic(const LogisticModel& m, const FeatureMatrix& x) {
    auto eta = logistic_linear_predictor(m, x);
    for (double& v : eta) v = sigmoid(v);
    return eta;
}

inline CoxModel fit_cox(const FeatureMatrix& x, std::span<const SurvivalOutcome> outcomes, const FitControl& ctl = {}) {
    x.validate();
    if (outcomes.size() != x.rows()) throw InvalidArgument("outcome count differs from row count");
    bool any_event = false;
    for (const auto& o : outcomes) {
        if (!(o.time > 0.0)) throw InvalidArgument("survival times must be positive");
        any_event = any_event || o.event;
    }
    if (!any_event) throw FittingError("Cox model needs at least one event");

    // Centering leaves beta and the partial likelihood unchanged.
    const Eigen::RowVectorXd centre = x.values.colwise().mean();
    const Eigen::MatrixXd xc = x.values.rowwise() - centre;
    const Eigen::VectorXd sd = detail::column_sd(x.values);

    auto to_model = [&](const detail::NewtonResult& r, bool converged, double ridge) {
        CoxModel m;
        m.coefficients.assign(r.beta.data(), r.beta.data() + r.beta.size());
        m.names = x.names;
        m.converged = converged;
        m.ridge_used = ridge;
        m.iterations = r.iterations;
        m.trace = r.trace;
        return m;
    };

    auto plain = detail::cox_path(xc, outcomes, 0.0, ctl);
    if (plain.converged && !detail::looks_separated(plain.beta, sd, ctl.separation_bound)) {
        return to_model(plain, true, 0.0);
    }
    detail::NewtonResult last;
    double last_ridge = 0.0;
    for (double ridge : ctl.ridge_ladder) {
        last = detail::cox_path(xc, outcomes, ridge, ctl);
        last_ridge = ridge;
        if (last.converged && !detail::looks_separated(last.beta, sd, ctl.separation_bound)) break;
    }
    return to_model(last, false, last_ridge);
}

// Linear predictor X beta; higher means higher hazard.
inline std::vector<double> cox_risk(const CoxModel& m, const FeatureMatrix& x) {
    detail::check_schema(m.names, x);
    const Eigen::Map<const Eigen::VectorXd> beta(m.coefficients.data(), static_cast<Eigen::Index>(m.coefficients.size()));
    const Eigen::VectorXd eta = x.values * beta;
    return {eta.data(), eta.data() + eta.size()};
}

// p = sigmoid(alpha + beta * s)
struct PlattMap {
    double alpha = 0.0;
    double beta = 1.0;

    double operator()(double s) const { return sigmoid(alpha + beta * s); }
};

inline PlattMap platt_calibrate(std::span<const double> raw_scores, std::span<const int> labels) {
    if (raw_scores.size() != labels.size()) throw InvalidArgument("scores and labels differ in length");
    FeatureMatrix x;
    x.names = {"score"};
    x.values.resize(static_cast<Eigen::Index>(raw_scores.size()), 1);
    for (std::size_t i = 0; i < raw_scores.size(); ++i) x.values(static_cast<Eigen::Index>(i), 0) = raw_scores[i];
    LogisticModel m;
    try {
        m = fit_logistic(x, labels);
    } catch (const FittingError& e) {
        throw CalibrationError(std::string("Platt calibration: ") + e.what());
    }
    return {m.intercept, m.coefficients.front()};
}

// ---------------------------------------------------------------------------
// Adapter contract. fit() trains on one split and returns a model whose
// score() gives one value per test row, higher meaning higher risk (or
// higher probability of the event).

class ScoringModel {
public:
    virtual ~ScoringModel() = default;
    virtual std::vector<double> score(const FeatureMatrix& test) const = 0;
};

class PredictorAdapter {
public:
    virtual ~PredictorAdapter() = default;
    virtual std::string name() const = 0;
    virtual bool supports(OutcomeKind kind) const = 0;
    // `seed` feeds any internal randomness (e.g. calibration splits).
    virtual std::unique_ptr<ScoringModel> fit(const FeatureMatrix& train, const Outcome& outcome,
                                              std::uint64_t seed) const = 0;
};

class LogisticAdapter final : public PredictorAdapter {
public:
    std::string name() const override { return "logistic"; }
    bool supports(OutcomeKind k) const override { return k == OutcomeKind::binary; }

    std::unique_ptr<ScoringModel> fit(const FeatureMatrix& train, const Outcome& y, std::uint64_t) const override {
        struct Model final : ScoringModel {
            LogisticModel m;
            std::vector<double> score(const FeatureMatrix& t) const override { return predict_logistic(m, t); }
        };
        auto out = std::make_unique<Model>();
        out->m = fit_logistic(train, y.labels);
        return out;
    }
};

class CoxAdapter final : public PredictorAdapter {
public:
    std::string name() const override { return "cox"; }
    bool supports(OutcomeKind k) const override { return k == OutcomeKind::survival; }

    std::unique_ptr<ScoringModel> fit(const FeatureMatrix& train, const Outcome& y, std::uint64_t) const override {
        struct Model final : ScoringModel {
            CoxModel m;
            std::vector<double> score(const FeatureMatrix& t) const override { return cox_risk(m, t); }
        };
        auto out = std::make_unique<Model>();
        out->m = fit_cox(train, y.survival);
        return out;
    }
};

// Wraps a binary predictor with Platt calibration learnt on an internal
// stratified 70/30 split of the training data. When the calibration split
// holds a single class the raw scores pass through unchanged.
class PlattCalibratedAdapter final : public PredictorAdapter {
public:
    explicit PlattCalibratedAdapter(std::shared_ptr<const PredictorAdapter> inner) : inner_(std::move(inner)) {}

    std::string name() const override { return inner_->name() + "+platt"; }
    bool supports(OutcomeKind k) const override { return k == OutcomeKind::binary && inner_->supports(k); }

    std::unique_ptr<ScoringModel> fit(const FeatureMatrix& train, const Outcome& y, std::uint64_t seed) const override {
        struct Model final : ScoringModel {
            std::unique_ptr<ScoringModel> inner;
            std::optional<PlattMap> map;
            std::vector<double> score(const FeatureMatrix& t) const override {
                auto s = inner->score(t);
                if (map) {
                    for (double& v : s) v = (*map)(v);
                }
                return s;
            }
        };
        std::vector<std::size_t> idx(train.rows());
        std::iota(idx.begin(), idx.end(), 0);
        std::vector<int> keys(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) keys[i] = y.stratum(i);
        Rng rng = make_stream(seed, {stream::kCalibration});
        const Split split = stratified_split(idx, keys, 0.7, rng);

        auto out = std::make_unique<Model>();
        if (split.test.empty()) {
            out->inner = inner_->fit(train, y, seed);
            return out;
        }
        out->inner = inner_->fit(train.select_rows(split.train), y.select(split.train), seed);
        const auto holdout = train.select_rows(split.test);
        const auto raw = out->inner->score(holdout);
        try {
            out->map = platt_calibrate(raw, y.select(split.test).labels);
        } catch (const CalibrationError&) {
        }
        return out;
    }

private:
    std::shared_ptr<const PredictorAdapter> inner_;
};

// External learner run as a subprocess:
//
//   <command> <train.csv> <test.csv>
//
// train.csv holds the feature columns followed by `label` (binary) or
// `time,event` (survival); test.csv holds the feature columns only. The
// command must print one score per test row on stdout, one per line.
class SubprocessAdapter final : public PredictorAdapter {
public:
    explicit SubprocessAdapter(std::string command) : command_(std::move(command)) {}

    std::string name() const override { return "adapter:" + command_; }
    bool supports(OutcomeKind) const override { return true; }

    std::unique_ptr<ScoringModel> fit(const FeatureMatrix& train, const Outcome& y, std::uint64_t seed) const override {
        struct Model final : ScoringModel {
            std::string command;
            FeatureMatrix train;
            Outcome y;
            std::uint64_t seed = 0;
            std::vector<double> score(const FeatureMatrix& t) const override {
                return run_subprocess(command, train, y, t, seed);
            }
        };
        auto out = std::make_unique<Model>();
        out->command = command_;
        out->train = train;
        out->y = y;
        out->seed = seed;
        return out;
    }

    static void write_features(std::ostream& os, const FeatureMatrix& x, const Outcome* y) {
        for (std::size_t j = 0; j < x.names.size(); ++j) os << (j ? "," : "") << csv::quote_if_needed(x.names[j]);
        if (y) os << (y->kind == OutcomeKind::binary ? ",label" : ",time,event");
        os << '\n';
        for (Eigen::Index i = 0; i < x.values.rows(); ++i) {
            for (Eigen::Index j = 0; j < x.values.cols(); ++j) os << (j ? "," : "") << csv::format_double(x.values(i, j));
            if (y) {
                const auto r = static_cast<std::size_t>(i);
                if (y->kind == OutcomeKind::binary) os << ',' << y->labels[r];
                else os << ',' << csv::format_double(y->survival[r].time) << ',' << (y->survival[r].event ? 1 : 0);
            }
            os << '\n';
        }
    }

private:
    static std::vector<double> run_subprocess(const std::string& command, const FeatureMatrix& train,
                                              const Outcome& y, const FeatureMatrix& test, std::uint64_t seed) {
        namespace fs = std::filesystem;
        static std::atomic<std::uint64_t> counter{0};
        char tag[64];
        std::snprintf(tag, sizeof tag, "%ld-%016llx", static_cast<long>(::getpid()),
                      static_cast<unsigned long long>(derive_seed(seed, {test.rows(), counter++})));
        const fs::path dir = fs::temp_directory_path() / ("lcurve-adapter-" + std::string(tag));
        fs::create_directories(dir);
        const fs::path train_path = dir / "train.csv";
        const fs::path test_path = dir / "test.csv";
        {
            std::ofstream tr(train_path);
            write_features(tr, train, &y);
            std::ofstream te(test_path);
            write_features(te, test, nullptr);
        }
        const std::string cmd = command + " '" + train_path.string() + "' '" + test_path.string() + "'";
        std::vector<double> scores;
        FILE* pipe = popen(cmd.c_str(), "r");
        if (!pipe) {
            fs::remove_all(dir);
            throw FittingError("cannot start adapter command: " + command);
        }
        std::string line;
        char buf[256];
        bool bad = false;
        while (std::fgets(buf, sizeof buf, pipe)) {
            line += buf;
            if (!line.empty() && line.back() == '\n') {
                line.pop_back();
                double v = 0.0;
                if (!line.empty()) {
                    if (csv::parse_double(line, v)) scores.push_back(v);
                    else bad = true;
                }
                line.clear();
            }
        }
        if (!line.empty()) {
            double v = 0.0;
            if (csv::parse_double(line, v)) scores.push_back(v);
            else bad = true;
        }
        const int status = pclose(pipe);
        fs::remove_all(dir);
        if (status != 0) throw FittingError("adapter command failed: " + command);
        if (bad) throw FittingError("adapter produced a non-numeric score");
        if (scores.size() != test.rows()) {
            throw FittingError("adapter returned " + std::to_string(scores.size()) + " scores for " +
                               std::to_string(test.rows()) + " test rows");
        }
        return scores;
    }

    std::string command_;
};

} // namespace lcurve
