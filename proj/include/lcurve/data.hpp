#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lcurve/errors.hpp"
#include "lcurve/metrics.hpp"

namespace lcurve {

// Numeric design matrix (categoricals already expanded to indicators).
struct FeatureMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> names;

    std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }

    void validate() const {
        if (names.size() != cols()) throw SchemaError("feature names do not match column count");
        if (cols() < 1) throw SchemaError("feature matrix needs at least one column");
        if (!values.allFinite()) throw SchemaError("feature matrix has non-finite entries");
    }

    FeatureMatrix select_rows(std::span<const std::size_t> idx) const {
        FeatureMatrix out;
        out.names = names;
        out.values.resize(static_cast<Eigen::Index>(idx.size()), values.cols());
        for (std::size_t r = 0; r < idx.size(); ++r) {
            out.values.row(static_cast<Eigen::Index>(r)) = values.row(static_cast<Eigen::Index>(idx[r]));
        }
        return out;
    }
};

enum class OutcomeKind { binary, survival };

inline const char* to_string(OutcomeKind k) { return k == OutcomeKind::binary ? "binary" : "survival"; }

struct Outcome {
    OutcomeKind kind = OutcomeKind::binary;
    std::vector<int> labels;                // binary
    std::vector<SurvivalOutcome> survival;  // survival

    static Outcome binary(std::vector<int> y) { return {OutcomeKind::binary, std::move(y), {}}; }
    static Outcome time_to_event(std::vector<SurvivalOutcome> s) { return {OutcomeKind::survival, {}, std::move(s)}; }

    std::size_t size() const { return kind == OutcomeKind::binary ? labels.size() : survival.size(); }

    // Stratification key: the label, or the event flag.
    int stratum(std::size_t i) const { return kind == OutcomeKind::binary ? labels[i] : (survival[i].event ? 1 : 0); }

    Outcome select(std::span<const std::size_t> idx) const {
        Outcome out;
        out.kind = kind;
        for (auto i : idx) {
            if (kind == OutcomeKind::binary) out.labels.push_back(labels[i]);
            else out.survival.push_back(survival[i]);
        }
        return out;
    }
};

// Subjects with features and one outcome. Subject identity is the 0-based
// row index after loading.
struct Cohort {
    FeatureMatrix features;
    Outcome outcome;
    std::string name;
    std::string provenance;
    std::size_t dropped_rows = 0; // rows removed at load for missing values

    std::size_t size() const { return features.rows(); }
};

} // namespace lcurve
