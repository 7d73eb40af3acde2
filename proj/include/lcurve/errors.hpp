#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lcurve {

// Base of every error thrown by the library. kind() is a stable short
// identifier used by the CLI for machine-readable diagnostics.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

// Too few distinct sizes to identify the requested parameters.
class IdentifiabilityError : public Error {
public:
    explicit IdentifiabilityError(const std::string& what) : Error("identifiability", what) {}
};

// Non-finite objective, failed factorisation and similar. Carries the last
// iterate when one exists.
class NumericalFailure : public Error {
public:
    explicit NumericalFailure(const std::string& what, std::vector<double> last_iterate = {})
        : Error("numerical_failure", what), last_iterate_(std::move(last_iterate)) {}

    const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }

private:
    std::vector<double> last_iterate_;
};

// Metric has no defined value for the input (e.g. a single class).
class UndefinedMetric : public Error {
public:
    explicit UndefinedMetric(const std::string& what) : Error("undefined_metric", what) {}
};

class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& what) : Error("invalid_argument", what) {}
};

class FittingError : public Error {
public:
    explicit FittingError(const std::string& what) : Error("fitting_error", what) {}
};

class CalibrationError : public Error {
public:
    explicit CalibrationError(const std::string& what) : Error("calibration_error", what) {}
};

class SchemaError : public Error {
public:
    explicit SchemaError(const std::string& what) : Error("schema_error", what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("config_error", what) {}
};

class LoadError : public Error {
public:
    explicit LoadError(const std::string& what) : Error("load_error", what) {}
};

// Operation refused because its input is not in an acceptable state
// (non-converged fit without override, etc.).
class RefusalError : public Error {
public:
    explicit RefusalError(const std::string& what) : Error("refused", what) {}
};

} // namespace lcurve
