// Error types shared by all cbsim modules.
//
// Numerical failure modes carry their diagnostic payload (residuals,
// smallest singular values, partial optimizer state) so callers can report
// them instead of guessing.

#pragma once

#include <stdexcept>
#include <string>

namespace cbsim {

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Matrix numerically singular relative to the 1e-12 threshold.
struct SingularityError : std::runtime_error {
    double sigma_min;
    double sigma_max;
    SingularityError(const std::string& what, double smin, double smax)
        : std::runtime_error(what), sigma_min(smin), sigma_max(smax) {}
};

// Element not representable in a subspace basis at tolerance.
struct NotInSpanError : std::runtime_error {
    double residual;
    NotInSpanError(const std::string& what, double res)
        : std::runtime_error(what), residual(res) {}
};

struct InvariantError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Similarity search exhausted its budget without certifying contractivity.
struct OptimizerFailure : std::runtime_error {
    double best_ratio;
    OptimizerFailure(const std::string& what, double ratio)
        : std::runtime_error(what), best_ratio(ratio) {}
};

// Gram/eigenvector matrix too ill-conditioned (clustered Blaschke roots).
struct ConditioningError : std::runtime_error {
    double condition;
    ConditioningError(const std::string& what, double cond)
        : std::runtime_error(what), condition(cond) {}
};

struct ValidationError : std::runtime_error {
    std::string field;
    ValidationError(const std::string& what, std::string fld = {})
        : std::runtime_error(what), field(std::move(fld)) {}
};

}  // namespace cbsim
