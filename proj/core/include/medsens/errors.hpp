#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace medsens {

// Design matrix is rank deficient; the message names the offending column.
struct SingularDesignError : std::runtime_error {
    explicit SingularDesignError(const std::string& what) : std::runtime_error(what) {}
};

// Complete or quasi-complete separation in a binary-response fit, or a
// correlation parameter driven to the boundary.
struct SeparationError : std::runtime_error {
    explicit SeparationError(const std::string& what) : std::runtime_error(what) {}
};

// Iterative fit failed to converge; the message carries the last iterate.
struct ConvergenceError : std::runtime_error {
    explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

// Residual variance vanished where a correlation was requested.
struct DegenerateVarianceError : std::runtime_error {
    explicit DegenerateVarianceError(const std::string& what) : std::runtime_error(what) {}
};

// A mediator propensity reached 0 or 1 (within 1e-12), which would produce
// an unbounded weight.
struct DegeneratePropensityError : std::runtime_error {
    explicit DegeneratePropensityError(const std::string& what) : std::runtime_error(what) {}
};

// Floating-point evaluation of an exact formula drifted outside its valid
// range (e.g. a conditional probability far outside [0,1], or an underflowing
// denominator).
struct NumericalDegeneracyError : std::runtime_error {
    explicit NumericalDegeneracyError(const std::string& what) : std::runtime_error(what) {}
};

// Intersection of per-covariate rho intervals is empty.
struct InfeasibleBoundsError : std::runtime_error {
    explicit InfeasibleBoundsError(const std::string& what) : std::runtime_error(what) {}
};

// More than the tolerated fraction of bootstrap resamples failed to fit.
struct BootstrapInstabilityError : std::runtime_error {
    BootstrapInstabilityError(const std::string& what, int dropped, int total)
        : std::runtime_error(what), dropped(dropped), total(total) {}
    int dropped;
    int total;
};

// One offending cell in an input table.
struct SchemaIssue {
    long row;  // 1-based data row; 0 for header/file-level issues
    std::string column;
    std::string reason;
};

// Input CSV (or config) failed validation; lists every offending cell.
struct SchemaError : std::runtime_error {
    SchemaError(const std::string& what, std::vector<SchemaIssue> issues)
        : std::runtime_error(what), issues(std::move(issues)) {}
    std::vector<SchemaIssue> issues;
};

}  // namespace medsens
