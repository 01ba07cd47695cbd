#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace spatx {

// Bad input: files, ids, flags, design parameters.  The CLI exits with 2.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input is well formed but an estimator cannot produce a value.  Exit 1.
struct EstimatorError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DomainError : ValidationError {
    using ValidationError::ValidationError;
};

struct LookupError : ValidationError {
    using ValidationError::ValidationError;
};

struct ParseError : ValidationError {
    using ValidationError::ValidationError;
};

struct DuplicateIdError : ValidationError {
    using ValidationError::ValidationError;
};

struct UnknownRegionError : LookupError {
    using LookupError::LookupError;
};

struct EmptyRegionError : ValidationError {
    using ValidationError::ValidationError;
};

struct MissingFileError : ValidationError {
    using ValidationError::ValidationError;
};

struct UnsupportedDesignError : EstimatorError {
    using EstimatorError::EstimatorError;
};

struct EnumerationTooLargeError : EstimatorError {
    using EstimatorError::EstimatorError;
};

struct IncompleteOracleError : EstimatorError {
    using EstimatorError::EstimatorError;
};

struct EmptyArmError : EstimatorError {
    EmptyArmError(const std::string& arm, const std::string& where)
        : EstimatorError("no " + arm + " units in " + where), arm(arm), where(where) {}
    std::string arm;
    std::string where;
};

struct DegenerateEstimandError : EstimatorError {
    using EstimatorError::EstimatorError;
};

struct InsufficientReplicationError : EstimatorError {
    using EstimatorError::EstimatorError;
};

struct OverlapError : EstimatorError {
    using EstimatorError::EstimatorError;
};

struct UnidentifiedError : EstimatorError {
    using EstimatorError::EstimatorError;
};

// Positive weight on (individual, location) pairs whose unit estimator is undefined.
struct NotIdentifiedError : EstimatorError {
    NotIdentifiedError(std::vector<std::pair<std::string, std::string>> pairs);
    std::vector<std::pair<std::string, std::string>> pairs;
};

struct RankDeficiencyError : EstimatorError {
    RankDeficiencyError(std::vector<std::string> columns);
    std::vector<std::string> columns;
};

struct DegenerateBasisError : EstimatorError {
    using EstimatorError::EstimatorError;
};

struct NoMatchesError : EstimatorError {
    using EstimatorError::EstimatorError;
};

struct CollinearityError : EstimatorError {
    using EstimatorError::EstimatorError;
};

}  // namespace spatx
