#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "spatx/dataset.hpp"
#include "spatx/design.hpp"

namespace spatx {

using Estimator = std::function<double(const Study&)>;

struct SupportRow {
    Assignment assignment;
    double prob = 0.0;
    std::optional<double> value;
    std::string failure;
};

// Moments are conditional on the estimator succeeding; failed assignments
// are listed with their mass instead of being imputed.
struct Moments {
    double mean = 0.0;
    double variance = 0.0;
    double included_mass = 0.0;
    double excluded_mass = 0.0;
    std::vector<SupportRow> support;

    void write_support(std::ostream& out) const;
};

Moments exact_moments(const SyntheticStudy& synthetic, const Estimator& estimator,
                      std::size_t cap = kDefaultEnumerationCap);

struct JointMoments {
    double mean_a = 0.0, mean_b = 0.0;
    double var_a = 0.0, var_b = 0.0;
    double cov = 0.0;
    double excluded_mass = 0.0;
};

// Assignments where either estimator fails are excluded from all moments.
JointMoments joint_moments(const SyntheticStudy& synthetic, const Estimator& a, const Estimator& b,
                           std::size_t cap = kDefaultEnumerationCap);

// Writes into `out` the outcomes implied by the sharp null for assignment a.
using Imputation = std::function<void(const Study& observed, const Assignment& a, Study& out)>;
Imputation zero_effect_null();

struct PermutationResult {
    double p_value = 1.0;
    double observed = 0.0;
    bool exhaustive = true;
    std::size_t draws = 0;         // Monte Carlo draws when not exhaustive
    double excluded_mass = 0.0;    // exhaustive: mass where the statistic failed
    std::size_t excluded_draws = 0;
};

struct PermutationOptions {
    std::size_t cap = kDefaultEnumerationCap;
    std::size_t draws = 10000;
    std::uint64_t seed = 1;
    double rel_tol = 1e-10;
};

PermutationResult permutation_test(const Study& observed, const Estimator& statistic,
                                   const Imputation& null = zero_effect_null(), const PermutationOptions& opt = {});

}  // namespace spatx
