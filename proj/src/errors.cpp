#include "spatx/errors.hpp"

namespace spatx {

namespace {

std::string list_pairs(const std::vector<std::pair<std::string, std::string>>& pairs) {
    std::string out;
    const std::size_t shown = pairs.size() < 10 ? pairs.size() : 10;
    for (std::size_t k = 0; k < shown; ++k) {
        if (k) out += ", ";
        out += "(" + pairs[k].first + ", " + pairs[k].second + ")";
    }
    if (pairs.size() > shown) out += ", ... " + std::to_string(pairs.size() - shown) + " more";
    return out;
}

std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t k = 0; k < v.size(); ++k) out += (k ? ", " : "") + v[k];
    return out;
}

}  // namespace

NotIdentifiedError::NotIdentifiedError(std::vector<std::pair<std::string, std::string>> p)
    : EstimatorError("estimand not identified: positive weight on (individual, location) pairs " + list_pairs(p)),
      pairs(std::move(p)) {}

RankDeficiencyError::RankDeficiencyError(std::vector<std::string> c)
    : EstimatorError("design matrix is rank deficient; dependent columns: " + join(c)), columns(std::move(c)) {}

}  // namespace spatx
