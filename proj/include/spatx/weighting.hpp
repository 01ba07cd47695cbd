#pragma once

#include <functional>
#include <string>
#include <vector>

#include "spatx/dataset.hpp"
#include "spatx/geometry.hpp"

namespace spatx {

// w_i(s, d) laid out like the distance matrix: [site][slot of person in region].
struct WeightTable {
    std::vector<std::vector<double>> w;
    std::vector<int> empty_sites;  // ATT-eq: locations with no mass in the window

    double total() const;
    double site_total(int site) const;
    void scale(double c);
};

struct WeightScheme {
    enum class Kind { ATT, ATTEq, Custom };
    using Fn = std::function<double(const Study&, int person, int site, const Window&)>;

    Kind kind = Kind::ATT;
    Fn fn;
    bool allow_negative = false;

    static WeightScheme att();
    static WeightScheme att_eq();
    static WeightScheme custom(Fn fn, bool allow_negative = false);
    std::string name() const;
};

WeightTable att_weights(const Study& study, const Window& window);
WeightTable att_weights(const Study& study, const DistanceBin& bin);
WeightTable att_eq_weights(const Study& study, const Window& window);
WeightTable att_eq_weights(const Study& study, const DistanceBin& bin);
WeightTable build_weights(const Study& study, const WeightScheme& scheme, const Window& window);

// Targets defined by potential outcomes: mu_t = sum w Y(s) / sum w,
// mu_c = sum w Y(0) / sum w, and tau_w = mu_t - mu_c.
struct EstimandParts {
    double total = 0.0;
    double mu_t = 0.0;
    double mu_c = 0.0;
    double tau() const { return mu_t - mu_c; }
};

EstimandParts estimand_parts(const SyntheticStudy& synthetic, const WeightTable& table);
double weighted_estimand(const SyntheticStudy& synthetic, const WeightScheme& scheme, const Window& window);

}  // namespace spatx
