#pragma once

#include <vector>

#include "spatx/dataset.hpp"
#include "spatx/geometry.hpp"
#include "spatx/weighting.hpp"

namespace spatx {

// Five-part closed form, each term already divided by (sum w)^2.
struct Theorem3Terms {
    double t1 = 0.0, t2 = 0.0, t3 = 0.0, t4 = 0.0, t5 = 0.0;
    double C = 0.0;
    double c_coefficient = 0.0;  // d(total)/dC with everything else fixed
    double total() const { return t1 + t2 + t3 + t4 + t5; }
};

// Per (site, slot-in-region) linear coefficients z such that the demeaned
// estimator equals const + sum_{j,s} T_j(s) z_j(s).
struct LinearForm {
    std::vector<double> z;  // per site
};

LinearForm demeaned_linear_form(const SyntheticStudy& synthetic, const WeightTable& table);
LinearForm combine(const std::vector<LinearForm>& forms, const std::vector<double>& coefficients);

// Design variance/covariance of linear forms in the T_j(s).
double form_covariance(const Design& design, const Study& study, const LinearForm& a, const LinearForm& b);
// Same quantity by the explicit double sum over pair_covariance.
double form_covariance_quadratic(const Design& design, const Study& study, const LinearForm& a,
                                 const LinearForm& b);

Theorem3Terms theorem3_terms(const SyntheticStudy& synthetic, const WeightTable& table);
double true_variance(const SyntheticStudy& synthetic, const WeightTable& table);
double true_variance(const SyntheticStudy& synthetic, const WeightScheme& scheme, const Window& window);
double cross_bin_covariance(const SyntheticStudy& synthetic, const WeightScheme& scheme, const Window& a,
                            const Window& b);

struct VarianceReport {
    double total = 0.0;
    double treated_term = 0.0;
    double control_term = 0.0;
    double refinement_term = 0.0;
    bool conservative = true;
    std::vector<double> region_contributions;
    int treated_regions = 0;
    int control_regions = 0;
};

VarianceReport conservative_variance(const Study& study, const WeightTable& table, bool refine = false);
// Estimator for sum_k coefficient_k * tau_hat_k, each tau_hat_k built from its own table.
VarianceReport conservative_variance(const Study& study, const std::vector<WeightTable>& tables,
                                     const std::vector<double>& coefficients, bool refine = false);
VarianceReport conservative_variance(const Study& study, const WeightScheme& scheme, const Window& window,
                                     bool refine = false);

// Named components under ATT weights and a completely randomized design.
struct AttComponents {
    double Vt_location = 0.0;  // treated outcomes across locations
    double Vc_region = 0.0;    // control outcomes across regions
    double Vtau_location = 0.0;
    double Vtau_region = 0.0;
    double Vt_region = 0.0;  // region-average treated outcomes
    double n_bar = 0.0;
    double total() const { return Vt_location + Vc_region - Vtau_location + Vtau_region - Vt_region; }
};

AttComponents att_variance_components(const SyntheticStudy& synthetic, const Window& window);
// Three-term form for designs with one candidate location per region.
double single_location_variance(const AttComponents& c, int J, int Jt);

}  // namespace spatx
