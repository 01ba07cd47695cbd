#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "spatx/dataset.hpp"
#include "spatx/geometry.hpp"
#include "spatx/weighting.hpp"

namespace spatx {

// Realized IPW arm means of the feasible estimator.
struct ArmEstimate {
    double estimate = 0.0;
    double mu_t = 0.0;            // realized treated mean
    double mu_c = 0.0;            // realized control mean
    double treated_weight = 0.0;  // sum of iota^t w
    double control_weight = 0.0;  // sum of iota^c w
    int treated_n = 0;            // (individual, location) pairs with positive realized weight
    int control_n = 0;
};

// Stochastic weights for each (site, slot): iota^t w and iota^c w.
struct RealizedWeights {
    std::vector<std::vector<double>> treated;
    std::vector<std::vector<double>> control;
};

RealizedWeights realized_weights(const Study& study, const WeightTable& table);

ArmEstimate tau_w_detail(const Study& study, const WeightTable& table, const std::string& where);
double tau_w(const Study& study, const WeightScheme& scheme, const Window& window);
double tau_att(const Study& study, const DistanceBin& bin);
double tau_att(const Study& study, const Window& window);
double tau_att_eq(const Study& study, const DistanceBin& bin);
double tau_att_eq(const Study& study, const Window& window);

double treated_mean(const Study& study, const DistanceBin& bin);
double control_mean(const Study& study, const DistanceBin& bin);

// Infeasible estimator with denominators fixed at their design values and
// numerators centred at the potential-outcome means.  Built from the
// synthetic study, evaluated on any realization of it.
class DemeanedEstimator {
public:
    DemeanedEstimator(const SyntheticStudy& synthetic, const WeightScheme& scheme, const Window& window);
    DemeanedEstimator(const SyntheticStudy& synthetic, WeightTable table);

    double operator()(const Study& realized) const;
    double estimand() const { return parts_.tau(); }
    const EstimandParts& parts() const { return parts_; }
    const WeightTable& table() const { return table_; }

private:
    WeightTable table_;
    EstimandParts parts_;
};

struct BinEstimate {
    double center = 0.0;
    double half_width = 0.0;
    double estimate = 0.0;
    double mu_t = 0.0;
    double mu_c = 0.0;
    int treated_n = 0;
    int control_n = 0;
    std::optional<double> variance;
};

struct EffectCurve {
    std::vector<BinEstimate> bins;
    void write(std::ostream& out) const;  // d_center,h,estimate,se,treated_n,control_n
};

// Evenly spaced tiling windows from lo to hi: (e_{k-1}, e_k], first bin closed.
std::vector<Window> tiling_windows(double lo, double hi, double step);

EffectCurve effect_curve(const Study& study, const WeightScheme& scheme, const std::vector<Window>& windows,
                         bool with_variance);

Study difference_outcomes(Study study);
// Replaces each individual's pre-period outcome with the unweighted mean
// pre-period outcome of the other individuals in its region within radius.
Study with_pre_proxy(Study study, double radius);

enum class RingWeighting { Pooled, PerLocationFixedEffect, EqualPerLocation };

struct RingEstimate {
    double estimate = 0.0;
    double inner_mean = 0.0;
    double outer_mean = 0.0;
    std::vector<int> used_sites;
    std::vector<int> excluded_sites;  // realized, but not isolated
    int inner_n = 0;
    int outer_n = 0;
};

RingEstimate inner_outer_ring(const Study& study, const DistanceBin& inner, const DistanceBin& outer,
                              double isolation, RingWeighting weighting);

}  // namespace spatx
