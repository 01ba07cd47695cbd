#pragma once

#include <optional>
#include <vector>

#include "spatx/dataset.hpp"
#include "spatx/estimators.hpp"
#include "spatx/geometry.hpp"

namespace spatx {

// Edges 0 = e_0 < ... < e_K = dmax; bins [0, e_1], (e_1, e_2], ..., (e_{K-1}, e_K].
class BinPartition {
public:
    explicit BinPartition(std::vector<double> edges);
    static BinPartition uniform(double dmax, int bins);

    int size() const { return static_cast<int>(edges_.size()) - 1; }
    double dmax() const { return edges_.back(); }
    const std::vector<double>& edges() const { return edges_; }
    HalfOpenBin bin(int k) const;
    Window window(int k) const;
    // Index of the bin containing dist, or -1 beyond dmax.
    int locate(double dist) const;

private:
    std::vector<double> edges_;
};

double region_outcome_total(const Study& study, int region);
double tau_aatt1(const Study& study);

double n_bar(const Study& study, const Window& window);
double n_bar(const Study& study, const BinPartition& partition, int k);

struct AattEstimate {
    double estimate = 0.0;
    std::vector<double> n_bar;
    std::vector<ArmEstimate> bins;
    std::optional<double> variance;  // conservative
};

AattEstimate tau_aatt2(const Study& study, const BinPartition& partition, bool with_variance = false);

// sum_j sum_s Pr(s realized) sum_i tau_i(s) / sum_j sum_s Pr(s realized).
double aatt_estimand(const SyntheticStudy& synthetic);
// Closed-form variance of sum_k n_bar_k * (demeaned ATT estimator at bin k).
double aatt2_true_variance(const SyntheticStudy& synthetic, const BinPartition& partition);

}  // namespace spatx
