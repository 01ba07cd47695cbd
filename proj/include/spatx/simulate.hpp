#pragma once

#include <cstdint>
#include <string>

#include "spatx/dataset.hpp"
#include "spatx/io.hpp"

namespace spatx {

// Square regions of side `side`, uniformly scattered individuals and
// candidate locations, additive effects tau0 * decay(d / dmax) within dmax.
struct SimulationSpec {
    int regions = 4;
    int individuals = 50;
    int locations = 1;
    double side = 1.0;
    std::string decay = "linear";  // linear | step | exponential
    double tau0 = 1.0;
    double dmax = 0.5;
    double baseline = 0.0;
    double noise = 1.0;
    std::string design = "completely_randomized";  // or bernoulli
    int treated_regions = -1;                      // default: half, rounded down
    double pi = 0.5;
    std::string within = "single";  // or fixed_k
    int k = 1;
    std::uint64_t seed = 1;

    static SimulationSpec from_config(const Config& config);
    double effect(double d) const;
};

SyntheticStudy simulate(const SimulationSpec& spec);

}  // namespace spatx
