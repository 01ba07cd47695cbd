#pragma once

#include <optional>
#include <vector>

#include "spatx/dataset.hpp"
#include "spatx/geometry.hpp"
#include "spatx/weighting.hpp"

namespace spatx {

enum class InterferenceRule { AdditiveSeparable, NearestMatters };

// Unit estimators take a person and a site in the same region.  Fixed-k
// regions contrast against unrealized locations of treated regions and against
// control regions; independent locations contrast realized with unrealized.
double tau_additive_unit(const Study& study, int person, int site);
double tau_additive(const Study& study, const Window& window);
double tau_additive(const Study& study, const DistanceBin& bin);
// Pr(s realized) * window weight over all (i, s) pairs.
double additive_estimand(const SyntheticStudy& synthetic, const Window& window);

// Probability that site is realized and is the nearest realized site to person
// (ties count as nearest).  Zero means the unit effect is not identified.
double nearest_probability(const Study& study, int person, int site);
std::optional<double> tau_nearest_unit(const Study& study, int person, int site);
double tau_nearest(const Study& study, const WeightTable& table);
double tau_nearest(const Study& study, const WeightScheme& scheme, const Window& window);
// Weight table with every unidentified (i, s) pair zeroed.
WeightTable restrict_to_identified(const Study& study, WeightTable table);

// Single region, independent assignment across locations.  probs[s] is the
// known marginal Pr(s realized), or an estimate of Pr(s realized | rest).
double tau_single_region(const Study& study, const Window& window);
double tau_single_region(const Study& study, const Window& window, const std::vector<double>& probs);
// sum_s Pr(s realized) sum_i k tau_i(s) / sum_s Pr(s realized) sum_i k.
double single_region_estimand(const SyntheticStudy& synthetic, const Window& window);

}  // namespace spatx
