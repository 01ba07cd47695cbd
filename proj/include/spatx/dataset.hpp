#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spatx/design.hpp"
#include "spatx/geometry.hpp"

namespace spatx {

struct Individual {
    std::string id;
    int region = -1;
    Location r;
    double y = 0.0;
    std::optional<double> y_pre;
    std::vector<double> x;
    int slot = -1;  // position within its region
};

struct CandidateLocation {
    std::string id;
    int region = -1;
    Location s;
    std::vector<double> z;
    std::optional<int> treated;
    std::optional<double> g;
    int slot = -1;
};

struct Region {
    std::string id;
    std::vector<int> individuals;
    std::vector<int> locations;
};

// Observed study.  Distances are stored only for pairs in the same region.
class Study {
public:
    std::vector<Region> regions;
    std::vector<Individual> people;
    std::vector<CandidateLocation> sites;
    std::vector<std::string> person_covariates;
    std::vector<std::string> site_covariates;
    Design design;
    Assignment assignment;
    DistanceMetric metric;

    // Fills region membership, slots and the distance matrix, then validates.
    void finalize();

    int J() const { return static_cast<int>(regions.size()); }
    double dist(int site, int person) const;
    const std::vector<double>& site_distances(int site) const { return dist_[site]; }
    double prob(int site) const;
    double pi(int region) const { return design.pi(region); }
    bool realized(int site) const;
    bool treated(int region) const { return assignment.W[region] != 0; }
    std::vector<int> realized_sites(int region) const;
    int person_covariate(const std::string& name) const;
    int site_covariate(const std::string& name) const;
    int region_index(const std::string& id) const;

private:
    std::vector<std::vector<double>> dist_;  // [site][slot of person in region]
};

enum class CombinationRule { Additive, Nearest, Lookup };

// Study plus every potential outcome Y_i(S).  Additive and Nearest rules are
// driven by y0 and tau; Lookup reads outcomes from the table.
struct SyntheticStudy {
    Study study;
    std::vector<double> y0;                // per person
    std::vector<std::vector<double>> tau;  // [site][slot of person in region]
    CombinationRule rule = CombinationRule::Additive;
    std::map<std::pair<int, std::vector<int>>, std::vector<double>> table;  // (region, sorted slots) -> per slot

    double outcome(int person, const std::vector<int>& realized_slots) const;
    double outcome_at(int person, int site) const;  // Y_i({s})
    double effect(int person, int site) const;      // Y_i({s}) - Y_i(0)
};

SyntheticStudy make_synthetic(Study study, std::vector<double> y0, CombinationRule rule);

void realize_into(const SyntheticStudy& synthetic, const Assignment& a, Study& out);
Study realize_outcomes(const SyntheticStudy& synthetic, const Assignment& a);
Study arcsinh_transform(Study study);
// Relative change in levels implied by moving from base to base + delta on the arcsinh scale.
double asinh_relative_effect(double base, double delta);

}  // namespace spatx
