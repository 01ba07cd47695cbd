#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace spatx {

enum class AcrossLaw { CompletelyRandomized, Bernoulli };
enum class WithinLaw { SingleLocation, FixedK, IndependentLocations };

// Law over the candidate locations of one region, indexed by their position
// (slot) within the region.
struct RegionLaw {
    WithinLaw kind = WithinLaw::SingleLocation;
    int n_locations = 0;
    std::vector<double> g;            // SingleLocation
    int k = 1;                        // FixedK
    std::vector<double> location_pi;  // IndependentLocations

    static RegionLaw single(std::vector<double> g);
    static RegionLaw uniform(int n_locations);
    static RegionLaw fixed_k(int n_locations, int k);
    static RegionLaw independent(std::vector<double> location_pi);
};

struct Assignment {
    std::vector<int> W;                // per region
    std::vector<std::vector<int>> xi;  // per region, sorted slots

    bool realized(int j, int slot) const;
    bool operator==(const Assignment& o) const = default;
};

class Design {
public:
    Design() = default;
    static Design completely_randomized(int J, int Jt, std::vector<RegionLaw> within);
    static Design bernoulli(std::vector<double> pi, std::vector<RegionLaw> within);
    // Every location is an independent trial; W_j records whether any location
    // in region j is realized.
    static Design independent_locations(std::vector<RegionLaw> within);

    AcrossLaw across() const { return across_; }
    int J() const { return static_cast<int>(within_.size()); }
    int Jt() const { return Jt_; }
    double pi(int j) const;
    const RegionLaw& law(int j) const;
    bool all_within(WithinLaw kind) const;
    std::string describe() const;

private:
    AcrossLaw across_ = AcrossLaw::Bernoulli;
    int Jt_ = 0;
    std::vector<double> pi_;
    std::vector<RegionLaw> within_;
};

double marginal_prob(const Design& design, int j, int slot);
double pair_covariance(const Design& design, int j, int s, int j2, int s2);
double design_C(const Design& design);

struct WeightedAssignment {
    Assignment assignment;
    double prob;
};

inline constexpr std::size_t kDefaultEnumerationCap = 1000000;

// Number of assignments with positive probability.
double support_size(const Design& design);
std::vector<WeightedAssignment> enumerate_assignments(const Design& design,
                                                      std::size_t cap = kDefaultEnumerationCap);
Assignment sample_assignment(const Design& design, std::uint64_t seed);

// Probability of one realized assignment under the design.
double assignment_prob(const Design& design, const Assignment& a);
void validate_assignment(const Design& design, const Assignment& a);

}  // namespace spatx
