#include "spatx/design.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "spatx/errors.hpp"

namespace spatx {

namespace {

constexpr double kSumTol = 1e-9;

void check_prob(double p, const std::string& what) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(what + " must lie in [0, 1]");
}

void check_law(const RegionLaw& law, int j) {
    std::string where = "region " + std::to_string(j);
    if (law.n_locations < 1) throw ValidationError(where + " has no candidate locations");
    switch (law.kind) {
    case WithinLaw::SingleLocation: {
        if (static_cast<int>(law.g.size()) != law.n_locations)
            throw ValidationError(where + ": g has wrong length");
        double sum = 0.0;
        for (double g : law.g) {
            check_prob(g, where + ": g");
            sum += g;
        }
        if (std::fabs(sum - 1.0) > kSumTol) throw ValidationError(where + ": g does not sum to 1");
        break;
    }
    case WithinLaw::FixedK:
        if (law.k < 1 || law.k > law.n_locations)
            throw ValidationError(where + ": FixedK needs 1 <= k <= number of locations");
        break;
    case WithinLaw::IndependentLocations:
        if (static_cast<int>(law.location_pi.size()) != law.n_locations)
            throw ValidationError(where + ": location probabilities have wrong length");
        for (double p : law.location_pi) check_prob(p, where + ": location probability");
        break;
    }
}

double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return std::round(r);
}

// Realized sets (given W_j = 1) with their conditional probabilities.
struct Option {
    std::vector<int> xi;
    double prob;
};

void combinations(int n, int k, int start, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
    if (static_cast<int>(cur.size()) == k) {
        out.push_back(cur);
        return;
    }
    for (int s = start; s < n; ++s) {
        cur.push_back(s);
        combinations(n, k, s + 1, cur, out);
        cur.pop_back();
    }
}

std::vector<Option> treated_options(const RegionLaw& law) {
    std::vector<Option> out;
    if (law.kind == WithinLaw::SingleLocation) {
        for (int s = 0; s < law.n_locations; ++s)
            if (law.g[s] > 0.0) out.push_back({{s}, law.g[s]});
    } else if (law.kind == WithinLaw::FixedK) {
        std::vector<std::vector<int>> combos;
        std::vector<int> cur;
        combinations(law.n_locations, law.k, 0, cur, combos);
        double p = 1.0 / static_cast<double>(combos.size());
        for (auto& c : combos) out.push_back({std::move(c), p});
    }
    return out;
}

// All subsets with positive probability, including the empty one.
std::vector<Option> independent_options(const RegionLaw& law) {
    std::vector<Option> out{{{}, 1.0}};
    for (int s = 0; s < law.n_locations; ++s) {
        double p = law.location_pi[s];
        std::vector<Option> next;
        for (const auto& o : out) {
            if (p < 1.0) next.push_back({o.xi, o.prob * (1.0 - p)});
            if (p > 0.0) {
                Option t = o;
                t.xi.push_back(s);
                t.prob *= p;
                next.push_back(std::move(t));
            }
        }
        out = std::move(next);
    }
    return out;
}

double count_positive(const RegionLaw& law) {
    if (law.kind == WithinLaw::SingleLocation) {
        int m = 0;
        for (double g : law.g) m += g > 0.0;
        return m;
    }
    if (law.kind == WithinLaw::FixedK) return binomial(law.n_locations, law.k);
    double c = 1.0;
    for (double p : law.location_pi) c *= (p > 0.0 && p < 1.0) ? 2.0 : 1.0;
    return c;
}

std::uint64_t next_u64(std::mt19937_64& rng) { return rng(); }

double uniform01(std::mt19937_64& rng) { return static_cast<double>(next_u64(rng) >> 11) * 0x1.0p-53; }

int uniform_index(std::mt19937_64& rng, int n) {
    // Plain rejection so draws do not depend on the standard library's distributions.
    std::uint64_t bound = static_cast<std::uint64_t>(n);
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
        x = next_u64(rng);
    } while (x >= limit);
    return static_cast<int>(x % bound);
}

}  // namespace

RegionLaw RegionLaw::single(std::vector<double> g) {
    RegionLaw l;
    l.kind = WithinLaw::SingleLocation;
    l.n_locations = static_cast<int>(g.size());
    l.g = std::move(g);
    return l;
}

RegionLaw RegionLaw::uniform(int n) { return single(std::vector<double>(n, 1.0 / n)); }

RegionLaw RegionLaw::fixed_k(int n, int k) {
    RegionLaw l;
    l.kind = WithinLaw::FixedK;
    l.n_locations = n;
    l.k = k;
    return l;
}

RegionLaw RegionLaw::independent(std::vector<double> location_pi) {
    RegionLaw l;
    l.kind = WithinLaw::IndependentLocations;
    l.n_locations = static_cast<int>(location_pi.size());
    l.location_pi = std::move(location_pi);
    return l;
}

bool Assignment::realized(int j, int slot) const {
    const auto& x = xi[j];
    return std::binary_search(x.begin(), x.end(), slot);
}

Design Design::completely_randomized(int J, int Jt, std::vector<RegionLaw> within) {
    if (!(0 < Jt && Jt < J)) throw ValidationError("completely randomized design needs 0 < J_t < J");
    if (static_cast<int>(within.size()) != J) throw ValidationError("need one within-region law per region");
    for (int j = 0; j < J; ++j) {
        if (within[j].kind == WithinLaw::IndependentLocations)
            throw ValidationError("independent locations cannot be combined with an across-region law");
        check_law(within[j], j);
    }
    Design d;
    d.across_ = AcrossLaw::CompletelyRandomized;
    d.Jt_ = Jt;
    d.pi_.assign(J, static_cast<double>(Jt) / J);
    d.within_ = std::move(within);
    return d;
}

Design Design::bernoulli(std::vector<double> pi, std::vector<RegionLaw> within) {
    if (pi.size() != within.size()) throw ValidationError("need one within-region law per region");
    if (pi.empty()) throw ValidationError("design has no regions");
    for (std::size_t j = 0; j < pi.size(); ++j) {
        check_prob(pi[j], "pi for region " + std::to_string(j));
        if (within[j].kind == WithinLaw::IndependentLocations)
            throw ValidationError("independent locations cannot be combined with an across-region law");
        check_law(within[j], static_cast<int>(j));
    }
    Design d;
    d.across_ = AcrossLaw::Bernoulli;
    d.pi_ = std::move(pi);
    d.within_ = std::move(within);
    return d;
}

Design Design::independent_locations(std::vector<RegionLaw> within) {
    if (within.empty()) throw ValidationError("design has no regions");
    Design d;
    d.across_ = AcrossLaw::Bernoulli;
    for (std::size_t j = 0; j < within.size(); ++j) {
        if (within[j].kind != WithinLaw::IndependentLocations)
            throw ValidationError("independent-locations design needs per-location probabilities");
        check_law(within[j], static_cast<int>(j));
        double none = 1.0;
        for (double p : within[j].location_pi) none *= 1.0 - p;
        d.pi_.push_back(1.0 - none);
    }
    d.within_ = std::move(within);
    return d;
}

double Design::pi(int j) const {
    if (j < 0 || j >= J()) throw LookupError("unknown region index " + std::to_string(j));
    return pi_[j];
}

const RegionLaw& Design::law(int j) const {
    if (j < 0 || j >= J()) throw LookupError("unknown region index " + std::to_string(j));
    return within_[j];
}

bool Design::all_within(WithinLaw kind) const {
    return std::all_of(within_.begin(), within_.end(), [&](const RegionLaw& l) { return l.kind == kind; });
}

std::string Design::describe() const {
    std::ostringstream os;
    if (all_within(WithinLaw::IndependentLocations)) {
        os << "independent_locations J=" << J();
        return os.str();
    }
    if (across_ == AcrossLaw::CompletelyRandomized)
        os << "completely_randomized J=" << J() << " Jt=" << Jt_;
    else
        os << "bernoulli J=" << J();
    return os.str();
}

double marginal_prob(const Design& design, int j, int slot) {
    const RegionLaw& law = design.law(j);
    if (slot < 0 || slot >= law.n_locations)
        throw LookupError("unknown location slot " + std::to_string(slot) + " in region " + std::to_string(j));
    switch (law.kind) {
    case WithinLaw::SingleLocation: return design.pi(j) * law.g[slot];
    case WithinLaw::FixedK: return design.pi(j) * static_cast<double>(law.k) / law.n_locations;
    case WithinLaw::IndependentLocations: return law.location_pi[slot];
    }
    return 0.0;
}

double pair_covariance(const Design& design, int j, int s, int j2, int s2) {
    if (!design.all_within(WithinLaw::SingleLocation))
        throw UnsupportedDesignError("pair covariance is only defined for single-location designs");
    const double g1 = design.law(j).g.at(s);
    const double g2 = design.law(j2).g.at(s2);
    if (j == j2) {
        const double pi = design.pi(j);
        if (s == s2) return pi * g1 * (1.0 - pi * g1);
        return -pi * pi * g1 * g2;
    }
    if (design.across() == AcrossLaw::Bernoulli) return 0.0;
    const double pi = design.pi(j);
    return -pi * (1.0 - pi) / (design.J() - 1) * g1 * g2;
}

double design_C(const Design& design) {
    if (design.across() != AcrossLaw::CompletelyRandomized) return 0.0;
    const double pi = static_cast<double>(design.Jt()) / design.J();
    return pi * (1.0 - pi) / (design.J() - 1);
}

double support_size(const Design& design) {
    const int J = design.J();
    if (design.all_within(WithinLaw::IndependentLocations)) {
        double c = 1.0;
        for (int j = 0; j < J; ++j) c *= count_positive(design.law(j));
        return c;
    }
    if (design.across() == AcrossLaw::Bernoulli) {
        double c = 1.0;
        for (int j = 0; j < J; ++j) {
            double pi = design.pi(j);
            c *= (pi > 0.0 ? count_positive(design.law(j)) : 0.0) + (pi < 1.0 ? 1.0 : 0.0);
        }
        return c;
    }
    // Elementary symmetric polynomial of order Jt in the per-region option counts.
    std::vector<double> e(design.Jt() + 1, 0.0);
    e[0] = 1.0;
    for (int j = 0; j < J; ++j) {
        double m = count_positive(design.law(j));
        for (int t = design.Jt(); t >= 1; --t) e[t] += e[t - 1] * m;
    }
    return e[design.Jt()];
}

std::vector<WeightedAssignment> enumerate_assignments(const Design& design, std::size_t cap) {
    const double size = support_size(design);
    if (size > static_cast<double>(cap)) {
        std::ostringstream os;
        os << "assignment support has " << size << " elements, cap is " << cap;
        throw EnumerationTooLargeError(os.str());
    }
    const int J = design.J();
    const bool independent = design.all_within(WithinLaw::IndependentLocations);
    std::vector<std::vector<Option>> options(J);
    for (int j = 0; j < J; ++j)
        options[j] = independent ? independent_options(design.law(j)) : treated_options(design.law(j));

    std::vector<WeightedAssignment> out;
    out.reserve(static_cast<std::size_t>(size));
    Assignment cur;
    cur.W.assign(J, 0);
    cur.xi.assign(J, {});

    const double cr_prob = design.across() == AcrossLaw::CompletelyRandomized
                               ? 1.0 / binomial(J, design.Jt())
                               : 1.0;

    std::function<void(int, int, double)> rec = [&](int j, int treated, double prob) {
        if (j == J) {
            if (!independent && design.across() == AcrossLaw::CompletelyRandomized && treated != design.Jt()) return;
            out.push_back({cur, prob * cr_prob});
            return;
        }
        if (independent) {
            for (const auto& o : options[j]) {
                cur.W[j] = o.xi.empty() ? 0 : 1;
                cur.xi[j] = o.xi;
                rec(j + 1, treated, prob * o.prob);
            }
            cur.W[j] = 0;
            cur.xi[j].clear();
            return;
        }
        const bool cr = design.across() == AcrossLaw::CompletelyRandomized;
        const double pi = design.pi(j);
        const int remaining = J - j - 1;
        // control
        if (cr ? (design.Jt() - treated <= remaining) : pi < 1.0) {
            cur.W[j] = 0;
            cur.xi[j].clear();
            rec(j + 1, treated, cr ? prob : prob * (1.0 - pi));
        }
        if (cr ? (treated < design.Jt()) : pi > 0.0) {
            for (const auto& o : options[j]) {
                cur.W[j] = 1;
                cur.xi[j] = o.xi;
                rec(j + 1, treated + 1, cr ? prob * o.prob : prob * pi * o.prob);
            }
        }
        cur.W[j] = 0;
        cur.xi[j].clear();
    };
    rec(0, 0, 1.0);
    return out;
}

Assignment sample_assignment(const Design& design, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const int J = design.J();
    Assignment a;
    a.W.assign(J, 0);
    a.xi.assign(J, {});
    const bool independent = design.all_within(WithinLaw::IndependentLocations);
    if (independent) {
        for (int j = 0; j < J; ++j) {
            const auto& law = design.law(j);
            for (int s = 0; s < law.n_locations; ++s)
                if (uniform01(rng) < law.location_pi[s]) a.xi[j].push_back(s);
            a.W[j] = a.xi[j].empty() ? 0 : 1;
        }
        return a;
    }
    if (design.across() == AcrossLaw::CompletelyRandomized) {
        std::vector<int> idx(J);
        for (int j = 0; j < J; ++j) idx[j] = j;
        for (int t = 0; t < design.Jt(); ++t) {
            int r = t + uniform_index(rng, J - t);
            std::swap(idx[t], idx[r]);
            a.W[idx[t]] = 1;
        }
    } else {
        for (int j = 0; j < J; ++j) a.W[j] = uniform01(rng) < design.pi(j) ? 1 : 0;
    }
    for (int j = 0; j < J; ++j) {
        if (!a.W[j]) continue;
        const auto& law = design.law(j);
        if (law.kind == WithinLaw::SingleLocation) {
            double u = uniform01(rng);
            double acc = 0.0;
            int pick = -1;
            for (int s = 0; s < law.n_locations; ++s) {
                if (law.g[s] <= 0.0) continue;
                acc += law.g[s];
                pick = s;
                if (u < acc) break;
            }
            a.xi[j] = {pick};
        } else {
            std::vector<int> idx(law.n_locations);
            for (int s = 0; s < law.n_locations; ++s) idx[s] = s;
            for (int t = 0; t < law.k; ++t) {
                int r = t + uniform_index(rng, law.n_locations - t);
                std::swap(idx[t], idx[r]);
            }
            a.xi[j].assign(idx.begin(), idx.begin() + law.k);
            std::sort(a.xi[j].begin(), a.xi[j].end());
        }
    }
    return a;
}

void validate_assignment(const Design& design, const Assignment& a) {
    const int J = design.J();
    if (static_cast<int>(a.W.size()) != J || static_cast<int>(a.xi.size()) != J)
        throw ValidationError("assignment has wrong number of regions");
    int treated = 0;
    for (int j = 0; j < J; ++j) {
        const auto& law = design.law(j);
        const auto& x = a.xi[j];
        std::string where = "region " + std::to_string(j);
        if (!std::is_sorted(x.begin(), x.end()) || std::adjacent_find(x.begin(), x.end()) != x.end())
            throw ValidationError(where + ": realized set must be sorted and unique");
        for (int s : x)
            if (s < 0 || s >= law.n_locations) throw ValidationError(where + ": realized slot out of range");
        if ((a.W[j] != 0) != !x.empty()) throw ValidationError(where + ": W and realized set disagree");
        treated += a.W[j] != 0;
        if (!a.W[j]) continue;
        if (law.kind == WithinLaw::SingleLocation) {
            if (x.size() != 1) throw ValidationError(where + ": single-location design realizes exactly one location");
            if (law.g[x[0]] <= 0.0) throw ValidationError(where + ": realized location has zero probability");
        } else if (law.kind == WithinLaw::FixedK) {
            if (static_cast<int>(x.size()) != law.k)
                throw ValidationError(where + ": fixed-k design realizes exactly k locations");
        }
    }
    if (!design.all_within(WithinLaw::IndependentLocations) && design.across() == AcrossLaw::CompletelyRandomized &&
        treated != design.Jt())
        throw ValidationError("assignment treats " + std::to_string(treated) + " regions, design requires " +
                              std::to_string(design.Jt()));
}

double assignment_prob(const Design& design, const Assignment& a) {
    try {
        validate_assignment(design, a);
    } catch (const ValidationError&) {
        return 0.0;
    }
    const int J = design.J();
    double p = 1.0;
    if (design.all_within(WithinLaw::IndependentLocations)) {
        for (int j = 0; j < J; ++j) {
            const auto& law = design.law(j);
            for (int s = 0; s < law.n_locations; ++s)
                p *= a.realized(j, s) ? law.location_pi[s] : 1.0 - law.location_pi[s];
        }
        return p;
    }
    if (design.across() == AcrossLaw::CompletelyRandomized) p = 1.0 / binomial(J, design.Jt());
    for (int j = 0; j < J; ++j) {
        const auto& law = design.law(j);
        if (design.across() == AcrossLaw::Bernoulli) p *= a.W[j] ? design.pi(j) : 1.0 - design.pi(j);
        if (!a.W[j]) continue;
        if (law.kind == WithinLaw::SingleLocation)
            p *= law.g[a.xi[j][0]];
        else
            p /= binomial(law.n_locations, law.k);
    }
    return p;
}

}  // namespace spatx
