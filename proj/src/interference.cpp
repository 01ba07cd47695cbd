#include "spatx/interference.hpp"

#include <cmath>

#include "spatx/errors.hpp"
#include "spatx/numeric.hpp"

namespace spatx {

namespace {

double choose(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

void same_region(const Study& st, int person, int site) {
    if (st.people.at(person).region != st.sites.at(site).region)
        throw std::logic_error("unit estimator requested for a cross-region pair");
}

double control_term(const Study& st, int j, double y) {
    if (st.treated(j)) return 0.0;
    return y / (1.0 - st.pi(j));
}

}  // namespace

double tau_additive_unit(const Study& st, int person, int site) {
    same_region(st, person, site);
    const auto& c = st.sites[site];
    const int j = c.region;
    const RegionLaw& law = st.design.law(j);
    if (law.kind == WithinLaw::IndependentLocations) {
        const double p = law.location_pi[c.slot];
        if (!(p > 0.0 && p < 1.0))
            throw UnidentifiedError("location '" + c.id + "' has realization probability " + std::to_string(p));
        const double y = st.people[person].y;
        return st.realized(site) ? y / p : -y / (1.0 - p);
    }
    if (law.kind != WithinLaw::FixedK)
        throw UnsupportedDesignError("the additive estimator needs a fixed-k or independent within-region law");
    const int n = law.n_locations, k = law.k;
    const double pi = st.pi(j);
    if (pi <= 0.0) throw UnidentifiedError("region '" + st.regions[j].id + "' is never treated");
    const double coef = static_cast<double>(k - 1) / k;
    if (k == n && coef > 0.0)
        throw UnidentifiedError("every candidate location in region '" + st.regions[j].id +
                                "' is realized together; single-location effects are not identified");
    if (pi >= 1.0 && coef < 1.0)
        throw UnidentifiedError("region '" + st.regions[j].id + "' is never a control region");
    const double y = st.people[person].y;
    const bool W = st.treated(j);
    const bool real = st.realized(site);
    double v = 0.0;
    if (real) v += y / (pi * k / n);
    if (W && !real && coef > 0.0) v -= coef * y / (pi * (1.0 - static_cast<double>(k) / n));
    if (!W && coef < 1.0) v -= (1.0 - coef) * control_term(st, j, y);
    return v;
}

double tau_additive(const Study& st, const Window& window) {
    std::vector<double> num, den;
    for (std::size_t s = 0; s < st.sites.size(); ++s) {
        const int site = static_cast<int>(s);
        const double p = st.prob(site);
        const auto& people = st.regions[st.sites[s].region].individuals;
        const auto& d = st.site_distances(site);
        for (std::size_t k = 0; k < people.size(); ++k) {
            const double w = p * window.weight(d[k]);
            if (w == 0.0) continue;
            num.push_back(w * tau_additive_unit(st, people[k], site));
            den.push_back(w);
        }
    }
    const double total = pairwise_sum(den);
    if (total == 0.0) throw DegenerateEstimandError("no individuals in " + window.describe());
    return pairwise_sum(num) / total;
}

double tau_additive(const Study& st, const DistanceBin& bin) { return tau_additive(st, Window::closed(bin)); }

double additive_estimand(const SyntheticStudy& syn, const Window& window) {
    const Study& st = syn.study;
    std::vector<double> num, den;
    for (std::size_t s = 0; s < st.sites.size(); ++s) {
        const int site = static_cast<int>(s);
        const double p = st.prob(site);
        const auto& people = st.regions[st.sites[s].region].individuals;
        const auto& d = st.site_distances(site);
        for (std::size_t k = 0; k < people.size(); ++k) {
            const double w = p * window.weight(d[k]);
            if (w == 0.0) continue;
            num.push_back(w * syn.effect(people[k], site));
            den.push_back(w);
        }
    }
    const double total = pairwise_sum(den);
    if (total == 0.0) throw DegenerateEstimandError("no individuals in " + window.describe());
    return pairwise_sum(num) / total;
}

double nearest_probability(const Study& st, int person, int site) {
    same_region(st, person, site);
    const auto& c = st.sites[site];
    const int j = c.region;
    const auto& region = st.regions[j];
    const int slot = st.people[person].slot;
    const double ds = st.site_distances(site)[slot];
    const RegionLaw& law = st.design.law(j);
    switch (law.kind) {
    case WithinLaw::SingleLocation: return st.prob(site);
    case WithinLaw::FixedK: {
        int m = 0;
        for (int o : region.locations)
            if (o != site && st.site_distances(o)[slot] >= ds) ++m;
        return st.pi(j) * choose(m, law.k - 1) / choose(law.n_locations, law.k);
    }
    case WithinLaw::IndependentLocations: {
        double p = law.location_pi[c.slot];
        for (int o : region.locations)
            if (o != site && st.site_distances(o)[slot] < ds) p *= 1.0 - law.location_pi[st.sites[o].slot];
        return p;
    }
    }
    return 0.0;
}

std::optional<double> tau_nearest_unit(const Study& st, int person, int site) {
    const double p = nearest_probability(st, person, site);
    if (p <= 0.0) return std::nullopt;
    const int j = st.sites[site].region;
    if (st.pi(j) >= 1.0) throw UnidentifiedError("region '" + st.regions[j].id + "' is never a control region");
    const int slot = st.people[person].slot;
    const double y = st.people[person].y;
    double v = 0.0;
    if (st.realized(site)) {
        const double ds = st.site_distances(site)[slot];
        bool nearest = true;
        for (int o : st.realized_sites(j))
            if (st.site_distances(o)[slot] < ds) nearest = false;
        if (nearest) v += y / p;
    }
    return v - control_term(st, j, y);
}

WeightTable restrict_to_identified(const Study& st, WeightTable table) {
    for (std::size_t s = 0; s < st.sites.size(); ++s) {
        const auto& people = st.regions[st.sites[s].region].individuals;
        for (std::size_t k = 0; k < people.size(); ++k)
            if (table.w[s][k] != 0.0 && nearest_probability(st, people[k], static_cast<int>(s)) <= 0.0)
                table.w[s][k] = 0.0;
    }
    return table;
}

double tau_nearest(const Study& st, const WeightTable& table) {
    std::vector<std::pair<std::string, std::string>> bad;
    std::vector<double> num, den;
    for (std::size_t s = 0; s < st.sites.size(); ++s) {
        const auto& people = st.regions[st.sites[s].region].individuals;
        for (std::size_t k = 0; k < people.size(); ++k) {
            const double w = table.w[s][k];
            if (w == 0.0) continue;
            const auto v = tau_nearest_unit(st, people[k], static_cast<int>(s));
            if (!v) {
                bad.emplace_back(st.people[people[k]].id, st.sites[s].id);
                continue;
            }
            num.push_back(w * *v);
            den.push_back(w);
        }
    }
    if (!bad.empty()) throw NotIdentifiedError(std::move(bad));
    const double total = pairwise_sum(den);
    if (total == 0.0) throw DegenerateEstimandError("estimand weights sum to zero");
    return pairwise_sum(num) / total;
}

double tau_nearest(const Study& st, const WeightScheme& scheme, const Window& window) {
    return tau_nearest(st, build_weights(st, scheme, window));
}

double tau_single_region(const Study& st, const Window& window) {
    std::vector<double> p(st.sites.size());
    for (std::size_t s = 0; s < st.sites.size(); ++s) p[s] = st.prob(static_cast<int>(s));
    return tau_single_region(st, window, p);
}

double tau_single_region(const Study& st, const Window& window, const std::vector<double>& probs) {
    if (!st.design.all_within(WithinLaw::IndependentLocations))
        throw UnsupportedDesignError("the single-region estimator needs independent assignment across locations");
    if (probs.size() != st.sites.size()) throw ValidationError("one probability per candidate location is required");
    std::vector<double> tw, ty, cw, cy;
    for (std::size_t s = 0; s < st.sites.size(); ++s) {
        const auto& people = st.regions[st.sites[s].region].individuals;
        const auto& d = st.site_distances(static_cast<int>(s));
        std::vector<double> k, ky;
        for (std::size_t i = 0; i < people.size(); ++i) {
            const double kw = window.weight(d[i]);
            if (kw == 0.0) continue;
            k.push_back(kw);
            ky.push_back(kw * st.people[people[i]].y);
        }
        if (k.empty()) continue;
        const double p = probs[s];
        if (!(p > 0.0 && p < 1.0))
            throw OverlapError("location '" + st.sites[s].id + "' has realization probability " + std::to_string(p));
        const double mass = pairwise_sum(k), sum = pairwise_sum(ky);
        if (st.realized(static_cast<int>(s))) {
            tw.push_back(mass);
            ty.push_back(sum);
        } else {
            const double r = p / (1.0 - p);
            cw.push_back(r * mass);
            cy.push_back(r * sum);
        }
    }
    const double t = pairwise_sum(tw), c = pairwise_sum(cw);
    if (t == 0.0) throw EmptyArmError("realized", window.describe());
    if (c == 0.0) throw EmptyArmError("unrealized", window.describe());
    return pairwise_sum(ty) / t - pairwise_sum(cy) / c;
}

double single_region_estimand(const SyntheticStudy& syn, const Window& window) {
    const Study& st = syn.study;
    std::vector<double> num, den;
    for (std::size_t s = 0; s < st.sites.size(); ++s) {
        const double p = st.prob(static_cast<int>(s));
        const auto& people = st.regions[st.sites[s].region].individuals;
        const auto& d = st.site_distances(static_cast<int>(s));
        for (std::size_t i = 0; i < people.size(); ++i) {
            const double w = p * window.weight(d[i]);
            if (w == 0.0) continue;
            num.push_back(w * syn.effect(people[i], static_cast<int>(s)));
            den.push_back(w);
        }
    }
    const double total = pairwise_sum(den);
    if (total == 0.0) throw DegenerateEstimandError("no individuals in " + window.describe());
    return pairwise_sum(num) / total;
}

}  // namespace spatx
