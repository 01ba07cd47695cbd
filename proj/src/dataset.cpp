#include "spatx/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "spatx/errors.hpp"

namespace spatx {

void Study::finalize() {
    const int J = static_cast<int>(regions.size());
    for (auto& r : regions) {
        r.individuals.clear();
        r.locations.clear();
    }
    std::set<std::string> seen;
    for (std::size_t i = 0; i < people.size(); ++i) {
        auto& p = people[i];
        if (!seen.insert(p.id).second) throw DuplicateIdError("duplicate individual id '" + p.id + "'");
        if (p.region < 0 || p.region >= J) throw UnknownRegionError("individual '" + p.id + "' has unknown region");
        if (!std::isfinite(p.y)) throw ValidationError("individual '" + p.id + "' has non-finite outcome");
        if (p.x.size() != person_covariates.size())
            throw ValidationError("individual '" + p.id + "' has wrong number of covariates");
        if (p.r.id.empty()) p.r.id = p.id;
        p.slot = static_cast<int>(regions[p.region].individuals.size());
        regions[p.region].individuals.push_back(static_cast<int>(i));
    }
    seen.clear();
    for (std::size_t s = 0; s < sites.size(); ++s) {
        auto& c = sites[s];
        if (!seen.insert(c.id).second) throw DuplicateIdError("duplicate location id '" + c.id + "'");
        if (c.region < 0 || c.region >= J) throw UnknownRegionError("location '" + c.id + "' has unknown region");
        if (c.z.size() != site_covariates.size())
            throw ValidationError("location '" + c.id + "' has wrong number of covariates");
        if (c.s.id.empty()) c.s.id = c.id;
        c.slot = static_cast<int>(regions[c.region].locations.size());
        regions[c.region].locations.push_back(static_cast<int>(s));
    }
    for (const auto& r : regions) {
        if (r.locations.empty()) throw EmptyRegionError("region '" + r.id + "' has no candidate locations");
        if (r.individuals.empty()) throw EmptyRegionError("region '" + r.id + "' has no individuals");
    }
    if (design.J() != J) throw ValidationError("design covers a different number of regions than the data");
    for (int j = 0; j < J; ++j)
        if (design.law(j).n_locations != static_cast<int>(regions[j].locations.size()))
            throw ValidationError("design for region '" + regions[j].id + "' has wrong number of locations");
    validate_assignment(design, assignment);

    dist_.assign(sites.size(), {});
    for (std::size_t s = 0; s < sites.size(); ++s) {
        const auto& r = regions[sites[s].region];
        auto& row = dist_[s];
        row.resize(r.individuals.size());
        for (std::size_t k = 0; k < r.individuals.size(); ++k)
            row[k] = metric(sites[s].s, people[r.individuals[k]].r);
    }
}

double Study::dist(int site, int person) const {
    const auto& c = sites.at(site);
    const auto& p = people.at(person);
    if (c.region != p.region)
        throw std::logic_error("cross-region distance requested: location '" + c.id + "', individual '" + p.id + "'");
    return dist_[site][p.slot];
}

double Study::prob(int site) const {
    const auto& c = sites.at(site);
    return marginal_prob(design, c.region, c.slot);
}

bool Study::realized(int site) const {
    const auto& c = sites.at(site);
    return assignment.realized(c.region, c.slot);
}

std::vector<int> Study::realized_sites(int region) const {
    std::vector<int> out;
    for (int slot : assignment.xi.at(region)) out.push_back(regions[region].locations[slot]);
    return out;
}

int Study::person_covariate(const std::string& name) const {
    auto it = std::find(person_covariates.begin(), person_covariates.end(), name);
    if (it == person_covariates.end()) throw LookupError("unknown individual covariate '" + name + "'");
    return static_cast<int>(it - person_covariates.begin());
}

int Study::site_covariate(const std::string& name) const {
    auto it = std::find(site_covariates.begin(), site_covariates.end(), name);
    if (it == site_covariates.end()) throw LookupError("unknown location covariate '" + name + "'");
    return static_cast<int>(it - site_covariates.begin());
}

int Study::region_index(const std::string& id) const {
    for (int j = 0; j < J(); ++j)
        if (regions[j].id == id) return j;
    throw LookupError("unknown region '" + id + "'");
}

SyntheticStudy make_synthetic(Study study, std::vector<double> y0, CombinationRule rule) {
    if (y0.size() != study.people.size()) throw ValidationError("baseline outcomes have wrong length");
    SyntheticStudy s;
    s.y0 = std::move(y0);
    s.rule = rule;
    s.tau.resize(study.sites.size());
    for (std::size_t k = 0; k < study.sites.size(); ++k)
        s.tau[k].assign(study.regions[study.sites[k].region].individuals.size(), 0.0);
    s.study = std::move(study);
    return s;
}

double SyntheticStudy::outcome(int person, const std::vector<int>& slots) const {
    const auto& p = study.people[person];
    if (slots.empty()) return y0[person];
    const auto& region = study.regions[p.region];
    switch (rule) {
    case CombinationRule::Additive: {
        double y = y0[person];
        for (int slot : slots) y += tau[region.locations[slot]][p.slot];
        return y;
    }
    case CombinationRule::Nearest: {
        int best = region.locations[slots[0]];
        double best_d = study.site_distances(best)[p.slot];
        for (std::size_t k = 1; k < slots.size(); ++k) {
            int site = region.locations[slots[k]];
            double d = study.site_distances(site)[p.slot];
            if (d < best_d) {
                best = site;
                best_d = d;
            }
        }
        return y0[person] + tau[best][p.slot];
    }
    case CombinationRule::Lookup: {
        auto it = table.find({p.region, slots});
        if (it == table.end())
            throw IncompleteOracleError("potential-outcome table has no entry for a realized set in region '" +
                                        region.id + "'");
        return it->second.at(p.slot);
    }
    }
    return y0[person];
}

double SyntheticStudy::outcome_at(int person, int site) const {
    const auto& c = study.sites[site];
    if (c.region != study.people[person].region)
        throw std::logic_error("cross-region potential outcome requested");
    return outcome(person, {c.slot});
}

double SyntheticStudy::effect(int person, int site) const { return outcome_at(person, site) - y0[person]; }

void realize_into(const SyntheticStudy& synthetic, const Assignment& a, Study& out) {
    if (out.people.size() != synthetic.study.people.size()) throw std::logic_error("realize_into: shape mismatch");
    out.assignment = a;
    for (std::size_t i = 0; i < out.people.size(); ++i)
        out.people[i].y = synthetic.outcome(static_cast<int>(i), a.xi[out.people[i].region]);
    for (auto& c : out.sites) c.treated = a.realized(c.region, c.slot) ? 1 : 0;
}

Study realize_outcomes(const SyntheticStudy& synthetic, const Assignment& a) {
    validate_assignment(synthetic.study.design, a);
    Study out = synthetic.study;
    realize_into(synthetic, a, out);
    return out;
}

Study arcsinh_transform(Study study) {
    for (auto& p : study.people) {
        p.y = std::asinh(p.y);
        if (p.y_pre) p.y_pre = std::asinh(*p.y_pre);
    }
    return study;
}

double asinh_relative_effect(double base, double delta) {
    return (std::sinh(base + delta) - std::sinh(base)) / std::sinh(base);
}

}  // namespace spatx
