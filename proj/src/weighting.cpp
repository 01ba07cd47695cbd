#include "spatx/weighting.hpp"

#include <cmath>

#include "spatx/errors.hpp"
#include "spatx/numeric.hpp"

namespace spatx {

double WeightTable::total() const {
    std::vector<double> parts;
    parts.reserve(w.size());
    for (const auto& row : w) parts.push_back(pairwise_sum(row));
    return pairwise_sum(parts);
}

double WeightTable::site_total(int site) const { return pairwise_sum(w.at(site)); }

void WeightTable::scale(double c) {
    for (auto& row : w)
        for (double& v : row) v *= c;
}

WeightScheme WeightScheme::att() { return {}; }

WeightScheme WeightScheme::att_eq() {
    WeightScheme s;
    s.kind = Kind::ATTEq;
    return s;
}

WeightScheme WeightScheme::custom(Fn fn, bool allow_negative) {
    WeightScheme s;
    s.kind = Kind::Custom;
    s.fn = std::move(fn);
    s.allow_negative = allow_negative;
    return s;
}

std::string WeightScheme::name() const {
    switch (kind) {
    case Kind::ATT: return "att";
    case Kind::ATTEq: return "att-eq";
    case Kind::Custom: return "custom";
    }
    return "?";
}

namespace {

WeightTable shaped(const Study& study) {
    WeightTable t;
    t.w.resize(study.sites.size());
    for (std::size_t s = 0; s < study.sites.size(); ++s) t.w[s].assign(study.site_distances(static_cast<int>(s)).size(), 0.0);
    return t;
}

double location_prob(const Study& study, int site) {
    double p = study.prob(site);
    if (!std::isfinite(p)) throw ValidationError("missing treatment probability for location '" + study.sites[site].id + "'");
    return p;
}

}  // namespace

WeightTable att_weights(const Study& study, const Window& window) {
    WeightTable t = shaped(study);
    for (std::size_t s = 0; s < study.sites.size(); ++s) {
        const double p = location_prob(study, static_cast<int>(s));
        const auto& d = study.site_distances(static_cast<int>(s));
        for (std::size_t k = 0; k < d.size(); ++k) t.w[s][k] = p * window.weight(d[k]);
    }
    return t;
}

WeightTable att_weights(const Study& study, const DistanceBin& bin) { return att_weights(study, Window::closed(bin)); }

WeightTable att_eq_weights(const Study& study, const Window& window) {
    WeightTable t = shaped(study);
    for (std::size_t s = 0; s < study.sites.size(); ++s) {
        const double p = location_prob(study, static_cast<int>(s));
        const auto& d = study.site_distances(static_cast<int>(s));
        std::vector<double> k(d.size());
        for (std::size_t i = 0; i < d.size(); ++i) k[i] = window.weight(d[i]);
        const double mass = pairwise_sum(k);
        if (mass <= 0.0) {
            t.empty_sites.push_back(static_cast<int>(s));
            continue;
        }
        for (std::size_t i = 0; i < d.size(); ++i) t.w[s][i] = p * k[i] / mass;
    }
    return t;
}

WeightTable att_eq_weights(const Study& study, const DistanceBin& bin) {
    return att_eq_weights(study, Window::closed(bin));
}

WeightTable build_weights(const Study& study, const WeightScheme& scheme, const Window& window) {
    switch (scheme.kind) {
    case WeightScheme::Kind::ATT: return att_weights(study, window);
    case WeightScheme::Kind::ATTEq: return att_eq_weights(study, window);
    case WeightScheme::Kind::Custom: break;
    }
    if (!scheme.fn) throw ValidationError("custom weight scheme has no function");
    WeightTable t = shaped(study);
    for (std::size_t s = 0; s < study.sites.size(); ++s) {
        const auto& people = study.regions[study.sites[s].region].individuals;
        for (std::size_t k = 0; k < people.size(); ++k) {
            double v = scheme.fn(study, people[k], static_cast<int>(s), window);
            if (!std::isfinite(v)) throw ValidationError("custom weight is not finite");
            if (v < 0.0 && !scheme.allow_negative)
                throw ValidationError("custom weight is negative for individual '" + study.people[people[k]].id +
                                      "' and location '" + study.sites[s].id + "'");
            t.w[s][k] = v;
        }
    }
    return t;
}

EstimandParts estimand_parts(const SyntheticStudy& syn, const WeightTable& table) {
    const Study& st = syn.study;
    std::vector<double> wt, wc, ww;
    for (std::size_t s = 0; s < st.sites.size(); ++s) {
        const auto& people = st.regions[st.sites[s].region].individuals;
        for (std::size_t k = 0; k < people.size(); ++k) {
            const double w = table.w[s][k];
            if (w == 0.0) continue;
            ww.push_back(w);
            wt.push_back(w * syn.outcome_at(people[k], static_cast<int>(s)));
            wc.push_back(w * syn.y0[people[k]]);
        }
    }
    EstimandParts e;
    e.total = pairwise_sum(ww);
    if (e.total == 0.0) throw DegenerateEstimandError("estimand weights sum to zero");
    e.mu_t = pairwise_sum(wt) / e.total;
    e.mu_c = pairwise_sum(wc) / e.total;
    return e;
}

double weighted_estimand(const SyntheticStudy& syn, const WeightScheme& scheme, const Window& window) {
    return estimand_parts(syn, build_weights(syn.study, scheme, window)).tau();
}

}  // namespace spatx
