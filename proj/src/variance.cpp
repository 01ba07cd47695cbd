#include "spatx/variance.hpp"

#include <algorithm>
#include <cmath>

#include "spatx/errors.hpp"
#include "spatx/estimators.hpp"
#include "spatx/numeric.hpp"

namespace spatx {

namespace {

void require_single_location(const Design& design, const char* what) {
    if (!design.all_within(WithinLaw::SingleLocation))
        throw UnsupportedDesignError(std::string(what) + " needs a single-location design within regions");
}

double g_of(const Design& design, const CandidateLocation& c) { return design.law(c.region).g[c.slot]; }

// Per region: S_t(s) = sum_i w_i(s)(Y_i(s) - mu_t) for each location, and
// R_c = sum_i sum_s w_i(s)(Y_i(0) - mu_c).
struct RegionSums {
    std::vector<std::vector<double>> st;  // [region][slot]
    std::vector<double> rc;
};

RegionSums region_sums(const SyntheticStudy& syn, const WeightTable& table, const EstimandParts& e) {
    const Study& st = syn.study;
    RegionSums r;
    r.st.resize(st.J());
    r.rc.assign(st.J(), 0.0);
    for (int j = 0; j < st.J(); ++j) {
        const auto& region = st.regions[j];
        r.st[j].assign(region.locations.size(), 0.0);
        std::vector<double> rc_terms;
        for (std::size_t slot = 0; slot < region.locations.size(); ++slot) {
            const int site = region.locations[slot];
            std::vector<double> terms;
            for (std::size_t k = 0; k < region.individuals.size(); ++k) {
                const double w = table.w[site][k];
                if (w == 0.0) continue;
                const int person = region.individuals[k];
                terms.push_back(w * (syn.outcome_at(person, site) - e.mu_t));
                rc_terms.push_back(w * (syn.y0[person] - e.mu_c));
            }
            r.st[j][slot] = pairwise_sum(terms);
        }
        r.rc[j] = pairwise_sum(rc_terms);
    }
    return r;
}

void check_region_probability(double pi, bool has_weight, const std::string& id) {
    if (has_weight && (pi <= 0.0 || pi >= 1.0))
        throw UnsupportedDesignError("region '" + id + "' carries estimand weight but has treatment probability " +
                                     std::to_string(pi));
}

}  // namespace

LinearForm demeaned_linear_form(const SyntheticStudy& syn, const WeightTable& table) {
    const Study& st = syn.study;
    require_single_location(st.design, "the closed-form variance");
    const EstimandParts e = estimand_parts(syn, table);
    const RegionSums r = region_sums(syn, table, e);
    LinearForm f;
    f.z.assign(st.sites.size(), 0.0);
    for (int j = 0; j < st.J(); ++j) {
        const double pi = st.pi(j);
        bool has_weight = r.rc[j] != 0.0;
        for (double v : r.st[j]) has_weight = has_weight || v != 0.0;
        for (int site : st.regions[j].locations)
            for (double w : table.w[site]) has_weight = has_weight || w != 0.0;
        check_region_probability(pi, has_weight, st.regions[j].id);
        if (!has_weight) continue;
        const double b = r.rc[j] / (1.0 - pi);
        for (std::size_t slot = 0; slot < st.regions[j].locations.size(); ++slot) {
            const int site = st.regions[j].locations[slot];
            const double p = pi * g_of(st.design, st.sites[site]);
            double a = 0.0;
            if (r.st[j][slot] != 0.0) {
                if (p <= 0.0)
                    throw DegenerateEstimandError("location '" + st.sites[site].id +
                                                  "' carries estimand weight but cannot be realized");
                a = r.st[j][slot] / p;
            }
            f.z[site] = (a + b) / e.total;
        }
    }
    return f;
}

LinearForm combine(const std::vector<LinearForm>& forms, const std::vector<double>& coefficients) {
    if (forms.size() != coefficients.size() || forms.empty()) throw std::logic_error("combine: shape mismatch");
    LinearForm out;
    out.z.assign(forms[0].z.size(), 0.0);
    for (std::size_t k = 0; k < forms.size(); ++k)
        for (std::size_t s = 0; s < out.z.size(); ++s) out.z[s] += coefficients[k] * forms[k].z[s];
    return out;
}

double form_covariance(const Design& design, const Study& st, const LinearForm& a, const LinearForm& b) {
    require_single_location(design, "form_covariance");
    const double C = design_C(design);
    std::vector<double> diag, region_terms, abar, bbar;
    for (int j = 0; j < st.J(); ++j) {
        const double pi = design.pi(j);
        double sa = 0.0, sb = 0.0;
        for (int site : st.regions[j].locations) {
            const double g = g_of(design, st.sites[site]);
            diag.push_back(pi * g * a.z[site] * b.z[site]);
            sa += g * a.z[site];
            sb += g * b.z[site];
        }
        const double cj = design.across() == AcrossLaw::CompletelyRandomized ? C : 0.0;
        region_terms.push_back((pi * pi - cj) * sa * sb);
        abar.push_back(sa);
        bbar.push_back(sb);
    }
    double v = pairwise_sum(diag) - pairwise_sum(region_terms);
    if (design.across() == AcrossLaw::CompletelyRandomized) v -= C * pairwise_sum(abar) * pairwise_sum(bbar);
    return v;
}

double form_covariance_quadratic(const Design& design, const Study& st, const LinearForm& a, const LinearForm& b) {
    std::vector<double> terms;
    for (std::size_t s = 0; s < st.sites.size(); ++s) {
        if (a.z[s] == 0.0) continue;
        for (std::size_t t = 0; t < st.sites.size(); ++t) {
            if (b.z[t] == 0.0) continue;
            const auto& cs = st.sites[s];
            const auto& ct = st.sites[t];
            terms.push_back(pair_covariance(design, cs.region, cs.slot, ct.region, ct.slot) * a.z[s] * b.z[t]);
        }
    }
    return pairwise_sum(terms);
}

Theorem3Terms theorem3_terms(const SyntheticStudy& syn, const WeightTable& table) {
    const Study& st = syn.study;
    require_single_location(st.design, "the closed-form variance");
    const EstimandParts e = estimand_parts(syn, table);
    const RegionSums r = region_sums(syn, table, e);
    Theorem3Terms t;
    t.C = design_C(st.design);
    const double N2 = e.total * e.total;
    std::vector<double> v1, v2, v3, v4, v5, vc;
    for (int j = 0; j < st.J(); ++j) {
        const double pi = st.pi(j);
        const auto& locs = st.regions[j].locations;
        double rt = 0.0;
        bool has_weight = r.rc[j] != 0.0;
        for (double v : r.st[j]) {
            rt += v;
            has_weight = has_weight || v != 0.0;
        }
        check_region_probability(pi, has_weight, st.regions[j].id);
        if (!has_weight) continue;
        const double rc = r.rc[j];
        double inner1 = 0.0, inner4 = 0.0;
        for (std::size_t slot = 0; slot < locs.size(); ++slot) {
            const double g = g_of(st.design, st.sites[locs[slot]]);
            const double s_t = r.st[j][slot];
            if (g <= 0.0) {
                if (s_t != 0.0)
                    throw DegenerateEstimandError("location '" + st.sites[locs[slot]].id +
                                                  "' carries estimand weight but cannot be realized");
                continue;
            }
            inner1 += s_t * s_t / g;
            const double dev = s_t / (pi * g) - rc / (1.0 - pi);
            inner4 += g * dev * dev;
        }
        const double pc = pi * pi - t.C;
        const double q = 1.0 - pi;
        v1.push_back(2.0 / pi * inner1);
        v2.push_back(2.0 * (pi * q + t.C) / (q * q) * rc * rc);
        v3.push_back(-2.0 * pc / (pi * pi) * rt * rt);
        v4.push_back(-pi * inner4);
        const double d5 = rt / pi - rc / q;
        v5.push_back(pc * d5 * d5);
        const double dc = rt / pi + rc / q;
        vc.push_back(dc * dc);
    }
    t.t1 = pairwise_sum(v1) / N2;
    t.t2 = pairwise_sum(v2) / N2;
    t.t3 = pairwise_sum(v3) / N2;
    t.t4 = pairwise_sum(v4) / N2;
    t.t5 = pairwise_sum(v5) / N2;
    t.c_coefficient = pairwise_sum(vc) / N2;
    return t;
}

double true_variance(const SyntheticStudy& syn, const WeightTable& table) { return theorem3_terms(syn, table).total(); }

double true_variance(const SyntheticStudy& syn, const WeightScheme& scheme, const Window& window) {
    return true_variance(syn, build_weights(syn.study, scheme, window));
}

double cross_bin_covariance(const SyntheticStudy& syn, const WeightScheme& scheme, const Window& a,
                            const Window& b) {
    const LinearForm fa = demeaned_linear_form(syn, build_weights(syn.study, scheme, a));
    const LinearForm fb = demeaned_linear_form(syn, build_weights(syn.study, scheme, b));
    return form_covariance(syn.study.design, syn.study, fa, fb);
}

VarianceReport conservative_variance(const Study& st, const std::vector<WeightTable>& tables,
                                     const std::vector<double>& coefficients, bool refine) {
    if (tables.empty() || tables.size() != coefficients.size())
        throw std::logic_error("conservative_variance: tables and coefficients differ in length");
    const std::size_t K = tables.size();
    std::vector<double> scale(K), mu_t(K), mu_c(K);
    for (std::size_t k = 0; k < K; ++k) {
        const double N = tables[k].total();
        if (N == 0.0) throw DegenerateEstimandError("estimand weights sum to zero");
        const ArmEstimate arm = tau_w_detail(st, tables[k], "variance estimate");
        scale[k] = coefficients[k] / N;
        mu_t[k] = arm.mu_t;
        mu_c[k] = arm.mu_c;
    }
    const double C = design_C(st.design);
    VarianceReport rep;
    rep.conservative = !refine;
    rep.region_contributions.assign(st.J(), 0.0);
    std::vector<double> t1, t2, t3;
    for (int j = 0; j < st.J(); ++j) {
        const auto& region = st.regions[j];
        const double pi = st.pi(j);
        bool used = false;
        if (st.treated(j)) {
            std::vector<double> parts;
            for (int site : st.realized_sites(j)) {
                std::vector<double> terms;
                for (std::size_t k = 0; k < K; ++k)
                    for (std::size_t i = 0; i < region.individuals.size(); ++i) {
                        const double w = tables[k].w[site][i];
                        if (w == 0.0) continue;
                        used = true;
                        terms.push_back(scale[k] * w * (st.people[region.individuals[i]].y - mu_t[k]));
                    }
                const double p = st.prob(site);
                const double sum = pairwise_sum(terms);
                parts.push_back(2.0 * sum * sum / (p * p));
            }
            if (!used) continue;
            ++rep.treated_regions;
            const double v = pairwise_sum(parts);
            t1.push_back(v);
            rep.region_contributions[j] = v;
        } else {
            std::vector<double> terms;
            for (std::size_t k = 0; k < K; ++k)
                for (int site : region.locations)
                    for (std::size_t i = 0; i < region.individuals.size(); ++i) {
                        const double w = tables[k].w[site][i];
                        if (w == 0.0) continue;
                        used = true;
                        terms.push_back(scale[k] * w * (st.people[region.individuals[i]].y - mu_c[k]));
                    }
            if (!used) continue;
            ++rep.control_regions;
            const double q = 1.0 - pi;
            const double sum = pairwise_sum(terms);
            const double v2 = 2.0 * (pi * q + C) / (q * q) / q * sum * sum;
            t2.push_back(v2);
            double v3 = 0.0;
            if (refine) {
                v3 = -2.0 * (pi * pi - C) / (pi * pi) / q * sum * sum;
                t3.push_back(v3);
            }
            rep.region_contributions[j] = v2 + v3;
        }
    }
    if (rep.treated_regions < 2 || rep.control_regions < 2)
        throw InsufficientReplicationError("variance estimate needs at least two contributing regions per arm (have " +
                                           std::to_string(rep.treated_regions) + " treated, " +
                                           std::to_string(rep.control_regions) + " control)");
    rep.treated_term = pairwise_sum(t1);
    rep.control_term = pairwise_sum(t2);
    rep.refinement_term = pairwise_sum(t3);
    rep.total = rep.treated_term + rep.control_term + rep.refinement_term;
    if (refine) rep.total = std::max(0.0, rep.total);
    return rep;
}

VarianceReport conservative_variance(const Study& st, const WeightTable& table, bool refine) {
    return conservative_variance(st, std::vector<WeightTable>{table}, std::vector<double>{1.0}, refine);
}

VarianceReport conservative_variance(const Study& st, const WeightScheme& scheme, const Window& window, bool refine) {
    return conservative_variance(st, build_weights(st, scheme, window), refine);
}

AttComponents att_variance_components(const SyntheticStudy& syn, const Window& window) {
    const Study& st = syn.study;
    require_single_location(st.design, "the ATT variance components");
    if (st.design.across() != AcrossLaw::CompletelyRandomized)
        throw UnsupportedDesignError("the ATT variance components need a completely randomized design");
    const int J = st.J();
    const int Jt = st.design.Jt();
    const double pi = static_cast<double>(Jt) / J;
    const EstimandParts e = estimand_parts(syn, att_weights(st, window));
    const double q = static_cast<double>(Jt - 1) / (J - 1);

    std::vector<double> vt, vc, vts, vtj, vty, nbar_terms;
    for (int j = 0; j < J; ++j) {
        const auto& region = st.regions[j];
        std::vector<double> a(region.locations.size(), 0.0);
        std::vector<double> cterms;
        double abar = 0.0;
        for (std::size_t slot = 0; slot < region.locations.size(); ++slot) {
            const int site = region.locations[slot];
            const double g = g_of(st.design, st.sites[site]);
            const auto& d = st.site_distances(site);
            std::vector<double> aterms;
            double n = 0.0;
            for (std::size_t k = 0; k < region.individuals.size(); ++k) {
                const double kw = window.weight(d[k]);
                if (kw == 0.0) continue;
                const int person = region.individuals[k];
                n += kw;
                aterms.push_back(kw * (syn.outcome_at(person, site) - e.mu_t));
                cterms.push_back(g * kw * (syn.y0[person] - e.mu_c));
            }
            a[slot] = pairwise_sum(aterms);
            abar += g * a[slot];
            nbar_terms.push_back(pi * g * n);
        }
        const double c = pairwise_sum(cterms);
        for (std::size_t slot = 0; slot < region.locations.size(); ++slot) {
            const double g = g_of(st.design, st.sites[region.locations[slot]]);
            vt.push_back(pi * g * a[slot] * a[slot]);
            vts.push_back(pi * g * (a[slot] - c) * (a[slot] - c));
        }
        vc.push_back(pi * c * c);
        vtj.push_back(pi * (abar - c) * (abar - c));
        vty.push_back(pi * abar * abar);
    }
    AttComponents out;
    out.n_bar = pairwise_sum(nbar_terms);
    if (out.n_bar == 0.0) throw DegenerateEstimandError("no individuals in the window around any location");
    const double n2 = out.n_bar * out.n_bar;
    const double r = pi / (1.0 - pi);
    out.Vt_location = pairwise_sum(vt) / (1.0 - pi) / n2;
    out.Vc_region = r * static_cast<double>(J) / (J - 1) * pairwise_sum(vc) / n2;
    out.Vtau_location = r * pairwise_sum(vts) / n2;
    out.Vtau_region = r * q * pairwise_sum(vtj) / n2;
    out.Vt_region = q * pairwise_sum(vty) / (1.0 - pi) / n2;
    return out;
}

double single_location_variance(const AttComponents& c, int J, int Jt) {
    return static_cast<double>(J - Jt) / (J - 1) * (c.Vt_location - c.Vtau_location) + c.Vc_region;
}

}  // namespace spatx
