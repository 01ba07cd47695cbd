#include "spatx/aggregate.hpp"

#include <algorithm>
#include <cmath>

#include "spatx/errors.hpp"
#include "spatx/numeric.hpp"
#include "spatx/variance.hpp"

namespace spatx {

BinPartition::BinPartition(std::vector<double> edges) : edges_(std::move(edges)) {
    if (edges_.size() < 2) throw ValidationError("a bin partition needs at least two edges");
    if (edges_.front() != 0.0) throw ValidationError("a bin partition must start at 0");
    for (std::size_t k = 1; k < edges_.size(); ++k)
        if (!(edges_[k] > edges_[k - 1])) throw ValidationError("bin partition edges must be strictly increasing");
}

BinPartition BinPartition::uniform(double dmax, int bins) {
    if (!(dmax > 0.0) || bins < 1) throw ValidationError("uniform partition needs dmax > 0 and at least one bin");
    std::vector<double> e(bins + 1);
    for (int k = 0; k <= bins; ++k) e[k] = dmax * k / bins;
    e.back() = dmax;
    return BinPartition(std::move(e));
}

HalfOpenBin BinPartition::bin(int k) const { return {edges_.at(k), edges_.at(k + 1), k == 0}; }

Window BinPartition::window(int k) const { return Window::half_open(bin(k)); }

int BinPartition::locate(double dist) const {
    if (dist < 0.0 || dist > dmax()) return -1;
    if (dist <= edges_[1]) return 0;
    auto it = std::lower_bound(edges_.begin() + 1, edges_.end(), dist);
    return static_cast<int>(it - edges_.begin()) - 1;
}

double region_outcome_total(const Study& study, int region) {
    std::vector<double> y;
    for (int i : study.regions.at(region).individuals) y.push_back(study.people[i].y);
    return pairwise_sum(y);
}

double tau_aatt1(const Study& study) {
    std::vector<double> tw, ty, cw, cy;
    for (int j = 0; j < study.J(); ++j) {
        const double yj = region_outcome_total(study, j);
        const double pi = study.pi(j);
        if (study.treated(j)) {
            tw.push_back(1.0);
            ty.push_back(yj);
        } else if (pi < 1.0) {
            const double v = pi / (1.0 - pi);
            cw.push_back(v);
            cy.push_back(v * yj);
        }
    }
    const double t = pairwise_sum(tw), c = pairwise_sum(cw);
    if (t == 0.0) throw EmptyArmError("treated", "region-level aggregate comparison");
    if (c == 0.0) throw EmptyArmError("control", "region-level aggregate comparison");
    return pairwise_sum(ty) / t - pairwise_sum(cy) / c;
}

double n_bar(const Study& study, const Window& window) {
    std::vector<double> num, den;
    for (std::size_t s = 0; s < study.sites.size(); ++s) {
        const double p = study.prob(static_cast<int>(s));
        if (p == 0.0) continue;
        std::vector<double> k;
        for (double d : study.site_distances(static_cast<int>(s))) k.push_back(window.weight(d));
        num.push_back(p * pairwise_sum(k));
        den.push_back(p);
    }
    const double total = pairwise_sum(den);
    if (total == 0.0) throw DegenerateEstimandError("no location can be realized");
    return pairwise_sum(num) / total;
}

double n_bar(const Study& study, const BinPartition& partition, int k) { return n_bar(study, partition.window(k)); }

AattEstimate tau_aatt2(const Study& study, const BinPartition& partition, bool with_variance) {
    AattEstimate out;
    std::vector<WeightTable> tables;
    std::vector<double> terms;
    for (int k = 0; k < partition.size(); ++k) {
        const Window w = partition.window(k);
        const double nb = n_bar(study, w);
        out.n_bar.push_back(nb);
        if (nb == 0.0) {
            out.bins.push_back({});
            continue;
        }
        WeightTable t = att_weights(study, w);
        const ArmEstimate a = tau_w_detail(study, t, "bin " + std::to_string(k) + " " + w.describe());
        out.bins.push_back(a);
        terms.push_back(nb * a.estimate);
        tables.push_back(std::move(t));
    }
    out.estimate = pairwise_sum(terms);
    if (with_variance && !tables.empty()) {
        std::vector<double> coef;
        for (double nb : out.n_bar)
            if (nb != 0.0) coef.push_back(nb);
        out.variance = conservative_variance(study, tables, coef).total;
    }
    return out;
}

double aatt_estimand(const SyntheticStudy& syn) {
    const Study& st = syn.study;
    std::vector<double> num, den;
    for (std::size_t s = 0; s < st.sites.size(); ++s) {
        const double p = st.prob(static_cast<int>(s));
        if (p == 0.0) continue;
        std::vector<double> eff;
        for (int i : st.regions[st.sites[s].region].individuals) eff.push_back(syn.effect(i, static_cast<int>(s)));
        num.push_back(p * pairwise_sum(eff));
        den.push_back(p);
    }
    return pairwise_sum(num) / pairwise_sum(den);
}

double aatt2_true_variance(const SyntheticStudy& syn, const BinPartition& partition) {
    std::vector<LinearForm> forms;
    std::vector<double> coef;
    for (int k = 0; k < partition.size(); ++k) {
        const Window w = partition.window(k);
        const double nb = n_bar(syn.study, w);
        if (nb == 0.0) continue;
        forms.push_back(demeaned_linear_form(syn, att_weights(syn.study, w)));
        coef.push_back(nb);
    }
    if (forms.empty()) return 0.0;
    const LinearForm f = combine(forms, coef);
    return form_covariance(syn.study.design, syn.study, f, f);
}

}  // namespace spatx
