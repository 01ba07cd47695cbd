#include "spatx/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>

#include "spatx/errors.hpp"
#include "spatx/numeric.hpp"
#include "spatx/variance.hpp"

namespace spatx {

RealizedWeights realized_weights(const Study& study, const WeightTable& table) {
    RealizedWeights rw;
    rw.treated.resize(study.sites.size());
    rw.control.resize(study.sites.size());
    for (std::size_t s = 0; s < study.sites.size(); ++s) {
        const int site = static_cast<int>(s);
        const int j = study.sites[s].region;
        const auto& w = table.w[s];
        rw.treated[s].assign(w.size(), 0.0);
        rw.control[s].assign(w.size(), 0.0);
        if (study.treated(j)) {
            if (!study.realized(site)) continue;
            const double p = study.prob(site);
            for (std::size_t k = 0; k < w.size(); ++k) rw.treated[s][k] = w[k] / p;
        } else {
            const double q = 1.0 - study.pi(j);
            if (q <= 0.0) continue;
            for (std::size_t k = 0; k < w.size(); ++k) rw.control[s][k] = w[k] / q;
        }
    }
    return rw;
}

ArmEstimate tau_w_detail(const Study& study, const WeightTable& table, const std::string& where) {
    const RealizedWeights rw = realized_weights(study, table);
    std::vector<double> tw, tyw, cw, cyw;
    ArmEstimate a;
    for (std::size_t s = 0; s < study.sites.size(); ++s) {
        const auto& people = study.regions[study.sites[s].region].individuals;
        for (std::size_t k = 0; k < people.size(); ++k) {
            const double y = study.people[people[k]].y;
            if (double v = rw.treated[s][k]; v != 0.0) {
                tw.push_back(v);
                tyw.push_back(v * y);
                ++a.treated_n;
            }
            if (double v = rw.control[s][k]; v != 0.0) {
                cw.push_back(v);
                cyw.push_back(v * y);
                ++a.control_n;
            }
        }
    }
    a.treated_weight = pairwise_sum(tw);
    a.control_weight = pairwise_sum(cw);
    if (a.treated_weight == 0.0) throw EmptyArmError("treated", where);
    if (a.control_weight == 0.0) throw EmptyArmError("control", where);
    a.mu_t = pairwise_sum(tyw) / a.treated_weight;
    a.mu_c = pairwise_sum(cyw) / a.control_weight;
    a.estimate = a.mu_t - a.mu_c;
    return a;
}

double tau_w(const Study& study, const WeightScheme& scheme, const Window& window) {
    return tau_w_detail(study, build_weights(study, scheme, window), window.describe()).estimate;
}

double tau_att(const Study& study, const Window& window) { return tau_w(study, WeightScheme::att(), window); }
double tau_att(const Study& study, const DistanceBin& bin) { return tau_att(study, Window::closed(bin)); }
double tau_att_eq(const Study& study, const Window& window) { return tau_w(study, WeightScheme::att_eq(), window); }
double tau_att_eq(const Study& study, const DistanceBin& bin) { return tau_att_eq(study, Window::closed(bin)); }

double treated_mean(const Study& study, const DistanceBin& bin) {
    std::vector<double> ys;
    for (std::size_t s = 0; s < study.sites.size(); ++s) {
        if (!study.realized(static_cast<int>(s))) continue;
        const auto& people = study.regions[study.sites[s].region].individuals;
        const auto& d = study.site_distances(static_cast<int>(s));
        for (std::size_t k = 0; k < people.size(); ++k)
            if (in_bin(bin, d[k])) ys.push_back(study.people[people[k]].y);
    }
    if (ys.empty()) throw EmptyArmError("treated", Window::closed(bin).describe());
    return pairwise_sum(ys) / static_cast<double>(ys.size());
}

namespace {

double control_arm_mean(const Study& study, const WeightTable& table, const std::string& where) {
    const RealizedWeights rw = realized_weights(study, table);
    std::vector<double> cw, cyw;
    for (std::size_t s = 0; s < study.sites.size(); ++s) {
        const auto& people = study.regions[study.sites[s].region].individuals;
        for (std::size_t k = 0; k < people.size(); ++k) {
            if (double v = rw.control[s][k]; v != 0.0) {
                cw.push_back(v);
                cyw.push_back(v * study.people[people[k]].y);
            }
        }
    }
    const double total = pairwise_sum(cw);
    if (total == 0.0) throw EmptyArmError("control", where);
    return pairwise_sum(cyw) / total;
}

}  // namespace

double control_mean(const Study& study, const DistanceBin& bin) {
    const Window w = Window::closed(bin);
    return control_arm_mean(study, att_weights(study, w), w.describe());
}

DemeanedEstimator::DemeanedEstimator(const SyntheticStudy& synthetic, const WeightScheme& scheme,
                                     const Window& window)
    : DemeanedEstimator(synthetic, build_weights(synthetic.study, scheme, window)) {}

DemeanedEstimator::DemeanedEstimator(const SyntheticStudy& synthetic, WeightTable table)
    : table_(std::move(table)), parts_(estimand_parts(synthetic, table_)) {}

double DemeanedEstimator::operator()(const Study& st) const {
    const RealizedWeights rw = realized_weights(st, table_);
    std::vector<double> terms;
    for (std::size_t s = 0; s < st.sites.size(); ++s) {
        const auto& people = st.regions[st.sites[s].region].individuals;
        for (std::size_t k = 0; k < people.size(); ++k) {
            const double y = st.people[people[k]].y;
            if (rw.treated[s][k] != 0.0) terms.push_back(rw.treated[s][k] * (y - parts_.mu_t));
            if (rw.control[s][k] != 0.0) terms.push_back(-rw.control[s][k] * (y - parts_.mu_c));
        }
    }
    return parts_.tau() + pairwise_sum(terms) / parts_.total;
}

void EffectCurve::write(std::ostream& out) const {
    out << "d_center,h,estimate,se,treated_n,control_n\n";
    out << std::setprecision(12);
    for (const auto& b : bins) {
        out << b.center << ',' << b.half_width << ',' << b.estimate << ',';
        if (b.variance) out << std::sqrt(std::max(0.0, *b.variance));
        else out << "NA";
        out << ',' << b.treated_n << ',' << b.control_n << '\n';
    }
}

std::vector<Window> tiling_windows(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi > lo) || lo < 0.0) throw ValidationError("bins need 0 <= lo < hi and step > 0");
    const double span = (hi - lo) / step;
    const long n = std::lround(span);
    if (n < 1 || std::fabs(span - static_cast<double>(n)) > 1e-9 * std::max(1.0, span))
        throw ValidationError("bin step does not divide the range evenly");
    std::vector<Window> out;
    for (long k = 0; k < n; ++k) {
        const double a = lo + step * static_cast<double>(k);
        const double b = (k + 1 == n) ? hi : lo + step * static_cast<double>(k + 1);
        out.push_back(Window::half_open({a, b, k == 0}));
    }
    return out;
}

EffectCurve effect_curve(const Study& study, const WeightScheme& scheme, const std::vector<Window>& windows,
                         bool with_variance) {
    EffectCurve curve;
    for (const auto& w : windows) {
        const WeightTable t = build_weights(study, scheme, w);
        const ArmEstimate a = tau_w_detail(study, t, w.describe());
        BinEstimate b;
        b.center = w.center();
        b.half_width = w.half_width();
        b.estimate = a.estimate;
        b.mu_t = a.mu_t;
        b.mu_c = a.mu_c;
        b.treated_n = a.treated_n;
        b.control_n = a.control_n;
        if (with_variance) {
            try {
                b.variance = conservative_variance(study, t).total;
            } catch (const InsufficientReplicationError&) {
                b.variance.reset();
            }
        }
        curve.bins.push_back(b);
    }
    return curve;
}

Study difference_outcomes(Study study) {
    for (auto& p : study.people) {
        if (!p.y_pre) throw ValidationError("individual '" + p.id + "' has no pre-period outcome");
        p.y -= *p.y_pre;
    }
    return study;
}

Study with_pre_proxy(Study study, double radius) {
    if (!(radius > 0.0)) throw ValidationError("pre-period proxy radius must be positive");
    std::vector<std::optional<double>> proxy(study.people.size());
    for (const auto& region : study.regions) {
        for (int i : region.individuals) {
            std::vector<double> vals;
            for (int k : region.individuals) {
                if (k == i || !study.people[k].y_pre) continue;
                if (study.metric(study.people[i].r, study.people[k].r) <= radius) vals.push_back(*study.people[k].y_pre);
            }
            if (vals.empty())
                throw ValidationError("individual '" + study.people[i].id + "' has no neighbours with a pre-period outcome within the radius");
            proxy[i] = pairwise_sum(vals) / static_cast<double>(vals.size());
        }
    }
    for (std::size_t i = 0; i < study.people.size(); ++i) study.people[i].y_pre = proxy[i];
    return study;
}

RingEstimate inner_outer_ring(const Study& study, const DistanceBin& inner, const DistanceBin& outer,
                              double isolation, RingWeighting weighting) {
    if (!(isolation >= 0.0)) throw ValidationError("isolation distance must be non-negative");
    RingEstimate r;
    std::vector<int> sites;
    for (int j = 0; j < study.J(); ++j) {
        const std::vector<int> real = study.realized_sites(j);
        for (int s : real) {
            double nearest = std::numeric_limits<double>::infinity();
            for (int o : real)
                if (o != s) nearest = std::min(nearest, study.metric(study.sites[s].s, study.sites[o].s));
            if (nearest > isolation) sites.push_back(s);
            else r.excluded_sites.push_back(s);
        }
    }
    if (sites.empty()) throw EmptyArmError("isolated treated location", "inner/outer ring comparison");

    struct Rings {
        int site;
        std::vector<double> in, out;
    };
    std::vector<Rings> rings;
    for (int s : sites) {
        Rings g{s, {}, {}};
        const auto& people = study.regions[study.sites[s].region].individuals;
        const auto& d = study.site_distances(s);
        for (std::size_t k = 0; k < people.size(); ++k) {
            if (in_bin(inner, d[k])) g.in.push_back(study.people[people[k]].y);
            if (in_bin(outer, d[k])) g.out.push_back(study.people[people[k]].y);
        }
        rings.push_back(std::move(g));
    }
    auto mean = [](const std::vector<double>& v) { return pairwise_sum(v) / static_cast<double>(v.size()); };

    std::vector<double> all_in, all_out;
    for (const auto& g : rings) {
        all_in.insert(all_in.end(), g.in.begin(), g.in.end());
        all_out.insert(all_out.end(), g.out.begin(), g.out.end());
    }
    if (all_in.empty()) throw EmptyArmError("inner ring", "inner/outer ring comparison");
    if (all_out.empty()) throw EmptyArmError("outer ring", "inner/outer ring comparison");

    switch (weighting) {
    case RingWeighting::Pooled:
        r.inner_mean = mean(all_in);
        r.outer_mean = mean(all_out);
        for (const auto& g : rings) r.used_sites.push_back(g.site);
        r.inner_n = static_cast<int>(all_in.size());
        r.outer_n = static_cast<int>(all_out.size());
        break;
    case RingWeighting::PerLocationFixedEffect:
    case RingWeighting::EqualPerLocation: {
        std::vector<double> in_terms, out_terms, in_counts;
        for (const auto& g : rings) {
            if (g.in.empty() || g.out.empty()) continue;
            r.used_sites.push_back(g.site);
            r.inner_n += static_cast<int>(g.in.size());
            r.outer_n += static_cast<int>(g.out.size());
            const double share = weighting == RingWeighting::EqualPerLocation ? 1.0 : static_cast<double>(g.in.size());
            in_counts.push_back(share);
            in_terms.push_back(share * mean(g.in));
            out_terms.push_back(share * mean(g.out));
        }
        if (in_counts.empty()) throw EmptyArmError("location with both rings", "inner/outer ring comparison");
        const double total = pairwise_sum(in_counts);
        r.inner_mean = pairwise_sum(in_terms) / total;
        r.outer_mean = pairwise_sum(out_terms) / total;
        break;
    }
    }
    r.estimate = r.inner_mean - r.outer_mean;
    return r;
}

}  // namespace spatx
