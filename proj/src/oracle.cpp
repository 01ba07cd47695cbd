#include "spatx/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>

#include "spatx/errors.hpp"
#include "spatx/numeric.hpp"

namespace spatx {

namespace {

std::string format_assignment(const Assignment& a) {
    std::string s;
    for (std::size_t j = 0; j < a.W.size(); ++j) {
        if (j) s += ' ';
        s += std::to_string(a.W[j]) + ":{";
        for (std::size_t k = 0; k < a.xi[j].size(); ++k) s += (k ? "," : "") + std::to_string(a.xi[j][k]);
        s += '}';
    }
    return s;
}

}  // namespace

void Moments::write_support(std::ostream& out) const {
    out << "assignment,prob,value,failure\n" << std::setprecision(17);
    for (const auto& r : support) {
        out << '"' << format_assignment(r.assignment) << "\"," << r.prob << ',';
        if (r.value) out << *r.value;
        else out << "NA";
        out << ",\"" << r.failure << "\"\n";
    }
}

Moments exact_moments(const SyntheticStudy& syn, const Estimator& estimator, std::size_t cap) {
    const auto support = enumerate_assignments(syn.study.design, cap);
    Study work = syn.study;
    Moments m;
    std::vector<double> mass, first;
    for (const auto& wa : support) {
        SupportRow row{wa.assignment, wa.prob, std::nullopt, {}};
        realize_into(syn, wa.assignment, work);
        try {
            row.value = estimator(work);
            mass.push_back(wa.prob);
            first.push_back(wa.prob * *row.value);
        } catch (const EstimatorError& e) {
            row.failure = e.what();
        }
        m.support.push_back(std::move(row));
    }
    m.included_mass = pairwise_sum(mass);
    std::vector<double> failed;
    for (const auto& r : m.support)
        if (!r.value) failed.push_back(r.prob);
    m.excluded_mass = pairwise_sum(failed);
    if (m.included_mass <= 0.0) throw IncompleteOracleError("estimator failed on every assignment");
    m.mean = pairwise_sum(first) / m.included_mass;
    std::vector<double> second;
    for (const auto& r : m.support)
        if (r.value) second.push_back(r.prob * (*r.value - m.mean) * (*r.value - m.mean));
    m.variance = pairwise_sum(second) / m.included_mass;
    return m;
}

JointMoments joint_moments(const SyntheticStudy& syn, const Estimator& ea, const Estimator& eb, std::size_t cap) {
    const auto support = enumerate_assignments(syn.study.design, cap);
    Study work = syn.study;
    std::vector<double> probs, va, vb, failed;
    for (const auto& wa : support) {
        realize_into(syn, wa.assignment, work);
        try {
            const double a = ea(work);
            const double b = eb(work);
            probs.push_back(wa.prob);
            va.push_back(a);
            vb.push_back(b);
        } catch (const EstimatorError&) {
            failed.push_back(wa.prob);
        }
    }
    JointMoments j;
    j.excluded_mass = pairwise_sum(failed);
    const double mass = pairwise_sum(probs);
    if (mass <= 0.0) throw IncompleteOracleError("estimators failed on every assignment");
    std::vector<double> t;
    for (std::size_t k = 0; k < probs.size(); ++k) t.push_back(probs[k] * va[k]);
    j.mean_a = pairwise_sum(t) / mass;
    t.clear();
    for (std::size_t k = 0; k < probs.size(); ++k) t.push_back(probs[k] * vb[k]);
    j.mean_b = pairwise_sum(t) / mass;
    std::vector<double> saa, sbb, sab;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        const double da = va[k] - j.mean_a, db = vb[k] - j.mean_b;
        saa.push_back(probs[k] * da * da);
        sbb.push_back(probs[k] * db * db);
        sab.push_back(probs[k] * da * db);
    }
    j.var_a = pairwise_sum(saa) / mass;
    j.var_b = pairwise_sum(sbb) / mass;
    j.cov = pairwise_sum(sab) / mass;
    return j;
}

Imputation zero_effect_null() {
    return [](const Study& observed, const Assignment& a, Study& out) {
        out.assignment = a;
        for (std::size_t i = 0; i < out.people.size(); ++i) out.people[i].y = observed.people[i].y;
        for (auto& c : out.sites) c.treated = a.realized(c.region, c.slot) ? 1 : 0;
    };
}

PermutationResult permutation_test(const Study& observed, const Estimator& statistic, const Imputation& null,
                                   const PermutationOptions& opt) {
    PermutationResult r;
    r.observed = statistic(observed);
    const double target = std::fabs(r.observed);
    const double tol = opt.rel_tol * std::max(1.0, target);
    Study work = observed;
    if (support_size(observed.design) <= static_cast<double>(opt.cap)) {
        const auto support = enumerate_assignments(observed.design, opt.cap);
        std::vector<double> hit, ok, failed;
        for (const auto& wa : support) {
            null(observed, wa.assignment, work);
            try {
                const double v = statistic(work);
                ok.push_back(wa.prob);
                if (std::fabs(v) >= target - tol) hit.push_back(wa.prob);
            } catch (const EstimatorError&) {
                failed.push_back(wa.prob);
            }
        }
        r.excluded_mass = pairwise_sum(failed);
        r.p_value = pairwise_sum(hit) / pairwise_sum(ok);
        return r;
    }
    r.exhaustive = false;
    std::mt19937_64 rng(opt.seed);
    std::size_t count = 0;
    for (std::size_t b = 0; b < opt.draws; ++b) {
        const Assignment a = sample_assignment(observed.design, rng());
        null(observed, a, work);
        try {
            if (std::fabs(statistic(work)) >= target - tol) ++count;
            ++r.draws;
        } catch (const EstimatorError&) {
            ++r.excluded_draws;
        }
    }
    r.p_value = static_cast<double>(1 + count) / static_cast<double>(1 + r.draws);
    return r;
}

}  // namespace spatx
