#include "fixtures.hpp"

#include <algorithm>
#include <stdexcept>

#include "spatx/errors.hpp"

namespace fixtures {

std::string dir() { return SPATX_FIXTURE_DIR; }

std::string path(const std::string& fixture, const std::string& file) { return dir() + "/" + fixture + "/" + file; }

spatx::Config config(const std::string& name) { return spatx::Config::load(path(name, "design.cfg")); }

spatx::Study study(const std::string& name) {
    return spatx::load_study(path(name, "individuals.csv"), path(name, "locations.csv"), config(name));
}

spatx::SyntheticStudy synthetic(const std::string& name) {
    const auto cfg = config(name);
    return spatx::load_synthetic(study(name), path(name, "potential.csv"), cfg);
}

Frozen::Frozen(const std::string& file) : table_(spatx::read_csv(dir() + "/frozen/" + file)) {}

std::vector<std::string> Frozen::row(const std::vector<std::pair<std::string, std::string>>& keys) const {
    for (const auto& r : table_.rows) {
        bool ok = true;
        for (const auto& [col, want] : keys) {
            const int c = table_.column(col);
            if (c < 0) throw std::runtime_error("frozen table lacks column " + col);
            if (r[c] != want) ok = false;
        }
        if (ok) return r;
    }
    throw std::runtime_error("no frozen row in " + table_.source);
}

double Frozen::value(const std::vector<std::pair<std::string, std::string>>& keys, const std::string& column) const {
    const auto r = row(keys);
    return std::stod(r[table_.column(column)]);
}

std::vector<std::string> family_names() {
    return {"fam_j2_m1_cr",   "fam_j2_m2_cr",   "fam_j3_m3_cr",   "fam_j3_m2_cr",   "fam_j4_m2_cr",
            "fam_j4_m3_cr",   "fam_j2_m2_bern", "fam_j3_m1_bern", "fam_j3_m3_bern", "fam_j4_m2_bern"};
}

std::vector<std::string> conservative_names() {
    return {"cons_j4_m1", "cons_j4_m2", "cons_j4_m3", "cons_j5_m2", "cons_j6_m1", "cons_het"};
}

bool is_bernoulli(const std::string& name) { return name.find("bern") != std::string::npos; }

Plain plain_moments(const spatx::SyntheticStudy& syn, const spatx::Estimator& est) {
    const auto support = spatx::enumerate_assignments(syn.study.design);
    std::vector<std::pair<double, double>> ok;
    double mass = 0.0, excluded = 0.0;
    for (const auto& wa : support) {
        const auto st = spatx::realize_outcomes(syn, wa.assignment);
        try {
            ok.emplace_back(wa.prob, est(st));
            mass += wa.prob;
        } catch (const spatx::EstimatorError&) {
            excluded += wa.prob;
        }
    }
    Plain p;
    p.excluded = excluded;
    for (const auto& [w, v] : ok) p.mean += w * v;
    p.mean /= mass;
    for (const auto& [w, v] : ok) p.variance += w * (v - p.mean) * (v - p.mean);
    p.variance /= mass;
    return p;
}

spatx::SyntheticStudy with_design(const spatx::SyntheticStudy& syn, const spatx::Design& design) {
    spatx::SyntheticStudy out = syn;
    out.study.design = design;
    const auto a = spatx::sample_assignment(design, 1);
    out.study = spatx::realize_outcomes(out, a);
    return out;
}

std::vector<int> slots_of(const spatx::Study& st, const std::vector<int>& sites) {
    std::vector<int> s;
    for (int g : sites) s.push_back(st.sites[g].slot);
    std::sort(s.begin(), s.end());
    return s;
}

}  // namespace fixtures
