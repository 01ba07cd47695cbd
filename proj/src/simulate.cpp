#include "spatx/simulate.hpp"

#include <cmath>
#include <random>

#include "spatx/errors.hpp"

namespace spatx {

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Box-Muller on the raw engine output so draws do not depend on the library's distributions.
double normal(std::mt19937_64& rng) {
    double u = uniform01(rng);
    while (u <= 0.0) u = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * M_PI * uniform01(rng));
}

}  // namespace

SimulationSpec SimulationSpec::from_config(const Config& c) {
    SimulationSpec s;
    s.regions = static_cast<int>(c.get_int("sim.regions", s.regions));
    s.individuals = static_cast<int>(c.get_int("sim.individuals", s.individuals));
    s.locations = static_cast<int>(c.get_int("sim.locations", s.locations));
    s.side = c.get_double("sim.side", s.side);
    s.decay = c.get("sim.decay", s.decay);
    s.tau0 = c.get_double("sim.tau0", s.tau0);
    s.dmax = c.get_double("sim.dmax", s.dmax);
    s.baseline = c.get_double("sim.baseline", s.baseline);
    s.noise = c.get_double("sim.noise", s.noise);
    s.design = c.get("design", s.design);
    s.treated_regions = static_cast<int>(c.get_int("treated_regions", s.regions / 2));
    s.pi = c.get_double("pi", s.pi);
    s.within = c.get("within", s.within);
    s.k = static_cast<int>(c.get_int("k", s.k));
    s.seed = static_cast<std::uint64_t>(c.get_int("seed", static_cast<long>(s.seed)));
    return s;
}

double SimulationSpec::effect(double d) const {
    if (d > dmax) return 0.0;
    if (decay == "linear") return tau0 * (1.0 - d / dmax);
    if (decay == "step") return tau0;
    if (decay == "exponential") return tau0 * std::exp(-3.0 * d / dmax);
    throw ValidationError("unknown decay '" + decay + "'");
}

SyntheticStudy simulate(const SimulationSpec& spec) {
    if (spec.regions < 1 || spec.individuals < 1 || spec.locations < 1)
        throw ValidationError("simulation needs at least one region, individual and location");
    if (!(spec.side > 0.0) || !(spec.dmax > 0.0)) throw ValidationError("simulation needs side > 0 and dmax > 0");
    if (!(spec.noise >= 0.0)) throw ValidationError("noise must be non-negative");
    spec.effect(0.0);
    std::mt19937_64 rng(spec.seed);
    Study st;
    st.metric = DistanceMetric::euclidean();
    std::vector<RegionLaw> laws;
    for (int j = 0; j < spec.regions; ++j) {
        const std::string rid = "R" + std::to_string(j + 1);
        st.regions.push_back({rid, {}, {}});
        const double ox = 2.0 * spec.side * j;
        for (int s = 0; s < spec.locations; ++s) {
            CandidateLocation c;
            c.id = rid + "_L" + std::to_string(s + 1);
            c.region = j;
            c.s = {ox + spec.side * uniform01(rng), spec.side * uniform01(rng), ""};
            st.sites.push_back(c);
        }
        for (int i = 0; i < spec.individuals; ++i) {
            Individual p;
            p.id = rid + "_I" + std::to_string(i + 1);
            p.region = j;
            p.r = {ox + spec.side * uniform01(rng), spec.side * uniform01(rng), ""};
            st.people.push_back(p);
        }
        if (spec.within == "single")
            laws.push_back(RegionLaw::uniform(spec.locations));
        else if (spec.within == "fixed_k")
            laws.push_back(RegionLaw::fixed_k(spec.locations, spec.k));
        else
            throw ValidationError("unknown within-region law '" + spec.within + "'");
    }
    if (spec.design == "completely_randomized")
        st.design = Design::completely_randomized(spec.regions, spec.treated_regions < 0 ? spec.regions / 2 : spec.treated_regions,
                                                  laws);
    else if (spec.design == "bernoulli")
        st.design = Design::bernoulli(std::vector<double>(spec.regions, spec.pi), laws);
    else
        throw ValidationError("simulation supports completely_randomized or bernoulli designs");
    st.assignment = sample_assignment(st.design, spec.seed);
    for (auto& c : st.sites) c.treated = 0;
    st.finalize();

    std::vector<double> y0;
    for (std::size_t i = 0; i < st.people.size(); ++i) y0.push_back(spec.baseline + spec.noise * normal(rng));
    SyntheticStudy syn = make_synthetic(st, std::move(y0), CombinationRule::Additive);
    for (std::size_t s = 0; s < syn.study.sites.size(); ++s) {
        const auto& d = syn.study.site_distances(static_cast<int>(s));
        for (std::size_t k = 0; k < d.size(); ++k) syn.tau[s][k] = spec.effect(d[k]);
    }
    realize_into(syn, syn.study.assignment, syn.study);
    return syn;
}

}  // namespace spatx
