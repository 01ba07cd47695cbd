#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "spatx/aggregate.hpp"
#include "spatx/errors.hpp"
#include "spatx/estimators.hpp"
#include "spatx/interference.hpp"
#include "spatx/io.hpp"
#include "spatx/observational.hpp"
#include "spatx/oracle.hpp"
#include "spatx/parametric.hpp"
#include "spatx/simulate.hpp"
#include "spatx/variance.hpp"

namespace fs = std::filesystem;
using namespace spatx;

namespace {

struct Flags {
    std::string individuals, locations, config, method, bins, potential, out_dir;
    std::optional<double> dmax;
    std::optional<long> seed;
    std::vector<std::string> sets;
};

std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : "NA"; }

class Run {
public:
    Run(std::string command, const Flags& f) : command_(std::move(command)), flags_(f) {
        if (!f.config.empty()) {
            cfg = Config::load(f.config);
            inputs_.emplace_back(f.config, hex64(fnv1a(read_file(f.config))));
        }
        if (!f.method.empty()) cfg.set("method", f.method);
        if (!f.bins.empty()) cfg.set("bins", f.bins);
        if (f.dmax) cfg.set("dmax", num(*f.dmax));
        if (f.seed) cfg.set("seed", std::to_string(*f.seed));
        for (const auto& kv : f.sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos || eq == 0) throw ValidationError("--set expects key=value, got '" + kv + "'");
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        out_dir_ = f.out_dir.empty() ? "." : f.out_dir;
    }

    Study study() {
        if (flags_.individuals.empty()) throw ValidationError("--individuals is required");
        if (flags_.locations.empty()) throw ValidationError("--locations is required");
        record_input(flags_.individuals);
        record_input(flags_.locations);
        Study st = load_study(flags_.individuals, flags_.locations, cfg);
        if (cfg.get_bool("arcsinh", false)) st = arcsinh_transform(st);
        if (cfg.get_bool("difference", false)) st = difference_outcomes(st);
        return st;
    }

    SyntheticStudy synthetic() {
        Study st = study();
        if (flags_.potential.empty()) throw ValidationError("--potential is required");
        record_input(flags_.potential);
        return load_synthetic(st, flags_.potential, cfg);
    }

    std::uint64_t seed() const { return static_cast<std::uint64_t>(cfg.get_int("seed", 1)); }

    void emit(const std::string& name, const std::string& body) {
        outputs_.emplace_back(name, body);
    }

    void finish() {
        fs::create_directories(out_dir_);
        Manifest m;
        m.command = command_;
        m.seed = seed();
        m.inputs = inputs_;
        for (const auto& [name, body] : outputs_) {
            write_text(name, body);
            m.outputs.emplace_back(name, hex64(fnv1a(body)));
        }
        std::ostringstream os;
        m.write(os, cfg);
        write_text("manifest.txt", os.str());
    }

    Config cfg;

private:
    void record_input(const std::string& path) { inputs_.emplace_back(path, hex64(fnv1a(read_file(path)))); }

    void write_text(const std::string& name, const std::string& body) const {
        const fs::path p = fs::path(out_dir_) / name;
        std::ofstream out(p, std::ios::binary);
        if (!out) throw ValidationError("cannot write '" + p.string() + "'");
        out << body;
    }

    std::string command_;
    Flags flags_;
    std::string out_dir_;
    std::vector<std::pair<std::string, std::string>> inputs_;
    std::vector<std::pair<std::string, std::string>> outputs_;
};

struct BinSpec {
    double lo, hi, step;
};

BinSpec parse_bins(const std::string& text) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ':')) v.push_back(parse_double(part, "--bins"));
    if (v.size() != 3) throw ValidationError("--bins expects lo:hi:step, got '" + text + "'");
    return {v[0], v[1], v[2]};
}

std::vector<double> bin_edges(const BinSpec& b) {
    const auto ws = tiling_windows(b.lo, b.hi, b.step);
    std::vector<double> e{b.lo};
    for (std::size_t k = 1; k <= ws.size(); ++k) e.push_back(b.lo + (b.hi - b.lo) * k / ws.size());
    return e;
}

DistanceBin parse_range(const std::string& text, const std::string& what) {
    const auto c = text.find(':');
    if (c == std::string::npos) throw ValidationError(what + " expects lo:hi, got '" + text + "'");
    const double lo = parse_double(text.substr(0, c), what), hi = parse_double(text.substr(c + 1), what);
    if (!(hi >= lo)) throw ValidationError(what + " needs hi >= lo");
    return DistanceBin((lo + hi) / 2.0, (hi - lo) / 2.0);
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ','))
        if (!part.empty()) out.push_back(part);
    return out;
}

WeightScheme file_weights(const Study& st, const std::string& path) {
    const CsvTable t = read_csv(path);
    const int ci = t.column("individual"), cl = t.column("location"), cw = t.column("weight");
    if (ci < 0 || cl < 0 || cw < 0) throw ParseError(path + ": expected columns individual,location,weight");
    std::map<std::string, int> person_of, site_of;
    for (std::size_t i = 0; i < st.people.size(); ++i) person_of[st.people[i].id] = static_cast<int>(i);
    for (std::size_t s = 0; s < st.sites.size(); ++s) site_of[st.sites[s].id] = static_cast<int>(s);
    auto table = std::make_shared<std::map<std::pair<int, int>, double>>();
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        auto p = person_of.find(t.rows[r][ci]);
        auto s = site_of.find(t.rows[r][cl]);
        if (p == person_of.end() || s == site_of.end())
            throw LookupError(path + " row " + std::to_string(r + 1) + ": unknown individual or location");
        (*table)[{p->second, s->second}] = parse_double(t.rows[r][cw], path + " row " + std::to_string(r + 1));
    }
    return WeightScheme::custom([table](const Study& study, int person, int site, const Window& w) {
        auto it = table->find({person, site});
        if (it == table->end()) return 0.0;
        return study.prob(site) * it->second * w.weight(study.dist(site, person));
    });
}

WeightScheme scheme_for(const std::string& method) {
    if (method == "att") return WeightScheme::att();
    if (method == "att-eq") return WeightScheme::att_eq();
    throw ValidationError("method '" + method + "' has no weighting scheme");
}

void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("--individuals", f.individuals, "individuals file");
    sub->add_option("--locations", f.locations, "candidate locations file");
    sub->add_option("--config", f.config, "key = value settings file");
    sub->add_option("--method", f.method, "att, att-eq, weighted, additive, nearest, single-region, inner-outer, dr");
    sub->add_option("--bins", f.bins, "distance bins lo:hi:step");
    sub->add_option("--dmax", f.dmax, "maximum effect distance");
    sub->add_option("--seed", f.seed, "random seed");
    sub->add_option("--out-dir", f.out_dir, "output directory");
    sub->add_option("--potential", f.potential, "potential outcomes file");
    sub->add_option("--set", f.sets, "override a setting, key=value");
}

std::string curve_text(const EffectCurve& c) {
    std::ostringstream os;
    c.write(os);
    return os.str();
}

void cmd_estimate(Run& run) {
    const Study st = run.study();
    const std::string method = run.cfg.get("method", "att");
    if (method == "inner-outer") {
        const DistanceBin inner = parse_range(run.cfg.require("inner"), "inner");
        const DistanceBin outer = parse_range(run.cfg.require("outer"), "outer");
        const double iso = run.cfg.get_double("isolation", 0.0);
        const std::string w = run.cfg.get("ring_weighting", "pooled");
        RingWeighting rw;
        if (w == "pooled")
            rw = RingWeighting::Pooled;
        else if (w == "fixed_effect")
            rw = RingWeighting::PerLocationFixedEffect;
        else if (w == "equal")
            rw = RingWeighting::EqualPerLocation;
        else
            throw ValidationError("unknown ring weighting '" + w + "'");
        const RingEstimate r = inner_outer_ring(st, inner, outer, iso, rw);
        std::ostringstream os;
        os << "estimate,inner_mean,outer_mean,inner_n,outer_n,used_locations,excluded_locations\n"
           << num(r.estimate) << ',' << num(r.inner_mean) << ',' << num(r.outer_mean) << ',' << r.inner_n << ','
           << r.outer_n << ',' << r.used_sites.size() << ',' << r.excluded_sites.size() << '\n';
        run.emit("ring.csv", os.str());
        return;
    }
    const BinSpec b = parse_bins(run.cfg.require("bins"));
    const auto windows = tiling_windows(b.lo, b.hi, b.step);
    const bool with_var = run.cfg.get_bool("variance", true);
    EffectCurve curve;
    if (method == "att" || method == "att-eq" || method == "weighted") {
        const WeightScheme scheme =
            method == "weighted" ? file_weights(st, run.cfg.require("weights_file")) : scheme_for(method);
        curve = effect_curve(st, scheme, windows, with_var);
    } else {
        const auto edges = bin_edges(b);
        for (const auto& w : windows) {
            BinEstimate e;
            e.center = w.center();
            e.half_width = w.half_width();
            if (method == "additive") {
                e.estimate = tau_additive(st, w);
            } else if (method == "nearest") {
                WeightTable t = att_weights(st, w);
                if (run.cfg.get_bool("restrict_identified", false)) t = restrict_to_identified(st, t);
                e.estimate = tau_nearest(st, t);
            } else if (method == "single-region") {
                e.estimate = tau_single_region(st, w);
            } else if (method == "dr") {
                e.estimate = cross_fit_dr(st, w, edges, static_cast<int>(run.cfg.get_int("folds", 5)), run.seed(),
                                          split_list(run.cfg.get("propensity_covariates", "")))
                                 .estimate;
            } else {
                throw ValidationError("unknown method '" + method + "'");
            }
            curve.bins.push_back(e);
        }
    }
    run.emit("effect_curve.csv", curve_text(curve));
}

BinPartition partition_from(Run& run) {
    if (run.cfg.has("bins")) {
        const BinSpec b = parse_bins(run.cfg.require("bins"));
        if (b.lo != 0.0) throw ValidationError("aggregate bins must start at 0");
        return BinPartition(bin_edges(b));
    }
    const double dmax = parse_double(run.cfg.require("dmax"), "dmax");
    return BinPartition::uniform(dmax, static_cast<int>(run.cfg.get_int("aggregate_bins", 10)));
}

void cmd_aggregate(Run& run) {
    const Study st = run.study();
    const BinPartition part = partition_from(run);
    const double a1 = tau_aatt1(st);
    const AattEstimate a2 = tau_aatt2(st, part, run.cfg.get_bool("variance", true));
    std::optional<double> se;
    if (a2.variance) se = std::sqrt(*a2.variance);
    std::ostringstream os;
    os << "estimator,estimate,se\naatt1," << num(a1) << ",NA\naatt2," << num(a2.estimate) << ',' << opt_num(se)
       << '\n';
    run.emit("aggregate.csv", os.str());
    std::ostringstream bins;
    bins << "bin_lo,bin_hi,n_bar,estimate\n";
    for (int k = 0; k < part.size(); ++k)
        bins << num(part.edges()[k]) << ',' << num(part.edges()[k + 1]) << ',' << num(a2.n_bar[k]) << ','
             << (a2.n_bar[k] == 0.0 ? "NA" : num(a2.bins[k].estimate)) << '\n';
    run.emit("aggregate_bins.csv", bins.str());
}

BasisSpec basis_from(const Config& c) {
    BasisSpec s;
    s.dmax = parse_double(c.require("dmax"), "dmax");
    s.restricted = c.get_bool("restricted", true);
    s.effect_degree = static_cast<int>(c.get_int("effect_degree", 2));
    s.control_degree = static_cast<int>(c.get_int("control_degree", 1));
    const std::string inter = c.get("interact", "");
    if (!inter.empty()) s.interact = inter;
    return s;
}

RowWeighting weighting_from(const Config& c) {
    const std::string w = c.get("row_weighting", "uniform");
    if (w == "uniform") return RowWeighting::Uniform;
    if (w == "ipw") return RowWeighting::Ipw;
    throw ValidationError("unknown row weighting '" + w + "'");
}

void cmd_parametric(Run& run) {
    const Study st = run.study();
    const BasisSpec spec = basis_from(run.cfg);
    const RowWeighting rw = weighting_from(run.cfg);
    const WlsFit fit = fit_parametric(st, spec, rw);
    std::ostringstream coef, curve, aatt;
    fit.write_coefficients(coef);
    std::vector<double> grid;
    const int steps = static_cast<int>(run.cfg.get_int("curve_points", 50));
    for (int k = 0; k <= steps; ++k) grid.push_back(spec.dmax * k / steps);
    fit.write_curve(curve, grid);
    run.emit("coefficients.csv", coef.str());
    run.emit("curve.csv", curve.str());
    if (spec.restricted) {
        const AattRegression one = fit_aatt_regression(st, spec, rw);
        aatt << "estimator,estimate\none_step," << num(one.estimate) << "\ntwo_step," << num(aatt_plugin(st, fit))
             << '\n';
        run.emit("aatt.csv", aatt.str());
    }
}

void cmd_oracle(Run& run) {
    const SyntheticStudy syn = run.synthetic();
    const std::string method = run.cfg.get("method", "att");
    const BinSpec b = parse_bins(run.cfg.require("bins"));
    const std::size_t cap = static_cast<std::size_t>(run.cfg.get_int("cap", static_cast<long>(kDefaultEnumerationCap)));
    std::ostringstream os;
    os << std::setprecision(12)
       << "d_center,h,estimand,feasible_mean,feasible_variance,demeaned_mean,demeaned_variance,closed_form_variance,"
          "excluded_mass\n";
    for (const auto& w : tiling_windows(b.lo, b.hi, b.step)) {
        os << num(w.center()) << ',' << num(w.half_width()) << ',';
        if (method == "att" || method == "att-eq") {
            const WeightScheme scheme = scheme_for(method);
            const DemeanedEstimator dm(syn, scheme, w);
            const Moments feas = exact_moments(syn, [&](const Study& s) { return tau_w(s, scheme, w); }, cap);
            const Moments dem = exact_moments(syn, [&](const Study& s) { return dm(s); }, cap);
            os << num(dm.estimand()) << ',' << num(feas.mean) << ',' << num(feas.variance) << ',' << num(dem.mean)
               << ',' << num(dem.variance) << ',' << num(true_variance(syn, dm.table())) << ','
               << num(feas.excluded_mass) << '\n';
        } else if (method == "additive" || method == "nearest" || method == "single-region") {
            double estimand;
            Estimator est;
            if (method == "additive") {
                estimand = additive_estimand(syn, w);
                est = [&w](const Study& s) { return tau_additive(s, w); };
            } else if (method == "nearest") {
                const WeightTable t = restrict_to_identified(syn.study, att_weights(syn.study, w));
                estimand = estimand_parts(syn, t).tau();
                est = [t](const Study& s) { return tau_nearest(s, t); };
            } else {
                estimand = single_region_estimand(syn, w);
                est = [&w](const Study& s) { return tau_single_region(s, w); };
            }
            const Moments m = exact_moments(syn, est, cap);
            os << num(estimand) << ',' << num(m.mean) << ',' << num(m.variance) << ",NA,NA,NA," << num(m.excluded_mass)
               << '\n';
        } else {
            throw ValidationError("oracle supports att, att-eq, additive, nearest and single-region");
        }
    }
    run.emit("oracle.csv", os.str());
}

void cmd_permute(Run& run) {
    const Study st = run.study();
    const std::string method = run.cfg.get("method", "att");
    const BinSpec b = parse_bins(run.cfg.require("bins"));
    PermutationOptions opt;
    opt.draws = static_cast<std::size_t>(run.cfg.get_int("draws", 10000));
    opt.seed = run.seed();
    opt.cap = static_cast<std::size_t>(run.cfg.get_int("cap", static_cast<long>(kDefaultEnumerationCap)));
    const WeightScheme scheme = scheme_for(method);
    std::ostringstream os;
    os << "d_center,h,observed,p_value,exhaustive,draws,excluded_mass\n";
    for (const auto& w : tiling_windows(b.lo, b.hi, b.step)) {
        const PermutationResult r =
            permutation_test(st, [&](const Study& s) { return tau_w(s, scheme, w); }, zero_effect_null(), opt);
        os << num(w.center()) << ',' << num(w.half_width()) << ',' << num(r.observed) << ',' << num(r.p_value) << ','
           << (r.exhaustive ? 1 : 0) << ',' << r.draws << ',' << num(r.excluded_mass) << '\n';
    }
    run.emit("permutation.csv", os.str());
}

// Matched candidate locations only; regions left without a location are dropped.
Study matched_study(const Study& st, const std::vector<int>& keep) {
    Study out;
    out.metric = st.metric;
    out.person_covariates = st.person_covariates;
    out.site_covariates = st.site_covariates;
    std::vector<int> region_map(st.J(), -1);
    std::vector<bool> kept(st.sites.size(), false);
    for (int s : keep) kept[s] = true;
    for (std::size_t s = 0; s < st.sites.size(); ++s) {
        if (!kept[s]) continue;
        int& r = region_map[st.sites[s].region];
        if (r < 0) {
            r = out.J();
            out.regions.push_back({st.regions[st.sites[s].region].id, {}, {}});
        }
        CandidateLocation c = st.sites[s];
        c.region = r;
        out.sites.push_back(c);
    }
    for (const auto& p : st.people) {
        if (region_map[p.region] < 0) continue;
        Individual q = p;
        q.region = region_map[p.region];
        out.people.push_back(q);
    }
    std::vector<RegionLaw> laws;
    out.assignment.W.assign(out.J(), 0);
    out.assignment.xi.assign(out.J(), {});
    std::vector<int> count(out.J(), 0);
    for (const auto& c : out.sites) {
        if (c.treated.value_or(0)) {
            out.assignment.W[c.region] = 1;
            out.assignment.xi[c.region].push_back(count[c.region]);
        }
        ++count[c.region];
    }
    for (int j = 0; j < out.J(); ++j) laws.push_back(RegionLaw::independent(std::vector<double>(count[j], 0.5)));
    out.design = Design::independent_locations(laws);
    out.finalize();
    return out;
}

void cmd_observational(Run& run) {
    if (!run.cfg.has("design")) run.cfg.set("design", "observational");
    const Study st = run.study();
    const auto covs = split_list(run.cfg.get("propensity_covariates", ""));
    const PropensityModel model = fit_propensity(st, covs);
    std::ostringstream pm;
    pm << "term,estimate\n";
    for (std::size_t k = 0; k < model.names.size(); ++k) pm << model.names[k] << ',' << num(model.coef(k)) << '\n';
    if (model.warning) std::cerr << "warning: " << *model.warning << '\n';
    run.emit("propensity.csv", pm.str());

    const MatchResult match = overlap_and_match(st, model, run.cfg.get_double("caliper", 0.2));
    std::ostringstream mt, ov;
    mt << "treated,control\n";
    for (auto [t, c] : match.pairs) mt << st.sites[t].id << ',' << st.sites[c].id << '\n';
    match.report.write(ov);
    run.emit("matches.csv", mt.str());
    run.emit("overlap.csv", ov.str());

    const Study sub = matched_study(st, match.sites);
    const BinSpec b = parse_bins(run.cfg.require("bins"));
    const auto edges = bin_edges(b);
    const int folds = std::min<int>(static_cast<int>(run.cfg.get_int("folds", 5)), static_cast<int>(sub.sites.size()));
    EffectCurve curve;
    for (const auto& w : tiling_windows(b.lo, b.hi, b.step)) {
        BinEstimate e;
        e.center = w.center();
        e.half_width = w.half_width();
        e.estimate = cross_fit_dr(sub, w, edges, folds, run.seed(), covs).estimate;
        curve.bins.push_back(e);
    }
    run.emit("dr_curve.csv", curve_text(curve));

    if (run.cfg.get_bool("propose", false)) {
        const double cell = run.cfg.get_double("grid_cell", kDefaultCellSize);
        const double thr = run.cfg.get_double("proposal_threshold", 0.0);
        std::vector<std::string> channels{"individuals"};
        for (const auto& c : st.person_covariates) channels.push_back("mean:" + c);
        std::ostringstream props;
        props << "id,region,x,y\n";
        for (int j = 0; j < st.J(); ++j) {
            const SpatialGrid g = discretize(st, j, cell, channels);
            std::vector<Location> real;
            for (int s : st.realized_sites(j)) real.push_back(st.sites[s].s);
            if (real.empty()) continue;
            for (auto p : propose_locations(g, real, thr))
                props << st.regions[j].id << '_' << p.id << ',' << st.regions[j].id << ',' << num(p.x) << ','
                      << num(p.y) << '\n';
        }
        run.emit("proposals.csv", props.str());
    }
}

void cmd_simulate(Run& run) {
    const SimulationSpec spec = SimulationSpec::from_config(run.cfg);
    const SyntheticStudy syn = simulate(spec);
    std::ostringstream ind, loc, pot, design;
    write_individuals(ind, syn.study);
    write_locations(loc, syn.study);
    write_potential(pot, syn);
    design << "design = " << spec.design << "\nwithin = " << spec.within << "\nk = " << spec.k
           << "\ntreated_regions = " << spec.treated_regions << "\npi = " << num(spec.pi) << "\n";
    run.emit("individuals.csv", ind.str());
    run.emit("locations.csv", loc.str());
    run.emit("potential.csv", pot.str());
    run.emit("design.cfg", design.str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Design-based estimators for spatial treatments"};
    app.require_subcommand(1);
    Flags flags;
    const std::vector<std::pair<std::string, void (*)(Run&)>> commands = {
        {"estimate", cmd_estimate},   {"aggregate", cmd_aggregate},         {"parametric", cmd_parametric},
        {"oracle", cmd_oracle},       {"permute", cmd_permute},             {"observational", cmd_observational},
        {"simulate", cmd_simulate}};
    std::map<CLI::App*, void (*)(Run&)> handlers;
    for (const auto& [name, fn] : commands) {
        CLI::App* sub = app.add_subcommand(name);
        add_common(sub, flags);
        handlers[sub] = fn;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    try {
        for (auto& [sub, fn] : handlers)
            if (sub->parsed()) {
                Run run(sub->get_name(), flags);
                fn(run);
                run.finish();
            }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const EstimatorError& e) {
        std::cerr << "estimation failed: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
