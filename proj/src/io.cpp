#include "spatx/io.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "spatx/errors.hpp"

namespace spatx {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_line(const std::string& line, const std::string& where) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false, was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = was_quoted = true;
        } else if (c == ',') {
            out.push_back(was_quoted ? cur : trim(cur));
            cur.clear();
            was_quoted = false;
        } else {
            cur += c;
        }
    }
    if (quoted) throw ParseError(where + ": unterminated quote");
    out.push_back(was_quoted ? cur : trim(cur));
    return out;
}

}  // namespace

int CsvTable::column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFileError("cannot open file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CsvTable parse_csv(const std::string& text, const std::string& source) {
    CsvTable t;
    t.source = source;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line = line.substr(3);
        if (trim(line).empty()) continue;
        auto fields = split_line(line, source + " line " + std::to_string(lineno));
        if (!have_header) {
            t.header = std::move(fields);
            std::set<std::string> seen;
            for (const auto& h : t.header)
                if (!seen.insert(h).second) throw ParseError(source + ": duplicate column '" + h + "'");
            have_header = true;
            continue;
        }
        if (fields.size() != t.header.size())
            throw ParseError(source + " line " + std::to_string(lineno) + ": expected " +
                             std::to_string(t.header.size()) + " fields, found " + std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
    }
    if (!have_header) throw ParseError(source + ": missing header row");
    return t;
}

CsvTable read_csv(const std::string& path) { return parse_csv(read_file(path), path); }

double parse_double(const std::string& text, const std::string& where) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw ParseError(where + ": '" + text + "' is not a number");
    }
    if (used != text.size()) throw ParseError(where + ": '" + text + "' is not a number");
    if (!std::isfinite(v)) throw ParseError(where + ": value '" + text + "' is not finite");
    return v;
}

long parse_int(const std::string& text, const std::string& where) {
    std::size_t used = 0;
    long v = 0;
    try {
        v = std::stol(text, &used);
    } catch (const std::exception&) {
        throw ParseError(where + ": '" + text + "' is not an integer");
    }
    if (used != text.size()) throw ParseError(where + ": '" + text + "' is not an integer");
    return v;
}

bool parse_bool(const std::string& text, const std::string& where) {
    std::string t = text;
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
    if (t == "1" || t == "true" || t == "yes") return true;
    if (t == "0" || t == "false" || t == "no") return false;
    throw ParseError(where + ": '" + text + "' is not a boolean");
}

Config Config::load(const std::string& path) { return parse(read_file(path), path); }

Config Config::parse(const std::string& text, const std::string& source) {
    Config c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(source + " line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ParseError(source + " line " + std::to_string(lineno) + ": empty key");
        c.values_[key] = trim(line.substr(eq + 1));
    }
    return c;
}

void Config::set(const std::string& key, const std::string& value) { values_[key] = value; }

std::string Config::get(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    const std::string v = it == values_.end() ? fallback : it->second;
    used_[key] = v;
    return v;
}

std::string Config::require(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ValidationError("missing required setting '" + key + "'");
    used_[key] = it->second;
    return it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
    if (!has(key)) {
        std::ostringstream os;
        os << std::setprecision(17) << fallback;
        used_[key] = os.str();
        return fallback;
    }
    return parse_double(get(key, ""), "setting '" + key + "'");
}

long Config::get_int(const std::string& key, long fallback) const {
    if (!has(key)) {
        used_[key] = std::to_string(fallback);
        return fallback;
    }
    return parse_int(get(key, ""), "setting '" + key + "'");
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) {
        used_[key] = fallback ? "true" : "false";
        return fallback;
    }
    return parse_bool(get(key, ""), "setting '" + key + "'");
}

std::string Config::canonical() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
    return out;
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

namespace {

const std::set<std::string> kLocationReserved = {"id", "region", "x", "y", "treated", "g", "pi"};
const std::set<std::string> kIndividualReserved = {"id", "region", "x", "y", "outcome", "pre_outcome"};

int need(const CsvTable& t, const std::string& name) {
    const int c = t.column(name);
    if (c < 0) throw ParseError(t.source + ": missing column '" + name + "'");
    return c;
}

std::string row_where(const CsvTable& t, std::size_t r, const std::string& col) {
    return t.source + " row " + std::to_string(r + 1) + " column '" + col + "'";
}

DistanceMetric metric_from(const Config& cfg) {
    const std::string m = cfg.get("metric", "euclidean");
    if (m == "euclidean") return DistanceMetric::euclidean();
    if (m == "great_circle") return DistanceMetric::great_circle();
    throw ValidationError("unknown metric '" + m + "'");
}

}  // namespace

Study load_study(const std::string& individuals_path, const std::string& locations_path, const Config& cfg) {
    const CsvTable loc = read_csv(locations_path);
    const CsvTable ind = read_csv(individuals_path);
    Study st;
    st.metric = metric_from(cfg);

    const int lid = need(loc, "id"), lreg = need(loc, "region"), lx = need(loc, "x"), ly = need(loc, "y");
    const int ltr = loc.column("treated"), lg = loc.column("g"), lpi = loc.column("pi");
    std::vector<int> lcov;
    for (std::size_t c = 0; c < loc.header.size(); ++c)
        if (!kLocationReserved.count(loc.header[c])) {
            lcov.push_back(static_cast<int>(c));
            st.site_covariates.push_back(loc.header[c]);
        }
    std::map<std::string, int> region_of;
    for (std::size_t r = 0; r < loc.rows.size(); ++r) {
        const auto& row = loc.rows[r];
        if (row[lid].empty()) throw ParseError(row_where(loc, r, "id") + ": empty id");
        auto [it, fresh] = region_of.emplace(row[lreg], static_cast<int>(st.regions.size()));
        if (fresh) st.regions.push_back({row[lreg], {}, {}});
        CandidateLocation c;
        c.id = row[lid];
        c.region = it->second;
        c.s = {parse_double(row[lx], row_where(loc, r, "x")), parse_double(row[ly], row_where(loc, r, "y")), ""};
        for (int k : lcov) c.z.push_back(parse_double(row[k], row_where(loc, r, loc.header[k])));
        if (ltr >= 0) c.treated = parse_bool(row[ltr], row_where(loc, r, "treated")) ? 1 : 0;
        if (lg >= 0) c.g = parse_double(row[lg], row_where(loc, r, "g"));
        if (lpi >= 0) c.g = parse_double(row[lpi], row_where(loc, r, "pi"));
        st.sites.push_back(std::move(c));
    }
    if (st.sites.empty()) throw EmptyRegionError(loc.source + ": no candidate locations");

    const int iid = need(ind, "id"), ireg = need(ind, "region"), ix = need(ind, "x"), iy = need(ind, "y");
    const int iy0 = need(ind, "outcome"), ipre = ind.column("pre_outcome");
    std::vector<int> icov;
    for (std::size_t c = 0; c < ind.header.size(); ++c)
        if (!kIndividualReserved.count(ind.header[c])) {
            icov.push_back(static_cast<int>(c));
            st.person_covariates.push_back(ind.header[c]);
        }
    for (std::size_t r = 0; r < ind.rows.size(); ++r) {
        const auto& row = ind.rows[r];
        if (row[iid].empty()) throw ParseError(row_where(ind, r, "id") + ": empty id");
        auto it = region_of.find(row[ireg]);
        if (it == region_of.end())
            throw UnknownRegionError(ind.source + " row " + std::to_string(r + 1) + ": unknown region '" + row[ireg] +
                                     "'");
        Individual p;
        p.id = row[iid];
        p.region = it->second;
        p.r = {parse_double(row[ix], row_where(ind, r, "x")), parse_double(row[iy], row_where(ind, r, "y")), ""};
        p.y = parse_double(row[iy0], row_where(ind, r, "outcome"));
        if (ipre >= 0 && !row[ipre].empty()) p.y_pre = parse_double(row[ipre], row_where(ind, r, "pre_outcome"));
        for (int k : icov) p.x.push_back(parse_double(row[k], row_where(ind, r, ind.header[k])));
        st.people.push_back(std::move(p));
    }

    const int J = st.J();
    std::vector<std::vector<int>> slots_of(J);
    for (std::size_t s = 0; s < st.sites.size(); ++s) slots_of[st.sites[s].region].push_back(static_cast<int>(s));

    st.assignment.W.assign(J, 0);
    st.assignment.xi.assign(J, {});
    for (int j = 0; j < J; ++j)
        for (std::size_t k = 0; k < slots_of[j].size(); ++k)
            if (st.sites[slots_of[j][k]].treated.value_or(0)) {
                st.assignment.W[j] = 1;
                st.assignment.xi[j].push_back(static_cast<int>(k));
            }

    const std::string within = cfg.get("within", "single");
    const std::string kind = cfg.get("design", "completely_randomized");
    std::vector<RegionLaw> laws;
    for (int j = 0; j < J; ++j) {
        const int n = static_cast<int>(slots_of[j].size());
        if (kind == "observational") {
            laws.push_back(RegionLaw::independent(std::vector<double>(n, 0.5)));
        } else if (kind == "independent") {
            std::vector<double> p;
            for (int s : slots_of[j]) {
                if (!st.sites[s].g)
                    throw ValidationError("independent design needs a 'pi' column for location '" + st.sites[s].id + "'");
                p.push_back(*st.sites[s].g);
            }
            laws.push_back(RegionLaw::independent(std::move(p)));
        } else if (within == "fixed_k") {
            laws.push_back(RegionLaw::fixed_k(n, static_cast<int>(cfg.get_int("k", 1))));
        } else if (within == "single") {
            if (lg >= 0) {
                std::vector<double> g;
                for (int s : slots_of[j]) g.push_back(*st.sites[s].g);
                laws.push_back(RegionLaw::single(std::move(g)));
            } else {
                laws.push_back(RegionLaw::uniform(n));
            }
        } else {
            throw ValidationError("unknown within-region law '" + within + "'");
        }
    }
    if (kind == "completely_randomized") {
        int observed = 0;
        for (int w : st.assignment.W) observed += w;
        const long jt = cfg.get_int("treated_regions", observed);
        st.design = Design::completely_randomized(J, static_cast<int>(jt), std::move(laws));
    } else if (kind == "bernoulli") {
        const double pi = cfg.get_double("pi", 0.5);
        std::vector<double> p(J, pi);
        for (int j = 0; j < J; ++j)
            if (cfg.has("pi." + st.regions[j].id)) p[j] = cfg.get_double("pi." + st.regions[j].id, pi);
        st.design = Design::bernoulli(std::move(p), std::move(laws));
    } else if (kind == "independent" || kind == "observational") {
        st.design = Design::independent_locations(std::move(laws));
    } else {
        throw ValidationError("unknown design '" + kind + "'");
    }
    st.finalize();
    return st;
}

SyntheticStudy load_synthetic(const Study& study, const std::string& potential_path, const Config& cfg) {
    const std::string rule = cfg.get("combination", "additive");
    CombinationRule r;
    if (rule == "additive")
        r = CombinationRule::Additive;
    else if (rule == "nearest")
        r = CombinationRule::Nearest;
    else
        throw ValidationError("unknown combination rule '" + rule + "'");
    std::vector<double> y0;
    for (const auto& p : study.people) y0.push_back(p.y);
    SyntheticStudy syn = make_synthetic(study, std::move(y0), r);
    const CsvTable t = read_csv(potential_path);
    const int ci = need(t, "individual"), cl = need(t, "location"), cv = need(t, "value");
    std::map<std::string, int> person_of, site_of;
    for (std::size_t i = 0; i < study.people.size(); ++i) person_of[study.people[i].id] = static_cast<int>(i);
    for (std::size_t s = 0; s < study.sites.size(); ++s) site_of[study.sites[s].id] = static_cast<int>(s);
    for (std::size_t row = 0; row < t.rows.size(); ++row) {
        const auto& f = t.rows[row];
        auto pi = person_of.find(f[ci]);
        if (pi == person_of.end()) throw LookupError(row_where(t, row, "individual") + ": unknown individual '" + f[ci] + "'");
        const double v = parse_double(f[cv], row_where(t, row, "value"));
        if (f[cl] == "-") {
            syn.y0[pi->second] = v;
            continue;
        }
        auto si = site_of.find(f[cl]);
        if (si == site_of.end()) throw LookupError(row_where(t, row, "location") + ": unknown location '" + f[cl] + "'");
        const auto& p = study.people[pi->second];
        if (study.sites[si->second].region != p.region)
            throw ValidationError(row_where(t, row, "location") + ": individual and location are in different regions");
        syn.tau[si->second][p.slot] = v;
    }
    realize_into(syn, syn.study.assignment, syn.study);
    return syn;
}

namespace {

std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

}  // namespace

void write_individuals(std::ostream& os, const Study& st) {
    os << "id,region,x,y,outcome";
    const bool pre = std::any_of(st.people.begin(), st.people.end(), [](const Individual& p) { return p.y_pre.has_value(); });
    if (pre) os << ",pre_outcome";
    for (const auto& c : st.person_covariates) os << ',' << c;
    os << '\n';
    for (const auto& p : st.people) {
        os << p.id << ',' << st.regions[p.region].id << ',' << num(p.r.x) << ',' << num(p.r.y) << ',' << num(p.y);
        if (pre) os << ',' << (p.y_pre ? num(*p.y_pre) : "");
        for (double x : p.x) os << ',' << num(x);
        os << '\n';
    }
}

void write_locations(std::ostream& os, const Study& st) {
    const bool independent = st.design.all_within(WithinLaw::IndependentLocations);
    os << "id,region,x,y,treated," << (independent ? "pi" : "g");
    for (const auto& c : st.site_covariates) os << ',' << c;
    os << '\n';
    for (const auto& c : st.sites) {
        const RegionLaw& law = st.design.law(c.region);
        double g = 0.0;
        if (law.kind == WithinLaw::SingleLocation)
            g = law.g[c.slot];
        else if (law.kind == WithinLaw::IndependentLocations)
            g = law.location_pi[c.slot];
        else
            g = static_cast<double>(law.k) / law.n_locations;
        os << c.id << ',' << st.regions[c.region].id << ',' << num(c.s.x) << ',' << num(c.s.y) << ','
           << (st.realized(static_cast<int>(&c - st.sites.data())) ? 1 : 0) << ',' << num(g);
        for (double z : c.z) os << ',' << num(z);
        os << '\n';
    }
}

void write_locations(std::ostream& os, const std::vector<Location>& points, const std::string& region) {
    os << "id,region,x,y\n";
    for (const auto& p : points) os << p.id << ',' << region << ',' << num(p.x) << ',' << num(p.y) << '\n';
}

void write_potential(std::ostream& os, const SyntheticStudy& syn) {
    const Study& st = syn.study;
    os << "individual,location,value\n";
    for (std::size_t i = 0; i < st.people.size(); ++i) {
        const auto& p = st.people[i];
        os << p.id << ",-," << num(syn.y0[i]) << '\n';
        for (int s : st.regions[p.region].locations)
            if (syn.tau[s][p.slot] != 0.0) os << p.id << ',' << st.sites[s].id << ',' << num(syn.tau[s][p.slot]) << '\n';
    }
}

std::string version_string() {
    std::ostringstream os;
    os << "spatx 1.0.0; eigen " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION
       << "; compiler " << __VERSION__;
    return os.str();
}

void Manifest::write(std::ostream& os, const Config& effective) const {
    os << "command=" << command << '\n';
    os << "version=" << version_string() << '\n';
    os << "seed=" << seed << '\n';
    os << "config_hash=" << hex64(fnv1a(effective.canonical())) << '\n';
    for (const auto& [k, v] : effective.used()) os << "setting." << k << '=' << v << '\n';
    for (const auto& [p, h] : inputs) os << "input." << p << '=' << h << '\n';
    for (const auto& [n, h] : outputs) os << "output." << n << '=' << h << '\n';
}

}  // namespace spatx
