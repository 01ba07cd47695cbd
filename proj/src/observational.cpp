#include "spatx/observational.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "spatx/errors.hpp"
#include "spatx/numeric.hpp"

namespace spatx {

std::pair<int, int> cell_of(const Location& p, const Location& origin, double cell) {
    return {static_cast<int>(std::floor((p.x - origin.x) / cell)), static_cast<int>(std::floor((p.y - origin.y) / cell))};
}

Location SpatialGrid::center(int ix, int iy) const {
    return {origin.x + (ix + 0.5) * cell, origin.y + (iy + 0.5) * cell, ""};
}

int SpatialGrid::channel(const std::string& name) const {
    auto it = std::find(channels.begin(), channels.end(), name);
    if (it == channels.end()) throw LookupError("grid has no channel '" + name + "'");
    return static_cast<int>(it - channels.begin());
}

void SpatialGrid::write(std::ostream& os) const {
    os << std::setprecision(17) << "grid " << origin.x << ' ' << origin.y << ' ' << cell << ' ' << width << ' '
       << height << "\nchannels";
    for (const auto& c : channels) os << ' ' << c;
    os << '\n';
    for (std::size_t c = 0; c < channels.size(); ++c)
        for (int iy = 0; iy < height; ++iy) {
            for (int ix = 0; ix < width; ++ix) os << (ix ? " " : "") << values[c][index(ix, iy)];
            os << '\n';
        }
}

SpatialGrid SpatialGrid::read(std::istream& is) {
    SpatialGrid g;
    std::string tag, line;
    if (!(is >> tag) || tag != "grid") throw ParseError("grid file must start with 'grid'");
    if (!(is >> g.origin.x >> g.origin.y >> g.cell >> g.width >> g.height)) throw ParseError("bad grid header");
    if (!(g.cell > 0.0) || g.width < 0 || g.height < 0) throw ParseError("bad grid dimensions");
    std::getline(is, line);
    std::getline(is, line);
    std::istringstream hs(line);
    if (!(hs >> tag) || tag != "channels") throw ParseError("grid file missing channel line");
    while (hs >> tag) g.channels.push_back(tag);
    g.values.assign(g.channels.size(), std::vector<double>(static_cast<std::size_t>(g.width) * g.height));
    for (auto& ch : g.values)
        for (double& v : ch)
            if (!(is >> v)) throw ParseError("grid file truncated");
    return g;
}

SpatialGrid discretize(const Study& st, int region, double cell, const std::vector<std::string>& channels,
                       std::optional<Location> origin) {
    if (!(cell > 0.0)) throw ValidationError("cell size must be positive");
    const Region& reg = st.regions.at(region);
    if (reg.individuals.empty() && reg.locations.empty())
        throw ValidationError("region '" + reg.id + "' has no points to discretize");
    std::vector<Location> pts;
    for (int i : reg.individuals) pts.push_back(st.people[i].r);
    for (int s : reg.locations) pts.push_back(st.sites[s].s);
    SpatialGrid g;
    g.cell = cell;
    g.channels = channels;
    if (origin) {
        g.origin = *origin;
    } else {
        double mx = std::numeric_limits<double>::infinity(), my = mx;
        for (const auto& p : pts) {
            mx = std::min(mx, p.x);
            my = std::min(my, p.y);
        }
        g.origin = {std::floor(mx / cell) * cell, std::floor(my / cell) * cell, ""};
    }
    for (const auto& p : pts) {
        auto [ix, iy] = cell_of(p, g.origin, cell);
        if (ix < 0 || iy < 0) throw ValidationError("point lies below the grid origin");
        g.width = std::max(g.width, ix + 1);
        g.height = std::max(g.height, iy + 1);
    }
    const std::size_t n = static_cast<std::size_t>(g.width) * g.height;
    std::vector<double> count(n, 0.0);
    for (int i : reg.individuals) {
        auto [ix, iy] = cell_of(st.people[i].r, g.origin, cell);
        count[g.index(ix, iy)] += 1.0;
    }
    for (const auto& name : channels) {
        std::vector<double> v(n, 0.0);
        if (name == "individuals") {
            v = count;
        } else if (name == "locations" || name == "realized") {
            for (int s : reg.locations) {
                if (name == "realized" && !st.realized(s)) continue;
                auto [ix, iy] = cell_of(st.sites[s].s, g.origin, cell);
                v[g.index(ix, iy)] += 1.0;
            }
        } else if (name.rfind("mean:", 0) == 0) {
            const int c = st.person_covariate(name.substr(5));
            for (int i : reg.individuals) {
                auto [ix, iy] = cell_of(st.people[i].r, g.origin, cell);
                v[g.index(ix, iy)] += st.people[i].x[c];
            }
            for (std::size_t k = 0; k < n; ++k)
                if (count[k] > 0) v[k] /= count[k];
        } else {
            throw ValidationError("unknown grid channel '" + name + "'");
        }
        g.values.push_back(std::move(v));
    }
    return g;
}

Location Transform::apply(const Location& p) const {
    double x = mirror ? -p.x : p.x, y = p.y;
    const int k = ((rotate90 % 4) + 4) % 4;
    for (int i = 0; i < k; ++i) {
        const double nx = -y;
        y = x;
        x = nx;
    }
    return {x + dx, y + dy, p.id};
}

std::vector<Location> augment(const std::vector<Location>& points, const Transform& t) {
    std::vector<Location> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(t.apply(p));
    return out;
}

Study augment(Study st, const Transform& t) {
    for (auto& p : st.people) p.r = t.apply(p.r);
    for (auto& c : st.sites) c.s = t.apply(c.s);
    st.finalize();
    return st;
}

SpatialGrid augment(const SpatialGrid& g, const Transform& t) {
    struct Moved {
        int ix, iy, src;
    };
    std::vector<Moved> moved;
    int lx = std::numeric_limits<int>::max(), ly = lx, hx = std::numeric_limits<int>::min(), hy = hx;
    for (int iy = 0; iy < g.height; ++iy)
        for (int ix = 0; ix < g.width; ++ix) {
            auto [nx, ny] = cell_of(t.apply(g.center(ix, iy)), g.origin, g.cell);
            moved.push_back({nx, ny, g.index(ix, iy)});
            lx = std::min(lx, nx);
            ly = std::min(ly, ny);
            hx = std::max(hx, nx);
            hy = std::max(hy, ny);
        }
    SpatialGrid out;
    out.cell = g.cell;
    out.channels = g.channels;
    if (moved.empty()) {
        out.origin = g.origin;
        out.values.assign(g.channels.size(), {});
        return out;
    }
    out.origin = {g.origin.x + lx * g.cell, g.origin.y + ly * g.cell, ""};
    out.width = hx - lx + 1;
    out.height = hy - ly + 1;
    const std::size_t n = static_cast<std::size_t>(out.width) * out.height;
    int count_ch = -1;
    for (std::size_t c = 0; c < g.channels.size(); ++c)
        if (g.channels[c] == "individuals") count_ch = static_cast<int>(c);
    std::vector<double> wsum(n, 0.0);
    for (const auto& m : moved)
        wsum[out.index(m.ix - lx, m.iy - ly)] += count_ch >= 0 ? g.values[count_ch][m.src] : 1.0;
    for (std::size_t c = 0; c < g.channels.size(); ++c) {
        std::vector<double> v(n, 0.0);
        const bool mean = g.channels[c].rfind("mean:", 0) == 0;
        for (const auto& m : moved) {
            const double w = mean ? (count_ch >= 0 ? g.values[count_ch][m.src] : 1.0) : 1.0;
            v[out.index(m.ix - lx, m.iy - ly)] += w * g.values[c][m.src];
        }
        if (mean)
            for (std::size_t k = 0; k < n; ++k)
                if (wsum[k] > 0) v[k] /= wsum[k];
        out.values.push_back(std::move(v));
    }
    return out;
}

namespace {

double log1pexp(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& X) {
    Eigen::MatrixXd A(X.rows(), X.cols() + 1);
    A.col(0).setOnes();
    A.rightCols(X.cols()) = X;
    return A;
}

}  // namespace

double logistic_loglik(const Eigen::MatrixXd& X, const std::vector<int>& y, const Eigen::VectorXd& coef) {
    const Eigen::VectorXd eta = with_intercept(X) * coef;
    std::vector<double> t(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) t[i] = y[i] * eta(i) - log1pexp(eta(i));
    return pairwise_sum(t);
}

PropensityModel fit_logistic(const Eigen::MatrixXd& X, const std::vector<int>& y, std::vector<std::string> names,
                             int max_iter, double tol) {
    if (static_cast<std::size_t>(X.rows()) != y.size()) throw ValidationError("one label per row is required");
    const int p = static_cast<int>(X.cols()) + 1;
    names.insert(names.begin(), "intercept");
    if (static_cast<int>(names.size()) != p) throw ValidationError("one name per covariate is required");
    int ones = 0;
    for (int v : y) {
        if (v != 0 && v != 1) throw ValidationError("labels must be 0 or 1");
        ones += v;
    }
    if (ones == 0 || ones == static_cast<int>(y.size()))
        throw ValidationError("propensity model needs both realized and unrealized locations");
    const Eigen::MatrixXd A = with_intercept(X);
    {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        std::vector<std::string> bad;
        for (int i = 0; i < sv.size(); ++i)
            if (sv(i) <= 1e-10 * sv(0))
                for (int c = 0; c < p; ++c)
                    if (std::abs(svd.matrixV()(c, i)) > 1e-8) bad.push_back(names[c]);
        if (sv.size() < p)
            for (int c = 0; c < p; ++c) bad.push_back(names[c]);
        if (!bad.empty()) {
            std::sort(bad.begin(), bad.end());
            bad.erase(std::unique(bad.begin(), bad.end()), bad.end());
            std::string msg = "collinear propensity covariates:";
            for (const auto& b : bad) msg += " " + b;
            throw CollinearityError(msg);
        }
    }
    Eigen::VectorXd yv(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) yv(i) = y[i];

    PropensityModel m;
    m.names = std::move(names);
    m.coef = Eigen::VectorXd::Zero(p);
    m.loglik.push_back(logistic_loglik(X, y, m.coef));
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::VectorXd eta = A * m.coef;
        Eigen::VectorXd mu(eta.size()), w(eta.size());
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            mu(i) = sigmoid(eta(i));
            w(i) = mu(i) * (1.0 - mu(i));
        }
        const Eigen::VectorXd score = A.transpose() * (yv - mu);
        m.max_score = score.cwiseAbs().maxCoeff();
        if (m.max_score < tol) {
            m.converged = true;
            break;
        }
        const Eigen::MatrixXd H = A.transpose() * w.asDiagonal() * A;
        const Eigen::VectorXd step = H.ldlt().solve(score);
        if (!step.allFinite()) break;
        double scale = 1.0, ll = m.loglik.back();
        Eigen::VectorXd next = m.coef;
        for (int h = 0; h < 40; ++h, scale *= 0.5) {
            next = m.coef + scale * step;
            ll = logistic_loglik(X, y, next);
            if (ll >= m.loglik.back()) break;
        }
        if (ll < m.loglik.back()) break;
        m.coef = next;
        m.loglik.push_back(ll);
        m.iterations = it + 1;
    }
    if (!m.converged) {
        const Eigen::VectorXd eta = A * m.coef;
        const Eigen::VectorXd score = A.transpose() * (yv - eta.unaryExpr([](double v) { return sigmoid(v); }));
        m.max_score = score.cwiseAbs().maxCoeff();
        m.converged = m.max_score < tol;
    }
    const double fitted_ll = m.loglik.back();
    if (!m.converged || fitted_ll > -1e-6 || m.coef.norm() > 30.0) {
        m.separation = true;
        std::ostringstream os;
        os << "possible separation: coefficient norm " << m.coef.norm() << ", log-likelihood " << fitted_ll
           << " after " << m.iterations << " iterations";
        m.warning = os.str();
    }
    m.fitted = true;
    return m;
}

double PropensityModel::logit(const std::vector<double>& z) const {
    if (static_cast<Eigen::Index>(z.size()) + 1 != coef.size())
        throw ValidationError("propensity model expects " + std::to_string(coef.size() - 1) + " covariates");
    double v = coef(0);
    for (std::size_t k = 0; k < z.size(); ++k) v += coef(k + 1) * z[k];
    return v;
}

double PropensityModel::predict(const std::vector<double>& z) const { return sigmoid(logit(z)); }

namespace {

std::vector<int> covariate_columns(const Study& st, const std::vector<std::string>& names) {
    std::vector<int> cols;
    if (names.empty()) {
        cols.resize(st.site_covariates.size());
        std::iota(cols.begin(), cols.end(), 0);
    } else {
        for (const auto& n : names) cols.push_back(st.site_covariate(n));
    }
    return cols;
}

PropensityModel fit_propensity_on(const Study& st, const std::vector<int>& cols, const std::vector<bool>& mask) {
    std::vector<int> rows;
    for (std::size_t s = 0; s < st.sites.size(); ++s)
        if (mask[s]) rows.push_back(static_cast<int>(s));
    Eigen::MatrixXd X(rows.size(), cols.size());
    std::vector<int> y;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) X(r, c) = st.sites[rows[r]].z[cols[c]];
        y.push_back(st.realized(rows[r]) ? 1 : 0);
    }
    std::vector<std::string> names;
    for (int c : cols) names.push_back(st.site_covariates[c]);
    return fit_logistic(X, y, names);
}

std::vector<double> site_z(const Study& st, int s, const std::vector<int>& cols) {
    std::vector<double> z;
    for (int c : cols) z.push_back(st.sites[s].z[c]);
    return z;
}

}  // namespace

PropensityModel fit_propensity(const Study& st, const std::vector<std::string>& covariates) {
    return fit_propensity_on(st, covariate_columns(st, covariates), std::vector<bool>(st.sites.size(), true));
}

std::vector<std::string> propensity_covariates(const Study& st, const PropensityModel& model) {
    (void)st;
    return {model.names.begin() + 1, model.names.end()};
}

std::vector<double> predict_propensity(const Study& st, const PropensityModel& model) {
    const auto cols = covariate_columns(st, propensity_covariates(st, model));
    std::vector<double> e;
    for (std::size_t s = 0; s < st.sites.size(); ++s) e.push_back(model.predict(site_z(st, static_cast<int>(s), cols)));
    return e;
}

void OverlapReport::write(std::ostream& os) const {
    os << std::setprecision(12) << "bin_lo,bin_hi,treated,control\n";
    for (int b = 0; b < 20; ++b) os << b / 20.0 << ',' << (b + 1) / 20.0 << ',' << treated_hist[b] << ',' << control_hist[b] << '\n';
    os << "# treated range " << treated_min << ' ' << treated_max << "\n# control range " << control_min << ' '
       << control_max << '\n';
}

MatchResult overlap_and_match(const Study& st, const std::vector<double>& scores, double caliper) {
    if (scores.size() != st.sites.size()) throw ValidationError("one propensity score per location is required");
    if (!(caliper >= 0.0)) throw ValidationError("caliper must be non-negative");
    MatchResult out;
    auto& rep = out.report;
    rep.treated_min = rep.control_min = std::numeric_limits<double>::infinity();
    rep.treated_max = rep.control_max = -std::numeric_limits<double>::infinity();
    std::vector<int> treated, control;
    std::vector<double> lg(scores.size());
    for (std::size_t s = 0; s < scores.size(); ++s) {
        const double e = scores[s];
        if (!(e >= 0.0 && e <= 1.0)) throw ValidationError("propensity scores must lie in [0, 1]");
        const double c = std::clamp(e, 1e-12, 1.0 - 1e-12);
        lg[s] = std::log(c / (1.0 - c));
        const int b = std::min(19, static_cast<int>(std::floor(e * 20.0)));
        if (st.realized(static_cast<int>(s))) {
            treated.push_back(static_cast<int>(s));
            rep.treated_hist[b]++;
            rep.treated_min = std::min(rep.treated_min, e);
            rep.treated_max = std::max(rep.treated_max, e);
        } else {
            control.push_back(static_cast<int>(s));
            rep.control_hist[b]++;
            rep.control_min = std::min(rep.control_min, e);
            rep.control_max = std::max(rep.control_max, e);
        }
    }
    std::vector<bool> used(scores.size(), false);
    for (int t : treated) {
        int best = -1;
        double bd = std::numeric_limits<double>::infinity();
        for (int c : control) {
            if (used[c]) continue;
            const double dd = std::abs(lg[t] - lg[c]);
            if (dd <= caliper && dd < bd) {
                bd = dd;
                best = c;
            }
        }
        if (best < 0) continue;
        used[best] = true;
        out.pairs.emplace_back(t, best);
        out.sites.push_back(t);
        out.sites.push_back(best);
    }
    if (out.pairs.empty()) throw NoMatchesError("no treated location has a control match within the caliper");
    std::sort(out.sites.begin(), out.sites.end());
    return out;
}

MatchResult overlap_and_match(const Study& st, const PropensityModel& model, double caliper) {
    return overlap_and_match(st, predict_propensity(st, model), caliper);
}

namespace {

struct DrSums {
    std::vector<double> tw, ty, cw, cy;
};

std::vector<int> all_realized(const Study& st) {
    std::vector<int> out;
    for (std::size_t s = 0; s < st.sites.size(); ++s)
        if (st.realized(static_cast<int>(s))) out.push_back(static_cast<int>(s));
    return out;
}

void dr_accumulate(const Study& st, const Window& window, const std::vector<double>& e, const OutcomeModel& mu,
                   const std::vector<int>& xi, int s, DrSums& acc) {
    const auto& people = st.regions[st.sites[s].region].individuals;
    const auto& d = st.site_distances(s);
    const bool real = st.realized(s);
    std::vector<int> without;
    if (real)
        for (int o : xi)
            if (o != s) without.push_back(o);
    bool checked = false;
    for (std::size_t i = 0; i < people.size(); ++i) {
        const double k = window.weight(d[i]);
        if (k == 0.0) continue;
        if (!checked) {
            if (!(e[s] > 0.0 && e[s] < 1.0))
                throw OverlapError("location '" + st.sites[s].id + "' has propensity " + std::to_string(e[s]));
            checked = true;
        }
        const double y = st.people[people[i]].y;
        if (real) {
            const double m = mu(st, people[i], without);
            if (!std::isfinite(m)) throw ValidationError("outcome model returned a non-finite value");
            acc.tw.push_back(k);
            acc.ty.push_back(k * (y - m));
        } else {
            const double m = mu(st, people[i], xi);
            if (!std::isfinite(m)) throw ValidationError("outcome model returned a non-finite value");
            const double w = k * e[s] / (1.0 - e[s]);
            acc.cw.push_back(w);
            acc.cy.push_back(w * (y - m));
        }
    }
}

DrDetail dr_finish(const DrSums& acc, const Window& window) {
    DrDetail out;
    const double t = pairwise_sum(acc.tw), c = pairwise_sum(acc.cw);
    if (t == 0.0) throw EmptyArmError("realized", window.describe());
    if (c == 0.0) throw EmptyArmError("unrealized", window.describe());
    out.treated_term = pairwise_sum(acc.ty) / t;
    out.control_term = pairwise_sum(acc.cy) / c;
    out.estimate = out.treated_term - out.control_term;
    out.treated_pairs = static_cast<int>(acc.tw.size());
    out.control_pairs = static_cast<int>(acc.cw.size());
    return out;
}

}  // namespace

DrDetail doubly_robust_detail(const Study& st, const Window& window, const std::vector<double>& e,
                              const OutcomeModel& mu) {
    if (e.size() != st.sites.size()) throw ValidationError("one propensity per location is required");
    const auto xi = all_realized(st);
    DrSums acc;
    for (std::size_t s = 0; s < st.sites.size(); ++s) dr_accumulate(st, window, e, mu, xi, static_cast<int>(s), acc);
    return dr_finish(acc, window);
}

double doubly_robust_tau(const Study& st, const Window& window, const std::vector<double>& e, const OutcomeModel& mu) {
    return doubly_robust_detail(st, window, e, mu).estimate;
}

OutcomeModel zero_outcome_model() {
    return [](const Study&, int, const std::vector<int>&) { return 0.0; };
}

std::vector<double> BinCountModel::features(const Study& st, int person, const std::vector<int>& sites) const {
    std::vector<double> f(1 + (edges.size() - 1) + st.person_covariates.size(), 0.0);
    f[0] = 1.0;
    const auto& p = st.people[person];
    for (int s : sites) {
        if (st.sites[s].region != p.region) continue;
        const double d = st.site_distances(s)[p.slot];
        for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
            const bool in = b == 0 ? (d >= edges[0] && d <= edges[1]) : (d > edges[b] && d <= edges[b + 1]);
            if (in) f[1 + b] += 1.0;
        }
    }
    for (std::size_t c = 0; c < p.x.size(); ++c) f[edges.size() + c] = p.x[c];
    return f;
}

double BinCountModel::operator()(const Study& st, int person, const std::vector<int>& sites) const {
    const auto f = features(st, person, sites);
    double v = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) v += coef(k) * f[k];
    return v;
}

BinCountModel fit_bin_count_model(const Study& st, const std::vector<double>& edges, const std::vector<bool>& mask) {
    if (edges.size() < 2) throw ValidationError("outcome model needs at least one distance bin");
    for (std::size_t b = 1; b < edges.size(); ++b)
        if (!(edges[b] > edges[b - 1])) throw ValidationError("outcome model bin edges must increase");
    BinCountModel m;
    m.edges = edges;
    const auto xi = all_realized(st);
    std::vector<std::vector<double>> rows;
    std::vector<double> y, w;
    for (std::size_t i = 0; i < st.people.size(); ++i) {
        const auto& p = st.people[i];
        int copies = 0;
        for (int s : st.regions[p.region].locations)
            if (mask[s]) ++copies;
        if (copies == 0) continue;
        rows.push_back(m.features(st, static_cast<int>(i), xi));
        y.push_back(p.y);
        w.push_back(copies);
    }
    const int p = static_cast<int>(1 + (edges.size() - 1) + st.person_covariates.size());
    if (rows.empty()) throw DegenerateEstimandError("no training rows for the outcome model");
    Eigen::MatrixXd A(rows.size(), p);
    Eigen::VectorXd b(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const double sw = std::sqrt(w[r]);
        for (int c = 0; c < p; ++c) A(r, c) = sw * rows[r][c];
        b(r) = sw * y[r];
    }
    // Minimum-norm solution; empty bins simply get coefficient 0.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1e-10);
    m.coef = svd.solve(b);
    return m;
}

CrossFitResult cross_fit_dr(const Study& st, const Window& window, const std::vector<double>& edges, int folds,
                            std::uint64_t seed, const std::vector<std::string>& covariates) {
    const int n = static_cast<int>(st.sites.size());
    if (folds < 2 || folds > n) throw ValidationError("cross-fitting needs between 2 and #locations folds");
    CrossFitResult out;
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    for (int i = n - 1; i > 0; --i) {
        std::uniform_int_distribution<int> pick(0, i);
        std::swap(order[i], order[pick(rng)]);
    }
    out.fold.assign(n, 0);
    for (int r = 0; r < n; ++r) out.fold[order[r]] = r % folds;
    out.e.assign(n, 0.0);
    const auto cols = covariate_columns(st, covariates);
    const auto xi = all_realized(st);
    std::vector<BinCountModel> models;
    for (int f = 0; f < folds; ++f) {
        std::vector<bool> train(n);
        for (int s = 0; s < n; ++s) train[s] = out.fold[s] != f;
        const PropensityModel pm = fit_propensity_on(st, cols, train);
        for (int s = 0; s < n; ++s)
            if (out.fold[s] == f) out.e[s] = pm.predict(site_z(st, s, cols));
        models.push_back(fit_bin_count_model(st, edges, train));
    }
    DrSums all;
    for (int f = 0; f < folds; ++f) {
        const BinCountModel& bm = models[f];
        const OutcomeModel mu = [&bm](const Study& s, int i, const std::vector<int>& S) { return bm(s, i, S); };
        DrSums part;
        for (int s = 0; s < n; ++s)
            if (out.fold[s] == f) dr_accumulate(st, window, out.e, mu, xi, s, part);
        try {
            out.fold_estimates.push_back(dr_finish(part, window).estimate);
        } catch (const EmptyArmError&) {
            out.fold_estimates.push_back(std::numeric_limits<double>::quiet_NaN());
        }
        for (auto [dst, src] : {std::pair{&all.tw, &part.tw}, {&all.ty, &part.ty}, {&all.cw, &part.cw}, {&all.cy, &part.cy}})
            dst->insert(dst->end(), src->begin(), src->end());
    }
    out.estimate = dr_finish(all, window).estimate;
    return out;
}

std::vector<Location> propose_locations(const SpatialGrid& g, const std::vector<Location>& realized, double threshold) {
    if (!(threshold >= 0.0)) throw ValidationError("proposal threshold must be non-negative");
    const std::size_t n = static_cast<std::size_t>(g.width) * g.height;
    auto vec = [&](std::size_t k) {
        std::vector<double> v;
        for (const auto& ch : g.values) v.push_back(ch[k]);
        return v;
    };
    std::vector<std::vector<double>> refs;
    std::vector<bool> is_ref(n, false);
    for (const auto& r : realized) {
        auto [ix, iy] = cell_of(r, g.origin, g.cell);
        if (ix < 0 || iy < 0 || ix >= g.width || iy >= g.height) continue;
        is_ref[g.index(ix, iy)] = true;
        refs.push_back(vec(g.index(ix, iy)));
    }
    if (refs.empty()) throw ValidationError("no realized location falls inside the grid");
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> score(n, -inf);
    for (std::size_t k = 0; k < n; ++k) {
        if (is_ref[k]) continue;
        const auto v = vec(k);
        double best = inf;
        for (const auto& r : refs) {
            double s2 = 0.0;
            for (std::size_t c = 0; c < v.size(); ++c) s2 += (v[c] - r[c]) * (v[c] - r[c]);
            best = std::min(best, std::sqrt(s2));
        }
        if (best <= threshold) score[k] = -best;
    }
    std::vector<Location> out;
    for (int iy = 0; iy < g.height; ++iy)
        for (int ix = 0; ix < g.width; ++ix) {
            const int k = g.index(ix, iy);
            if (score[k] == -inf) continue;
            bool keep = true;
            for (int oy = -1; oy <= 1 && keep; ++oy)
                for (int ox = -1; ox <= 1 && keep; ++ox) {
                    const int nx = ix + ox, ny = iy + oy;
                    if ((!ox && !oy) || nx < 0 || ny < 0 || nx >= g.width || ny >= g.height) continue;
                    const int o = g.index(nx, ny);
                    if (score[o] > score[k] || (score[o] == score[k] && o < k)) keep = false;
                }
            if (!keep) continue;
            Location c = g.center(ix, iy);
            c.id = "proposal_" + std::to_string(out.size() + 1);
            out.push_back(c);
        }
    return out;
}

}  // namespace spatx
