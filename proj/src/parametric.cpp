#include "spatx/parametric.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

#include "spatx/errors.hpp"
#include "spatx/numeric.hpp"

namespace spatx {

double TabulatedFunction::operator()(double d) const {
    if (d <= grid.front()) return values.front();
    if (d >= grid.back()) return values.back();
    auto it = std::upper_bound(grid.begin(), grid.end(), d);
    const std::size_t hi = it - grid.begin(), lo = hi - 1;
    const double t = (d - grid[lo]) / (grid[hi] - grid[lo]);
    return values[lo] + t * (values[hi] - values[lo]);
}

void BasisSpec::validate() const {
    if (!(dmax > 0.0) || !std::isfinite(dmax)) throw ValidationError("dmax must be positive");
    if (control_degree < -1 || control_degree > 3) throw ValidationError("control degree must be in -1..3");
    if (custom.empty()) {
        const int lo = restricted ? 1 : 0;
        if (effect_degree < lo || effect_degree > 3)
            throw ValidationError("effect degree must be in " + std::to_string(lo) + "..3");
    }
    for (const auto& f : custom) {
        if (f.grid.size() < 2 || f.grid.size() != f.values.size())
            throw ValidationError("tabulated basis '" + f.name + "' needs matching grid and values (at least 2)");
        for (std::size_t i = 1; i < f.grid.size(); ++i)
            if (!(f.grid[i] > f.grid[i - 1]))
                throw ValidationError("tabulated basis '" + f.name + "' grid must be strictly increasing");
    }
}

int BasisSpec::K() const {
    const int base = custom.empty() ? effect_degree + (restricted ? 0 : 1) : static_cast<int>(custom.size());
    return interact ? 2 * base : base;
}

std::vector<std::string> BasisSpec::effect_names() const {
    std::vector<std::string> base;
    if (custom.empty()) {
        for (int p = restricted ? 1 : 0; p <= effect_degree; ++p) base.push_back("d^" + std::to_string(p));
    } else {
        for (const auto& f : custom) base.push_back(f.name);
    }
    std::vector<std::string> out;
    for (const auto& b : base) out.push_back("effect:" + b);
    if (interact)
        for (const auto& b : base) out.push_back("effect:" + b + "*" + *interact);
    return out;
}

std::vector<std::string> BasisSpec::control_names() const {
    std::vector<std::string> out;
    for (int l = 0; l <= control_degree; ++l) out.push_back("control:d^" + std::to_string(l));
    return out;
}

double BasisSpec::lambda(int k, double d, double x) const {
    const int base = interact ? K() / 2 : K();
    const bool scaled = k >= base;
    const int b = scaled ? k - base : k;
    double v;
    if (custom.empty())
        v = std::pow(d, b + (restricted ? 1 : 0));
    else
        v = custom[b](d);
    return scaled ? v * x : v;
}

double BasisSpec::effect_term(int k, double d, double x) const {
    if (d > dmax) return 0.0;
    const double v = lambda(k, d, x);
    return restricted ? v - lambda(k, dmax, x) : v;
}

double BasisSpec::control_term(int l, double d) const { return d > dmax ? 0.0 : std::pow(d, l); }

RowSet build_design_rows(const Study& st, const BasisSpec& spec, RowWeighting weighting) {
    spec.validate();
    RowSet r;
    r.spec = spec;
    r.weighting = weighting;
    r.columns.push_back("intercept");
    for (auto& n : spec.effect_names()) r.columns.push_back(n);
    for (auto& n : spec.control_names()) r.columns.push_back(n);
    const int xcol = spec.interact ? st.person_covariate(*spec.interact) : -1;
    const int K = spec.K(), L = spec.L();

    std::size_t n = 0;
    for (const auto& c : st.sites) n += st.regions[c.region].individuals.size();
    r.X = Eigen::MatrixXd::Zero(n, 1 + K + L);
    r.y.resize(n);
    r.w.resize(n);
    std::size_t row = 0;
    for (std::size_t s = 0; s < st.sites.size(); ++s) {
        const int j = st.sites[s].region;
        const bool W = st.treated(j);
        const bool real = st.realized(static_cast<int>(s));
        double w;
        if (W)
            w = real ? 1.0 : 0.0;
        else if (weighting == RowWeighting::Uniform)
            w = 1.0;
        else
            w = st.pi(j) < 1.0 ? st.prob(static_cast<int>(s)) / (1.0 - st.pi(j)) : 0.0;
        const auto& people = st.regions[j].individuals;
        const auto& dist = st.site_distances(static_cast<int>(s));
        for (std::size_t i = 0; i < people.size(); ++i, ++row) {
            const auto& p = st.people[people[i]];
            const double d = dist[i];
            const double x = xcol >= 0 ? p.x[xcol] : 0.0;
            r.X(row, 0) = 1.0;
            if (W)
                for (int k = 0; k < K; ++k) r.X(row, 1 + k) = spec.effect_term(k, d, x);
            for (int l = 0; l < L; ++l) r.X(row, 1 + K + l) = spec.control_term(l, d);
            r.y(row) = p.y;
            r.w(row) = w;
            r.person.push_back(people[i]);
            r.site.push_back(static_cast<int>(s));
            r.d.push_back(d);
            r.x.push_back(x);
        }
    }
    return r;
}

WlsFit fit_wls(const RowSet& rows) { return fit_wls(rows, rows.w); }

WlsFit fit_wls(const RowSet& rows, const Eigen::VectorXd& weights) {
    if (weights.size() != rows.X.rows()) throw ValidationError("one weight per regression row is required");
    for (Eigen::Index i = 0; i < weights.size(); ++i)
        if (!(weights(i) >= 0.0) || !std::isfinite(weights(i)))
            throw ValidationError("regression weights must be finite and non-negative");
    if (weights.sum() == 0.0) throw DegenerateEstimandError("all regression weights are zero");

    const Eigen::VectorXd sw = weights.cwiseSqrt();
    const Eigen::MatrixXd A = sw.asDiagonal() * rows.X;
    const Eigen::VectorXd b = sw.cwiseProduct(rows.y);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double tol = 1e-10 * (sv.size() ? sv(0) : 0.0);
    const int p = static_cast<int>(rows.X.cols());
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > tol) ++rank;
    if (rank < p) {
        std::vector<bool> hit(p, false);
        for (int i = rank; i < p; ++i)
            for (int c = 0; c < p; ++c)
                if (std::abs(svd.matrixV()(c, i)) > 1e-8) hit[c] = true;
        std::vector<std::string> cols;
        for (int c = 0; c < p; ++c)
            if (hit[c]) cols.push_back(rows.columns[c]);
        throw RankDeficiencyError(cols);
    }

    WlsFit f;
    f.spec = rows.spec;
    f.weighting = rows.weighting;
    f.columns = rows.columns;
    f.coef = svd.solve(b);
    f.rank = rank;
    const int K = rows.spec.K();
    f.alpha0 = f.coef(0);
    for (int k = 0; k < K; ++k) f.beta.push_back(f.coef(1 + k));
    for (int l = 0; l < rows.spec.L(); ++l) f.gamma.push_back(f.coef(1 + K + l));
    const Eigen::VectorXd res = rows.y - rows.X * f.coef;
    std::vector<double> rss;
    for (Eigen::Index i = 0; i < res.size(); ++i) {
        if (weights(i) == 0.0) continue;
        rss.push_back(weights(i) * res(i) * res(i));
        f.max_abs_residual = std::max(f.max_abs_residual, std::abs(res(i)));
        ++f.weighted_rows;
    }
    f.weighted_rss = pairwise_sum(rss);
    return f;
}

WlsFit fit_parametric(const Study& study, const BasisSpec& spec, RowWeighting weighting) {
    return fit_wls(build_design_rows(study, spec, weighting));
}

double WlsFit::tau(double d, double x) const {
    double v = 0.0;
    for (std::size_t k = 0; k < beta.size(); ++k) v += beta[k] * spec.effect_term(static_cast<int>(k), d, x);
    return v;
}

void WlsFit::write_coefficients(std::ostream& os) const {
    os << "term,estimate\n" << std::setprecision(12);
    for (std::size_t c = 0; c < columns.size(); ++c) os << columns[c] << ',' << coef(c) << '\n';
}

void WlsFit::write_curve(std::ostream& os, const std::vector<double>& grid, double x) const {
    os << "d,tau\n" << std::setprecision(12);
    for (double d : grid) os << d << ',' << tau(d, x) << '\n';
}

std::vector<double> effect_term_means(const Study& st, const BasisSpec& spec) {
    spec.validate();
    const int xcol = spec.interact ? st.person_covariate(*spec.interact) : -1;
    const int K = spec.K();
    std::vector<std::vector<double>> num(K);
    std::vector<double> den;
    for (std::size_t s = 0; s < st.sites.size(); ++s) {
        const double p = st.prob(static_cast<int>(s));
        if (p == 0.0) continue;
        den.push_back(p);
        const auto& people = st.regions[st.sites[s].region].individuals;
        const auto& dist = st.site_distances(static_cast<int>(s));
        for (int k = 0; k < K; ++k) {
            std::vector<double> t;
            for (std::size_t i = 0; i < people.size(); ++i)
                t.push_back(spec.effect_term(k, dist[i], xcol >= 0 ? st.people[people[i]].x[xcol] : 0.0));
            num[k].push_back(p * pairwise_sum(t));
        }
    }
    const double total = pairwise_sum(den);
    if (total == 0.0) throw DegenerateEstimandError("no location can be realized");
    std::vector<double> m(K);
    for (int k = 0; k < K; ++k) m[k] = pairwise_sum(num[k]) / total;
    return m;
}

double aatt_plugin(const Study& study, const WlsFit& fit) {
    const auto m = effect_term_means(study, fit.spec);
    double v = 0.0;
    for (std::size_t k = 0; k < m.size(); ++k) v += fit.beta[k] * m[k];
    return v;
}

AattRegression fit_aatt_regression(const Study& study, const BasisSpec& spec, RowWeighting weighting) {
    if (!spec.restricted) throw ValidationError("the one-step aggregate regression needs a restricted basis");
    AattRegression out;
    out.m = effect_term_means(study, spec);
    const double scale = std::max(1.0, std::abs(out.m[0]));
    if (std::abs(out.m[0]) <= 1e-14 * scale)
        throw DegenerateBasisError("mean of the first effect term is zero; reorder or rescale the basis");
    RowSet rows = build_design_rows(study, spec, weighting);
    const int K = spec.K();
    const double m1 = out.m[0];
    for (Eigen::Index r = 0; r < rows.X.rows(); ++r) {
        const double e1 = rows.X(r, 1);
        rows.X(r, 1) = e1 / m1;
        for (int k = 1; k < K; ++k) rows.X(r, 1 + k) -= e1 * out.m[k] / m1;
    }
    rows.columns[1] = "aatt";
    out.fit = fit_wls(rows);
    out.estimate = out.fit.beta[0];
    return out;
}

}  // namespace spatx
