#pragma once

#include <Eigen/Dense>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "spatx/dataset.hpp"

namespace spatx {

// Function of distance given on a grid; linear interpolation, flat outside.
struct TabulatedFunction {
    std::string name;
    std::vector<double> grid;
    std::vector<double> values;
    double operator()(double d) const;
};

struct BasisSpec {
    double dmax = 1.0;
    bool restricted = true;
    // Polynomial effect terms d^1..d^degree (restricted) or d^0..d^degree.
    int effect_degree = 2;
    // Each effect term is also multiplied by this individual covariate.
    std::optional<std::string> interact;
    // Control terms d^0..d^control_degree, all times 1{d <= dmax}; -1 for none.
    int control_degree = 1;
    // Replaces the polynomial effect terms when non-empty.
    std::vector<TabulatedFunction> custom;

    void validate() const;
    int K() const;
    int L() const { return control_degree + 1; }
    std::vector<std::string> effect_names() const;
    std::vector<std::string> control_names() const;
    double lambda(int k, double d, double x) const;
    // Effect regressor before multiplying by W: restricted difference times 1{d <= dmax}.
    double effect_term(int k, double d, double x) const;
    double control_term(int l, double d) const;
};

// Rows of treated regions at unrealized candidate locations always get weight 0.
// Ipw gives control rows Pr(s realized) / (1 - pi_j); Uniform gives them 1.
enum class RowWeighting { Uniform, Ipw };

struct RowSet {
    BasisSpec spec;
    RowWeighting weighting = RowWeighting::Uniform;
    std::vector<std::string> columns;  // intercept, effect terms, control terms
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    Eigen::VectorXd w;
    std::vector<int> person, site;
    std::vector<double> d, x;
};

RowSet build_design_rows(const Study& study, const BasisSpec& spec, RowWeighting weighting = RowWeighting::Uniform);

struct WlsFit {
    BasisSpec spec;
    RowWeighting weighting = RowWeighting::Uniform;
    std::vector<std::string> columns;
    Eigen::VectorXd coef;
    double alpha0 = 0.0;
    std::vector<double> beta, gamma;
    int rank = 0;
    double weighted_rss = 0.0;
    double max_abs_residual = 0.0;
    int weighted_rows = 0;

    // sum_k beta_k * effect_term(k, d, x).
    double tau(double d, double x = 0.0) const;
    void write_coefficients(std::ostream& os) const;
    void write_curve(std::ostream& os, const std::vector<double>& grid, double x = 0.0) const;
};

// Weighted least squares by SVD of sqrt(w) X.  Columns are tied to singular
// values below 1e-10 times the largest are reported as rank deficient.
WlsFit fit_wls(const RowSet& rows);
WlsFit fit_wls(const RowSet& rows, const Eigen::VectorXd& weights);
WlsFit fit_parametric(const Study& study, const BasisSpec& spec, RowWeighting weighting = RowWeighting::Uniform);

// m_k = sum_s Pr(s realized) sum_i effect_term(k, d_i(s), x_i) / sum_s Pr(s realized).
std::vector<double> effect_term_means(const Study& study, const BasisSpec& spec);
double aatt_plugin(const Study& study, const WlsFit& fit);

struct AattRegression {
    double estimate = 0.0;
    std::vector<double> m;
    WlsFit fit;  // columns: intercept, transformed effect terms, control terms
};

AattRegression fit_aatt_regression(const Study& study, const BasisSpec& spec,
                                   RowWeighting weighting = RowWeighting::Uniform);

}  // namespace spatx
