#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "spatx/dataset.hpp"
#include "spatx/geometry.hpp"

namespace spatx {

inline constexpr double kDefaultCellSize = 0.025;

// Grid cell containing a point; cells are half-open [lo, lo + cell).
std::pair<int, int> cell_of(const Location& p, const Location& origin, double cell);

struct SpatialGrid {
    Location origin;
    double cell = kDefaultCellSize;
    int width = 0, height = 0;
    std::vector<std::string> channels;
    std::vector<std::vector<double>> values;  // [channel][row-major iy * width + ix]

    int index(int ix, int iy) const { return iy * width + ix; }
    Location center(int ix, int iy) const;
    int channel(const std::string& name) const;
    void write(std::ostream& os) const;
    static SpatialGrid read(std::istream& is);
};

// Channels: "individuals", "locations", "realized" (counts) or "mean:<covariate>"
// (mean individual covariate, 0 in cells without individuals).  The origin
// defaults to the lower-left corner of the region's points snapped to the cell.
SpatialGrid discretize(const Study& study, int region, double cell, const std::vector<std::string>& channels,
                       std::optional<Location> origin = std::nullopt);

// Mirror (x -> -x), then k quarter turns (x, y) -> (-y, x), then shift.
struct Transform {
    int rotate90 = 0;
    bool mirror = false;
    double dx = 0.0, dy = 0.0;
    Location apply(const Location& p) const;
};

std::vector<Location> augment(const std::vector<Location>& points, const Transform& t);
Study augment(Study study, const Transform& t);
// Cell centers are transformed and re-binned on the lattice of the input grid.
// Count channels add; mean channels average weighted by "individuals" if present.
SpatialGrid augment(const SpatialGrid& grid, const Transform& t);

struct PropensityModel {
    std::vector<std::string> names;  // "intercept" first
    Eigen::VectorXd coef;
    bool fitted = false;
    bool converged = false;
    bool separation = false;
    std::optional<std::string> warning;
    int iterations = 0;
    double max_score = 0.0;
    std::vector<double> loglik;  // per iteration, starting at the initial point

    double logit(const std::vector<double>& z) const;
    double predict(const std::vector<double>& z) const;
};

// Logistic maximum likelihood by Newton / IRLS with step halving.  X excludes the intercept.
PropensityModel fit_logistic(const Eigen::MatrixXd& X, const std::vector<int>& y, std::vector<std::string> names,
                             int max_iter = 50, double tol = 1e-8);
double logistic_loglik(const Eigen::MatrixXd& X, const std::vector<int>& y, const Eigen::VectorXd& coef);
// Regress 1{s realized} on the named location covariates (all when empty).
PropensityModel fit_propensity(const Study& study, const std::vector<std::string>& covariates = {});
std::vector<std::string> propensity_covariates(const Study& study, const PropensityModel& model);
std::vector<double> predict_propensity(const Study& study, const PropensityModel& model);

struct OverlapReport {
    std::array<int, 20> treated_hist{};
    std::array<int, 20> control_hist{};
    double treated_min = 0.0, treated_max = 0.0, control_min = 0.0, control_max = 0.0;
    void write(std::ostream& os) const;
};

struct MatchResult {
    std::vector<std::pair<int, int>> pairs;  // (treated site, control site)
    std::vector<int> sites;                  // matched sites, sorted
    OverlapReport report;
};

// Greedy 1-nearest-neighbour matching without replacement on the logit scale;
// treated sites in index order, ties to the lower control index.
MatchResult overlap_and_match(const Study& study, const std::vector<double>& scores, double caliper);
MatchResult overlap_and_match(const Study& study, const PropensityModel& model, double caliper);

// Outcome model mu(individual, set of realized sites); sites are global indices.
using OutcomeModel = std::function<double(const Study&, int person, const std::vector<int>& sites)>;

struct DrDetail {
    double estimate = 0.0;
    double treated_term = 0.0;
    double control_term = 0.0;
    int treated_pairs = 0;
    int control_pairs = 0;
};

// Window-weighted mean over realized pairs of Y - mu(xi \ {s}) minus the
// e/(1-e)-weighted mean over unrealized pairs of Y - mu(xi).
DrDetail doubly_robust_detail(const Study& study, const Window& window, const std::vector<double>& e,
                              const OutcomeModel& mu);
double doubly_robust_tau(const Study& study, const Window& window, const std::vector<double>& e,
                         const OutcomeModel& mu);
OutcomeModel zero_outcome_model();

// Linear outcome model: intercept, per-bin counts of sites in S within each
// distance bin of the individual, and individual covariates.
struct BinCountModel {
    std::vector<double> edges;
    Eigen::VectorXd coef;
    std::vector<double> features(const Study& study, int person, const std::vector<int>& sites) const;
    double operator()(const Study& study, int person, const std::vector<int>& sites) const;
};

// Fit on rows (i, s') for every same-region candidate s' with the mask set,
// each row carrying the features of i under the observed realized set.
BinCountModel fit_bin_count_model(const Study& study, const std::vector<double>& edges,
                                  const std::vector<bool>& site_mask);

struct CrossFitResult {
    double estimate = 0.0;
    std::vector<int> fold;        // per site
    std::vector<double> e;        // cross-fitted propensity per site
    std::vector<double> fold_estimates;
};

// K folds over candidate locations (seeded shuffle); pair (i, s) inherits the
// fold of s.  Propensity and outcome models are fit out of fold.
CrossFitResult cross_fit_dr(const Study& study, const Window& window, const std::vector<double>& edges, int folds = 5,
                            std::uint64_t seed = 1, const std::vector<std::string>& covariates = {});

// Stand-in proposer: cells whose channel vector lies within threshold of some
// realized location's cell, thinned to local maxima of similarity.
std::vector<Location> propose_locations(const SpatialGrid& grid, const std::vector<Location>& realized,
                                        double threshold);

}  // namespace spatx
