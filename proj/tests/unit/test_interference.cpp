#include <catch_amalgamated.hpp>
#include <cmath>

#include "fixtures.hpp"
#include "spatx/errors.hpp"
#include "spatx/interference.hpp"
#include "spatx/oracle.hpp"
#include "spatx/weighting.hpp"

using namespace spatx;
using Catch::Approx;

namespace {

std::vector<std::pair<std::string, std::string>> key(const std::string& f, const std::string& e, const char* c) {
    return {{"fixture", f}, {"estimator", e}, {"center", c}};
}

}  // namespace

TEST_CASE("additive estimator is unbiased for its estimand", "[interference]") {
    fixtures::Frozen fz("interference.csv");
    for (const auto& name : {"choose2_additive", "bern3_additive"})
        for (auto [c, cs] : {std::pair{0.5, "0.5"}, std::pair{1.5, "1.5"}}) {
            const auto syn = fixtures::synthetic(name);
            const auto win = Window::closed(c, 0.5);
            const double truth = additive_estimand(syn, win);
            CHECK(truth == Approx(fz.value(key(name, "additive", cs), "estimand")).epsilon(1e-12));
            const auto m = exact_moments(syn, [&](const Study& st) { return tau_additive(st, win); });
            CHECK(m.excluded_mass == 0.0);
            CHECK(std::fabs(m.mean - truth) < 1e-10);
            CHECK(m.variance == Approx(fz.value(key(name, "additive", cs), "variance")).epsilon(1e-9));
        }
}

TEST_CASE("nearest-matters estimator is unbiased on identified pairs", "[interference]") {
    fixtures::Frozen fz("interference.csv");
    for (const auto& name : {"choose2_nearest", "bern3_nearest"})
        for (auto [c, cs] : {std::pair{0.5, "0.5"}, std::pair{1.5, "1.5"}}) {
            const auto syn = fixtures::synthetic(name);
            const auto table = restrict_to_identified(syn.study, att_weights(syn.study, Window::closed(c, 0.5)));
            const double truth = estimand_parts(syn, table).tau();
            CHECK(truth == Approx(fz.value(key(name, "nearest", cs), "estimand")).epsilon(1e-12));
            const auto m = exact_moments(syn, [&](const Study& st) { return tau_nearest(st, table); });
            CHECK(std::fabs(m.mean - truth) < 1e-10);
            CHECK(m.variance == Approx(fz.value(key(name, "nearest", cs), "variance")).epsilon(1e-9));
        }
}

TEST_CASE("nearest probability for fixed-k draws", "[interference]") {
    const auto st = fixtures::study("choose2_nearest");
    // Three locations, two drawn, region treated with probability 1/2.
    for (int person : st.regions[0].individuals) {
        std::vector<std::pair<double, int>> order;
        for (int s : st.regions[0].locations) order.emplace_back(st.dist(s, person), s);
        std::sort(order.begin(), order.end());
        CHECK(nearest_probability(st, person, order[0].second) == Approx(0.5 * 2.0 / 3.0));
        CHECK(nearest_probability(st, person, order[1].second) == Approx(0.5 * 1.0 / 3.0));
        CHECK(nearest_probability(st, person, order[2].second) == 0.0);
        CHECK_FALSE(tau_nearest_unit(st, person, order[2].second).has_value());
    }
}

TEST_CASE("single-region estimator is unbiased conditional on success", "[interference]") {
    fixtures::Frozen fz("interference.csv");
    const auto syn = fixtures::synthetic("bern3_additive");
    for (auto [c, cs] : {std::pair{0.5, "0.5"}, std::pair{1.5, "1.5"}}) {
        const auto win = Window::closed(c, 0.5);
        const double truth = single_region_estimand(syn, win);
        CHECK(truth == Approx(fz.value(key("bern3_additive", "single_region", cs), "estimand")).epsilon(1e-12));
        const auto m = exact_moments(syn, [&](const Study& st) { return tau_single_region(st, win); });
        CHECK(m.excluded_mass == Approx(fz.value(key("bern3_additive", "single_region", cs), "excluded")).margin(1e-12));
        CHECK(std::fabs(m.mean - truth) < 1e-10);
        CHECK(m.mean == Approx(fz.value(key("bern3_additive", "single_region", cs), "mean")).epsilon(1e-10));
    }
}

TEST_CASE("single-region estimator checks its inputs", "[interference]") {
    const auto st = fixtures::study("bern3_additive");
    CHECK_THROWS_AS(tau_single_region(st, Window::closed(0.5, 0.5), {0.4, 1.0, 0.4}), OverlapError);
    const auto cr = fixtures::study("fam_j2_m2_cr");
    CHECK_THROWS_AS(tau_single_region(cr, Window::closed(0.5, 0.5)), UnsupportedDesignError);
}

TEST_CASE("additive unit effect needs a contrast", "[interference]") {
    auto d = Design::bernoulli({0.5}, {RegionLaw::fixed_k(2, 2)});
    Study st;
    st.regions = {{"A", {}, {}}};
    st.people = {{"a", 0, {0, 0, ""}, 1.0, {}, {}, -1}};
    st.sites = {{"s1", 0, {1, 0, ""}, {}, 1, {}, -1}, {"s2", 0, {2, 0, ""}, {}, 1, {}, -1}};
    st.design = d;
    st.assignment = {{1}, {{0, 1}}};
    st.finalize();
    CHECK_THROWS_AS(tau_additive_unit(st, 0, 0), UnidentifiedError);
}
