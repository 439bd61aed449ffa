#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "oracle_moreau.hpp"
#include "ttsa/errors.hpp"
#include "ttsa/geometry.hpp"

using ttsa::MoreauEnvelope;
using ttsa::NormSpec;

namespace {

Eigen::VectorXd vec2(double a, double b) {
    Eigen::VectorXd v(2);
    v << a, b;
    return v;
}

}  // namespace

TEST_CASE("norm values on frozen examples") {
    CHECK(NormSpec::euclidean()(vec2(3.0, 4.0)) == 5.0);
    CHECK(NormSpec::max_abs()(vec2(3.0, -4.0)) == 4.0);
    CHECK(NormSpec::weighted_max(vec2(2.0, 1.0))(vec2(3.0, -4.0)) == 6.0);
    CHECK_THROWS_AS(NormSpec::weighted_max(vec2(1.0, 0.0)), ttsa::PropertyViolated);
    CHECK_THROWS_AS(NormSpec::weighted_max(vec2(2.0, 1.0))(Eigen::VectorXd::Ones(3)),
                    ttsa::DimensionMismatch);
}

TEST_CASE("norm equivalence constants are correct and tight") {
    CHECK(NormSpec::euclidean().lower_equivalence(7) == 1.0);
    CHECK(NormSpec::euclidean().upper_equivalence(7) == 1.0);
    CHECK(NormSpec::max_abs().lower_equivalence(4) == 1.0);
    CHECK(NormSpec::max_abs().upper_equivalence(4) == doctest::Approx(2.0).epsilon(1e-15));

    const NormSpec weighted = NormSpec::weighted_max(vec2(2.0, 0.5));
    CHECK(weighted.lower_equivalence(2) == doctest::Approx(0.5).epsilon(1e-15));
    // u = sqrt(1/4 + 4)
    CHECK(weighted.upper_equivalence(2) == doctest::Approx(std::sqrt(4.25)).epsilon(1e-15));

    // Tightness witnesses: the bounds are attained.
    const Eigen::VectorXd lower_witness = vec2(1.0, 0.0);  // largest weight
    CHECK(lower_witness.norm() ==
          doctest::Approx(weighted.lower_equivalence(2) * weighted(lower_witness)).epsilon(1e-14));
    const Eigen::VectorXd upper_witness = vec2(0.5, 2.0);  // component-wise 1/w
    CHECK(upper_witness.norm() ==
          doctest::Approx(weighted.upper_equivalence(2) * weighted(upper_witness)).epsilon(1e-14));
}

TEST_CASE("envelope closed forms on frozen inputs") {
    SUBCASE("euclidean, q = 1, x = (3, 4)") {
        const MoreauEnvelope env(NormSpec::euclidean(), 1.0, 2);
        const auto eval = env.eval(vec2(3.0, 4.0));
        CHECK(eval.value == doctest::Approx(6.25).epsilon(1e-14));
        CHECK(eval.minimizer(0) == doctest::Approx(1.5).epsilon(1e-14));
        CHECK(eval.minimizer(1) == doctest::Approx(2.0).epsilon(1e-14));
        const Eigen::VectorXd g = env.grad(vec2(3.0, 4.0));
        CHECK(g(0) == doctest::Approx(1.5).epsilon(1e-14));
        CHECK(g(1) == doctest::Approx(2.0).epsilon(1e-14));
    }
    SUBCASE("max norm, q = 0.5, x = (1, 1)") {
        const MoreauEnvelope env(NormSpec::max_abs(), 0.5, 2);
        const auto eval = env.eval(vec2(1.0, 1.0));
        CHECK(eval.value == doctest::Approx(0.4).epsilon(1e-13));
        CHECK(eval.minimizer(0) == doctest::Approx(0.8).epsilon(1e-13));
        CHECK(eval.minimizer(1) == doctest::Approx(0.8).epsilon(1e-13));
    }
    SUBCASE("envelope of zero is zero") {
        const MoreauEnvelope env(NormSpec::max_abs(), 0.25, 2);
        CHECK(env.eval(Eigen::VectorXd::Zero(2)).value == 0.0);
    }
}

TEST_CASE("envelope values match independent one-dimensional level search") {
    ttsa::Rng rng = ttsa::make_rng(91);
    const Eigen::VectorXd w_unit = Eigen::VectorXd::Ones(3);
    Eigen::VectorXd w(3);
    w << 2.0, 1.0, 0.5;
    for (double q : {0.05, 0.3, 1.0}) {
        const MoreauEnvelope env_max(NormSpec::max_abs(), q, 3);
        const MoreauEnvelope env_weighted(NormSpec::weighted_max(w), q, 3);
        for (int s = 0; s < 100; ++s) {
            Eigen::VectorXd x(3);
            for (int j = 0; j < 3; ++j) x(j) = ttsa::uniform(rng, -8.0, 8.0);
            const double oracle_max = moreau_oracle::golden_section_value(x, w_unit, q);
            CHECK(env_max.eval(x).value == doctest::Approx(oracle_max).epsilon(1e-9));
            const double oracle_weighted = moreau_oracle::golden_section_value(x, w, q);
            CHECK(env_weighted.eval(x).value == doctest::Approx(oracle_weighted).epsilon(1e-9));
        }
    }
}

TEST_CASE("envelope values match a brute-force grid in two dimensions") {
    const MoreauEnvelope env(NormSpec::max_abs(), 0.5, 2);
    const auto base = [](const Eigen::VectorXd& v) { return v.cwiseAbs().maxCoeff(); };
    for (const Eigen::VectorXd& x : {vec2(1.0, 1.0), vec2(2.0, -0.5), vec2(-3.0, 0.25)}) {
        const double grid = moreau_oracle::grid_value_2d(x, base, 0.5, 4.0, 0.002);
        CHECK(env.eval(x).value == doctest::Approx(grid).epsilon(5e-5));
    }
}

TEST_CASE("gradients match finite differences") {
    ttsa::Rng rng = ttsa::make_rng(92);
    Eigen::VectorXd w(3);
    w << 1.5, 1.0, 0.75;
    for (const NormSpec& norm :
         {NormSpec::euclidean(), NormSpec::max_abs(), NormSpec::weighted_max(w)}) {
        const MoreauEnvelope env(norm, 0.4, 3);
        const auto value = [&](const Eigen::VectorXd& p) { return env.eval(p).value; };
        for (int s = 0; s < 25; ++s) {
            Eigen::VectorXd x(3);
            for (int j = 0; j < 3; ++j) x(j) = ttsa::uniform(rng, -5.0, 5.0);
            const Eigen::VectorXd numeric = moreau_oracle::finite_difference_grad(value, x);
            const Eigen::VectorXd exact = env.grad(x);
            CHECK((numeric - exact).cwiseAbs().maxCoeff() <= 1e-5 * (1.0 + exact.norm()));
        }
    }
}

TEST_CASE("no random probe point beats the inner minimizer") {
    ttsa::Rng rng = ttsa::make_rng(93);
    const MoreauEnvelope env(NormSpec::max_abs(), 0.2, 3);
    for (int s = 0; s < 10; ++s) {
        Eigen::VectorXd x(3);
        for (int j = 0; j < 3; ++j) x(j) = ttsa::uniform(rng, -5.0, 5.0);
        const auto eval = env.eval(x);
        for (int t = 0; t < 1000; ++t) {
            Eigen::VectorXd v(3);
            for (int j = 0; j < 3; ++j) v(j) = ttsa::uniform(rng, -6.0, 6.0);
            const double n = NormSpec::max_abs()(v);
            const double objective = 0.5 * n * n + (x - v).squaredNorm() / (2.0 * 0.2);
            CHECK(eval.value <= objective + 1e-12);
        }
    }
}

TEST_CASE("sampled geometric checks pass and report positive slack") {
    ttsa::Rng rng = ttsa::make_rng(94);
    Eigen::VectorXd w(2);
    w << 2.0, 0.5;
    for (const NormSpec& norm :
         {NormSpec::euclidean(), NormSpec::max_abs(), NormSpec::weighted_max(w)}) {
        for (double q : {0.01, 0.5}) {
            const MoreauEnvelope env(norm, q, 2);
            const auto sandwich = ttsa::sandwich_check(env, 500, rng);
            CHECK(sandwich.worst_slack >= 0.0);
            CHECK(sandwich.samples == 500);
            const auto smooth = ttsa::smoothness_check(env, 200, rng);
            CHECK(smooth.worst_slack >= 0.0);
            const auto count = [](const std::string& s) {
                return std::count(s.begin(), s.end(), ',');
            };
            CHECK(count(sandwich.csv_header()) == count(sandwich.csv_row()));
        }
    }
}

TEST_CASE("envelope construction validates its arguments") {
    CHECK_THROWS_AS(MoreauEnvelope(NormSpec::euclidean(), 0.0, 2), ttsa::PropertyViolated);
    CHECK_THROWS_AS(MoreauEnvelope(NormSpec::euclidean(), -1.0, 2), ttsa::PropertyViolated);
    CHECK_THROWS_AS(MoreauEnvelope(NormSpec::weighted_max(vec2(1.0, 2.0)), 0.5, 3),
                    ttsa::DimensionMismatch);
    const MoreauEnvelope env(NormSpec::euclidean(), 0.5, 2);
    CHECK_THROWS_AS(env.eval(Eigen::VectorXd::Ones(3)), ttsa::DimensionMismatch);
    Eigen::VectorXd bad = vec2(1.0, std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(env.eval(bad), ttsa::SolverDiverged);
}

TEST_CASE("default smoothing follows the contraction margin") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK(ttsa::default_smoothing(1.0, nan) == 0.01);
    CHECK(ttsa::default_smoothing(1.0, 0.5) == doctest::Approx(0.025).epsilon(1e-14));
    // Tiny contraction margins clamp at the floor.
    CHECK(ttsa::default_smoothing(1.0, 1.0 - 1e-9) == 1e-6);
    // Large margins are capped by the norm-equivalence term.
    CHECK(ttsa::default_smoothing(0.5, 0.0) == doctest::Approx(0.025).epsilon(1e-14));
}
