#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <string>

#include "oracle_lp.hpp"
#include "ttsa/errors.hpp"
#include "ttsa/mdp.hpp"

using ttsa::MdpModel;

namespace {

// One state, one action, self loop, constant cost.
MdpModel single_loop(double cost) {
    MdpModel m;
    m.n_states = 1;
    m.n_actions = 1;
    m.cost = Eigen::MatrixXd::Constant(1, 1, cost);
    m.trans = Eigen::MatrixXd::Ones(1, 1);
    m.policy = Eigen::MatrixXd::Ones(1, 1);
    return m;
}

// Deterministic two-cycle 0 -> 1 -> 0 with one action per state and
// stage costs (1, 3). The optimal gain is the cycle average 2, and the
// relative Q-factors pinned at state 0 are (0, 1).
MdpModel two_cycle() {
    MdpModel m;
    m.n_states = 2;
    m.n_actions = 1;
    m.cost = Eigen::MatrixXd(2, 1);
    m.cost << 1.0, 3.0;
    m.trans = Eigen::MatrixXd(2, 2);
    m.trans << 0.0, 1.0,
               1.0, 0.0;
    m.policy = Eigen::MatrixXd::Ones(2, 1);
    return m;
}

}  // namespace

TEST_CASE("average-cost solution on hand-solvable chains") {
    SUBCASE("single self loop") {
        const auto sol = ttsa::avgcost_oracle(single_loop(3.0), 0);
        CHECK(sol.rho_star == doctest::Approx(3.0).epsilon(1e-10));
        CHECK(std::abs(sol.q_star(0)) <= 1e-9);
    }
    SUBCASE("two-cycle with asymmetric costs") {
        const auto sol = ttsa::avgcost_oracle(two_cycle(), 0);
        CHECK(sol.rho_star == doctest::Approx(2.0).epsilon(1e-10));
        CHECK(sol.q_star(0) == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(sol.q_star(1) == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("hitting-time weights on the two-cycle") {
    const auto w = ttsa::ssp_weights(two_cycle(), 0);
    // From (0, a) one step leads to state 1, and from there one more step
    // returns to the reference state: kappa = (2, 1).
    CHECK(w.kappa(0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(w.kappa(1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w.weights(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(w.weights(1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w.lambda0 == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("two-cycle learning construction has the predicted geometry") {
    const MdpModel m = two_cycle();
    const auto config = ttsa::make_ssp_config(m, 0);
    // phi(rho) = 4 - 2 rho on this chain, so every secant slope is -2 and
    // the slow gain is 0.5 / 2.
    CHECK(config.beta_prime == doctest::Approx(0.25).epsilon(1e-9));
    const auto secants = ttsa::estimate_slow_secants(m, 0, 20);
    CHECK(secants.min_abs_slope == doctest::Approx(2.0).epsilon(1e-7));
    CHECK(secants.max_abs_slope == doctest::Approx(2.0).epsilon(1e-7));

    const auto bundle = ttsa::make_ssp_problem(m, config);
    CHECK(bundle.problem.dim_x == 2);
    CHECK(bundle.problem.dim_y == 1);
    CHECK(bundle.problem.slow_noiseless);
    CHECK(!bundle.problem.noise_y);
    CHECK(bundle.problem.mu == doctest::Approx(0.5).epsilon(1e-7));
    CHECK(bundle.solution.rho_star == doctest::Approx(2.0).epsilon(1e-9));

    // The joint pair chain of a deterministic two-cycle is the flip kernel.
    const auto chain = ttsa::joint_chain(m);
    CHECK(chain.kernel()(0, 1) == 1.0);
    CHECK(chain.kernel()(1, 0) == 1.0);
    CHECK(chain.kernel()(0, 0) == 0.0);

    // Deterministic transitions leave nothing for the residual noise. Only
    // transitions the flip chain can actually take are meaningful here.
    Eigen::VectorXd q(2), noise(2);
    q << 0.7, -0.4;
    ttsa::Rng rng = ttsa::make_rng(3);
    const Eigen::VectorXd rho = Eigen::VectorXd::Constant(1, 0.3);
    for (int z = 0; z < 2; ++z) {
        bundle.problem.noise_x(q, rho, z, 1 - z, rng, noise);
        CHECK(noise(0) == 0.0);
        CHECK(noise(1) == 0.0);
    }

    // The exact solution is a fixed point of the mean maps.
    Eigen::VectorXd fx(2), gy(1);
    ttsa::f_bar(bundle.problem, bundle.solution.q_star,
                Eigen::VectorXd::Constant(1, bundle.solution.rho_star), fx);
    CHECK((fx - bundle.solution.q_star).cwiseAbs().maxCoeff() <= 1e-9);
    ttsa::g_bar(bundle.problem, bundle.solution.q_star,
                Eigen::VectorXd::Constant(1, bundle.solution.rho_star), gy);
    CHECK(std::abs(gy(0) - bundle.solution.rho_star) <= 1e-9);
}

TEST_CASE("discounted solution on hand-solvable chains") {
    SUBCASE("self loop geometric sum") {
        const auto sol = ttsa::discounted_oracle(single_loop(1.0), 0.9);
        CHECK(sol.q_star(0) == doctest::Approx(10.0).epsilon(1e-10));
    }
    SUBCASE("two-cycle at gamma 0.8") {
        // q(0) = 1 + 0.8 q(1), q(1) = 3 + 0.8 q(0)  =>  q = (85/9, 95/9).
        const auto sol = ttsa::discounted_oracle(two_cycle(), 0.8);
        CHECK(sol.q_star(0) == doctest::Approx(85.0 / 9.0).epsilon(1e-10));
        CHECK(sol.q_star(1) == doctest::Approx(95.0 / 9.0).epsilon(1e-10));
    }
    SUBCASE("vanishing discount collapses to the stage cost") {
        const auto sol = ttsa::discounted_oracle(single_loop(1.0), 1e-9);
        CHECK(std::abs(sol.q_star(0) - 1.0) <= 1e-8);
    }
    SUBCASE("discount factor is validated") {
        CHECK_THROWS_AS(ttsa::discounted_oracle(single_loop(1.0), 0.0), ttsa::ConfigError);
        CHECK_THROWS_AS(ttsa::discounted_oracle(single_loop(1.0), 1.0), ttsa::ConfigError);
        CHECK_THROWS_AS(ttsa::discounted_oracle(single_loop(1.0), 1.5), ttsa::ConfigError);
    }
}

TEST_CASE("averaging construction for the discounted learner") {
    const auto bundle = ttsa::make_polyak_problem(two_cycle(), 0.8);
    CHECK(bundle.problem.slow_noiseless);
    CHECK(!bundle.problem.noise_y);
    CHECK(bundle.problem.mu == 0.0);
    // lambda = 1 - pi_min (1 - gamma) with the uniform two-point stationary law.
    CHECK(bundle.problem.lambda == doctest::Approx(0.9).epsilon(1e-12));

    // The slow map copies the fast iterate regardless of the average.
    Eigen::VectorXd q(2), qbar(2), out(2);
    q << 1.5, -2.0;
    qbar << 9.0, 9.0;
    bundle.problem.g(q, qbar, 0, out);
    CHECK(out(0) == q(0));
    CHECK(out(1) == q(1));

    // Fixed point of the mean maps at the discounted solution.
    Eigen::VectorXd fx(2);
    ttsa::f_bar(bundle.problem, bundle.solution.q_star, bundle.solution.q_star, fx);
    CHECK((fx - bundle.solution.q_star).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(bundle.oracle.y_star == bundle.solution.q_star);
}

TEST_CASE("gain matches the linear-programming formulation on random models") {
    for (std::uint64_t seed : {101ULL, 202ULL, 303ULL}) {
        const MdpModel m = ttsa::garnet(4, 3, 2, seed);
        const auto sol = ttsa::avgcost_oracle(m, 0);
        const double lp = lp_oracle::average_cost(m);
        CHECK(sol.rho_star == doctest::Approx(lp).epsilon(1e-6));
    }
}

TEST_CASE("random model generation is reproducible and well formed") {
    const MdpModel a = ttsa::garnet(5, 3, 2, 99);
    const MdpModel b = ttsa::garnet(5, 3, 2, 99);
    CHECK(a.cost == b.cost);
    CHECK(a.trans == b.trans);
    CHECK(a.policy == b.policy);

    ttsa::validate_model(a);
    for (int r = 0; r < a.trans.rows(); ++r) {
        CHECK(a.trans.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
        int support = 0;
        for (int j = 0; j < a.trans.cols(); ++j) support += a.trans(r, j) > 0.0 ? 1 : 0;
        CHECK(support <= 2);
    }
    // Uniform exploration policy.
    CHECK((a.policy.array() - 1.0 / 3.0).abs().maxCoeff() <= 1e-15);

    const MdpModel c = ttsa::garnet(5, 3, 2, 100);
    CHECK(a.cost != c.cost);
}

TEST_CASE("flat-cost models still produce a usable slow gain") {
    // Constant costs make phi's natural grid degenerate; the estimator widens
    // the window instead of dividing by zero.
    const auto secants = ttsa::estimate_slow_secants(single_loop(2.0), 0, 20);
    CHECK(secants.max_abs_slope >= secants.min_abs_slope);
    CHECK(secants.min_abs_slope > 0.0);
    const auto config = ttsa::make_ssp_config(single_loop(2.0), 0);
    CHECK(config.beta_prime > 0.0);
}

TEST_CASE("model files round trip bitwise") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "ttsa_unit";
    fs::create_directories(dir);
    const std::string path = (dir / "model.txt").string();
    const MdpModel m = ttsa::garnet(4, 2, 2, 7);
    ttsa::save_mdp(path, m, 2);
    const auto loaded = ttsa::load_mdp(path);
    CHECK(loaded.reference_state == 2);
    CHECK(loaded.model.cost == m.cost);
    CHECK(loaded.model.trans == m.trans);
    CHECK(loaded.model.policy == m.policy);

    CHECK_THROWS_AS(ttsa::load_mdp((dir / "missing.txt").string()), ttsa::ConfigError);
}

TEST_CASE("malformed models are rejected") {
    SUBCASE("non-stochastic transition row") {
        MdpModel m = two_cycle();
        m.trans(0, 1) = 0.9;
        CHECK_THROWS_AS(ttsa::validate_model(m), ttsa::PropertyViolated);
    }
    SUBCASE("zero exploration probability") {
        MdpModel m = ttsa::garnet(3, 2, 2, 5);
        m.policy(0, 0) = 0.0;
        m.policy(0, 1) = 1.0;
        CHECK_THROWS_AS(ttsa::validate_model(m), ttsa::PropertyViolated);
    }
    SUBCASE("wrong transition shape") {
        MdpModel m = two_cycle();
        m.trans = Eigen::MatrixXd::Ones(1, 2);
        CHECK_THROWS_AS(ttsa::validate_model(m), ttsa::DimensionMismatch);
    }
    SUBCASE("reference state unreachable from a trap") {
        MdpModel m = two_cycle();
        m.trans << 0.0, 1.0,
                   0.0, 1.0;  // state 1 absorbs, state 0 is never revisited
        CHECK_THROWS_AS(ttsa::ssp_weights(m, 0), ttsa::Unreachable);
    }
}
