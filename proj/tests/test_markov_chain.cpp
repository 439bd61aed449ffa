#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>

#include "ttsa/errors.hpp"
#include "ttsa/markov_chain.hpp"

using ttsa::FiniteMarkovChain;
using ttsa::make_rng;

namespace {

Eigen::MatrixXd kernel2(double a, double b, double c, double d) {
    Eigen::MatrixXd k(2, 2);
    k << a, b, c, d;
    return k;
}

std::filesystem::path test_tmp() {
    auto dir = std::filesystem::temp_directory_path() / "ttsa_unit";
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("stationary distribution of simple two-state chains") {
    {
        FiniteMarkovChain chain(kernel2(0.5, 0.5, 0.5, 0.5));
        CHECK(chain.stationary_distribution()(0) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(chain.stationary_distribution()(1) == doctest::Approx(0.5).epsilon(1e-12));
    }
    {
        // Periodic flip chain still has a unique stationary distribution.
        FiniteMarkovChain chain(kernel2(0.0, 1.0, 1.0, 0.0));
        CHECK(chain.stationary_distribution()(0) == doctest::Approx(0.5).epsilon(1e-12));
    }
    {
        FiniteMarkovChain chain(kernel2(0.9, 0.1, 0.5, 0.5));
        CHECK(chain.stationary_distribution()(0) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
        CHECK(chain.stationary_distribution()(1) == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    }
}

TEST_CASE("construction rejects malformed kernels") {
    CHECK_THROWS_AS(FiniteMarkovChain(Eigen::MatrixXd::Identity(2, 2)), ttsa::ReducibleChain);
    CHECK_THROWS_AS(FiniteMarkovChain(kernel2(0.5, 0.4, 0.5, 0.5)), ttsa::ReducibleChain);
    CHECK_THROWS_AS(FiniteMarkovChain(kernel2(1.5, -0.5, 0.5, 0.5)), ttsa::ReducibleChain);
    CHECK_THROWS_AS(FiniteMarkovChain(Eigen::MatrixXd::Ones(2, 3)), ttsa::DimensionMismatch);
}

TEST_CASE("degenerate chain has one state and consumes one draw per step") {
    const FiniteMarkovChain chain = FiniteMarkovChain::degenerate();
    CHECK(chain.n_states() == 1);
    CHECK(chain.stationary_distribution()(0) == 1.0);
    ttsa::Rng a = make_rng(5);
    ttsa::Rng b = make_rng(5);
    CHECK(chain.sample_step(0, a) == 0);
    (void)b();  // consume one raw draw by hand
    CHECK(a() == b());
}

TEST_CASE("sampled transitions are reproducible and respect the kernel") {
    const FiniteMarkovChain chain(kernel2(0.9, 0.1, 0.5, 0.5));
    ttsa::Rng rng1 = make_rng(77);
    ttsa::Rng rng2 = make_rng(77);
    int z1 = 0, z2 = 0;
    long visits[2] = {0, 0};
    for (int n = 0; n < 20000; ++n) {
        z1 = chain.sample_step(z1, rng1);
        z2 = chain.sample_step(z2, rng2);
        CHECK(z1 == z2);
        ++visits[z1];
    }
    // Empirical occupancy tracks the stationary distribution loosely.
    const double frac0 = static_cast<double>(visits[0]) / 20000.0;
    CHECK(frac0 == doctest::Approx(5.0 / 6.0).epsilon(0.02));
}

TEST_CASE("Poisson equation solutions for closed-form cases") {
    SUBCASE("zero input gives the zero solution") {
        FiniteMarkovChain chain(kernel2(0.9, 0.1, 0.5, 0.5));
        const auto sol = ttsa::poisson_solve(chain, Eigen::MatrixXd::Zero(2, 3), 0);
        CHECK(sol.values.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("independent rows give V(i) = h(i) - h(i0)") {
        // Both rows equal, so the next state is independent of the current one.
        FiniteMarkovChain chain(kernel2(0.3, 0.7, 0.3, 0.7));
        Eigen::MatrixXd h(2, 1);
        h << 0.7, -0.3;  // centered under pi = (0.3, 0.7)
        const auto sol = ttsa::poisson_solve(chain, h, 0);
        CHECK(sol.values(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(sol.values(1, 0) == doctest::Approx(h(1, 0) - h(0, 0)).epsilon(1e-12));
    }
    SUBCASE("flip chain with h = (1, -1)") {
        FiniteMarkovChain chain(kernel2(0.0, 1.0, 1.0, 0.0));
        Eigen::MatrixXd h(2, 1);
        h << 1.0, -1.0;
        const auto sol = ttsa::poisson_solve(chain, h, 0);
        CHECK(sol.values(0, 0) == 0.0);
        CHECK(sol.values(1, 0) == doctest::Approx(-1.0).epsilon(1e-12));
    }
}

TEST_CASE("Poisson solve enforces centering and residual bounds") {
    FiniteMarkovChain chain(kernel2(0.9, 0.1, 0.5, 0.5));
    Eigen::MatrixXd bad(2, 1);
    bad << 1.0, 1.0;  // stationary mean 1
    CHECK_THROWS_AS(ttsa::poisson_solve(chain, bad, 0), ttsa::NonCenteredInput);

    // A centered input solves to small residual on a random-ish chain.
    Eigen::MatrixXd kernel(4, 4);
    kernel << 0.1, 0.2, 0.3, 0.4,
              0.25, 0.25, 0.25, 0.25,
              0.4, 0.3, 0.2, 0.1,
              0.05, 0.15, 0.35, 0.45;
    FiniteMarkovChain big(kernel);
    Eigen::MatrixXd h(4, 2);
    h << 1.0, -2.0, 0.5, 0.25, -1.5, 3.0, 0.75, -0.5;
    const Eigen::VectorXd& pi = big.stationary_distribution();
    for (int j = 0; j < 2; ++j) h.col(j).array() -= pi.dot(h.col(j));
    const auto sol = ttsa::poisson_solve(big, h, 2);
    const Eigen::MatrixXd residual = sol.values - h - kernel * sol.values;
    CHECK(residual.cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(sol.values.row(2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("noise decomposition identity holds along a simulated path") {
    Eigen::MatrixXd kernel(3, 3);
    kernel << 0.2, 0.5, 0.3,
              0.6, 0.1, 0.3,
              0.25, 0.25, 0.5;
    FiniteMarkovChain chain(kernel);
    Eigen::MatrixXd h(3, 2);
    h << 1.0, 0.3, -0.4, 1.1, 0.9, -2.0;
    const Eigen::VectorXd& pi = chain.stationary_distribution();
    for (int j = 0; j < 2; ++j) h.col(j).array() -= pi.dot(h.col(j));

    ttsa::Rng rng = make_rng(2024);
    const auto report = ttsa::markov_noise_decomposition_check(chain, h, 30000, rng);
    CHECK(report.n_steps == 30000);
    CHECK(report.max_identity_residual <= 1e-10);
    CHECK(report.worst_conditional_mean <= 6.0 * report.worst_conditional_se + 1e-12);
    CHECK(report.worst_cell_count >= 2);

    // The CSV row matches the header's arity.
    const auto count = [](const std::string& s) {
        return std::count(s.begin(), s.end(), ',');
    };
    CHECK(count(report.csv_header()) == count(report.csv_row()));
}

TEST_CASE("chains load from matrix files") {
    const auto path = test_tmp() / "chain.txt";
    {
        std::ofstream out(path);
        out << "2\n0.9 0.1\n0.5 0.5\n";
    }
    const FiniteMarkovChain chain = FiniteMarkovChain::from_file(path.string());
    CHECK(chain.n_states() == 2);
    CHECK(chain.kernel()(0, 0) == 0.9);
    CHECK(chain.kernel()(1, 1) == 0.5);

    const auto bad_path = test_tmp() / "chain_truncated.txt";
    {
        std::ofstream out(bad_path);
        out << "2\n0.9 0.1\n";
    }
    CHECK_THROWS_AS(FiniteMarkovChain::from_file(bad_path.string()), ttsa::ConfigError);
    CHECK_THROWS_AS(FiniteMarkovChain::from_file((test_tmp() / "missing.txt").string()),
                    ttsa::ConfigError);
}
