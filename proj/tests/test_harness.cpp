#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "ttsa/csv.hpp"
#include "ttsa/errors.hpp"
#include "ttsa/game.hpp"
#include "ttsa/harness.hpp"

namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

fs::path unit_dir(const std::string& leaf) {
    const fs::path dir = fs::temp_directory_path() / "ttsa_unit" / leaf;
    fs::create_directories(dir);
    return dir;
}

void expect_config_error(const std::string& text, const std::string& needle) {
    bool thrown = false;
    try {
        ttsa::parse_config_text(text);
    } catch (const ttsa::ConfigError& e) {
        thrown = true;
        INFO("message: ", e.what());
        CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
    CHECK(thrown);
}

}  // namespace

TEST_CASE("hash and float formatting primitives") {
    CHECK(ttsa::fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(ttsa::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(ttsa::to_hex(0xcbf29ce484222325ULL) == "cbf29ce484222325");

    for (double v : {0.1, 1.0 / 3.0, 6.25, -2.5e-101, 5e-324, 1.7976931348623157e308, 0.0}) {
        const std::string text = ttsa::format_double(v);
        CHECK(std::strtod(text.c_str(), nullptr) == v);
    }
}

TEST_CASE("minimal config takes documented defaults") {
    const auto cfg = ttsa::parse_config_text("[problem]\ntype = generic\n");
    CHECK(cfg.type == "generic");
    CHECK(cfg.model_file.empty());
    CHECK(cfg.generator_seed == 7);
    CHECK(cfg.states == 3);
    CHECK(cfg.actions == 2);
    CHECK(cfg.gamma == 0.8);
    CHECK(std::isnan(cfg.alpha0));
    CHECK(std::isnan(cfg.beta0));
    CHECK(cfg.exponent_a == 1.0);
    CHECK(cfg.horizon == 200000);
    CHECK(cfg.n_reps == 100);
    CHECK(cfg.base_seed == 12345);
    CHECK(cfg.output_dir == "out");
    CHECK(cfg.write_trajectory);

    CHECK(cfg.canonical_text.find("alpha0 = auto") != std::string::npos);
    CHECK(cfg.canonical_text.find("type = generic") != std::string::npos);
    CHECK(cfg.hash == ttsa::fnv1a64(cfg.canonical_text));
}

TEST_CASE("canonical text is a parsing fixed point and feeds the hash") {
    const std::string text =
        "# demo\n"
        "[problem]\n"
        "type = ssp\n"
        "states = 4\n"
        "[schedule]\n"
        "alpha0 = 12.5\n"
        "[run]\n"
        "horizon = 50000\n";
    const auto cfg = ttsa::parse_config_text(text);
    const auto again = ttsa::parse_config_text(cfg.canonical_text);
    CHECK(again.canonical_text == cfg.canonical_text);
    CHECK(again.hash == cfg.hash);

    const auto changed = ttsa::parse_config_text(text + "base_seed = 999\n");
    CHECK(changed.hash != cfg.hash);
}

TEST_CASE("malformed configs are rejected with the offending key named") {
    expect_config_error("[problem]\ntype = generic\nbogus = 1\n", "unknown key");
    expect_config_error("[problem]\ntype = generic\n[schedule]\nexponent_a = 0.4\n",
                        "exponent_a");
    expect_config_error("[problem]\ntype = generic\n[run]\nhorizon = 10\n", "horizon");
    expect_config_error("[problem]\ntype = generic\n[run]\nn_reps = 0\n", "n_reps");
    expect_config_error("[problem]\ntype = frobnicate\n", "type must be one of");
    expect_config_error("[misc]\nkey = 1\n", "unknown section");
    expect_config_error("type = generic\n", "before any section");
    expect_config_error("[problem]\ntype = generic\nstates = many\n", "not an integer");
    expect_config_error("[problem]\ntype = generic\ngamma = 1.5\n", "gamma");
}

TEST_CASE("schedule coefficients resolve from the problem geometry") {
    SUBCASE("generic defaults") {
        const auto cfg = ttsa::parse_config_text("[problem]\ntype = generic\n");
        const auto built = ttsa::build_experiment(cfg);
        // lambda = 0.5 -> alpha0 = 2 / (1 - 0.5); mu = 0.625 -> beta0 capped at alpha0 / 2.
        CHECK(built.schedule.alpha0() == doctest::Approx(4.0).epsilon(1e-12));
        CHECK(built.schedule.beta0() == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("explicit coefficients are honored") {
        const auto cfg = ttsa::parse_config_text(
            "[problem]\ntype = generic\n[schedule]\nalpha0 = 3\nbeta0 = 1.25\n");
        const auto built = ttsa::build_experiment(cfg);
        CHECK(built.schedule.alpha0() == 3.0);
        CHECK(built.schedule.beta0() == 1.25);
    }
    SUBCASE("shortest-path construction keeps the slow gain on the slow side") {
        const auto cfg = ttsa::parse_config_text("[problem]\ntype = ssp\n");
        const auto built = ttsa::build_experiment(cfg);
        CHECK(built.schedule.beta0() <= 0.5 * built.schedule.alpha0() + 1e-12);
        CHECK(built.x0.size() == 6);  // 3 states x 2 actions
        CHECK(built.y0.size() == 1);
        CHECK(built.problem.slow_noiseless);
    }
    SUBCASE("averaging construction") {
        const auto cfg = ttsa::parse_config_text("[problem]\ntype = polyak\n");
        const auto built = ttsa::build_experiment(cfg);
        CHECK(built.schedule.beta0() == 8.0);
        CHECK(built.schedule.alpha0() >= 16.0);
        CHECK(built.schedule.alpha0() <= 500.0);
        CHECK(built.x0.size() == built.y0.size());
    }
    SUBCASE("game construction") {
        const auto cfg = ttsa::parse_config_text("[problem]\ntype = gne\n");
        const auto built = ttsa::build_experiment(cfg);
        CHECK(built.schedule.alpha0() == 0.9);
        // The slow coefficient compensates the measured curvature of the
        // affine multiplier relaxation; recompute that gap from the same
        // default game and check the sizing rule end to end.
        const double nan = std::numeric_limits<double>::quiet_NaN();
        const ttsa::GameSpec game = ttsa::random_game(3, 2, 2, 7);
        const ttsa::GneBundle bundle = ttsa::make_gne_problem(game, 0.0, nan, nan);
        const Eigen::MatrixXd curvature =
            bundle.beta_prime * (game.a * game.m.partialPivLu().solve(
                                              Eigen::MatrixXd(game.a.transpose())));
        const Eigen::VectorXcd spectrum =
            Eigen::EigenSolver<Eigen::MatrixXd>(curvature).eigenvalues();
        double gap = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < spectrum.size(); ++i) {
            gap = std::min(gap, spectrum(i).real());
        }
        CHECK(built.schedule.beta0() ==
              doctest::Approx(std::min(2.5e5, 0.4 / gap)).epsilon(1e-9));
        CHECK(built.x0.size() == 6);
        CHECK(built.y0.size() == 2);
    }
}

TEST_CASE("experiment runs are reproducible byte for byte") {
    const fs::path dir = unit_dir("run_det");
    std::ostringstream text;
    text << "[problem]\ntype = generic\nnoise_scale = 0.5\n"
         << "[schedule]\nalpha0 = 2\nbeta0 = 1\n"
         << "[run]\nhorizon = 1000\nn_reps = 2\ncheckpoint_count = 8\n"
         << "output_dir = " << dir.string() << "\n";
    const auto cfg = ttsa::parse_config_text(text.str());

    const auto report1 = ttsa::run_experiment(cfg);
    const std::string summary1 = slurp(report1.summary_csv);
    const std::string trajectory1 = slurp(report1.trajectory_csv);
    const auto report2 = ttsa::run_experiment(cfg);
    CHECK(slurp(report2.summary_csv) == summary1);
    CHECK(slurp(report2.trajectory_csv) == trajectory1);

    const std::string expected_comment =
        "# config_hash=" + ttsa::to_hex(cfg.hash) + " base_seed=12345";
    CHECK(summary1.substr(0, expected_comment.size()) == expected_comment);

    const auto summary_table = ttsa::read_csv(report1.summary_csv);
    CHECK(summary_table.comment == expected_comment);
    CHECK(summary_table.column_index("n") == 0);
    CHECK(summary_table.column_index("mean_err_x_sq") == 1);
    CHECK(summary_table.column_index("se_x") == 2);
    CHECK(summary_table.column_index("mean_err_y_sq") == 3);
    CHECK(summary_table.column_index("se_y") == 4);
    CHECK(summary_table.rows.size() == report1.summary.checkpoints.size());

    const auto rate_table = ttsa::read_csv(report1.rate_csv);
    CHECK(rate_table.rows.size() == 2);
    CHECK(rate_table.column_index("slope") == 0);

    const auto traj_table = ttsa::read_csv(report1.trajectory_csv);
    CHECK(traj_table.column_index("rep") == 0);
    CHECK(traj_table.column_index("alpha_n") == 6);
    CHECK(traj_table.column_index("beta_n") == 7);
    CHECK(traj_table.rows.size() == 2 * report1.summary.checkpoints.size());

    // The oracle residual checks ran and passed.
    CHECK(!report1.checks.empty());
    for (const auto& check : report1.checks) CHECK(check.passed);
    CHECK(report1.alpha0 == 2.0);
    CHECK(report1.beta0 == 1.0);
    CHECK(report1.wall_seconds >= 0.0);
}

TEST_CASE("decoupled noiseless run is flagged as faster than any power law") {
    const fs::path dir = unit_dir("superpoly");
    std::ostringstream text;
    text << "[problem]\ntype = generic\nnoise_scale = 0\nmarkov_scale = 0\n"
         << "cross_coef = 0\nslow_cross = 0\n"
         << "[schedule]\nalpha0 = 3\nbeta0 = 1.5\nexponent_a = 1\n"
         << "[run]\nhorizon = 1000\nn_reps = 1\ncheckpoint_count = 12\n"
         << "write_trajectory = false\noutput_dir = " << dir.string() << "\n";
    const auto report = ttsa::run_experiment(ttsa::parse_config_text(text.str()));
    // err_x ~ n^-3 (gain 3, modulus 0.5): steeper than the power-law regime.
    CHECK(report.superpolynomial_x);
    // err_y ~ n^-1.5 stays inside it.
    CHECK(!report.superpolynomial_y);
    CHECK(report.rate_y.slope == doctest::Approx(-1.5).epsilon(0.1));
    CHECK(report.trajectory_csv.empty());
}

TEST_CASE("rate refits recover the generating slopes from a summary file") {
    const fs::path dir = unit_dir("rate_refit");
    const std::string path = (dir / "summary.csv").string();
    std::ofstream out(path, std::ios::binary);
    out << "# config_hash=deadbeef base_seed=1\n";
    out << "n,mean_err_x_sq,se_x,mean_err_y_sq,se_y\n";
    for (long n : {10L, 30L, 100L, 300L, 1000L, 3000L, 10000L}) {
        const double vx = 2.0 / static_cast<double>(n);
        const double vy = 5.0 / (static_cast<double>(n) * static_cast<double>(n));
        out << n << "," << ttsa::format_double(vx) << ",0," << ttsa::format_double(vy)
            << ",0\n";
    }
    out.close();

    const auto report = ttsa::rate_report(path, 10, 10000);
    CHECK(report.rate_x.slope == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(report.rate_y.slope == doctest::Approx(-2.0).epsilon(1e-9));

    std::ofstream bad((dir / "bad.csv").string(), std::ios::binary);
    bad << "a,b\n1,2\n";
    bad.close();
    CHECK_THROWS_AS(ttsa::rate_report((dir / "bad.csv").string(), 1, 10), ttsa::ConfigError);
}

TEST_CASE("property suite covers every scope and passes") {
    const auto scopes = ttsa::property_scopes();
    REQUIRE(scopes.size() == 6);

    const auto all = ttsa::run_property_suite("all");
    CHECK(all.size() >= 30);
    for (const auto& result : all) {
        INFO(result.scope, "/", result.name, ": ", result.detail);
        CHECK(result.passed);
    }
    for (const auto& scope : scopes) {
        CHECK(std::count_if(all.begin(), all.end(), [&](const ttsa::PropertyResult& r) {
                  return r.scope == scope;
              }) > 0);
    }

    const auto geometry_only = ttsa::run_property_suite("geometry");
    CHECK(!geometry_only.empty());
    for (const auto& result : geometry_only) CHECK(result.scope == "geometry");

    CHECK_THROWS_AS(ttsa::run_property_suite("nonsense"), ttsa::ConfigError);
}

TEST_CASE("environment variable overrides the configured output directory") {
    const fs::path dir = unit_dir("env_override");
    ::setenv("TTSA_OUTPUT_DIR", dir.string().c_str(), 1);
    std::ostringstream text;
    text << "[problem]\ntype = generic\nnoise_scale = 0\n"
         << "[schedule]\nalpha0 = 2\nbeta0 = 1\n"
         << "[run]\nhorizon = 1000\nn_reps = 1\ncheckpoint_count = 8\n"
         << "write_trajectory = false\noutput_dir = ttsa_should_not_appear\n";
    const auto report = ttsa::run_experiment(ttsa::parse_config_text(text.str()));
    ::unsetenv("TTSA_OUTPUT_DIR");
    CHECK(report.summary_csv.find(dir.string()) == 0);
    CHECK(!fs::exists("ttsa_should_not_appear"));
}
