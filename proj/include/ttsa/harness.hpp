#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ttsa/engine.hpp"

namespace ttsa {

/// Parsed experiment configuration (flat key = value file with [problem],
/// [schedule], [run] sections). NaN-valued schedule coefficients mean "auto":
/// resolved from the model's measured contraction bounds when the problem is
/// built. The output directory can be overridden with TTSA_OUTPUT_DIR.
struct ExperimentConfig {
    // [problem]
    std::string type;        // ssp | polyak | gne | generic
    std::string model_file;  // optional; generated when empty
    std::uint64_t generator_seed = 7;
    int states = 3, actions = 2, branching = 2;          // garnet generation
    int players = 3, action_dim = 2, constraints = 2;    // game generation
    double gamma = 0.8;                                  // polyak
    double noise_scale = 1.0;                            // gne / generic
    double markov_scale = 0.0;                           // generic
    double fast_coef = 0.5, cross_coef = 0.25;           // generic
    double slow_coef = 0.5, slow_cross = 0.25;           // generic

    // [schedule]
    double alpha0 = std::numeric_limits<double>::quiet_NaN();  // auto
    double beta0 = std::numeric_limits<double>::quiet_NaN();   // auto
    double exponent_a = 1.0;

    // [run]
    long horizon = 200000;
    int n_reps = 100;
    std::uint64_t base_seed = 12345;
    int checkpoint_count = 30;
    double rate_window_decades = 1.0;
    std::string output_dir = "out";
    bool write_trajectory = true;

    std::string canonical_text;  // reconstructed key = value lines
    std::uint64_t hash = 0;      // FNV-1a of canonical_text
};

/// Throws ConfigError on unknown sections/keys, malformed values, or
/// out-of-range settings.
ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

/// A fully built problem instance plus the coefficients the run will use.
struct BuiltExperiment {
    TtsProblem problem;
    FixedPointOracle oracle;
    StepSchedule schedule;
    Eigen::VectorXd x0, y0;
    int z0 = 0;
};

/// Resolves the model (file or generator), the oracle, and auto schedule
/// coefficients.
BuiltExperiment build_experiment(const ExperimentConfig& config);

struct PropertyResult {
    std::string scope;
    std::string name;
    bool passed = false;
    std::string detail;  // witness text on failure, brief stats on success
};

struct RunReport {
    SummaryResult summary;
    RateFit rate_x, rate_y;
    /// Set when a series decays too fast for a power-law fit in the window
    /// (values underflow) or fits steeper than slope -2.
    bool superpolynomial_x = false;
    bool superpolynomial_y = false;
    double alpha0 = 0.0, beta0 = 0.0;  // resolved coefficients
    std::vector<PropertyResult> checks;  // oracle residual checks for this run
    double wall_seconds = 0.0;
    std::string trajectory_csv;        // empty when not written
    std::string summary_csv;
    std::string rate_csv;
};

/// Runs the experiment and writes trajectory/summary/rate CSVs into the
/// output directory. Every CSV starts with a comment line carrying the
/// config hash and base seed. Identical configs produce byte-identical
/// summary files.
RunReport run_experiment(const ExperimentConfig& config);

/// Sampled invariants of every module (scope empty = all scopes). Each check
/// uses fixed seeds so reruns are identical.
std::vector<PropertyResult> run_property_suite(const std::string& scope);

/// Known property scopes, in execution order.
std::vector<std::string> property_scopes();

/// Fits both error series of a summary CSV over the window [n_lo, n_hi].
struct RateReport {
    RateFit rate_x;
    RateFit rate_y;
};

RateReport rate_report(const std::string& summary_csv_path, long n_lo, long n_hi);

}  // namespace ttsa
