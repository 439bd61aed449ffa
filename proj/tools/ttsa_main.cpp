#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "ttsa/csv.hpp"
#include "ttsa/errors.hpp"
#include "ttsa/game.hpp"
#include "ttsa/harness.hpp"
#include "ttsa/mdp.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPropertyFailure = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitDivergence = 3;

void print_check(const ttsa::PropertyResult& check) {
    std::cout << (check.passed ? "[PASS] " : "[FAIL] ") << check.scope << '/' << check.name
              << ": " << check.detail << '\n';
}

void print_rate_line(const std::string& label, const ttsa::RateFit& fit, bool superpolynomial) {
    std::cout << label << ": slope " << ttsa::format_double(fit.slope) << " (r^2 "
              << ttsa::format_double(fit.r_squared) << ", window [" << fit.n_lo << ", "
              << fit.n_hi << "])";
    if (superpolynomial) std::cout << "  [super-polynomial decay]";
    std::cout << '\n';
}

int run_command(const std::string& config_path) {
    const ttsa::ExperimentConfig config = ttsa::parse_config_file(config_path);
    const ttsa::RunReport report = ttsa::run_experiment(config);

    std::cout << "experiment " << config.type << "  (config hash " << ttsa::to_hex(config.hash)
              << ", base seed " << config.base_seed << ")\n";
    std::cout << "schedule: alpha0 = " << ttsa::format_double(report.alpha0) << ", beta0 = "
              << ttsa::format_double(report.beta0) << ", exponent_a = "
              << ttsa::format_double(config.exponent_a) << '\n';
    std::cout << "replications: " << config.n_reps << " x " << config.horizon << " steps, "
              << report.summary.checkpoints.size() << " checkpoints, wall "
              << ttsa::format_double(report.wall_seconds) << " s\n";
    print_rate_line("err_x_sq", report.rate_x, report.superpolynomial_x);
    print_rate_line("err_y_sq", report.rate_y, report.superpolynomial_y);

    bool all_passed = true;
    for (const ttsa::PropertyResult& check : report.checks) {
        print_check(check);
        all_passed = all_passed && check.passed;
    }

    std::cout << "wrote " << report.summary_csv << '\n';
    std::cout << "wrote " << report.rate_csv << '\n';
    if (!report.trajectory_csv.empty()) std::cout << "wrote " << report.trajectory_csv << '\n';
    return all_passed ? kExitOk : kExitPropertyFailure;
}

int props_command(const std::string& scope) {
    const std::vector<ttsa::PropertyResult> results = ttsa::run_property_suite(scope);
    int failures = 0;
    for (const ttsa::PropertyResult& result : results) {
        print_check(result);
        if (!result.passed) ++failures;
    }
    std::cout << results.size() << " checks, " << failures << " failed\n";
    return failures == 0 ? kExitOk : kExitPropertyFailure;
}

std::pair<long, long> parse_window(const std::string& window) {
    const std::size_t colon = window.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == window.size()) {
        throw ttsa::ConfigError("window must have the form LO:HI, got '" + window + "'");
    }
    char* end = nullptr;
    const long lo = std::strtol(window.c_str(), &end, 10);
    if (end != window.c_str() + colon) {
        throw ttsa::ConfigError("window lower bound is not an integer: '" + window + "'");
    }
    const char* hi_begin = window.c_str() + colon + 1;
    const long hi = std::strtol(hi_begin, &end, 10);
    if (end != window.c_str() + window.size()) {
        throw ttsa::ConfigError("window upper bound is not an integer: '" + window + "'");
    }
    if (lo < 1 || hi <= lo) {
        throw ttsa::ConfigError("window must satisfy 1 <= LO < HI, got '" + window + "'");
    }
    return {lo, hi};
}

int rate_command(const std::string& input_path, const std::string& window) {
    const auto [n_lo, n_hi] = parse_window(window);
    const ttsa::RateReport report = ttsa::rate_report(input_path, n_lo, n_hi);
    print_rate_line("err_x_sq", report.rate_x, false);
    print_rate_line("err_y_sq", report.rate_y, false);

    // Refit report goes next to the input, keeping the provenance comment of
    // the summary it was computed from.
    const ttsa::CsvTable table = ttsa::read_csv(input_path);
    const std::filesystem::path out_path =
        std::filesystem::path(input_path).parent_path() / "rate.csv";
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw ttsa::ConfigError("cannot open output file for writing: " + out_path.string());
    out << (table.comment.empty() ? std::string("#") : table.comment) << '\n';
    out << "slope,intercept,r_squared,n_lo,n_hi\n";
    for (const ttsa::RateFit* fit : {&report.rate_x, &report.rate_y}) {
        out << ttsa::format_double(fit->slope) << ',' << ttsa::format_double(fit->intercept) << ','
            << ttsa::format_double(fit->r_squared) << ',' << fit->n_lo << ',' << fit->n_hi << '\n';
    }
    std::cout << "wrote " << out_path.string() << '\n';
    return kExitOk;
}

void print_vector(const std::string& label, const Eigen::VectorXd& v) {
    std::cout << label << " =";
    for (Eigen::Index i = 0; i < v.size(); ++i) std::cout << ' ' << ttsa::format_double(v(i));
    std::cout << '\n';
}

int oracle_command(const std::string& kind, const std::string& model_path, double gamma) {
    if (kind == "avgcost") {
        const ttsa::MdpFile file = ttsa::load_mdp(model_path);
        const ttsa::AvgCostSolution solution =
            ttsa::avgcost_oracle(file.model, file.reference_state);
        std::cout << "rho_star = " << ttsa::format_double(solution.rho_star) << '\n';
        std::cout << "reference_state = " << solution.reference_state << '\n';
        std::cout << "state action q_star\n";
        for (int i = 0; i < file.model.n_states; ++i) {
            for (int u = 0; u < file.model.n_actions; ++u) {
                std::cout << i << ' ' << u << ' '
                          << ttsa::format_double(solution.q_star(file.model.pair_index(i, u)))
                          << '\n';
            }
        }
        return kExitOk;
    }
    if (kind == "discounted") {
        const ttsa::MdpFile file = ttsa::load_mdp(model_path);
        const ttsa::DiscountedSolution solution = ttsa::discounted_oracle(file.model, gamma);
        std::cout << "gamma = " << ttsa::format_double(solution.gamma) << '\n';
        std::cout << "state action q_star\n";
        for (int i = 0; i < file.model.n_states; ++i) {
            for (int u = 0; u < file.model.n_actions; ++u) {
                std::cout << i << ' ' << u << ' '
                          << ttsa::format_double(solution.q_star(file.model.pair_index(i, u)))
                          << '\n';
            }
        }
        return kExitOk;
    }
    const ttsa::GameSpec game = ttsa::load_game(model_path);
    const ttsa::KktSolution kkt = ttsa::kkt_oracle(game);
    print_vector("x_star", kkt.x_star);
    print_vector("y_star", kkt.y_star);
    std::cout << "stationarity_residual = " << ttsa::format_double(kkt.stationarity_residual)
              << '\n';
    std::cout << "feasibility_residual = " << ttsa::format_double(kkt.feasibility_residual)
              << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-timescale stochastic approximation workbench"};
    app.require_subcommand(1);

    std::string config_path;
    CLI::App* run = app.add_subcommand("run", "Run a configured experiment and write CSV reports");
    run->add_option("--config", config_path, "Experiment config file")->required();

    std::string scope = "all";
    CLI::App* props = app.add_subcommand("props", "Run the sampled property suite");
    props->add_option("--scope", scope, "Property scope (module name or 'all')");

    std::string rate_input, rate_window;
    CLI::App* rate = app.add_subcommand("rate", "Refit decay rates from a summary CSV");
    rate->add_option("--in", rate_input, "summary.csv produced by 'run'")->required();
    rate->add_option("--window", rate_window, "Fit window LO:HI in steps")->required();

    std::string oracle_kind, oracle_model;
    double oracle_gamma = 0.9;
    CLI::App* oracle = app.add_subcommand("oracle", "Print a ground-truth solution for a model file");
    oracle->add_option("kind", oracle_kind, "avgcost | discounted | kkt")
        ->required()
        ->check(CLI::IsMember({"avgcost", "discounted", "kkt"}));
    oracle->add_option("--model", oracle_model, "Model file")->required();
    oracle->add_option("--gamma", oracle_gamma, "Discount factor for the discounted oracle");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfigError;
    }

    try {
        if (run->parsed()) return run_command(config_path);
        if (props->parsed()) return props_command(scope);
        if (rate->parsed()) return rate_command(rate_input, rate_window);
        return oracle_command(oracle_kind, oracle_model, oracle_gamma);
    } catch (const ttsa::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const ttsa::NonFiniteIterate& e) {
        std::cerr << "divergence: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const ttsa::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitPropertyFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitPropertyFailure;
    }
}
