#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ttsa/csv.hpp"
#include "ttsa/errors.hpp"
#include "ttsa/game.hpp"
#include "ttsa/harness.hpp"
#include "ttsa/mdp.hpp"

namespace ttsa {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw PropertyViolated(msg);
}

void run_check(std::vector<PropertyResult>& out, const std::string& scope,
               const std::string& name, const std::function<std::string()>& body) {
    PropertyResult result{scope, name, false, {}};
    try {
        result.detail = body();
        result.passed = true;
    } catch (const std::exception& e) {
        result.detail = e.what();
    }
    out.push_back(std::move(result));
}

Eigen::MatrixXd random_kernel(int n, Rng& rng) {
    Eigen::MatrixXd kernel(n, n);
    for (int i = 0; i < n; ++i) {
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            kernel(i, j) = 0.05 + uniform01(rng);
            sum += kernel(i, j);
        }
        kernel.row(i) /= sum;
    }
    return kernel;
}

Eigen::MatrixXd centered_columns(const FiniteMarkovChain& chain, int dim, Rng& rng) {
    const int n = chain.n_states();
    Eigen::MatrixXd h(n, dim);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < dim; ++j) h(i, j) = uniform(rng, -1.0, 1.0);
    }
    const Eigen::VectorXd& pi = chain.stationary_distribution();
    for (int j = 0; j < dim; ++j) h.col(j).array() -= pi.dot(h.col(j));
    return h;
}

std::string slurp_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), "cannot open file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::filesystem::path props_tmp_dir() {
    const std::filesystem::path dir = std::filesystem::temp_directory_path() / "ttsa_props";
    std::filesystem::create_directories(dir);
    return dir;
}

// ---------------------------------------------------------------------------
// markov_chain
// ---------------------------------------------------------------------------

void props_markov(std::vector<PropertyResult>& out) {
    const std::string scope = "markov_chain";

    run_check(out, scope, "stationary_distribution", []() {
        Rng rng = make_rng(101);
        double worst = 0.0;
        for (int n : {2, 5, 9}) {
            FiniteMarkovChain chain(random_kernel(n, rng));
            const Eigen::VectorXd& pi = chain.stationary_distribution();
            const double residual =
                (pi.transpose() * chain.kernel() - pi.transpose()).cwiseAbs().maxCoeff();
            require(residual <= 1e-10, "stationarity residual " + format_double(residual) +
                                           " for a size-" + std::to_string(n) + " chain");
            require(pi.minCoeff() >= 0.0, "negative stationary mass");
            require(std::abs(pi.sum() - 1.0) <= 1e-12, "stationary mass does not sum to one");
            worst = std::max(worst, residual);
        }
        return "max stationarity residual " + format_double(worst);
    });

    run_check(out, scope, "poisson_residuals", []() {
        Rng rng = make_rng(202);
        double worst = 0.0;
        for (int n : {3, 7}) {
            FiniteMarkovChain chain(random_kernel(n, rng));
            const Eigen::MatrixXd h = centered_columns(chain, 2, rng);
            const int i0 = n - 1;
            const PoissonSolution sol = poisson_solve(chain, h, i0);
            const Eigen::MatrixXd residual = sol.values - h - chain.kernel() * sol.values;
            const double r = residual.cwiseAbs().maxCoeff();
            require(r <= 1e-8, "Poisson residual " + format_double(r));
            require(sol.values.row(i0).cwiseAbs().maxCoeff() == 0.0,
                    "reference row of the Poisson solution is not pinned to zero");
            worst = std::max(worst, r);
        }
        return "max Poisson residual " + format_double(worst);
    });

    run_check(out, scope, "poisson_relabel_invariance", []() {
        Rng rng = make_rng(303);
        const int n = 5;
        FiniteMarkovChain chain(random_kernel(n, rng));
        const Eigen::MatrixXd h = centered_columns(chain, 2, rng);
        const int i0 = 1;
        const PoissonSolution base = poisson_solve(chain, h, i0);

        const int perm[n] = {2, 3, 4, 0, 1};  // relabeled index i holds old state perm[i]
        Eigen::MatrixXd kp(n, n);
        Eigen::MatrixXd hp(n, 2);
        int ip = -1;
        for (int i = 0; i < n; ++i) {
            hp.row(i) = h.row(perm[i]);
            if (perm[i] == i0) ip = i;
            for (int j = 0; j < n; ++j) kp(i, j) = chain.kernel()(perm[i], perm[j]);
        }
        FiniteMarkovChain relabeled(kp);
        const PoissonSolution sol = poisson_solve(relabeled, hp, ip);
        double worst = 0.0;
        for (int i = 0; i < n; ++i) {
            worst = std::max(worst, (sol.values.row(i) - base.values.row(perm[i]))
                                        .cwiseAbs()
                                        .maxCoeff());
        }
        require(worst <= 1e-8, "relabeled Poisson solution differs by " + format_double(worst));
        return "relabeling discrepancy " + format_double(worst);
    });

    run_check(out, scope, "noise_decomposition", []() {
        Rng rng = make_rng(404);
        FiniteMarkovChain chain(random_kernel(5, rng));
        const Eigen::MatrixXd h = centered_columns(chain, 2, rng);
        DecompositionReport report = markov_noise_decomposition_check(chain, h, 20000, rng);
        require(report.max_identity_residual <= 1e-10,
                "per-step identity residual " + format_double(report.max_identity_residual));
        require(report.worst_conditional_mean <= 6.0 * report.worst_conditional_se + 1e-12,
                "conditional mean " + format_double(report.worst_conditional_mean) +
                    " exceeds 6 standard errors (" + format_double(report.worst_conditional_se) + ")");
        return "identity residual " + format_double(report.max_identity_residual) +
               ", worst conditional mean " + format_double(report.worst_conditional_mean) +
               " (se " + format_double(report.worst_conditional_se) + ")";
    });

    run_check(out, scope, "rejects_invalid_input", []() {
        bool threw = false;
        try {
            Eigen::MatrixXd bad(2, 2);
            bad << 0.5, 0.4, 0.5, 0.5;  // first row sums to 0.9
            FiniteMarkovChain chain(bad);
        } catch (const ReducibleChain&) {
            threw = true;
        }
        require(threw, "a non-stochastic kernel was accepted");

        threw = false;
        try {
            FiniteMarkovChain chain(Eigen::MatrixXd::Identity(2, 2));
        } catch (const ReducibleChain&) {
            threw = true;
        }
        require(threw, "a reducible kernel was accepted");

        threw = false;
        try {
            Eigen::MatrixXd kernel(2, 2);
            kernel << 0.5, 0.5, 0.5, 0.5;
            FiniteMarkovChain chain(kernel);
            Eigen::MatrixXd h(2, 1);
            h << 1.0, 0.5;  // stationary mean 0.75, not centered
            poisson_solve(chain, h, 0);
        } catch (const NonCenteredInput&) {
            threw = true;
        }
        require(threw, "a non-centered Poisson input was accepted");
        return "rejected non-stochastic, reducible, and non-centered inputs";
    });
}

// ---------------------------------------------------------------------------
// geometry
// ---------------------------------------------------------------------------

Eigen::VectorXd props_weights(int dim) {
    Eigen::VectorXd w(dim);
    for (int j = 0; j < dim; ++j) {
        w(j) = dim == 1 ? 1.3 : 0.5 + 1.5 * static_cast<double>(j) / (dim - 1);
    }
    return w;
}

std::vector<NormSpec> norms_for_dim(int dim) {
    return {NormSpec::euclidean(), NormSpec::max_abs(), NormSpec::weighted_max(props_weights(dim))};
}

void props_geometry(std::vector<PropertyResult>& out) {
    const std::string scope = "geometry";

    run_check(out, scope, "norm_axioms", []() {
        Rng rng = make_rng(111);
        const int dim = 3;
        double worst = std::numeric_limits<double>::infinity();
        for (const NormSpec& norm : norms_for_dim(dim)) {
            require(norm(Eigen::VectorXd::Zero(dim)) == 0.0, "norm of zero is not zero");
            for (int s = 0; s < 200; ++s) {
                Eigen::VectorXd x(dim), y(dim);
                for (int j = 0; j < dim; ++j) {
                    x(j) = uniform(rng, -5.0, 5.0);
                    y(j) = uniform(rng, -5.0, 5.0);
                }
                const double c = uniform(rng, -3.0, 3.0);
                const double triangle = norm(x) + norm(y) - norm(x + y);
                require(triangle >= -1e-12, "triangle inequality violated by " + format_double(-triangle));
                const double hom = std::abs(norm(c * x) - std::abs(c) * norm(x));
                require(hom <= 1e-12 * (1.0 + norm(x)), "homogeneity violated by " + format_double(hom));
                if (x.cwiseAbs().maxCoeff() > 0.0) require(norm(x) > 0.0, "nonzero vector has zero norm");
                worst = std::min(worst, triangle);
            }
        }
        return "min triangle slack " + format_double(worst);
    });

    run_check(out, scope, "equivalence_constants", []() {
        Rng rng = make_rng(222);
        const int dim = 4;
        Eigen::VectorXd w(dim);
        w << 2.0, 1.0, 0.5, 4.0;
        const std::vector<NormSpec> norms = {NormSpec::euclidean(), NormSpec::max_abs(),
                                             NormSpec::weighted_max(w)};
        for (const NormSpec& norm : norms) {
            const double ell = norm.lower_equivalence(dim);
            const double u = norm.upper_equivalence(dim);
            for (int s = 0; s < 500; ++s) {
                Eigen::VectorXd x(dim);
                for (int j = 0; j < dim; ++j) x(j) = uniform(rng, -10.0, 10.0);
                const double base = norm(x);
                const double e2 = x.norm();
                require(ell * base <= e2 + 1e-12 * (1.0 + e2), "lower equivalence violated");
                require(e2 <= u * base + 1e-12 * (1.0 + e2), "upper equivalence violated");
            }
        }
        // The constants are tight: explicit witnesses meet each bound.
        {
            Eigen::VectorXd e0 = Eigen::VectorXd::Unit(dim, 0);
            const NormSpec& mx = norms[1];
            require(std::abs(mx.lower_equivalence(dim) * mx(e0) - e0.norm()) <= 1e-12,
                    "max norm lower constant is not attained");
            Eigen::VectorXd ones = Eigen::VectorXd::Ones(dim);
            require(std::abs(ones.norm() - mx.upper_equivalence(dim) * mx(ones)) <= 1e-12,
                    "max norm upper constant is not attained");

            const NormSpec& wm = norms[2];
            Eigen::VectorXd e3 = Eigen::VectorXd::Unit(dim, 3);  // the largest weight
            require(std::abs(wm.lower_equivalence(dim) * wm(e3) - e3.norm()) <= 1e-12,
                    "weighted max lower constant is not attained");
            Eigen::VectorXd inv = w.cwiseInverse();
            require(std::abs(inv.norm() - wm.upper_equivalence(dim) * wm(inv)) <= 1e-12,
                    "weighted max upper constant is not attained");
        }
        return "sandwich holds on 1500 samples; witnesses attain all four bounds";
    });

    run_check(out, scope, "envelope_quadratic_scaling", []() {
        Rng rng = make_rng(333);
        const int dim = 3;
        double worst = 0.0;
        for (const NormSpec& norm : norms_for_dim(dim)) {
            const MoreauEnvelope env(norm, 0.3, dim);
            for (int s = 0; s < 50; ++s) {
                Eigen::VectorXd x(dim);
                for (int j = 0; j < dim; ++j) x(j) = uniform(rng, -5.0, 5.0);
                const double base = env.eval(x).value;
                for (double c : {0.5, 2.0, 3.7}) {
                    const double scaled = env.eval((c * x).eval()).value;
                    const double gap = std::abs(scaled - c * c * base);
                    require(gap <= 1e-9 * (1.0 + scaled),
                            "quadratic scaling off by " + format_double(gap));
                    worst = std::max(worst, gap / (1.0 + scaled));
                }
            }
        }
        return "worst relative scaling error " + format_double(worst);
    });

    run_check(out, scope, "envelope_euler_identity", []() {
        Rng rng = make_rng(444);
        const int dim = 3;
        double worst = 0.0;
        for (const NormSpec& norm : norms_for_dim(dim)) {
            const MoreauEnvelope env(norm, 0.4, dim);
            for (int s = 0; s < 200; ++s) {
                Eigen::VectorXd x(dim);
                for (int j = 0; j < dim; ++j) x(j) = uniform(rng, -5.0, 5.0);
                const double value = env.eval(x).value;
                const double inner = env.grad(x).dot(x);
                const double gap = std::abs(inner - 2.0 * value);
                require(gap <= 1e-8 * (1.0 + 2.0 * std::abs(value)),
                        "Euler identity off by " + format_double(gap));
                worst = std::max(worst, gap);
            }
        }
        return "worst Euler identity gap " + format_double(worst);
    });

    run_check(out, scope, "envelope_minimizer_optimality", []() {
        Rng rng = make_rng(555);
        const int dim = 3;
        for (const NormSpec& norm : norms_for_dim(dim)) {
            const MoreauEnvelope env(norm, 0.25, dim);
            for (int s = 0; s < 20; ++s) {
                Eigen::VectorXd x(dim);
                for (int j = 0; j < dim; ++j) x(j) = uniform(rng, -5.0, 5.0);
                const MoreauEval eval = env.eval(x);
                for (int t = 0; t < 50; ++t) {
                    Eigen::VectorXd v(dim);
                    for (int j = 0; j < dim; ++j) v(j) = uniform(rng, -6.0, 6.0);
                    const double objective =
                        0.5 * norm(v) * norm(v) + (x - v).squaredNorm() / (2.0 * env.q());
                    require(eval.value <= objective + 1e-10,
                            "a probe point beats the reported envelope value by " +
                                format_double(eval.value - objective));
                }
            }
        }
        return "no probe point beat the closed-form value (3000 probes)";
    });

    run_check(out, scope, "sandwich_inequality", []() {
        Rng rng = make_rng(666);
        double worst = std::numeric_limits<double>::infinity();
        int envelopes = 0;
        for (int dim : {1, 3, 5}) {
            for (const NormSpec& norm : norms_for_dim(dim)) {
                for (double q : {0.05, 0.5}) {
                    const MoreauEnvelope env(norm, q, dim);
                    const GeometryReport report = sandwich_check(env, 1000, rng);
                    worst = std::min(worst, report.worst_slack);
                    ++envelopes;
                }
            }
        }
        return "worst slack " + format_double(worst) + " over " + std::to_string(envelopes) +
               " envelopes";
    });

    run_check(out, scope, "smoothness_and_convexity", []() {
        Rng rng = make_rng(777);
        double worst = std::numeric_limits<double>::infinity();
        int envelopes = 0;
        for (int dim : {1, 3, 5}) {
            for (const NormSpec& norm : norms_for_dim(dim)) {
                for (double q : {0.05, 0.5}) {
                    const MoreauEnvelope env(norm, q, dim);
                    const GeometryReport report = smoothness_check(env, 300, rng);
                    worst = std::min(worst, report.worst_slack);
                    ++envelopes;
                }
            }
        }
        return "worst slack " + format_double(worst) + " over " + std::to_string(envelopes) +
               " envelopes";
    });

    run_check(out, scope, "default_smoothing_range", []() {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        require(default_smoothing(1.0, nan) == 0.01,
                "unknown contraction should give the fallback value 0.01");
        for (double ell : {0.1, 1.0, 1.4142135623730951}) {
            for (double lambda : {0.0, 0.5, 0.99, 0.999999}) {
                const double q = default_smoothing(ell, lambda);
                require(q >= 1e-6 && q <= 1.0,
                        "smoothing parameter " + format_double(q) + " left [1e-6, 1]");
            }
        }
        return "all values inside [1e-6, 1]; fallback is 0.01";
    });
}

// ---------------------------------------------------------------------------
// tts_engine
// ---------------------------------------------------------------------------

TtsProblem small_noisy_problem() {
    Eigen::MatrixXd kernel(2, 2);
    kernel << 0.7, 0.3, 0.4, 0.6;
    TtsProblem problem;
    problem.dim_x = 2;
    problem.dim_y = 1;
    problem.chain = FiniteMarkovChain(std::move(kernel));
    problem.f = [](const Eigen::VectorXd& x, const Eigen::VectorXd& y, int z, Eigen::VectorXd& out) {
        out(0) = 0.4 * x(0) + 0.1 * x(1) + 0.2 * y(0) + (z == 0 ? 0.3 : -0.7);
        out(1) = 0.3 * x(1) - 0.05 * x(0);
    };
    problem.g = [](const Eigen::VectorXd& x, const Eigen::VectorXd& y, int, Eigen::VectorXd& out) {
        out(0) = 0.5 * y(0) + 0.1 * x(0);
    };
    problem.noise_x = [](const Eigen::VectorXd&, const Eigen::VectorXd&, int, int, Rng& rng,
                         Eigen::VectorXd& out) {
        out(0) = 0.2 * normal(rng);
        out(1) = uniform(rng, -0.1, 0.1);
    };
    problem.noise_y = [](const Eigen::VectorXd&, const Eigen::VectorXd&, int, int, Rng& rng,
                         Eigen::VectorXd& out) { out(0) = 0.05 * normal(rng); };
    return problem;
}

void props_engine(std::vector<PropertyResult>& out) {
    const std::string scope = "tts_engine";

    run_check(out, scope, "bitwise_determinism", []() {
        const TtsProblem problem = small_noisy_problem();
        const StepSchedule schedule(0.8, 0.3, 0.9);
        const Eigen::VectorXd x0 = Eigen::VectorXd::Ones(2);
        const Eigen::VectorXd y0 = Eigen::VectorXd::Ones(1);
        const std::vector<long> checkpoints = {0, 10, 100, 500};
        Rng rng1 = make_rng(42);
        Rng rng2 = make_rng(42);
        const ReplicationResult a = tts_run(problem, schedule, x0, y0, 0, 500, checkpoints, rng1);
        const ReplicationResult b = tts_run(problem, schedule, x0, y0, 0, 500, checkpoints, rng2);
        require((a.final_x - b.final_x).cwiseAbs().maxCoeff() == 0.0, "final fast iterates differ");
        require((a.final_y - b.final_y).cwiseAbs().maxCoeff() == 0.0, "final slow iterates differ");
        require(a.final_z == b.final_z, "final chain states differ");
        return "two seeded runs agree bitwise";
    });

    run_check(out, scope, "update_equation_replay", []() {
        const TtsProblem problem = small_noisy_problem();
        const StepSchedule schedule(0.8, 0.3, 0.9);
        const Eigen::VectorXd x0 = Eigen::VectorXd::Ones(2);
        const Eigen::VectorXd y0 = Eigen::VectorXd::Ones(1);
        const long horizon = 40;
        std::vector<long> checkpoints;
        for (long n = 0; n <= horizon; ++n) checkpoints.push_back(n);
        Trajectory trajectory;
        RunOptions options;
        options.trajectory = &trajectory;
        Rng rng = make_rng(99);
        tts_run(problem, schedule, x0, y0, 0, horizon, checkpoints, rng, options);

        // Replay the published update equation step by step with the same
        // stream and compare every recorded state bitwise.
        Rng replay_rng = make_rng(99);
        Eigen::VectorXd x = x0, y = y0;
        Eigen::VectorXd fx(2), gy(1);
        Eigen::VectorXd mx = Eigen::VectorXd::Zero(2), my = Eigen::VectorXd::Zero(1);
        int z = 0;
        for (long n = 0; n < horizon; ++n) {
            require((trajectory.x[static_cast<std::size_t>(n)] - x).cwiseAbs().maxCoeff() == 0.0 &&
                        (trajectory.y[static_cast<std::size_t>(n)] - y).cwiseAbs().maxCoeff() == 0.0,
                    "replayed state diverged at step " + std::to_string(n));
            const double a_n = schedule.alpha(n);
            const double b_n = schedule.beta(n);
            const int z_next = problem.chain.sample_step(z, replay_rng);
            problem.f(x, y, z, fx);
            problem.g(x, y, z, gy);
            problem.noise_x(x, y, z, z_next, replay_rng, mx);
            problem.noise_y(x, y, z, z_next, replay_rng, my);
            x += a_n * (fx - x + mx);
            y += b_n * (gy - y + my);
            z = z_next;
        }
        require((trajectory.x.back() - x).cwiseAbs().maxCoeff() == 0.0 &&
                    (trajectory.y.back() - y).cwiseAbs().maxCoeff() == 0.0,
                "replayed final state diverged");
        return "41 recorded states match an independent replay bitwise";
    });

    run_check(out, scope, "schedule_inequalities", []() {
        double worst = std::numeric_limits<double>::infinity();
        const double triples[4][3] = {
            {1.0, 0.5, 1.0}, {2.0, 1.0, 0.75}, {0.3, 0.1, 0.6}, {500.0, 250.0, 1.0}};
        for (const auto& t : triples) {
            const StepSchedule schedule(t[0], t[1], t[2]);
            const double slack = schedule_worst_slack(schedule, 5000);
            require(slack >= 0.0, "schedule slack " + format_double(slack) + " for alpha0=" +
                                      format_double(t[0]) + ", beta0=" + format_double(t[1]) +
                                      ", a=" + format_double(t[2]));
            worst = std::min(worst, slack);
        }
        bool threw = false;
        try {
            StepSchedule bad(0.0, 0.5, 1.0);
        } catch (const ConfigError&) {
            threw = true;
        }
        require(threw, "alpha0 = 0 was accepted");
        threw = false;
        try {
            StepSchedule bad(1.0, 0.5, 0.5);
        } catch (const ConfigError&) {
            threw = true;
        }
        require(threw, "exponent 0.5 was accepted");
        return "worst slack " + format_double(worst) + " over 4 schedules, 5000 steps";
    });

    run_check(out, scope, "rate_recovery", []() {
        const std::vector<long> checkpoints = log_checkpoints(10, 100000, 25);
        for (double p : {0.5, 1.0, 2.0}) {
            std::vector<double> values;
            values.reserve(checkpoints.size());
            for (long n : checkpoints) {
                values.push_back(3.0 * std::pow(static_cast<double>(n), -p));
            }
            const RateFit fit = fit_rate(checkpoints, values, 100, 100000);
            require(std::abs(fit.slope + p) <= 1e-9,
                    "fitted slope " + format_double(fit.slope) + " for exponent " + format_double(p));
            require(fit.r_squared >= 1.0 - 1e-12, "power-law fit lost precision");
        }
        return "recovered exponents 0.5, 1, 2 to 1e-9";
    });

    run_check(out, scope, "divergence_guard", []() {
        TtsProblem problem;
        problem.dim_x = 1;
        problem.dim_y = 1;
        problem.f = [](const Eigen::VectorXd& x, const Eigen::VectorXd&, int, Eigen::VectorXd& out) {
            out(0) = 3.0 * x(0);
        };
        problem.g = [](const Eigen::VectorXd&, const Eigen::VectorXd& y, int, Eigen::VectorXd& out) {
            out(0) = 0.5 * y(0);
        };
        Rng rng = make_rng(7);
        bool caught = false;
        long step = -1;
        try {
            tts_run(
                problem, [](long) { return 1.0; },
                [](long n) { return 0.5 / static_cast<double>(n + 1); }, Eigen::VectorXd::Ones(1),
                Eigen::VectorXd::Ones(1), 0, 1000, {}, rng);
        } catch (const NonFiniteIterate& e) {
            caught = true;
            step = e.step;
        }
        require(caught, "an exponentially diverging run was not stopped");
        require(step >= 20 && step <= 30,
                "divergence flagged at step " + std::to_string(step) + ", expected around 25");
        return "divergence flagged at step " + std::to_string(step);
    });

    run_check(out, scope, "noise_free_standard_errors", []() {
        TtsProblem problem;
        problem.dim_x = 1;
        problem.dim_y = 1;
        problem.f = [](const Eigen::VectorXd& x, const Eigen::VectorXd& y, int, Eigen::VectorXd& out) {
            out(0) = 0.5 * x(0) + 0.25 * y(0);
        };
        problem.g = [](const Eigen::VectorXd& x, const Eigen::VectorXd& y, int, Eigen::VectorXd& out) {
            out(0) = 0.5 * y(0) + 0.25 * x(0);
        };
        FixedPointOracle oracle;
        oracle.x_star = Eigen::VectorXd::Zero(1);
        oracle.y_star = Eigen::VectorXd::Zero(1);
        oracle.x_star_of_y = [](const Eigen::VectorXd& y) {
            Eigen::VectorXd v(1);
            v(0) = 0.5 * y(0);
            return v;
        };
        RunOptions options;
        options.oracle = &oracle;
        const SummaryResult summary =
            run_replications(problem, StepSchedule(1.0, 0.5, 1.0), Eigen::VectorXd::Ones(1),
                             Eigen::VectorXd::Ones(1), 0, 300, {1, 10, 100, 300}, 4, 5, options);
        double worst = 0.0;
        for (std::size_t i = 0; i < summary.checkpoints.size(); ++i) {
            const double se = summary.se_err_x_sq[i];
            require(se <= 1e-12 * (1.0 + summary.mean_err_x_sq[i]),
                    "noise-free replications disagree (se " + format_double(se) + ")");
            worst = std::max(worst, se);
        }
        return "max standard error " + format_double(worst) + " across identical replications";
    });

    run_check(out, scope, "checkpoint_grid", []() {
        const std::vector<long> grid = log_checkpoints(10, 10000, 12);
        require(grid.front() == 10 && grid.back() == 10000, "grid endpoints are wrong");
        for (std::size_t i = 1; i < grid.size(); ++i) {
            require(grid[i] > grid[i - 1], "grid is not strictly increasing");
        }
        require(static_cast<int>(grid.size()) <= 12, "grid produced too many points");
        require(log_checkpoints(5, 5, 3) == std::vector<long>{5}, "degenerate grid is wrong");
        bool threw = false;
        try {
            log_checkpoints(100, 10, 5);
        } catch (const PropertyViolated&) {
            threw = true;
        }
        require(threw, "a reversed range was accepted");
        return std::to_string(grid.size()) + " log-spaced checkpoints over [10, 10000]";
    });

    run_check(out, scope, "fixed_point_solver", []() {
        TtsProblem problem;
        problem.dim_x = 1;
        problem.dim_y = 1;
        problem.f = [](const Eigen::VectorXd& x, const Eigen::VectorXd& y, int, Eigen::VectorXd& out) {
            out(0) = 0.5 * x(0) + 0.25 * y(0);
        };
        problem.g = [](const Eigen::VectorXd&, const Eigen::VectorXd& y, int, Eigen::VectorXd& out) {
            out(0) = y(0);
        };
        Eigen::VectorXd y(1);
        y(0) = 2.0;
        const Eigen::VectorXd x = solve_x_star(problem, y, 1e-12);
        require(std::abs(x(0) - 1.0) <= 1e-9,
                "fixed point solver returned " + format_double(x(0)) + ", expected 1");

        std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs;
        for (double a = -2.0; a <= 2.0; a += 0.5) {
            Eigen::VectorXd y1(1), y2(1);
            y1(0) = a;
            y2(0) = a + 0.25;
            pairs.emplace_back(y1, y2);
        }
        const LipschitzReport report = verify_xstar_lipschitz(problem, pairs, 0.25, 0.5, 1e-10);
        require(report.max_ratio <= report.bound + 1e-9, "tracking ratio exceeds the bound");
        return "solver and Lipschitz ratio agree (max ratio " + format_double(report.max_ratio) +
               " vs bound " + format_double(report.bound) + ")";
    });
}

// ---------------------------------------------------------------------------
// mdp_suite
// ---------------------------------------------------------------------------

void apply_truncated_operator(const MdpModel& model, int reference_state, const Eigen::VectorXd& q,
                              double rho, Eigen::VectorXd& out) {
    Eigen::VectorXd h(model.n_states);
    for (int j = 0; j < model.n_states; ++j) {
        double best = q(model.pair_index(j, 0));
        for (int v = 1; v < model.n_actions; ++v) best = std::min(best, q(model.pair_index(j, v)));
        h(j) = best;
    }
    out.resize(model.n_pairs());
    for (int i = 0; i < model.n_states; ++i) {
        for (int u = 0; u < model.n_actions; ++u) {
            const int z = model.pair_index(i, u);
            double acc = model.cost(i, u) - rho;
            for (int j = 0; j < model.n_states; ++j) {
                if (j == reference_state) continue;
                acc += model.trans(z, j) * h(j);
            }
            out(z) = acc;
        }
    }
}

void props_mdp(std::vector<PropertyResult>& out) {
    const std::string scope = "mdp_suite";
    const MdpModel model = garnet(4, 3, 2, 11);
    const int i0 = 0;

    run_check(out, scope, "oracle_invariants", [&]() {
        const AvgCostSolution solution = avgcost_oracle(model, i0);
        double pin = std::numeric_limits<double>::infinity();
        for (int v = 0; v < model.n_actions; ++v) {
            pin = std::min(pin, solution.q_star(model.pair_index(i0, v)));
        }
        require(std::abs(pin) <= 1e-8, "reference pin is " + format_double(pin));
        Eigen::VectorXd image;
        apply_truncated_operator(model, i0, solution.q_star, solution.rho_star, image);
        const double residual = (image - solution.q_star).cwiseAbs().maxCoeff();
        require(residual <= 1e-8, "Bellman residual " + format_double(residual));
        require(solution.rho_star >= model.cost.minCoeff() - 1e-9 &&
                    solution.rho_star <= model.cost.maxCoeff() + 1e-9,
                "optimal gain left the cost range");
        return "gain " + format_double(solution.rho_star) + ", Bellman residual " +
               format_double(residual);
    });

    run_check(out, scope, "root_function_shape", [&]() {
        const SecantEstimate secants = estimate_slow_secants(model, i0, 12);
        const Eigen::Index n = secants.rho_grid.size();
        double prev_slope = std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k + 1 < n; ++k) {
            const double slope = (secants.phi(k + 1) - secants.phi(k)) /
                                 (secants.rho_grid(k + 1) - secants.rho_grid(k));
            require(slope < 0.0, "the root function is not strictly decreasing");
            require(slope <= prev_slope + 1e-6 * (1.0 + std::abs(slope)),
                    "secant slopes increased; the root function is not concave");
            prev_slope = slope;
        }
        return "strictly decreasing and concave on a " + std::to_string(n) + "-point grid";
    });

    run_check(out, scope, "slow_relaxation_contracts", [&]() {
        const SspConfig config = make_ssp_config(model, i0);
        const SecantEstimate secants = estimate_slow_secants(model, i0, 20);
        require(config.beta_prime > 0.0, "relaxation gain is not positive");
        const double mu_bound =
            std::max(0.5, 1.0 - 0.5 * secants.min_abs_slope / secants.max_abs_slope);
        double mu_emp = 0.0;
        const Eigen::Index n = secants.rho_grid.size();
        for (Eigen::Index k = 0; k + 1 < n; ++k) {
            const double slope = (secants.phi(k + 1) - secants.phi(k)) /
                                 (secants.rho_grid(k + 1) - secants.rho_grid(k));
            mu_emp = std::max(mu_emp, std::abs(1.0 + config.beta_prime * slope));
        }
        require(mu_emp <= mu_bound + 1e-9, "empirical slow modulus " + format_double(mu_emp) +
                                               " exceeds the design bound " + format_double(mu_bound));
        require(mu_emp < 1.0, "slow relaxation does not contract");
        return "slow modulus " + format_double(mu_emp) + " <= bound " + format_double(mu_bound);
    });

    run_check(out, scope, "asynchronous_conservation", [&]() {
        const SspBundle bundle = make_ssp_problem(model, make_ssp_config(model, i0));
        Rng rng = make_rng(17);
        Eigen::VectorXd q(model.n_pairs()), rho(1), fx(model.n_pairs()), nx(model.n_pairs());
        for (int s = 0; s < 20; ++s) {
            for (int z = 0; z < model.n_pairs(); ++z) q(z) = uniform(rng, -2.0, 2.0);
            rho(0) = uniform(rng, -1.0, 3.0);
            for (int z = 0; z < model.n_pairs(); ++z) {
                bundle.problem.f(q, rho, z, fx);
                const int z_next = uniform_int(rng, model.n_pairs());
                bundle.problem.noise_x(q, rho, z, z_next, rng, nx);
                for (int w = 0; w < model.n_pairs(); ++w) {
                    if (w == z) continue;
                    require(fx(w) == q(w), "the fast map moved an unvisited coordinate");
                    require(nx(w) == 0.0, "the fast noise hit an unvisited coordinate");
                }
            }
        }
        return "only the visited coordinate moves (20 x " + std::to_string(model.n_pairs()) +
               " probes)";
    });

    run_check(out, scope, "noise_conditional_mean_zero", [&]() {
        const SspBundle bundle = make_ssp_problem(model, make_ssp_config(model, i0));
        const Eigen::MatrixXd& kernel = bundle.problem.chain.kernel();
        Rng rng = make_rng(19);
        Eigen::VectorXd q(model.n_pairs()), rho(1), nx(model.n_pairs());
        double worst = 0.0;
        for (int s = 0; s < 10; ++s) {
            for (int z = 0; z < model.n_pairs(); ++z) q(z) = uniform(rng, -2.0, 2.0);
            rho(0) = uniform(rng, -1.0, 3.0);
            for (int z = 0; z < model.n_pairs(); ++z) {
                double acc = 0.0;
                for (int z_next = 0; z_next < model.n_pairs(); ++z_next) {
                    if (kernel(z, z_next) == 0.0) continue;
                    bundle.problem.noise_x(q, rho, z, z_next, rng, nx);
                    acc += kernel(z, z_next) * nx(z);
                }
                worst = std::max(worst, std::abs(acc));
                require(std::abs(acc) <= 1e-10, "conditional noise mean " + format_double(acc));
            }
        }
        return "worst conditional mean " + format_double(worst) + " (exact enumeration)";
    });

    run_check(out, scope, "weighted_contraction", [&]() {
        const SspWeights weights = ssp_weights(model, i0);
        const NormSpec norm = NormSpec::weighted_max(weights.weights);
        Rng rng = make_rng(23);
        double worst = 0.0;
        Eigen::VectorXd q1(model.n_pairs()), q2(model.n_pairs()), t1, t2;
        for (int s = 0; s < 200; ++s) {
            for (int z = 0; z < model.n_pairs(); ++z) {
                q1(z) = uniform(rng, -3.0, 3.0);
                q2(z) = uniform(rng, -3.0, 3.0);
            }
            apply_truncated_operator(model, i0, q1, 0.0, t1);
            apply_truncated_operator(model, i0, q2, 0.0, t2);
            const double denom = norm(q1 - q2);
            if (denom <= 1e-12) continue;
            worst = std::max(worst, norm(t1 - t2) / denom);
        }
        require(worst <= weights.lambda0 + 1e-9,
                "empirical modulus " + format_double(worst) + " exceeds lambda0 " +
                    format_double(weights.lambda0));
        return "empirical modulus " + format_double(worst) + " <= lambda0 " +
               format_double(weights.lambda0);
    });

    run_check(out, scope, "discounted_consistency", [&]() {
        const double gamma = 0.8;
        const PolyakBundle bundle = make_polyak_problem(model, gamma);
        // Bellman residual of the reported fixed point.
        Eigen::VectorXd h(model.n_states);
        for (int j = 0; j < model.n_states; ++j) {
            double best = bundle.solution.q_star(model.pair_index(j, 0));
            for (int v = 1; v < model.n_actions; ++v) {
                best = std::min(best, bundle.solution.q_star(model.pair_index(j, v)));
            }
            h(j) = best;
        }
        double residual = 0.0;
        for (int i = 0; i < model.n_states; ++i) {
            for (int u = 0; u < model.n_actions; ++u) {
                const int z = model.pair_index(i, u);
                double acc = model.cost(i, u);
                for (int j = 0; j < model.n_states; ++j) acc += gamma * model.trans(z, j) * h(j);
                residual = std::max(residual, std::abs(acc - bundle.solution.q_star(z)));
            }
        }
        require(residual <= 1e-10, "discounted Bellman residual " + format_double(residual));

        // Averaged fast map fixes the solution.
        Eigen::VectorXd fb(model.n_pairs());
        f_bar(bundle.problem, bundle.solution.q_star, bundle.solution.q_star, fb);
        const double drift = (fb - bundle.solution.q_star).cwiseAbs().maxCoeff();
        require(drift <= 1e-9, "averaged fast map drift " + format_double(drift));

        // As the discount vanishes the solution approaches the one-stage costs.
        const DiscountedSolution tiny = discounted_oracle(model, 1e-9);
        double gap = 0.0;
        for (int i = 0; i < model.n_states; ++i) {
            for (int u = 0; u < model.n_actions; ++u) {
                gap = std::max(gap, std::abs(tiny.q_star(model.pair_index(i, u)) - model.cost(i, u)));
            }
        }
        require(gap <= 1e-8, "small-discount limit misses the costs by " + format_double(gap));
        return "Bellman residual " + format_double(residual) + ", averaged-map drift " +
               format_double(drift);
    });

    run_check(out, scope, "model_round_trip", [&]() {
        const std::string path = (props_tmp_dir() / "model_roundtrip.txt").string();
        save_mdp(path, model, i0);
        const MdpFile loaded = load_mdp(path);
        require(loaded.reference_state == i0, "reference state changed in the round trip");
        require((loaded.model.cost - model.cost).cwiseAbs().maxCoeff() == 0.0 &&
                    (loaded.model.trans - model.trans).cwiseAbs().maxCoeff() == 0.0 &&
                    (loaded.model.policy - model.policy).cwiseAbs().maxCoeff() == 0.0,
                "model matrices changed in the round trip");
        return "cost, transition, and policy matrices survive a file round trip bitwise";
    });

    run_check(out, scope, "rejects_invalid_input", [&]() {
        bool threw = false;
        try {
            discounted_oracle(model, 1.5);
        } catch (const ConfigError&) {
            threw = true;
        }
        require(threw, "a discount factor above one was accepted");

        // A trap state that never reaches the reference state.
        MdpModel trap;
        trap.n_states = 2;
        trap.n_actions = 1;
        trap.cost = Eigen::MatrixXd::Ones(2, 1);
        trap.trans = Eigen::MatrixXd(2, 2);
        trap.trans << 0.0, 1.0, 0.0, 1.0;
        trap.policy = Eigen::MatrixXd::Ones(2, 1);
        threw = false;
        try {
            ssp_weights(trap, 0);
        } catch (const Unreachable&) {
            threw = true;
        }
        require(threw, "an unreachable reference state was accepted");

        MdpModel bad = model;
        bad.policy(0, 0) = 0.0;
        bad.policy(0, 1) += model.policy(0, 0);
        threw = false;
        try {
            validate_model(bad);
        } catch (const PropertyViolated&) {
            threw = true;
        }
        require(threw, "a policy with a zero sampling probability was accepted");
        return "rejected bad discount, unreachable reference, and degenerate policy";
    });
}

// ---------------------------------------------------------------------------
// game_suite
// ---------------------------------------------------------------------------

void props_game(std::vector<PropertyResult>& out) {
    const std::string scope = "game_suite";
    const double nan = std::numeric_limits<double>::quiet_NaN();

    run_check(out, scope, "kkt_residuals", []() {
        double worst = 0.0;
        for (std::uint64_t seed = 1; seed <= 8; ++seed) {
            const GameSpec game = random_game(3, 2, 2, seed);
            const KktSolution kkt = kkt_oracle(game);
            worst = std::max(worst, std::max(kkt.stationarity_residual, kkt.feasibility_residual));
        }
        require(worst <= 1e-10, "KKT residual " + format_double(worst));
        return "max KKT residual " + format_double(worst) + " over 8 games";
    });

    run_check(out, scope, "distributed_update_agreement", [&]() {
        const GameSpec game = random_game(3, 2, 2, 4);
        const GneBundle bundle = make_gne_problem(game, 0.0, nan, nan);
        Rng rng = make_rng(31);
        Eigen::VectorXd x(game.dim()), y(game.n_constraints()), stacked(game.dim());
        for (int s = 0; s < 50; ++s) {
            for (int j = 0; j < game.dim(); ++j) x(j) = uniform(rng, -3.0, 3.0);
            for (int j = 0; j < game.n_constraints(); ++j) y(j) = uniform(rng, -3.0, 3.0);
            bundle.problem.f(x, y, 0, stacked);
            for (int player = 0; player < game.n_players; ++player) {
                const Eigen::VectorXd block = player_update(game, bundle.alpha_prime, player, x, y);
                for (int r = 0; r < game.action_dim; ++r) {
                    require(stacked(player * game.action_dim + r) == block(r),
                            "stacked and per-player updates differ at player " +
                                std::to_string(player));
                }
            }
        }
        return "stacked map equals the per-player updates bitwise (50 probes)";
    });

    run_check(out, scope, "monotonicity_witness", []() {
        const GameSpec game = random_game(3, 2, 2, 5);
        Rng rng = make_rng(37);
        double worst = std::numeric_limits<double>::infinity();
        for (int s = 0; s < 100; ++s) {
            Eigen::VectorXd x1(game.dim()), x2(game.dim());
            for (int j = 0; j < game.dim(); ++j) {
                x1(j) = uniform(rng, -4.0, 4.0);
                x2(j) = uniform(rng, -4.0, 4.0);
            }
            const Eigen::VectorXd diff = x1 - x2;
            const double inner = diff.dot(game.pseudogradient(x1) - game.pseudogradient(x2));
            const double slack = -game.lambda0 * diff.squaredNorm() - inner;
            require(slack >= -1e-9, "monotonicity violated by " + format_double(-slack));
            worst = std::min(worst, slack);
        }
        return "min monotonicity slack " + format_double(worst);
    });

    run_check(out, scope, "contraction_bounds", [&]() {
        const GameSpec game = random_game(3, 2, 2, 6);
        const GneBundle bundle = make_gne_problem(game, 0.0, nan, nan);
        Rng rng = make_rng(41);
        Eigen::VectorXd y_fixed(game.n_constraints());
        for (int j = 0; j < game.n_constraints(); ++j) y_fixed(j) = uniform(rng, -1.0, 1.0);

        const auto fast_map = [&](const Eigen::VectorXd& v) {
            Eigen::VectorXd out(game.dim());
            bundle.problem.f(v, y_fixed, 0, out);
            return out;
        };
        const double fast = verify_contraction(fast_map, NormSpec::euclidean(), game.dim(), 200, 3.0, rng);
        require(fast <= bundle.problem.lambda + 1e-9,
                "fast modulus " + format_double(fast) + " exceeds " +
                    format_double(bundle.problem.lambda));

        const auto slow_map = [&](const Eigen::VectorXd& y) {
            const Eigen::VectorXd xs = bundle.oracle.x_star_of_y(y);
            return (y + bundle.beta_prime * (game.a * xs - game.b)).eval();
        };
        const double slow = verify_contraction(slow_map, NormSpec::euclidean(),
                                               game.n_constraints(), 200, 3.0, rng);
        require(slow <= bundle.problem.mu + 1e-9,
                "slow modulus " + format_double(slow) + " exceeds " +
                    format_double(bundle.problem.mu));
        return "fast " + format_double(fast) + " <= " + format_double(bundle.problem.lambda) +
               ", slow " + format_double(slow) + " <= " + format_double(bundle.problem.mu);
    });

    run_check(out, scope, "tracking_solution_agreement", [&]() {
        const GameSpec game = random_game(3, 2, 2, 7);
        const GneBundle bundle = make_gne_problem(game, 0.0, nan, nan);
        Rng rng = make_rng(43);
        double worst = 0.0;
        for (int s = 0; s < 10; ++s) {
            Eigen::VectorXd y(game.n_constraints());
            for (int j = 0; j < game.n_constraints(); ++j) y(j) = uniform(rng, -2.0, 2.0);
            const Eigen::VectorXd direct = bundle.oracle.x_star_of_y(y);
            const Eigen::VectorXd iterative = solve_x_star(bundle.problem, y, 1e-12);
            worst = std::max(worst, (direct - iterative).norm());
        }
        require(worst <= 1e-8, "linear solve and damped iteration disagree by " +
                                   format_double(worst));
        const double at_star = (bundle.oracle.x_star_of_y(bundle.oracle.y_star) -
                                bundle.oracle.x_star)
                                   .norm();
        require(at_star <= 1e-9, "tracking solution misses the equilibrium by " +
                                     format_double(at_star));
        return "max disagreement " + format_double(worst) + " over 10 multipliers";
    });

    run_check(out, scope, "noise_radius", [&]() {
        const GameSpec game = random_game(3, 2, 2, 8);
        const double noise_scale = 0.7;
        const GneBundle bundle = make_gne_problem(game, noise_scale, nan, nan);
        Rng rng = make_rng(47);
        Eigen::VectorXd x = Eigen::VectorXd::Zero(game.dim());
        Eigen::VectorXd y = Eigen::VectorXd::Zero(game.n_constraints());
        Eigen::VectorXd nx(game.dim()), ny(game.n_constraints());
        double worst = 0.0;
        for (int s = 0; s < 50; ++s) {
            bundle.problem.noise_x(x, y, 0, 0, rng, nx);
            bundle.problem.noise_y(x, y, 0, 0, rng, ny);
            worst = std::max(worst, std::abs(nx.norm() - bundle.alpha_prime * noise_scale));
            worst = std::max(worst, std::abs(ny.norm() - bundle.beta_prime * noise_scale));
        }
        require(worst <= 1e-9, "noise radius error " + format_double(worst));
        return "noise stays on spheres of radii alpha'*scale and beta'*scale (error " +
               format_double(worst) + ")";
    });

    run_check(out, scope, "equilibrium_is_stationary", [&]() {
        const GameSpec game = random_game(3, 2, 2, 9);
        const GneBundle bundle = make_gne_problem(game, 0.0, nan, nan);
        Rng rng = make_rng(53);
        const ReplicationResult result =
            tts_run(bundle.problem, StepSchedule(0.9, 0.45, 1.0), bundle.kkt.x_star,
                    bundle.kkt.y_star, 0, 2000, {}, rng);
        const double drift_x = (result.final_x - bundle.kkt.x_star).norm();
        const double drift_y = (result.final_y - bundle.kkt.y_star).norm();
        require(drift_x <= 1e-8 && drift_y <= 1e-8,
                "noiseless run drifted from the equilibrium by " +
                    format_double(std::max(drift_x, drift_y)));
        return "2000 noiseless steps stay within " +
               format_double(std::max(drift_x, drift_y)) + " of the equilibrium";
    });

    run_check(out, scope, "game_round_trip", [&]() {
        const GameSpec game = random_game(3, 2, 2, 10);
        const std::string path = (props_tmp_dir() / "game_roundtrip.txt").string();
        save_game(path, game);
        const GameSpec loaded = load_game(path);
        require((loaded.m - game.m).cwiseAbs().maxCoeff() == 0.0 &&
                    (loaded.c - game.c).cwiseAbs().maxCoeff() == 0.0 &&
                    (loaded.a - game.a).cwiseAbs().maxCoeff() == 0.0 &&
                    (loaded.b - game.b).cwiseAbs().maxCoeff() == 0.0,
                "game matrices changed in the round trip");
        require(std::abs(loaded.lambda0 - game.lambda0) <= 1e-12 &&
                    std::abs(loaded.ell - game.ell) <= 1e-12,
                "re-measured game constants moved");
        return "game matrices survive a file round trip bitwise";
    });

    run_check(out, scope, "rejects_invalid_input", []() {
        bool threw = false;
        try {
            GameSpec::create(1, 2, -Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2),
                             Eigen::MatrixXd::Ones(1, 2), Eigen::VectorXd::Zero(1));
        } catch (const PropertyViolated&) {
            threw = true;
        }
        require(threw, "an indefinite interaction matrix was accepted");

        threw = false;
        try {
            Eigen::MatrixXd a(2, 2);
            a << 1.0, 1.0, 1.0, 1.0;  // rank one
            GameSpec::create(1, 2, Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2), a,
                             Eigen::VectorXd::Zero(2));
        } catch (const PropertyViolated&) {
            threw = true;
        }
        require(threw, "a rank-deficient constraint matrix was accepted");
        return "rejected indefinite interaction and rank-deficient constraints";
    });
}

// ---------------------------------------------------------------------------
// cli_harness
// ---------------------------------------------------------------------------

void props_cli(std::vector<PropertyResult>& out) {
    const std::string scope = "cli_harness";

    run_check(out, scope, "canonical_config_fixed_point", []() {
        const std::string text =
            "[problem]\n"
            "type = ssp\n"
            "states = 3\n"
            "actions = 2\n"
            "generator_seed = 12\n"
            "[schedule]\n"
            "exponent_a = 1\n"
            "[run]\n"
            "horizon = 200000\n"
            "n_reps = 100\n";
        const ExperimentConfig first = parse_config_text(text);
        const ExperimentConfig second = parse_config_text(first.canonical_text);
        require(first.canonical_text == second.canonical_text,
                "the canonical form is not a parser fixed point");
        require(first.hash == second.hash && first.hash == fnv1a64(first.canonical_text),
                "the config hash is not reproducible");
        ExperimentConfig changed = parse_config_text(text + "base_seed = 999\n");
        require(changed.hash != first.hash, "different configs share a hash");
        return "canonical form is a parser fixed point; hash " + to_hex(first.hash);
    });

    run_check(out, scope, "hash_test_vectors", []() {
        require(fnv1a64("") == 0xcbf29ce484222325ULL, "empty-string hash is wrong");
        require(fnv1a64("a") == 0xaf63dc4c8601ec8cULL, "single-byte hash is wrong");
        require(to_hex(0) == "0000000000000000", "hex formatting does not zero-pad");
        require(to_hex(0xcbf29ce484222325ULL) == "cbf29ce484222325", "hex formatting is wrong");
        return "FNV-1a test vectors and hex formatting check out";
    });

    run_check(out, scope, "float_format_round_trip", []() {
        const double values[] = {0.0,     0.1,          1.0 / 3.0,     1e-300,
                                 5e-324,  -123456.789,  6.02214076e23, 1.7976931348623157e308,
                                 -0.0625, 3.141592653589793};
        for (double v : values) {
            const std::string text = format_double(v);
            const double back = std::strtod(text.c_str(), nullptr);
            require(back == v, "value " + text + " does not round trip");
        }
        return "17-significant-digit formatting round trips exactly";
    });

    run_check(out, scope, "rejects_invalid_configs", []() {
        const auto expect_reject = [](const std::string& text, const std::string& needle) {
            try {
                parse_config_text(text);
            } catch (const ConfigError& e) {
                require(std::string(e.what()).find(needle) != std::string::npos,
                        std::string("error message does not mention '") + needle + "': " + e.what());
                return;
            }
            throw PropertyViolated("config mentioning '" + needle + "' was accepted");
        };
        expect_reject("[problem]\ntype = generic\nbogus = 1\n", "bogus");
        expect_reject("[problem]\ntype = generic\n[schedule]\nexponent_a = 0.4\n", "exponent_a");
        expect_reject("[problem]\ntype = generic\n[run]\nhorizon = 10\n", "horizon");
        expect_reject("[problem]\ntype = generic\n[run]\nn_reps = 0\n", "n_reps");
        expect_reject("[problem]\ntype = frobnicate\n", "type");
        expect_reject("[misc]\nx = 1\n", "misc");
        return "unknown keys, bad ranges, and unknown sections are all rejected by name";
    });

    run_check(out, scope, "run_output_determinism", []() {
        const std::string dir = (props_tmp_dir() / "run_det").string();
        const std::string text =
            "[problem]\n"
            "type = generic\n"
            "noise_scale = 0.5\n"
            "[schedule]\n"
            "exponent_a = 1\n"
            "[run]\n"
            "horizon = 1000\n"
            "n_reps = 2\n"
            "checkpoint_count = 8\n"
            "write_trajectory = false\n"
            "output_dir = " +
            dir + "\n";
        const ExperimentConfig config = parse_config_text(text);
        const RunReport first = run_experiment(config);
        const std::string bytes_first = slurp_file(first.summary_csv);
        const RunReport second = run_experiment(config);
        const std::string bytes_second = slurp_file(second.summary_csv);
        require(!bytes_first.empty() && bytes_first == bytes_second,
                "two runs of one config wrote different summary bytes");
        return "summary CSV is byte-identical across two runs (" +
               std::to_string(bytes_first.size()) + " bytes)";
    });

    run_check(out, scope, "rate_report_round_trip", []() {
        const std::string path = (props_tmp_dir() / "synthetic_summary.csv").string();
        std::ofstream file(path, std::ios::binary);
        require(static_cast<bool>(file), "cannot write the synthetic summary");
        file << "# config_hash=0000000000000000 base_seed=0\n";
        file << "n,mean_err_x_sq,se_x,mean_err_y_sq,se_y\n";
        for (long n : log_checkpoints(10, 100000, 20)) {
            const double vx = 2.0 / static_cast<double>(n);
            const double vy = 5.0 / (static_cast<double>(n) * static_cast<double>(n));
            file << n << ',' << format_double(vx) << ",0," << format_double(vy) << ",0\n";
        }
        file.close();
        const RateReport report = rate_report(path, 100, 100000);
        require(std::abs(report.rate_x.slope + 1.0) <= 1e-9,
                "x-series slope " + format_double(report.rate_x.slope) + ", expected -1");
        require(std::abs(report.rate_y.slope + 2.0) <= 1e-9,
                "y-series slope " + format_double(report.rate_y.slope) + ", expected -2");
        return "recovered slopes -1 and -2 from a written summary file";
    });
}

}  // namespace

std::vector<std::string> property_scopes() {
    return {"markov_chain", "geometry", "tts_engine", "mdp_suite", "game_suite", "cli_harness"};
}

std::vector<PropertyResult> run_property_suite(const std::string& scope) {
    const std::vector<std::string> scopes = property_scopes();
    if (!scope.empty() && scope != "all" &&
        std::find(scopes.begin(), scopes.end(), scope) == scopes.end()) {
        throw ConfigError("unknown property scope '" + scope + "'");
    }
    const auto want = [&](const char* name) {
        return scope.empty() || scope == "all" || scope == name;
    };
    std::vector<PropertyResult> out;
    if (want("markov_chain")) props_markov(out);
    if (want("geometry")) props_geometry(out);
    if (want("tts_engine")) props_engine(out);
    if (want("mdp_suite")) props_mdp(out);
    if (want("game_suite")) props_game(out);
    if (want("cli_harness")) props_cli(out);
    return out;
}

}  // namespace ttsa
