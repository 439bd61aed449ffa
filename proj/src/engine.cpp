#include "ttsa/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <set>
#include <thread>

#include "ttsa/csv.hpp"
#include "ttsa/errors.hpp"

namespace ttsa {

namespace {

void validate_problem(const TtsProblem& problem) {
    if (problem.dim_x <= 0 || problem.dim_y <= 0) {
        throw DimensionMismatch("problem dimensions must be positive");
    }
    if (!problem.f || !problem.g) {
        throw PropertyViolated("problem must define both mean maps");
    }
    if (problem.slow_noiseless && problem.noise_y) {
        throw PropertyViolated("a noiseless-slow problem cannot carry slow noise");
    }
}

void validate_checkpoints(const std::vector<long>& checkpoints, long horizon) {
    long prev = -1;
    for (const long cp : checkpoints) {
        if (cp <= prev) throw PropertyViolated("checkpoints must be strictly increasing");
        if (cp < 0 || cp > horizon) {
            throw PropertyViolated("checkpoint " + std::to_string(cp) +
                                   " outside [0, " + std::to_string(horizon) + "]");
        }
        prev = cp;
    }
}

}  // namespace

void f_bar(const TtsProblem& problem, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
           Eigen::VectorXd& out) {
    const Eigen::VectorXd& pi = problem.chain.stationary_distribution();
    const int n = problem.chain.n_states();
    out.setZero(problem.dim_x);
    Eigen::VectorXd tmp(problem.dim_x);
    for (int i = 0; i < n; ++i) {
        problem.f(x, y, i, tmp);
        out += pi(i) * tmp;
    }
}

void g_bar(const TtsProblem& problem, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
           Eigen::VectorXd& out) {
    const Eigen::VectorXd& pi = problem.chain.stationary_distribution();
    const int n = problem.chain.n_states();
    out.setZero(problem.dim_y);
    Eigen::VectorXd tmp(problem.dim_y);
    for (int i = 0; i < n; ++i) {
        problem.g(x, y, i, tmp);
        out += pi(i) * tmp;
    }
}

ReplicationResult tts_run(const TtsProblem& problem, const std::function<double(long)>& alpha,
                          const std::function<double(long)>& beta, const Eigen::VectorXd& x0,
                          const Eigen::VectorXd& y0, int z0, long horizon,
                          const std::vector<long>& checkpoints, Rng& rng,
                          const RunOptions& options) {
    validate_problem(problem);
    if (x0.size() != problem.dim_x || y0.size() != problem.dim_y) {
        throw DimensionMismatch("initial condition does not match problem dimensions");
    }
    if (z0 < 0 || z0 >= problem.chain.n_states()) {
        throw DimensionMismatch("initial chain state out of range");
    }
    if (horizon < 0) throw PropertyViolated("horizon must be nonnegative");
    validate_checkpoints(checkpoints, horizon);
    if ((options.env_x == nullptr) != (options.env_y == nullptr)) {
        throw PropertyViolated("Lyapunov envelopes must be supplied as a pair");
    }
    if (options.env_x != nullptr && options.oracle == nullptr) {
        throw PropertyViolated("the Lyapunov series needs the fixed-point oracle");
    }

    ReplicationResult result;
    result.checkpoints = checkpoints;
    const size_t n_cp = checkpoints.size();
    if (options.oracle != nullptr) {
        result.err_x_sq.reserve(n_cp);
        result.err_y_sq.reserve(n_cp);
        result.err_track_sq.reserve(n_cp);
        if (options.env_x != nullptr) result.lyapunov.reserve(n_cp);
    }
    if (problem.extra_metric) result.extra.reserve(n_cp);

    Eigen::VectorXd x = x0;
    Eigen::VectorXd y = y0;
    int z = z0;
    Eigen::VectorXd fx(problem.dim_x);
    Eigen::VectorXd gy(problem.dim_y);
    Eigen::VectorXd mx = Eigen::VectorXd::Zero(problem.dim_x);
    Eigen::VectorXd my = Eigen::VectorXd::Zero(problem.dim_y);
    Eigen::VectorXd diff_x(problem.dim_x);
    Eigen::VectorXd diff_y(problem.dim_y);

    const bool use_noise_y = !problem.slow_noiseless && static_cast<bool>(problem.noise_y);
    const double bound = options.divergence_bound;

    const auto record = [&](long n) {
        (void)n;
        if (options.oracle != nullptr) {
            diff_x = x;
            diff_x -= options.oracle->x_star;
            const double ex = problem.norm_x(diff_x);
            result.err_x_sq.push_back(ex * ex);
            diff_y = y;
            diff_y -= options.oracle->y_star;
            const double ey = problem.norm_y(diff_y);
            result.err_y_sq.push_back(ey * ey);
            const Eigen::VectorXd x_target = options.oracle->x_star_of_y(y);
            diff_x = x;
            diff_x -= x_target;
            const double et = problem.norm_x(diff_x);
            result.err_track_sq.push_back(et * et);
            if (options.env_x != nullptr) {
                result.lyapunov.push_back(options.env_x->eval(diff_x).value +
                                          options.env_y->eval(diff_y).value);
            }
        }
        if (problem.extra_metric) result.extra.push_back(problem.extra_metric(x, y));
        if (options.trajectory != nullptr) {
            options.trajectory->steps.push_back(n);
            options.trajectory->x.push_back(x);
            options.trajectory->y.push_back(y);
        }
    };

    size_t cp = 0;
    for (long n = 0;; ++n) {
        if (cp < n_cp && checkpoints[cp] == n) {
            record(n);
            ++cp;
        }
        if (n == horizon) break;

        const double a_n = alpha(n);
        const double b_n = beta(n);
        const int z_next = problem.chain.sample_step(z, rng);
        problem.f(x, y, z, fx);
        problem.g(x, y, z, gy);
        if (problem.noise_x) problem.noise_x(x, y, z, z_next, rng, mx);
        if (use_noise_y) problem.noise_y(x, y, z, z_next, rng, my);
        x += a_n * (fx - x + mx);
        y += b_n * (gy - y + my);
        if (!x.allFinite() || !y.allFinite() ||
            x.cwiseAbs().maxCoeff() > bound || y.cwiseAbs().maxCoeff() > bound) {
            throw NonFiniteIterate("iterate left the finite range |.| <= " +
                                       format_double(bound) + " at step " + std::to_string(n),
                                   n);
        }
        z = z_next;
    }

    result.final_x = std::move(x);
    result.final_y = std::move(y);
    result.final_z = z;
    return result;
}

ReplicationResult tts_run(const TtsProblem& problem, const StepSchedule& schedule,
                          const Eigen::VectorXd& x0, const Eigen::VectorXd& y0, int z0,
                          long horizon, const std::vector<long>& checkpoints, Rng& rng,
                          const RunOptions& options) {
    return tts_run(
        problem, [&schedule](long n) { return schedule.alpha(n); },
        [&schedule](long n) { return schedule.beta(n); }, x0, y0, z0, horizon, checkpoints, rng,
        options);
}

std::vector<ReplicationResult> run_replications_raw(const TtsProblem& problem,
                                                    const StepSchedule& schedule,
                                                    const Eigen::VectorXd& x0,
                                                    const Eigen::VectorXd& y0, int z0,
                                                    long horizon,
                                                    const std::vector<long>& checkpoints,
                                                    int n_reps, std::uint64_t base_seed,
                                                    const RunOptions& options) {
    if (n_reps < 1) throw ConfigError("n_reps must be at least 1");
    std::vector<ReplicationResult> results(static_cast<size_t>(n_reps));
    std::vector<std::exception_ptr> failures(static_cast<size_t>(n_reps));
    RunOptions rep_options = options;
    rep_options.trajectory = nullptr;  // a shared capture buffer would race

    std::atomic<int> next{0};
    const auto worker = [&]() {
        for (;;) {
            const int r = next.fetch_add(1);
            if (r >= n_reps) return;
            const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(r);
            try {
                Rng rng = make_rng(seed);
                results[static_cast<size_t>(r)] = tts_run(problem, schedule, x0, y0, z0, horizon,
                                                          checkpoints, rng, rep_options);
                results[static_cast<size_t>(r)].seed = seed;
            } catch (const NonFiniteIterate& e) {
                failures[static_cast<size_t>(r)] = std::make_exception_ptr(NonFiniteIterate(
                    std::string(e.what()) + " (replication " + std::to_string(r) + ", seed " +
                        std::to_string(seed) + ")",
                    e.step));
            } catch (...) {
                failures[static_cast<size_t>(r)] = std::current_exception();
            }
        }
    };

    unsigned hardware = std::thread::hardware_concurrency();
    if (hardware == 0) hardware = 1;
    const int n_threads =
        std::max(1, std::min({static_cast<int>(hardware), n_reps, 8}));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(n_threads));
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& thread : pool) thread.join();
    }
    // First failing replication (in replication order, not completion order) wins.
    for (auto& failure : failures) {
        if (failure) std::rethrow_exception(failure);
    }
    return results;
}

SummaryResult summarize(const std::vector<ReplicationResult>& reps, std::uint64_t base_seed) {
    if (reps.empty()) throw ConfigError("cannot summarize zero replications");
    SummaryResult summary;
    summary.n_reps = static_cast<int>(reps.size());
    summary.base_seed = base_seed;
    summary.checkpoints = reps.front().checkpoints;
    const size_t n_cp = summary.checkpoints.size();
    for (const auto& rep : reps) {
        if (rep.checkpoints != summary.checkpoints) {
            throw DimensionMismatch("replications disagree on checkpoints");
        }
    }

    const auto reduce = [&](const auto& series_of, std::vector<double>& means,
                            std::vector<double>* ses) {
        if (series_of(reps.front()).empty()) return;
        const double r_count = static_cast<double>(reps.size());
        means.resize(n_cp);
        if (ses != nullptr) ses->resize(n_cp);
        for (size_t k = 0; k < n_cp; ++k) {
            double sum = 0.0;
            for (const auto& rep : reps) sum += series_of(rep)[k];
            const double mean = sum / r_count;
            means[k] = mean;
            if (ses == nullptr) continue;
            double sq = 0.0;
            for (const auto& rep : reps) {
                const double d = series_of(rep)[k] - mean;
                sq += d * d;
            }
            (*ses)[k] = reps.size() < 2
                            ? 0.0
                            : std::sqrt(sq / ((r_count - 1.0) * r_count));
        }
    };

    reduce([](const ReplicationResult& r) -> const std::vector<double>& { return r.err_x_sq; },
           summary.mean_err_x_sq, &summary.se_err_x_sq);
    reduce([](const ReplicationResult& r) -> const std::vector<double>& { return r.err_y_sq; },
           summary.mean_err_y_sq, &summary.se_err_y_sq);
    reduce(
        [](const ReplicationResult& r) -> const std::vector<double>& { return r.err_track_sq; },
        summary.mean_err_track_sq, &summary.se_err_track_sq);
    reduce([](const ReplicationResult& r) -> const std::vector<double>& { return r.extra; },
           summary.mean_extra, &summary.se_extra);
    reduce([](const ReplicationResult& r) -> const std::vector<double>& { return r.lyapunov; },
           summary.mean_lyapunov, nullptr);
    return summary;
}

SummaryResult run_replications(const TtsProblem& problem, const StepSchedule& schedule,
                               const Eigen::VectorXd& x0, const Eigen::VectorXd& y0, int z0,
                               long horizon, const std::vector<long>& checkpoints, int n_reps,
                               std::uint64_t base_seed, const RunOptions& options) {
    return summarize(run_replications_raw(problem, schedule, x0, y0, z0, horizon, checkpoints,
                                          n_reps, base_seed, options),
                     base_seed);
}

std::vector<long> log_checkpoints(long lo, long hi, int count) {
    if (lo < 1 || hi < lo) throw PropertyViolated("need 1 <= lo <= hi for log checkpoints");
    if (count < 1) throw PropertyViolated("need at least one checkpoint");
    std::set<long> grid;
    if (count == 1 || lo == hi) {
        grid.insert(hi);
    } else {
        const double log_lo = std::log(static_cast<double>(lo));
        const double log_hi = std::log(static_cast<double>(hi));
        for (int i = 0; i < count; ++i) {
            const double t = static_cast<double>(i) / static_cast<double>(count - 1);
            const double v = std::exp(log_lo + t * (log_hi - log_lo));
            const long n = std::clamp(static_cast<long>(std::llround(v)), lo, hi);
            grid.insert(n);
        }
    }
    return std::vector<long>(grid.begin(), grid.end());
}

RateFit fit_rate(const std::vector<long>& checkpoints, const std::vector<double>& values,
                 long n_lo, long n_hi) {
    if (checkpoints.size() != values.size()) {
        throw DimensionMismatch("checkpoint and value series differ in length");
    }
    std::vector<double> xs, ys;
    for (size_t i = 0; i < checkpoints.size(); ++i) {
        const long n = checkpoints[i];
        if (n < n_lo || n > n_hi) continue;
        if (n <= 0) throw NonPositiveValue("checkpoint index must be positive inside the window");
        const double v = values[i];
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw NonPositiveValue("value " + format_double(v) + " at checkpoint " +
                                   std::to_string(n) + " is not strictly positive");
        }
        xs.push_back(std::log(static_cast<double>(n)));
        ys.push_back(std::log(v));
    }
    if (xs.size() < 5) {
        throw InsufficientPoints("window [" + std::to_string(n_lo) + ", " + std::to_string(n_hi) +
                                 "] holds " + std::to_string(xs.size()) +
                                 " checkpoints; the fit needs 5");
    }
    const double n_points = static_cast<double>(xs.size());
    double mean_x = 0.0, mean_y = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        mean_x += xs[i];
        mean_y += ys[i];
    }
    mean_x /= n_points;
    mean_y /= n_points;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mean_x;
        const double dy = ys[i] - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx <= 0.0) throw InsufficientPoints("window checkpoints are not distinct");

    RateFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = mean_y - fit.slope * mean_x;
    double ss_res = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
        ss_res += r * r;
    }
    fit.r_squared = syy <= 1e-30 ? 1.0 : std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
    fit.n_lo = n_lo;
    fit.n_hi = n_hi;
    return fit;
}

Eigen::VectorXd solve_x_star(const TtsProblem& problem, const Eigen::VectorXd& y, double tol) {
    validate_problem(problem);
    if (y.size() != problem.dim_y) throw DimensionMismatch("y does not match dim_y");
    if (!(tol > 0.0)) throw PropertyViolated("tolerance must be positive");

    Eigen::VectorXd x = Eigen::VectorXd::Zero(problem.dim_x);
    Eigen::VectorXd fb(problem.dim_x);
    Eigen::VectorXd diff(problem.dim_x);
    double prev_delta = std::numeric_limits<double>::infinity();
    int expand_streak = 0;
    const long budget = 2000000;
    for (long it = 0; it < budget; ++it) {
        f_bar(problem, x, y, fb);
        diff = fb;
        diff -= x;
        const double delta = problem.norm_x(diff);
        if (delta <= tol) return x;  // delta is the fixed-point residual at x
        if (!std::isfinite(delta)) {
            throw NotContracting("fixed-point iteration produced a non-finite iterate");
        }
        if (delta >= prev_delta * (1.0 - 1e-12)) {
            if (++expand_streak >= 200) {
                throw NotContracting("fixed-point residual stopped decreasing at " +
                                     format_double(delta));
            }
        } else {
            expand_streak = 0;
        }
        prev_delta = delta;
        x = fb;
    }
    throw NoConvergence("fixed-point solve exhausted its iteration budget");
}

double verify_contraction(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& map,
                          const NormSpec& norm,
                          const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& pairs) {
    double worst = 0.0;
    for (const auto& [a, b] : pairs) {
        const double denom = norm(a - b);
        if (denom <= 1e-15) continue;
        worst = std::max(worst, norm(map(a) - map(b)) / denom);
    }
    return worst;
}

double verify_contraction(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& map,
                          const NormSpec& norm, int dim, int n_pairs, double scale, Rng& rng) {
    std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs;
    pairs.reserve(static_cast<size_t>(n_pairs));
    for (int i = 0; i < n_pairs; ++i) {
        Eigen::VectorXd a(dim), b(dim);
        for (int j = 0; j < dim; ++j) {
            a(j) = uniform(rng, -scale, scale);
            b(j) = uniform(rng, -scale, scale);
        }
        pairs.emplace_back(std::move(a), std::move(b));
    }
    return verify_contraction(map, norm, pairs);
}

LipschitzReport verify_xstar_lipschitz(
    const TtsProblem& problem,
    const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& y_pairs, double L,
    double lambda, double tol) {
    if (!(lambda < 1.0)) throw PropertyViolated("contraction factor must be below 1");
    LipschitzReport report;
    report.bound = L / (1.0 - lambda);
    report.pairs = static_cast<int>(y_pairs.size());
    for (const auto& [ya, yb] : y_pairs) {
        const Eigen::VectorXd xa = solve_x_star(problem, ya, tol);
        const Eigen::VectorXd xb = solve_x_star(problem, yb, tol);
        const double dx = problem.norm_x(xa - xb);
        const double dy = problem.norm_y(ya - yb);
        if (dx > report.bound * dy + 2.0 * tol) {
            throw PropertyViolated("x*(y) moved by " + format_double(dx) + " for a slow move of " +
                                   format_double(dy) + ", above the bound " +
                                   format_double(report.bound));
        }
        if (dy > 1e-15) report.max_ratio = std::max(report.max_ratio, dx / dy);
    }
    return report;
}

std::vector<double> lyapunov_trace(const TtsProblem& problem, const FixedPointOracle& oracle,
                                   const MoreauEnvelope& env_x, const MoreauEnvelope& env_y,
                                   const Trajectory& trajectory) {
    (void)problem;
    std::vector<double> values;
    values.reserve(trajectory.steps.size());
    for (size_t i = 0; i < trajectory.steps.size(); ++i) {
        const Eigen::VectorXd x_target = oracle.x_star_of_y(trajectory.y[i]);
        values.push_back(env_x.eval(trajectory.x[i] - x_target).value +
                         env_y.eval(trajectory.y[i] - oracle.y_star).value);
    }
    return values;
}

}  // namespace ttsa
