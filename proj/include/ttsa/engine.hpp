#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ttsa/geometry.hpp"
#include "ttsa/markov_chain.hpp"
#include "ttsa/rng.hpp"
#include "ttsa/schedule.hpp"

namespace ttsa {

/// Mean map evaluated at one chain state; writes into a caller-owned buffer
/// sized dim_x (fast) or dim_y (slow). Out-parameters keep the per-step loop
/// allocation-free.
using MapFn = std::function<void(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                 int z, Eigen::VectorXd& out)>;

/// Martingale-difference noise. Receives the state pair, the current chain
/// state, the already-sampled next chain state, and the replication stream;
/// must have mean zero conditionally on (x, y, z), marginalizing over
/// z_next ~ p(.|z) and the stream.
using NoiseFn = std::function<void(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                   int z, int z_next, Rng& rng, Eigen::VectorXd& out)>;

/// Scalar diagnostic recorded alongside the errors (e.g. constraint violation).
using MetricFn = std::function<double(const Eigen::VectorXd& x, const Eigen::VectorXd& y)>;

/// A coupled fast/slow fixed-point problem driven by one exogenous chain:
///   x_{n+1} = x_n + alpha_n (f(x_n, y_n, Z_n) - x_n + M_{n+1}),
///   y_{n+1} = y_n + beta_n (g(x_n, y_n, Z_n) - y_n + M'_{n+1}),
/// with the slow line replaced by y_{n+1} = y_n + beta_n (g(x_n, y_n) - y_n)
/// when slow_noiseless is set (g must then ignore z, and noise_y stays null).
struct TtsProblem {
    int dim_x = 0;
    int dim_y = 0;
    FiniteMarkovChain chain = FiniteMarkovChain::degenerate();
    MapFn f;
    MapFn g;
    NoiseFn noise_x;  // null means identically zero
    NoiseFn noise_y;  // null means identically zero
    bool slow_noiseless = false;
    NormSpec norm_x = NormSpec::euclidean();
    NormSpec norm_y = NormSpec::euclidean();
    MetricFn extra_metric;  // null means not recorded

    /// Contraction bounds of the mean maps when the constructor knows them;
    /// NaN otherwise. Recorded for reporting, never consumed by the driver.
    double lambda = std::numeric_limits<double>::quiet_NaN();
    double mu = std::numeric_limits<double>::quiet_NaN();
};

/// Stationary average of f over the chain: sum_i pi(i) f(x, y, i).
void f_bar(const TtsProblem& problem, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
           Eigen::VectorXd& out);

/// Stationary average of g over the chain.
void g_bar(const TtsProblem& problem, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
           Eigen::VectorXd& out);

/// Ground truth used to score a run: the fast fixed point as a function of
/// the slow iterate, and the joint fixed point.
struct FixedPointOracle {
    std::function<Eigen::VectorXd(const Eigen::VectorXd& y)> x_star_of_y;
    Eigen::VectorXd x_star;
    Eigen::VectorXd y_star;
};

/// States captured at checkpoint indices, for diagnostics that need the
/// actual iterates rather than their errors.
struct Trajectory {
    std::vector<long> steps;
    std::vector<Eigen::VectorXd> x;
    std::vector<Eigen::VectorXd> y;
};

struct RunOptions {
    const FixedPointOracle* oracle = nullptr;  // enables the err_* series
    Trajectory* trajectory = nullptr;          // captures states when non-null
    /// Envelopes for the per-checkpoint Lyapunov value
    /// A(x_n - x*(y_n)) + B(y_n - y*); both must be set together.
    const MoreauEnvelope* env_x = nullptr;
    const MoreauEnvelope* env_y = nullptr;
    double divergence_bound = 1e12;
};

/// Per-replication checkpoint series. Error series are squared distances in
/// the problem's norms: ||x_n - x*||^2, ||y_n - y*||^2 and the tracking error
/// ||x_n - x*(y_n)||^2. Series not enabled by the options stay empty.
struct ReplicationResult {
    std::uint64_t seed = 0;
    std::vector<long> checkpoints;
    std::vector<double> err_x_sq;
    std::vector<double> err_y_sq;
    std::vector<double> err_track_sq;
    std::vector<double> lyapunov;
    std::vector<double> extra;
    Eigen::VectorXd final_x;
    Eigen::VectorXd final_y;
    int final_z = 0;
};

/// Core driver with explicit step-size callables (exposed for tests that need
/// schedules outside the production family).
ReplicationResult tts_run(const TtsProblem& problem,
                          const std::function<double(long)>& alpha,
                          const std::function<double(long)>& beta,
                          const Eigen::VectorXd& x0, const Eigen::VectorXd& y0, int z0,
                          long horizon, const std::vector<long>& checkpoints,
                          Rng& rng, const RunOptions& options = {});

/// Production driver.
ReplicationResult tts_run(const TtsProblem& problem, const StepSchedule& schedule,
                          const Eigen::VectorXd& x0, const Eigen::VectorXd& y0, int z0,
                          long horizon, const std::vector<long>& checkpoints,
                          Rng& rng, const RunOptions& options = {});

/// Checkpoint means and standard errors across replications. Replication r
/// uses seed base_seed + r; the reduction is performed in replication order
/// regardless of execution interleaving, so results do not depend on thread
/// scheduling.
struct SummaryResult {
    std::vector<long> checkpoints;
    std::vector<double> mean_err_x_sq, se_err_x_sq;
    std::vector<double> mean_err_y_sq, se_err_y_sq;
    std::vector<double> mean_err_track_sq, se_err_track_sq;
    std::vector<double> mean_extra, se_extra;
    std::vector<double> mean_lyapunov;
    int n_reps = 0;
    std::uint64_t base_seed = 0;
};

/// Runs n_reps independent replications (thread-parallel) and aggregates.
/// A diverged replication aborts the whole batch; the error names its seed.
SummaryResult run_replications(const TtsProblem& problem, const StepSchedule& schedule,
                               const Eigen::VectorXd& x0, const Eigen::VectorXd& y0, int z0,
                               long horizon, const std::vector<long>& checkpoints,
                               int n_reps, std::uint64_t base_seed,
                               const RunOptions& options = {});

/// The replications behind run_replications, in replication order. Trajectory
/// capture is disabled (a shared capture buffer would race).
std::vector<ReplicationResult> run_replications_raw(const TtsProblem& problem,
                                                    const StepSchedule& schedule,
                                                    const Eigen::VectorXd& x0,
                                                    const Eigen::VectorXd& y0, int z0,
                                                    long horizon,
                                                    const std::vector<long>& checkpoints,
                                                    int n_reps, std::uint64_t base_seed,
                                                    const RunOptions& options = {});

/// Checkpoint means/standard errors over the given replications, reduced in
/// vector order. With a single replication the standard errors are zero.
SummaryResult summarize(const std::vector<ReplicationResult>& reps, std::uint64_t base_seed);

/// Roughly `count` distinct integer checkpoints log-spaced over [lo, hi].
std::vector<long> log_checkpoints(long lo, long hi, int count);

/// Least-squares fit of log(value) against log(n) over checkpoints with
/// n_lo <= n <= n_hi.
struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    long n_lo = 0;
    long n_hi = 0;
};

/// Throws InsufficientPoints if fewer than 5 checkpoints fall in the window,
/// NonPositiveValue if any windowed value is <= 0.
RateFit fit_rate(const std::vector<long>& checkpoints, const std::vector<double>& values,
                 long n_lo, long n_hi);

/// Fixed point of x -> f_bar(x, y) by damped iteration with an online
/// contraction estimate; stops when the fixed-point residual in norm_x is
/// below tol. Throws NotContracting if the iteration visibly expands,
/// NoConvergence on iteration-budget exhaustion.
Eigen::VectorXd solve_x_star(const TtsProblem& problem, const Eigen::VectorXd& y, double tol);

struct LipschitzReport {
    double max_ratio = 0.0;
    double bound = 0.0;
    int pairs = 0;
};

/// Asserts ||x*(y1) - x*(y2)||_x <= L/(1-lambda) ||y1 - y2||_y + 2 tol over
/// the supplied pairs, solving each fixed point to tolerance tol.
/// Throws PropertyViolated with the witness pair on failure.
LipschitzReport verify_xstar_lipschitz(const TtsProblem& problem,
                                       const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& y_pairs,
                                       double L, double lambda, double tol);

/// Max over the supplied pairs of ||map(a) - map(b)|| / ||a - b|| in `norm`.
double verify_contraction(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& map,
                          const NormSpec& norm,
                          const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& pairs);

/// Convenience overload sampling n_pairs pairs with coordinates uniform in
/// [-scale, scale]^dim.
double verify_contraction(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& map,
                          const NormSpec& norm, int dim, int n_pairs, double scale, Rng& rng);

/// Per-checkpoint A(x_n - x*(y_n)) + B(y_n - y*) along a captured trajectory.
std::vector<double> lyapunov_trace(const TtsProblem& problem, const FixedPointOracle& oracle,
                                   const MoreauEnvelope& env_x, const MoreauEnvelope& env_y,
                                   const Trajectory& trajectory);

}  // namespace ttsa
