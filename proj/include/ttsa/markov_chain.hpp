#pragma once

#include <Eigen/Dense>
#include <string>

#include "ttsa/rng.hpp"

namespace ttsa {

/// Irreducible finite Markov chain on {0, ..., n_states-1}.
/// Immutable after construction; safe to share across threads.
class FiniteMarkovChain {
public:
    /// Validates that kernel is square, row-stochastic (rows sum to 1 within
    /// 1e-12, entries >= 0) and irreducible, then computes the stationary
    /// distribution once.
    /// Throws DimensionMismatch, ReducibleChain, SingularSystem.
    explicit FiniteMarkovChain(Eigen::MatrixXd kernel);

    /// The trivial one-state chain. Used by problems whose noise is a pure
    /// martingale-difference sequence with no Markovian component.
    static FiniteMarkovChain degenerate();

    /// Loads "n_states" on the first line followed by n_states rows.
    static FiniteMarkovChain from_file(const std::string& path);

    int n_states() const { return static_cast<int>(kernel_.rows()); }
    const Eigen::MatrixXd& kernel() const { return kernel_; }

    /// Unique stationary distribution pi (pi P = pi, sum 1, entries >= 0).
    const Eigen::VectorXd& stationary_distribution() const { return stationary_; }

    /// One transition from `state` using the supplied stream.
    int sample_step(int state, Rng& rng) const;

private:
    Eigen::MatrixXd kernel_;
    Eigen::VectorXd stationary_;
};

/// Solution of the Poisson equation V = h + P V (componentwise over the
/// columns of h) pinned by V(reference_state) = 0.
struct PoissonSolution {
    Eigen::MatrixXd values;  // n_states x dim, row i is V(i)
    int reference_state = 0;
};

/// Solves the Poisson equation for a pi-centered h (n_states x dim).
/// pre: |pi^T h_col| <= 1e-8 for every column, else NonCenteredInput.
/// Throws SingularSystem if the pinned linear system is defective.
PoissonSolution poisson_solve(const FiniteMarkovChain& chain,
                              const Eigen::MatrixXd& h,
                              int reference_state);

/// Empirical check of the decomposition of h(Z_m) into a martingale
/// difference plus a telescoping term along a simulated path:
///   h(Z_m) = Vtilde_{m+1} + V(Z_m) - V(Z_{m+1}),
///   Vtilde_{m+1} = V(Z_{m+1}) - sum_j p(j|Z_m) V(j).
struct DecompositionReport {
    long n_steps = 0;
    /// Largest |empirical conditional mean of Vtilde| over (state, column).
    double worst_conditional_mean = 0.0;
    /// Standard error of that worst cell's mean.
    double worst_conditional_se = 0.0;
    /// Visits to the state realizing the worst cell.
    long worst_cell_count = 0;
    /// Max over steps of the sup-norm residual of the per-step identity.
    double max_identity_residual = 0.0;

    std::string csv_header() const;
    std::string csv_row() const;
};

/// Simulates n_steps transitions from state 0 and reports the decomposition
/// diagnostics for h (n_states x dim, pi-centered).
DecompositionReport markov_noise_decomposition_check(const FiniteMarkovChain& chain,
                                                     const Eigen::MatrixXd& h,
                                                     long n_steps,
                                                     Rng& rng);

}  // namespace ttsa
