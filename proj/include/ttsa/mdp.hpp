#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "ttsa/engine.hpp"
#include "ttsa/markov_chain.hpp"

namespace ttsa {

/// Finite MDP with one-stage costs, controlled kernel, and the strictly
/// positive randomized policy used to sample state-action pairs during
/// learning. Pairs are flattened as pair_index(i, a) = i * n_actions + a.
struct MdpModel {
    int n_states = 0;
    int n_actions = 0;
    Eigen::MatrixXd cost;    // n_states x n_actions
    Eigen::MatrixXd trans;   // (n_states*n_actions) x n_states, rows stochastic
    Eigen::MatrixXd policy;  // n_states x n_actions, rows stochastic, entries > 0

    int pair_index(int state, int action) const { return state * n_actions + action; }
    int n_pairs() const { return n_states * n_actions; }
};

/// Throws DimensionMismatch / PropertyViolated when the model is malformed
/// (wrong shapes, non-stochastic rows, zero sampling probabilities).
void validate_model(const MdpModel& model);

/// Chain on pairs (i, u): P((j, v) | (i, u)) = p(j | i, u) policy(v | j).
/// Throws ReducibleChain when the exploration policy does not make every
/// pair recurrent.
FiniteMarkovChain joint_chain(const MdpModel& model);

/// Hitting-time weights for the shortest-path construction at reference
/// state i0. kappa(i, u) = 1 + sum_{j != i0} p(j|i,u) max_v kappa(j, v) is the
/// worst-case expected number of steps to reach i0; weights are 1/kappa and
/// the truncated Bellman operator is a lambda0-contraction in the weighted
/// max norm with lambda0 = max (kappa - 1)/kappa < 1.
struct SspWeights {
    Eigen::VectorXd kappa;    // over pairs
    Eigen::VectorXd weights;  // 1 / kappa
    double lambda0 = 0.0;
};

/// Throws Unreachable when some policy can avoid i0 forever (kappa diverges).
SspWeights ssp_weights(const MdpModel& model, int reference_state);

/// Average-cost ground truth: optimal gain rho* and the relative Q-factors
/// pinned by min_v q*(i0, v) = 0.
struct AvgCostSolution {
    double rho_star = 0.0;
    Eigen::VectorXd q_star;  // over pairs
    int reference_state = 0;
};

/// Solves the average-cost problem by bisection on rho over the root of
/// phi(rho) = min_v Q_rho(i0, v), where Q_rho is the fixed point of the
/// i0-truncated Bellman operator at gain rho (value iteration, warm-started).
/// phi is concave, piecewise linear, and strictly decreasing, so the root is
/// unique. Throws NoConvergence if bisection or the inner loop stalls.
AvgCostSolution avgcost_oracle(const MdpModel& model, int reference_state);

/// Discounted ground truth: fixed point of the discounted Bellman operator.
struct DiscountedSolution {
    double gamma = 0.0;
    Eigen::VectorXd q_star;  // over pairs
};

/// Value iteration to fixed-point residual 1e-13 in sup norm.
/// Throws ConfigError unless 0 < gamma < 1.
DiscountedSolution discounted_oracle(const MdpModel& model, double gamma);

/// Secant slopes of phi(rho) over a uniform grid spanning the cost range.
/// Used to pick the slow relaxation gain and to bound the slow map's
/// contraction modulus empirically.
struct SecantEstimate {
    Eigen::VectorXd rho_grid;
    Eigen::VectorXd phi;            // phi(rho) at the grid
    double min_abs_slope = 0.0;     // estimate of the flattest descent
    double max_abs_slope = 0.0;     // estimate of the steepest descent
};

SecantEstimate estimate_slow_secants(const MdpModel& model, int reference_state, int n_grid);

/// Parameters of the shortest-path learning construction.
struct SspConfig {
    int reference_state = 0;
    double beta_prime = 0.0;      // slow relaxation gain
    Eigen::VectorXd weights;      // weighted max norm for the fast iterate
    double lambda0 = 0.0;         // contraction modulus behind the weights
};

/// Weights from ssp_weights and beta_prime = 0.5 / max_abs_slope, which keeps
/// the slow map mu = max |1 - beta_prime * slope| at most max(0.5, 1 - 0.5 *
/// min_slope/max_slope) < 1.
SspConfig make_ssp_config(const MdpModel& model, int reference_state);

/// Average-cost learner as a coupled fast/slow problem: the fast iterate is
/// the Q table driven by the joint pair chain with one-step residual noise,
/// the slow iterate is the scalar gain estimate with a noiseless update
/// rho <- rho + beta_n * beta_prime * min_v Q(i0, v).
struct SspBundle {
    TtsProblem problem;
    FixedPointOracle oracle;
    AvgCostSolution solution;
    SspConfig config;
};

SspBundle make_ssp_problem(const MdpModel& model, const SspConfig& config);

/// Discounted learner with iterate averaging: the fast iterate is the
/// discounted Q table, the slow iterate is its running average (slow map
/// g(Q, Qbar) = Q, contraction modulus 0).
struct PolyakBundle {
    TtsProblem problem;
    FixedPointOracle oracle;
    DiscountedSolution solution;
};

PolyakBundle make_polyak_problem(const MdpModel& model, double gamma);

/// Random MDP: each pair reaches `branching` distinct states with Dirichlet
/// probabilities, costs uniform in [0, 1], uniform exploration policy.
/// Deterministically retries seeds until the joint chain is irreducible and
/// state 0 is reachable under every policy, so the result always supports
/// both constructions above.
MdpModel garnet(int n_states, int n_actions, int branching, std::uint64_t seed);

struct MdpFile {
    MdpModel model;
    int reference_state = 0;
};

/// Text format: header "n_states n_actions reference_state", the cost matrix,
/// the n_states*n_actions transition rows, then the policy rows.
MdpFile load_mdp(const std::string& path);
void save_mdp(const std::string& path, const MdpModel& model, int reference_state);

}  // namespace ttsa
