#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "ttsa/engine.hpp"

namespace ttsa {

/// Monotone quadratic game with a shared affine constraint. Each of the K
/// players owns an action block of size action_dim; the stacked pseudogradient
/// is affine, F(x) = -m x + c, with sym(m) positive definite. The shared
/// constraint is a x = b with a of full row rank.
struct GameSpec {
    int n_players = 0;
    int action_dim = 0;
    Eigen::MatrixXd m;  // dim x dim
    Eigen::VectorXd c;  // dim
    Eigen::MatrixXd a;  // n_constraints x dim
    Eigen::VectorXd b;  // n_constraints
    double lambda0 = 0.0;  // monotonicity modulus: sym(m) >= lambda0 I
    double ell = 0.0;      // Lipschitz bound: ||m||_2 <= ell

    int dim() const { return n_players * action_dim; }
    int n_constraints() const { return static_cast<int>(a.rows()); }

    /// Stacked pseudogradient at x.
    Eigen::VectorXd pseudogradient(const Eigen::VectorXd& x) const;

    /// Builds a GameSpec from the matrices, measuring tight lambda0 and ell.
    /// Throws PropertyViolated unless sym(m) is positive definite and `a`
    /// has full row rank; DimensionMismatch on shape errors.
    static GameSpec create(int n_players, int action_dim, Eigen::MatrixXd m,
                           Eigen::VectorXd c, Eigen::MatrixXd a, Eigen::VectorXd b);
};

/// Primal-dual ground truth of the variational equilibrium:
///   m x* = c - a^T y*,   a x* = b.
struct KktSolution {
    Eigen::VectorXd x_star;
    Eigen::VectorXd y_star;
    double stationarity_residual = 0.0;  // ||m x* - c + a^T y*||_2
    double feasibility_residual = 0.0;   // ||a x* - b||_2
};

/// Direct solve of the KKT system. Throws SingularSystem when m or a m^-1 a^T
/// is numerically defective.
KktSolution kkt_oracle(const GameSpec& game);

/// Squared Euclidean constraint violation ||a x - b||_2^2.
double constraint_violation(const GameSpec& game, const Eigen::VectorXd& x);

/// Projected-gradient/dual-ascent pair written as a coupled fixed-point
/// problem with bounded isotropic noise on both timescales:
///   f(x, y) = x + alpha' (F(x) - a^T y),   fast noise alpha' * (sphere),
///   g(x, y) = y + beta'  (a x - b),        slow noise beta'  * (sphere).
/// Default gains: alpha' = lambda0 / ell^2 and beta' = mu0 / ell0^2 with
///   mu0 = lambda0 * sigma_min(a)^2 / ell^2,
///   ell0 = ||a|| (1 + alpha' ell + alpha' ||a||) / (1 - lambda),
///   lambda = sqrt(1 - lambda0^2 / ell^2),   mu = sqrt(1 - mu0^2 / ell0^2).
struct GneBundle {
    TtsProblem problem;
    FixedPointOracle oracle;
    KktSolution kkt;
    double alpha_prime = 0.0;
    double beta_prime = 0.0;
    double mu0 = 0.0;
    double ell0 = 0.0;
};

/// Pass NaN for either gain to take its default.
GneBundle make_gne_problem(const GameSpec& game, double noise_scale,
                           double alpha_prime, double beta_prime);

/// One player's line of the stacked fast update, over that player's block
/// only. The stacked map applies these blocks in player order, so the two
/// forms agree bitwise; tests rely on that.
Eigen::VectorXd player_update(const GameSpec& game, double alpha_prime, int player,
                              const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// Random game with sym(m) >= lambda0 I by construction (lambda0 drawn in
/// [0.3, 0.6] relative to ell ~ 1..2), well-conditioned full-row-rank a.
GameSpec random_game(int n_players, int action_dim, int n_constraints, std::uint64_t seed);

/// Text format: header "n_players action_dim n_constraints", then m rows,
/// c row, a rows, b row.
GameSpec load_game(const std::string& path);
void save_game(const std::string& path, const GameSpec& game);

}  // namespace ttsa
