#include "ttsa/game.hpp"

#include <cmath>
#include <fstream>
#include <memory>

#include "ttsa/csv.hpp"
#include "ttsa/errors.hpp"

namespace ttsa {

namespace {

/// One player's block of the fast map, written with scalar loops so that the
/// stacked map and the per-player form share every intermediate value.
void player_block(const GameSpec& game, double alpha_prime, int player,
                  const Eigen::VectorXd& x, const Eigen::VectorXd& y, double* out) {
    const int block = game.action_dim;
    const int base = player * block;
    const int dim = game.dim();
    const int rows = game.n_constraints();
    for (int r = base; r < base + block; ++r) {
        double drive = game.c(r);
        for (int j = 0; j < dim; ++j) drive -= game.m(r, j) * x(j);
        for (int k = 0; k < rows; ++k) drive -= game.a(k, r) * y(k);
        out[r - base] = x(r) + alpha_prime * drive;
    }
}

double spectral_norm(const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues()(0);
}

}  // namespace

Eigen::VectorXd GameSpec::pseudogradient(const Eigen::VectorXd& x) const {
    if (x.size() != dim()) throw DimensionMismatch("pseudogradient input size mismatch");
    return -m * x + c;
}

GameSpec GameSpec::create(int n_players, int action_dim, Eigen::MatrixXd m, Eigen::VectorXd c,
                          Eigen::MatrixXd a, Eigen::VectorXd b) {
    GameSpec game;
    game.n_players = n_players;
    game.action_dim = action_dim;
    if (n_players <= 0 || action_dim <= 0) {
        throw DimensionMismatch("game needs at least one player and one action coordinate");
    }
    const int dim = game.dim();
    if (m.rows() != dim || m.cols() != dim || c.size() != dim) {
        throw DimensionMismatch("pseudogradient blocks do not match the stacked dimension");
    }
    if (a.cols() != dim || a.rows() < 1 || a.rows() > dim || b.size() != a.rows()) {
        throw DimensionMismatch("constraint system shape mismatch");
    }
    game.m = std::move(m);
    game.c = std::move(c);
    game.a = std::move(a);
    game.b = std::move(b);

    const Eigen::MatrixXd sym = 0.5 * (game.m + game.m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigen(sym);
    game.lambda0 = eigen.eigenvalues().minCoeff();
    if (!(game.lambda0 > 0.0)) {
        throw PropertyViolated("the symmetrized pseudogradient matrix is not positive definite"
                               " (smallest eigenvalue " +
                               format_double(game.lambda0) + ")");
    }
    game.ell = spectral_norm(game.m);

    Eigen::JacobiSVD<Eigen::MatrixXd> constraint_svd(game.a);
    const auto& sigma = constraint_svd.singularValues();
    if (!(sigma(sigma.size() - 1) > 1e-10 * sigma(0))) {
        throw PropertyViolated("constraint matrix does not have full row rank");
    }
    return game;
}

KktSolution kkt_oracle(const GameSpec& game) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_m(game.m);
    const Eigen::VectorXd m_inv_c = lu_m.solve(game.c);
    const Eigen::MatrixXd m_inv_at = lu_m.solve(game.a.transpose());
    const Eigen::MatrixXd h = game.a * m_inv_at;
    const Eigen::VectorXd rhs = game.a * m_inv_c - game.b;

    Eigen::PartialPivLU<Eigen::MatrixXd> lu_h(h);
    KktSolution solution;
    solution.y_star = lu_h.solve(rhs);
    solution.x_star = lu_m.solve(game.c - game.a.transpose() * solution.y_star);
    if (!solution.x_star.allFinite() || !solution.y_star.allFinite()) {
        throw SingularSystem("KKT solve produced non-finite values");
    }
    solution.stationarity_residual =
        (game.m * solution.x_star - game.c + game.a.transpose() * solution.y_star).norm();
    solution.feasibility_residual = (game.a * solution.x_star - game.b).norm();
    const double scale = 1.0 + game.c.norm() + game.b.norm();
    if (solution.stationarity_residual > 1e-9 * scale ||
        solution.feasibility_residual > 1e-9 * scale) {
        throw SingularSystem("KKT system is numerically defective (residuals " +
                             format_double(solution.stationarity_residual) + ", " +
                             format_double(solution.feasibility_residual) + ")");
    }
    return solution;
}

double constraint_violation(const GameSpec& game, const Eigen::VectorXd& x) {
    if (x.size() != game.dim()) throw DimensionMismatch("constraint violation input mismatch");
    return (game.a * x - game.b).squaredNorm();
}

Eigen::VectorXd player_update(const GameSpec& game, double alpha_prime, int player,
                              const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    if (player < 0 || player >= game.n_players) {
        throw DimensionMismatch("player index out of range");
    }
    if (x.size() != game.dim() || y.size() != game.n_constraints()) {
        throw DimensionMismatch("player update input mismatch");
    }
    Eigen::VectorXd out(game.action_dim);
    player_block(game, alpha_prime, player, x, y, out.data());
    return out;
}

GneBundle make_gne_problem(const GameSpec& game, double noise_scale, double alpha_prime,
                           double beta_prime) {
    if (!(noise_scale >= 0.0)) throw ConfigError("noise scale must be nonnegative");

    GneBundle bundle;
    const double ell = game.ell;
    const double lambda0 = game.lambda0;
    bundle.alpha_prime = std::isnan(alpha_prime) ? lambda0 / (ell * ell) : alpha_prime;
    if (!(bundle.alpha_prime > 0.0)) throw ConfigError("fast gain must be positive");

    const double lambda = std::sqrt(std::max(
        0.0, 1.0 - 2.0 * bundle.alpha_prime * lambda0 +
                 bundle.alpha_prime * bundle.alpha_prime * ell * ell));
    if (!(lambda < 1.0)) {
        throw PropertyViolated("fast gain " + format_double(bundle.alpha_prime) +
                               " does not contract the primal update");
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> constraint_svd(game.a);
    const double a_norm = constraint_svd.singularValues()(0);
    const double a_min = constraint_svd.singularValues()(constraint_svd.singularValues().size() - 1);

    bundle.mu0 = lambda0 * a_min * a_min / (ell * ell);
    const double fast_lipschitz = 1.0 + bundle.alpha_prime * ell + bundle.alpha_prime * a_norm;
    bundle.ell0 = a_norm * fast_lipschitz / (1.0 - lambda);
    bundle.beta_prime =
        std::isnan(beta_prime) ? bundle.mu0 / (bundle.ell0 * bundle.ell0) : beta_prime;
    if (!(bundle.beta_prime > 0.0)) throw ConfigError("slow gain must be positive");

    const double mu = std::sqrt(std::max(
        0.0, 1.0 - 2.0 * bundle.beta_prime * bundle.mu0 +
                 bundle.beta_prime * bundle.beta_prime * bundle.ell0 * bundle.ell0));
    if (!(mu < 1.0)) {
        throw PropertyViolated("slow gain " + format_double(bundle.beta_prime) +
                               " does not contract the dual update");
    }

    const auto shared = std::make_shared<const GameSpec>(game);
    const double ap = bundle.alpha_prime;
    const double bp = bundle.beta_prime;

    TtsProblem& problem = bundle.problem;
    problem.dim_x = game.dim();
    problem.dim_y = game.n_constraints();
    problem.slow_noiseless = false;
    problem.norm_x = NormSpec::euclidean();
    problem.norm_y = NormSpec::euclidean();
    problem.lambda = lambda;
    problem.mu = mu;

    problem.f = [shared, ap](const Eigen::VectorXd& x, const Eigen::VectorXd& y, int,
                             Eigen::VectorXd& out) {
        for (int k = 0; k < shared->n_players; ++k) {
            player_block(*shared, ap, k, x, y, out.data() + k * shared->action_dim);
        }
    };
    problem.g = [shared, bp](const Eigen::VectorXd& x, const Eigen::VectorXd& y, int,
                             Eigen::VectorXd& out) {
        const int rows = shared->n_constraints();
        const int dim = shared->dim();
        for (int r = 0; r < rows; ++r) {
            double ax = -shared->b(r);
            for (int j = 0; j < dim; ++j) ax += shared->a(r, j) * x(j);
            out(r) = y(r) + bp * ax;
        }
    };
    if (noise_scale > 0.0) {
        problem.noise_x = [ap, noise_scale](const Eigen::VectorXd&, const Eigen::VectorXd&, int,
                                            int, Rng& rng, Eigen::VectorXd& out) {
            fill_sphere(rng, noise_scale, out);
            out *= ap;
        };
        problem.noise_y = [bp, noise_scale](const Eigen::VectorXd&, const Eigen::VectorXd&, int,
                                            int, Rng& rng, Eigen::VectorXd& out) {
            fill_sphere(rng, noise_scale, out);
            out *= bp;
        };
    }
    problem.extra_metric = [shared](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
        return (shared->a * x - shared->b).squaredNorm();
    };

    bundle.kkt = kkt_oracle(game);
    bundle.oracle.x_star = bundle.kkt.x_star;
    bundle.oracle.y_star = bundle.kkt.y_star;
    const auto lu_m = std::make_shared<Eigen::PartialPivLU<Eigen::MatrixXd>>(game.m);
    bundle.oracle.x_star_of_y = [shared, lu_m](const Eigen::VectorXd& y) {
        return lu_m->solve(shared->c - shared->a.transpose() * y).eval();
    };
    return bundle;
}

GameSpec random_game(int n_players, int action_dim, int n_constraints, std::uint64_t seed) {
    const int dim = n_players * action_dim;
    if (dim <= 0 || n_constraints < 1 || n_constraints > dim) {
        throw ConfigError("random game shape is infeasible");
    }
    for (int attempt = 0; attempt < 1000; ++attempt) {
        Rng rng = make_rng(seed + 7919ULL * static_cast<std::uint64_t>(attempt));
        const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
        Eigen::MatrixXd g(dim, dim);
        for (int i = 0; i < dim; ++i) {
            for (int j = 0; j < dim; ++j) g(i, j) = normal(rng) * scale;
        }
        const Eigen::MatrixXd sym = 0.5 * (g + g.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigen(sym);
        const double lambda_min = eigen.eigenvalues().minCoeff();
        const double ell_g = spectral_norm(g);
        const double ratio = uniform(rng, 0.3, 0.6);
        const Eigen::MatrixXd m =
            g + (ratio * ell_g - lambda_min) * Eigen::MatrixXd::Identity(dim, dim);

        Eigen::MatrixXd a(n_constraints, dim);
        for (int i = 0; i < n_constraints; ++i) {
            for (int j = 0; j < dim; ++j) a(i, j) = normal(rng) * scale;
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
        const auto& sigma = svd.singularValues();
        if (!(sigma(sigma.size() - 1) > 0.3 * sigma(0))) continue;

        Eigen::VectorXd c(dim), x_feasible(dim);
        for (int j = 0; j < dim; ++j) c(j) = normal(rng);
        for (int j = 0; j < dim; ++j) x_feasible(j) = normal(rng);
        const Eigen::VectorXd b = a * x_feasible;
        try {
            return GameSpec::create(n_players, action_dim, m, c, a, b);
        } catch (const Error&) {
            continue;
        }
    }
    throw PropertyViolated("no acceptable random game found for this seed");
}

GameSpec load_game(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open game file: " + path);
    int n_players = 0, action_dim = 0, n_constraints = 0;
    if (!(in >> n_players >> action_dim >> n_constraints)) {
        throw ConfigError("game file must start with n_players action_dim n_constraints: " + path);
    }
    if (n_players <= 0 || action_dim <= 0 || n_constraints <= 0) {
        throw ConfigError("game file declares an empty game: " + path);
    }
    const int dim = n_players * action_dim;
    const auto read_into = [&](double& slot, const char* what) {
        if (!(in >> slot)) {
            throw ConfigError(std::string("game file truncated in ") + what + ": " + path);
        }
    };
    Eigen::MatrixXd m(dim, dim);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) read_into(m(i, j), "pseudogradient matrix");
    }
    Eigen::VectorXd c(dim);
    for (int j = 0; j < dim; ++j) read_into(c(j), "offset");
    Eigen::MatrixXd a(n_constraints, dim);
    for (int i = 0; i < n_constraints; ++i) {
        for (int j = 0; j < dim; ++j) read_into(a(i, j), "constraint matrix");
    }
    Eigen::VectorXd b(n_constraints);
    for (int i = 0; i < n_constraints; ++i) read_into(b(i), "constraint offset");
    return GameSpec::create(n_players, action_dim, std::move(m), std::move(c), std::move(a),
                            std::move(b));
}

void save_game(const std::string& path, const GameSpec& game) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write game file: " + path);
    out << game.n_players << " " << game.action_dim << " " << game.n_constraints() << "\n";
    const auto write_row = [&](const auto& row) {
        for (Eigen::Index j = 0; j < row.size(); ++j) {
            out << (j > 0 ? " " : "") << format_double(row(j));
        }
        out << "\n";
    };
    for (Eigen::Index i = 0; i < game.m.rows(); ++i) write_row(game.m.row(i));
    write_row(game.c);
    for (Eigen::Index i = 0; i < game.a.rows(); ++i) write_row(game.a.row(i));
    write_row(game.b);
    if (!out) throw ConfigError("failed while writing game file: " + path);
}

}  // namespace ttsa
