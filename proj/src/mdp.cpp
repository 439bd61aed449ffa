#include "ttsa/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <vector>

#include "ttsa/csv.hpp"
#include "ttsa/errors.hpp"

namespace ttsa {

namespace {

void check_stochastic_rows(const Eigen::MatrixXd& m, const char* what, bool strictly_positive) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        double row_sum = 0.0;
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double p = m(i, j);
            if (!std::isfinite(p) || p < 0.0 || (strictly_positive && p <= 0.0)) {
                throw PropertyViolated(std::string(what) + " row " + std::to_string(i) +
                                       " has invalid entry " + format_double(p));
            }
            row_sum += p;
        }
        if (std::abs(row_sum - 1.0) > 1e-12) {
            throw PropertyViolated(std::string(what) + " row " + std::to_string(i) + " sums to " +
                                   format_double(row_sum) + ", not 1");
        }
    }
}

double min_over_actions(const Eigen::VectorXd& q, int state, int n_actions) {
    double best = q(state * n_actions);
    for (int v = 1; v < n_actions; ++v) {
        best = std::min(best, q(state * n_actions + v));
    }
    return best;
}

/// One sweep of the i0-truncated Bellman operator at gain rho:
///   (T q)(i, u) = k(i, u) - rho + sum_{j != i0} p(j|i,u) min_v q(j, v).
void truncated_sweep(const MdpModel& m, int i0, double rho, const Eigen::VectorXd& q,
                     Eigen::VectorXd& out) {
    const int s_count = m.n_states;
    const int u_count = m.n_actions;
    Eigen::VectorXd h(s_count);
    for (int j = 0; j < s_count; ++j) h(j) = min_over_actions(q, j, u_count);
    for (int i = 0; i < s_count; ++i) {
        for (int u = 0; u < u_count; ++u) {
            const int z = m.pair_index(i, u);
            double acc = m.cost(i, u) - rho;
            for (int j = 0; j < s_count; ++j) {
                if (j == i0) continue;
                const double p = m.trans(z, j);
                if (p > 0.0) acc += p * h(j);
            }
            out(z) = acc;
        }
    }
}

/// Value iteration for the truncated operator, warm-started at q.
Eigen::VectorXd truncated_fixed_point(const MdpModel& m, int i0, double rho, Eigen::VectorXd q,
                                      double tol) {
    Eigen::VectorXd next(m.n_pairs());
    for (long it = 0; it < 2000000; ++it) {
        truncated_sweep(m, i0, rho, q, next);
        const double delta = (next - q).cwiseAbs().maxCoeff();
        q.swap(next);
        if (delta <= tol * (1.0 + q.cwiseAbs().maxCoeff())) return q;
    }
    throw NoConvergence("truncated Bellman iteration stalled at gain " + format_double(rho));
}

void check_reference_state(const MdpModel& model, int reference_state) {
    if (reference_state < 0 || reference_state >= model.n_states) {
        throw DimensionMismatch("reference state " + std::to_string(reference_state) +
                                " outside the state space");
    }
}

}  // namespace

void validate_model(const MdpModel& model) {
    if (model.n_states <= 0 || model.n_actions <= 0) {
        throw DimensionMismatch("model must have at least one state and one action");
    }
    if (model.cost.rows() != model.n_states || model.cost.cols() != model.n_actions) {
        throw DimensionMismatch("cost matrix shape mismatch");
    }
    if (model.trans.rows() != model.n_pairs() || model.trans.cols() != model.n_states) {
        throw DimensionMismatch("transition matrix shape mismatch");
    }
    if (model.policy.rows() != model.n_states || model.policy.cols() != model.n_actions) {
        throw DimensionMismatch("policy matrix shape mismatch");
    }
    if (!model.cost.allFinite()) throw PropertyViolated("costs must be finite");
    check_stochastic_rows(model.trans, "transition", false);
    check_stochastic_rows(model.policy, "policy", true);
}

FiniteMarkovChain joint_chain(const MdpModel& model) {
    validate_model(model);
    const int n = model.n_pairs();
    const int u_count = model.n_actions;
    Eigen::MatrixXd kernel(n, n);
    for (int z = 0; z < n; ++z) {
        for (int j = 0; j < model.n_states; ++j) {
            for (int v = 0; v < u_count; ++v) {
                kernel(z, j * u_count + v) = model.trans(z, j) * model.policy(j, v);
            }
        }
    }
    return FiniteMarkovChain(std::move(kernel));
}

SspWeights ssp_weights(const MdpModel& model, int reference_state) {
    validate_model(model);
    check_reference_state(model, reference_state);
    const int s_count = model.n_states;
    const int u_count = model.n_actions;
    const int n = model.n_pairs();

    Eigen::VectorXd kappa = Eigen::VectorXd::Ones(n);
    Eigen::VectorXd next(n);
    Eigen::VectorXd h(s_count);
    for (long it = 0; it < 1000000; ++it) {
        for (int j = 0; j < s_count; ++j) {
            double worst = kappa(j * u_count);
            for (int v = 1; v < u_count; ++v) worst = std::max(worst, kappa(j * u_count + v));
            h(j) = worst;
        }
        for (int i = 0; i < s_count; ++i) {
            for (int u = 0; u < u_count; ++u) {
                const int z = model.pair_index(i, u);
                double acc = 1.0;
                for (int j = 0; j < s_count; ++j) {
                    if (j == reference_state) continue;
                    const double p = model.trans(z, j);
                    if (p > 0.0) acc += p * h(j);
                }
                next(z) = acc;
            }
        }
        const double delta = (next - kappa).cwiseAbs().maxCoeff();
        kappa.swap(next);
        if (kappa.maxCoeff() > 1e9) {
            throw Unreachable("hitting-time recursion diverged: some policy avoids state " +
                              std::to_string(reference_state));
        }
        if (delta <= 1e-12 * (1.0 + kappa.maxCoeff())) {
            SspWeights result;
            result.kappa = kappa;
            result.weights = kappa.cwiseInverse();
            result.lambda0 = ((kappa.array() - 1.0) / kappa.array()).maxCoeff();
            return result;
        }
    }
    throw Unreachable("hitting-time recursion failed to settle");
}

AvgCostSolution avgcost_oracle(const MdpModel& model, int reference_state) {
    validate_model(model);
    check_reference_state(model, reference_state);
    ssp_weights(model, reference_state);  // reject models where truncation cannot contract

    const int n = model.n_pairs();
    const int u_count = model.n_actions;
    double lo = model.cost.minCoeff() - 1.0;
    double hi = model.cost.maxCoeff() + 1.0;

    Eigen::VectorXd q = Eigen::VectorXd::Zero(n);
    const auto phi = [&](double rho) {
        q = truncated_fixed_point(model, reference_state, rho, q, 1e-13);
        return min_over_actions(q, reference_state, u_count);
    };

    if (!(phi(lo) >= 0.0) || !(phi(hi) <= 0.0)) {
        throw NoConvergence("average-cost root is not bracketed by the cost range");
    }
    while (hi - lo > 1e-12 * (1.0 + std::abs(lo) + std::abs(hi))) {
        const double mid = 0.5 * (lo + hi);
        if (phi(mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    AvgCostSolution solution;
    solution.rho_star = 0.5 * (lo + hi);
    solution.reference_state = reference_state;
    solution.q_star = truncated_fixed_point(model, reference_state, solution.rho_star, q, 1e-13);
    const double pin = min_over_actions(solution.q_star, reference_state, u_count);
    if (std::abs(pin) > 1e-8) {
        throw NoConvergence("gain bisection left a reference residual of " + format_double(pin));
    }
    return solution;
}

DiscountedSolution discounted_oracle(const MdpModel& model, double gamma) {
    validate_model(model);
    if (!(gamma > 0.0) || !(gamma < 1.0)) {
        throw ConfigError("discount factor must lie in (0, 1), got " + format_double(gamma));
    }
    const int n = model.n_pairs();
    const int s_count = model.n_states;
    const int u_count = model.n_actions;
    Eigen::VectorXd q = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd next(n);
    Eigen::VectorXd h(s_count);
    for (long it = 0; it < 2000000; ++it) {
        for (int j = 0; j < s_count; ++j) h(j) = min_over_actions(q, j, u_count);
        for (int i = 0; i < s_count; ++i) {
            for (int u = 0; u < u_count; ++u) {
                const int z = model.pair_index(i, u);
                double acc = model.cost(i, u);
                for (int j = 0; j < s_count; ++j) {
                    const double p = model.trans(z, j);
                    if (p > 0.0) acc += gamma * p * h(j);
                }
                next(z) = acc;
            }
        }
        const double delta = (next - q).cwiseAbs().maxCoeff();
        q.swap(next);
        if (delta <= 1e-13) {
            DiscountedSolution solution;
            solution.gamma = gamma;
            solution.q_star = q;
            return solution;
        }
    }
    throw NoConvergence("discounted value iteration stalled");
}

SecantEstimate estimate_slow_secants(const MdpModel& model, int reference_state, int n_grid) {
    validate_model(model);
    check_reference_state(model, reference_state);
    if (n_grid < 2) throw ConfigError("secant estimation needs at least two grid points");

    double lo = model.cost.minCoeff();
    double hi = model.cost.maxCoeff();
    if (hi - lo < 1e-6) {
        lo -= 0.5;
        hi += 0.5;
    }
    SecantEstimate estimate;
    estimate.rho_grid.resize(n_grid);
    estimate.phi.resize(n_grid);
    Eigen::VectorXd q = Eigen::VectorXd::Zero(model.n_pairs());
    for (int g = 0; g < n_grid; ++g) {
        const double rho =
            lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(n_grid - 1);
        q = truncated_fixed_point(model, reference_state, rho, q, 1e-13);
        estimate.rho_grid(g) = rho;
        estimate.phi(g) = min_over_actions(q, reference_state, model.n_actions);
    }
    estimate.min_abs_slope = std::numeric_limits<double>::infinity();
    for (int g = 0; g + 1 < n_grid; ++g) {
        const double slope = (estimate.phi(g + 1) - estimate.phi(g)) /
                             (estimate.rho_grid(g + 1) - estimate.rho_grid(g));
        if (!(slope < 0.0)) {
            throw PropertyViolated("reference value is not strictly decreasing in the gain");
        }
        estimate.min_abs_slope = std::min(estimate.min_abs_slope, -slope);
        estimate.max_abs_slope = std::max(estimate.max_abs_slope, -slope);
    }
    return estimate;
}

SspConfig make_ssp_config(const MdpModel& model, int reference_state) {
    const SspWeights weights = ssp_weights(model, reference_state);
    const SecantEstimate secants = estimate_slow_secants(model, reference_state, 20);
    SspConfig config;
    config.reference_state = reference_state;
    config.beta_prime = 0.5 / secants.max_abs_slope;
    config.weights = weights.weights;
    config.lambda0 = weights.lambda0;
    return config;
}

SspBundle make_ssp_problem(const MdpModel& model, const SspConfig& config) {
    validate_model(model);
    check_reference_state(model, config.reference_state);
    const int i0 = config.reference_state;
    if (config.weights.size() != model.n_pairs()) {
        throw DimensionMismatch("weight vector does not match the pair space");
    }
    if (!(config.beta_prime > 0.0)) {
        throw PropertyViolated("slow relaxation gain must be positive");
    }

    const auto shared = std::make_shared<const MdpModel>(model);
    const int u_count = model.n_actions;
    const double beta_prime = config.beta_prime;

    SspBundle bundle;
    bundle.config = config;
    bundle.solution = avgcost_oracle(model, i0);

    TtsProblem& problem = bundle.problem;
    problem.dim_x = model.n_pairs();
    problem.dim_y = 1;
    problem.chain = joint_chain(model);
    problem.slow_noiseless = true;
    problem.norm_x = NormSpec::weighted_max(config.weights);
    problem.norm_y = NormSpec::max_abs();

    problem.f = [shared, i0, u_count](const Eigen::VectorXd& q, const Eigen::VectorXd& y, int z,
                                      Eigen::VectorXd& out) {
        out = q;
        const int i = z / u_count;
        const int u = z % u_count;
        double acc = shared->cost(i, u) - y(0);
        for (int j = 0; j < shared->n_states; ++j) {
            if (j == i0) continue;
            const double p = shared->trans(z, j);
            if (p > 0.0) acc += p * min_over_actions(q, j, u_count);
        }
        out(z) = acc;
    };
    problem.noise_x = [shared, i0, u_count](const Eigen::VectorXd& q, const Eigen::VectorXd&,
                                            int z, int z_next, Rng&, Eigen::VectorXd& out) {
        out.setZero();
        const int next_state = z_next / u_count;
        double value = next_state == i0 ? 0.0 : min_over_actions(q, next_state, u_count);
        for (int j = 0; j < shared->n_states; ++j) {
            if (j == i0) continue;
            const double p = shared->trans(z, j);
            if (p > 0.0) value -= p * min_over_actions(q, j, u_count);
        }
        out(z) = value;
    };
    problem.g = [i0, u_count, beta_prime](const Eigen::VectorXd& q, const Eigen::VectorXd& y,
                                          int, Eigen::VectorXd& out) {
        out(0) = y(0) + beta_prime * min_over_actions(q, i0, u_count);
    };

    const double pi_min = problem.chain.stationary_distribution().minCoeff();
    problem.lambda = 1.0 - (1.0 - config.lambda0) * pi_min;
    const SecantEstimate secants = estimate_slow_secants(model, i0, 20);
    problem.mu = std::max(std::abs(1.0 - beta_prime * secants.min_abs_slope),
                          std::abs(1.0 - beta_prime * secants.max_abs_slope));
    if (!(problem.mu < 1.0)) {
        throw PropertyViolated("slow relaxation gain " + format_double(beta_prime) +
                               " does not contract the gain update");
    }

    bundle.oracle.x_star = bundle.solution.q_star;
    bundle.oracle.y_star = Eigen::VectorXd::Constant(1, bundle.solution.rho_star);
    bundle.oracle.x_star_of_y = [shared, i0](const Eigen::VectorXd& y) {
        return truncated_fixed_point(*shared, i0, y(0),
                                     Eigen::VectorXd::Zero(shared->n_pairs()), 1e-13);
    };
    return bundle;
}

PolyakBundle make_polyak_problem(const MdpModel& model, double gamma) {
    validate_model(model);

    const auto shared = std::make_shared<const MdpModel>(model);
    const int u_count = model.n_actions;

    PolyakBundle bundle;
    bundle.solution = discounted_oracle(model, gamma);

    TtsProblem& problem = bundle.problem;
    problem.dim_x = model.n_pairs();
    problem.dim_y = model.n_pairs();
    problem.chain = joint_chain(model);
    problem.slow_noiseless = true;
    problem.norm_x = NormSpec::max_abs();
    problem.norm_y = NormSpec::max_abs();

    problem.f = [shared, gamma, u_count](const Eigen::VectorXd& q, const Eigen::VectorXd&, int z,
                                         Eigen::VectorXd& out) {
        out = q;
        const int i = z / u_count;
        const int u = z % u_count;
        double acc = shared->cost(i, u);
        for (int j = 0; j < shared->n_states; ++j) {
            const double p = shared->trans(z, j);
            if (p > 0.0) acc += gamma * p * min_over_actions(q, j, u_count);
        }
        out(z) = acc;
    };
    problem.noise_x = [shared, gamma, u_count](const Eigen::VectorXd& q, const Eigen::VectorXd&,
                                               int z, int z_next, Rng&, Eigen::VectorXd& out) {
        out.setZero();
        const int next_state = z_next / u_count;
        double value = min_over_actions(q, next_state, u_count);
        for (int j = 0; j < shared->n_states; ++j) {
            const double p = shared->trans(z, j);
            if (p > 0.0) value -= p * min_over_actions(q, j, u_count);
        }
        out(z) = gamma * value;
    };
    problem.g = [](const Eigen::VectorXd& q, const Eigen::VectorXd&, int, Eigen::VectorXd& out) {
        out = q;
    };

    const double pi_min = problem.chain.stationary_distribution().minCoeff();
    problem.lambda = 1.0 - pi_min * (1.0 - gamma);
    problem.mu = 0.0;

    bundle.oracle.x_star = bundle.solution.q_star;
    bundle.oracle.y_star = bundle.solution.q_star;
    const Eigen::VectorXd q_star = bundle.solution.q_star;
    bundle.oracle.x_star_of_y = [q_star](const Eigen::VectorXd&) { return q_star; };
    return bundle;
}

MdpModel garnet(int n_states, int n_actions, int branching, std::uint64_t seed) {
    if (n_states < 2 || n_actions < 1) {
        throw ConfigError("random MDPs need at least two states and one action");
    }
    branching = std::clamp(branching, 1, n_states);

    for (int attempt = 0; attempt < 1000; ++attempt) {
        Rng rng = make_rng(seed + 1000003ULL * static_cast<std::uint64_t>(attempt));
        MdpModel model;
        model.n_states = n_states;
        model.n_actions = n_actions;
        model.cost.resize(n_states, n_actions);
        model.trans = Eigen::MatrixXd::Zero(model.n_pairs(), n_states);
        model.policy =
            Eigen::MatrixXd::Constant(n_states, n_actions, 1.0 / static_cast<double>(n_actions));
        for (int i = 0; i < n_states; ++i) {
            for (int u = 0; u < n_actions; ++u) {
                model.cost(i, u) = uniform01(rng);
                const int z = model.pair_index(i, u);
                // Partial Fisher-Yates pick of `branching` distinct targets.
                std::vector<int> targets(static_cast<size_t>(n_states));
                for (int j = 0; j < n_states; ++j) targets[static_cast<size_t>(j)] = j;
                for (int k = 0; k < branching; ++k) {
                    const int pick = k + uniform_int(rng, n_states - k);
                    std::swap(targets[static_cast<size_t>(k)], targets[static_cast<size_t>(pick)]);
                }
                double total = 0.0;
                std::vector<double> mass(static_cast<size_t>(branching));
                for (int k = 0; k < branching; ++k) {
                    mass[static_cast<size_t>(k)] = 0.05 - std::log(1.0 - uniform01(rng));
                    total += mass[static_cast<size_t>(k)];
                }
                for (int k = 0; k < branching; ++k) {
                    model.trans(z, targets[static_cast<size_t>(k)]) =
                        mass[static_cast<size_t>(k)] / total;
                }
            }
        }
        try {
            joint_chain(model);
            ssp_weights(model, 0);
        } catch (const Error&) {
            continue;
        }
        return model;
    }
    throw Unreachable("no acceptable random MDP found for this seed");
}

MdpFile load_mdp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open MDP file: " + path);
    MdpFile file;
    MdpModel& model = file.model;
    if (!(in >> model.n_states >> model.n_actions >> file.reference_state)) {
        throw ConfigError("MDP file must start with n_states n_actions reference_state: " + path);
    }
    if (model.n_states <= 0 || model.n_actions <= 0) {
        throw ConfigError("MDP file declares an empty model: " + path);
    }
    const auto read_matrix = [&](Eigen::MatrixXd& m, long rows, long cols, const char* what) {
        m.resize(rows, cols);
        for (long i = 0; i < rows; ++i) {
            for (long j = 0; j < cols; ++j) {
                if (!(in >> m(i, j))) {
                    throw ConfigError(std::string("MDP file truncated in ") + what + ": " + path);
                }
            }
        }
    };
    read_matrix(model.cost, model.n_states, model.n_actions, "costs");
    read_matrix(model.trans, model.n_pairs(), model.n_states, "transitions");
    read_matrix(model.policy, model.n_states, model.n_actions, "policy");
    validate_model(model);
    check_reference_state(model, file.reference_state);
    return file;
}

void save_mdp(const std::string& path, const MdpModel& model, int reference_state) {
    validate_model(model);
    check_reference_state(model, reference_state);
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write MDP file: " + path);
    out << model.n_states << " " << model.n_actions << " " << reference_state << "\n";
    const auto write_matrix = [&](const Eigen::MatrixXd& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                out << (j > 0 ? " " : "") << format_double(m(i, j));
            }
            out << "\n";
        }
    };
    write_matrix(model.cost);
    write_matrix(model.trans);
    write_matrix(model.policy);
    if (!out) throw ConfigError("failed while writing MDP file: " + path);
}

}  // namespace ttsa
