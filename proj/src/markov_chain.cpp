#include "ttsa/markov_chain.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "ttsa/csv.hpp"
#include "ttsa/errors.hpp"

namespace ttsa {

namespace {

// Strong connectivity of the positive-entry digraph: every state reachable
// from 0 and 0 reachable from every state.
bool strongly_connected(const Eigen::MatrixXd& k) {
    const int n = static_cast<int>(k.rows());
    std::vector<char> fwd(n, 0), bwd(n, 0);
    std::vector<int> stack;
    stack.push_back(0);
    fwd[0] = 1;
    while (!stack.empty()) {
        const int i = stack.back();
        stack.pop_back();
        for (int j = 0; j < n; ++j) {
            if (!fwd[j] && k(i, j) > 0.0) {
                fwd[j] = 1;
                stack.push_back(j);
            }
        }
    }
    stack.push_back(0);
    bwd[0] = 1;
    while (!stack.empty()) {
        const int j = stack.back();
        stack.pop_back();
        for (int i = 0; i < n; ++i) {
            if (!bwd[i] && k(i, j) > 0.0) {
                bwd[i] = 1;
                stack.push_back(i);
            }
        }
    }
    for (int i = 0; i < n; ++i) {
        if (!fwd[i] || !bwd[i]) return false;
    }
    return true;
}

Eigen::VectorXd solve_stationary(const Eigen::MatrixXd& k) {
    const int n = static_cast<int>(k.rows());
    // Overdetermined system [P^T - I; 1^T] pi = [0; 1], solved by QR.
    Eigen::MatrixXd a(n + 1, n);
    a.topRows(n) = k.transpose() - Eigen::MatrixXd::Identity(n, n);
    a.row(n).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n + 1);
    b(n) = 1.0;
    Eigen::VectorXd pi = a.colPivHouseholderQr().solve(b);
    const double residual = (a * pi - b).cwiseAbs().maxCoeff();
    if (!pi.allFinite() || residual > 1e-10) {
        throw SingularSystem("stationary distribution solve failed, residual " +
                             format_double(residual));
    }
    for (int i = 0; i < n; ++i) {
        if (pi(i) < -1e-10) {
            throw SingularSystem("stationary distribution has negative mass at state " +
                                 std::to_string(i));
        }
        if (pi(i) < 0.0) pi(i) = 0.0;
    }
    pi /= pi.sum();
    return pi;
}

}  // namespace

FiniteMarkovChain::FiniteMarkovChain(Eigen::MatrixXd kernel) : kernel_(std::move(kernel)) {
    const auto n = kernel_.rows();
    if (n == 0 || kernel_.cols() != n) {
        throw DimensionMismatch("transition matrix must be square and non-empty, got " +
                                std::to_string(kernel_.rows()) + "x" +
                                std::to_string(kernel_.cols()));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        double row_sum = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double p = kernel_(i, j);
            if (!std::isfinite(p) || p < 0.0 || p > 1.0 + 1e-12) {
                throw ReducibleChain("transition probability out of [0, 1] at (" +
                                     std::to_string(i) + ", " + std::to_string(j) + "): " +
                                     format_double(p));
            }
            row_sum += p;
        }
        if (std::abs(row_sum - 1.0) > 1e-12) {
            throw ReducibleChain("row " + std::to_string(i) + " sums to " +
                                 format_double(row_sum) + ", not 1");
        }
    }
    if (!strongly_connected(kernel_)) {
        throw ReducibleChain("transition matrix is not irreducible");
    }
    stationary_ = solve_stationary(kernel_);
}

FiniteMarkovChain FiniteMarkovChain::degenerate() {
    return FiniteMarkovChain(Eigen::MatrixXd::Ones(1, 1));
}

FiniteMarkovChain FiniteMarkovChain::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open chain file: " + path);
    long n = 0;
    if (!(in >> n) || n <= 0) throw ConfigError("chain file must start with n_states: " + path);
    Eigen::MatrixXd k(n, n);
    for (long i = 0; i < n; ++i) {
        for (long j = 0; j < n; ++j) {
            if (!(in >> k(i, j))) {
                throw ConfigError("chain file truncated at row " + std::to_string(i) + ": " + path);
            }
        }
    }
    return FiniteMarkovChain(std::move(k));
}

int FiniteMarkovChain::sample_step(int state, Rng& rng) const {
    const double u = uniform01(rng);
    const auto n = kernel_.rows();
    double acc = 0.0;
    for (Eigen::Index j = 0; j + 1 < n; ++j) {
        acc += kernel_(state, j);
        if (u < acc) return static_cast<int>(j);
    }
    return static_cast<int>(n - 1);
}

PoissonSolution poisson_solve(const FiniteMarkovChain& chain, const Eigen::MatrixXd& h,
                              int reference_state) {
    const int n = chain.n_states();
    if (h.rows() != n) {
        throw DimensionMismatch("h has " + std::to_string(h.rows()) + " rows, chain has " +
                                std::to_string(n) + " states");
    }
    if (reference_state < 0 || reference_state >= n) {
        throw DimensionMismatch("reference state " + std::to_string(reference_state) +
                                " outside {0, ..., " + std::to_string(n - 1) + "}");
    }
    const Eigen::VectorXd& pi = chain.stationary_distribution();
    for (Eigen::Index c = 0; c < h.cols(); ++c) {
        const double mean = pi.dot(h.col(c));
        if (std::abs(mean) > 1e-8) {
            throw NonCenteredInput("column " + std::to_string(c) +
                                   " has stationary mean " + format_double(mean));
        }
    }
    // (I - P) V = h with the reference row replaced by the pin V(i0) = 0.
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - chain.kernel();
    Eigen::MatrixXd rhs = h;
    a.row(reference_state).setZero();
    a(reference_state, reference_state) = 1.0;
    rhs.row(reference_state).setZero();
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    Eigen::MatrixXd v = lu.solve(rhs);
    const double scale = 1.0 + h.cwiseAbs().maxCoeff();
    const double residual = (a * v - rhs).cwiseAbs().maxCoeff();
    if (!v.allFinite() || residual > 1e-8 * scale) {
        throw SingularSystem("pinned Poisson system is numerically singular, residual " +
                             format_double(residual));
    }
    v.row(reference_state).setZero();  // pin exactly
    return PoissonSolution{std::move(v), reference_state};
}

std::string DecompositionReport::csv_header() const {
    return "n_steps,worst_conditional_mean,worst_conditional_se,worst_cell_count,"
           "max_identity_residual";
}

std::string DecompositionReport::csv_row() const {
    return std::to_string(n_steps) + "," + format_double(worst_conditional_mean) + "," +
           format_double(worst_conditional_se) + "," + std::to_string(worst_cell_count) + "," +
           format_double(max_identity_residual);
}

DecompositionReport markov_noise_decomposition_check(const FiniteMarkovChain& chain,
                                                     const Eigen::MatrixXd& h, long n_steps,
                                                     Rng& rng) {
    const int n = chain.n_states();
    const int dim = static_cast<int>(h.cols());
    const PoissonSolution sol = poisson_solve(chain, h, 0);
    const Eigen::MatrixXd& v = sol.values;
    const Eigen::MatrixXd pv = chain.kernel() * v;  // row i = E[V(Z') | Z = i]

    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n, dim);
    Eigen::MatrixXd sum_sq = Eigen::MatrixXd::Zero(n, dim);
    Eigen::VectorXd count = Eigen::VectorXd::Zero(n);

    DecompositionReport report;
    report.n_steps = n_steps;
    int z = 0;
    for (long m = 0; m < n_steps; ++m) {
        const int z_next = chain.sample_step(z, rng);
        count(z) += 1.0;
        for (int c = 0; c < dim; ++c) {
            const double vtilde = v(z_next, c) - pv(z, c);
            sum(z, c) += vtilde;
            sum_sq(z, c) += vtilde * vtilde;
            const double residual = std::abs(h(z, c) - (vtilde + v(z, c) - v(z_next, c)));
            if (residual > report.max_identity_residual) {
                report.max_identity_residual = residual;
            }
        }
        z = z_next;
    }
    for (int i = 0; i < n; ++i) {
        if (count(i) < 2.0) continue;
        for (int c = 0; c < dim; ++c) {
            const double mean = sum(i, c) / count(i);
            if (std::abs(mean) >= std::abs(report.worst_conditional_mean)) {
                const double var =
                    (sum_sq(i, c) - count(i) * mean * mean) / (count(i) - 1.0);
                report.worst_conditional_mean = mean;
                report.worst_conditional_se = std::sqrt(std::max(var, 0.0) / count(i));
                report.worst_cell_count = static_cast<long>(count(i));
            }
        }
    }
    return report;
}

}  // namespace ttsa
