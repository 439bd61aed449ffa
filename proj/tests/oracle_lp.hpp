#pragma once

// Test-only average-cost oracle: the occupation-measure linear program
//
//   minimize    sum_{i,u} cost(i,u) nu(i,u)
//   subject to  sum_u nu(j,u) = sum_{i,u} p(j|i,u) nu(i,u)   for every j,
//               sum_{i,u} nu(i,u) = 1,   nu >= 0,
//
// whose optimal value is the optimal average cost of a unichain MDP. Solved
// with a dense two-phase simplex using Bland's rule. This is deliberately a
// completely independent code path from the production dynamic-programming
// oracle; the two must agree to 1e-6.

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "ttsa/mdp.hpp"

namespace lp_oracle {

struct Tableau {
    // rows x (n_vars + 1); last column is the RHS.
    Eigen::MatrixXd t;
    std::vector<int> basis;  // basic variable per row
};

// Minimizes c^T v subject to the rows already in the tableau, starting from
// the given basis. Bland's rule: entering variable is the smallest index with
// reduced cost < -eps; leaving row is the ratio-test argmin with the smallest
// basic variable index. Returns the optimal objective.
inline double simplex_minimize(Tableau& tab, const Eigen::VectorXd& cost, int n_vars) {
    const double eps = 1e-9;
    const auto rows = tab.t.rows();
    for (int iter = 0; iter < 20000; ++iter) {
        // Reduced costs: c_j - c_B^T B^-1 A_j, with the tableau kept in
        // B^-1-applied form, so c_B^T row_r uses the basis costs directly.
        int entering = -1;
        for (int j = 0; j < n_vars; ++j) {
            double red = cost[j];
            for (Eigen::Index r = 0; r < rows; ++r) red -= cost[tab.basis[r]] * tab.t(r, j);
            if (red < -eps) {
                entering = j;
                break;  // Bland: smallest index
            }
        }
        if (entering < 0) {
            double obj = 0.0;
            for (Eigen::Index r = 0; r < rows; ++r)
                obj += cost[tab.basis[r]] * tab.t(r, n_vars);
            return obj;
        }
        int leave_row = -1;
        double best_ratio = 0.0;
        for (Eigen::Index r = 0; r < rows; ++r) {
            const double a = tab.t(r, entering);
            if (a > eps) {
                const double ratio = tab.t(r, n_vars) / a;
                if (leave_row < 0 || ratio < best_ratio - eps ||
                    (ratio < best_ratio + eps && tab.basis[r] < tab.basis[leave_row])) {
                    leave_row = static_cast<int>(r);
                    best_ratio = ratio;
                }
            }
        }
        if (leave_row < 0) throw std::runtime_error("lp oracle: unbounded");
        // Pivot.
        tab.t.row(leave_row) /= tab.t(leave_row, entering);
        for (Eigen::Index r = 0; r < rows; ++r) {
            if (r == leave_row) continue;
            const double factor = tab.t(r, entering);
            if (factor != 0.0) tab.t.row(r) -= factor * tab.t.row(leave_row);
        }
        tab.basis[leave_row] = entering;
    }
    throw std::runtime_error("lp oracle: iteration cap");
}

// Optimal average cost by the occupation-measure LP.
inline double average_cost(const ttsa::MdpModel& mdp) {
    const int S = mdp.n_states;
    const int U = mdp.n_actions;
    const int N = S * U;
    // Drop the balance row for state 0 (the S balance rows are linearly
    // dependent given stochastic kernels), keep normalization.
    const int n_rows = S;  // (S-1) balance rows + 1 normalization
    const int n_total = N + n_rows;  // original vars + one artificial per row

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_rows, n_total + 1);
    for (int j = 1; j < S; ++j) {
        const int r = j - 1;
        for (int u = 0; u < U; ++u) a(r, mdp.pair_index(j, u)) += 1.0;
        for (int i = 0; i < S; ++i)
            for (int u = 0; u < U; ++u)
                a(r, mdp.pair_index(i, u)) -= mdp.trans(mdp.pair_index(i, u), j);
        a(r, n_total) = 0.0;
    }
    for (int m = 0; m < N; ++m) a(n_rows - 1, m) = 1.0;
    a(n_rows - 1, n_total) = 1.0;

    // Make RHS nonnegative (it already is: zeros and one), add artificials.
    Tableau tab;
    tab.t = a;
    tab.basis.resize(n_rows);
    for (int r = 0; r < n_rows; ++r) {
        tab.t(r, N + r) = 1.0;
        tab.basis[r] = N + r;
    }

    // Phase 1: drive artificials to zero.
    Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n_total);
    phase1.segment(N, n_rows).setOnes();
    const double infeas = simplex_minimize(tab, phase1, n_total);
    if (infeas > 1e-7) throw std::runtime_error("lp oracle: infeasible");

    // Pivot any artificial that is still basic out of the basis when possible.
    for (int r = 0; r < n_rows; ++r) {
        if (tab.basis[r] >= N) {
            for (int j = 0; j < N; ++j) {
                if (std::abs(tab.t(r, j)) > 1e-7) {
                    tab.t.row(r) /= tab.t(r, j);
                    for (int rr = 0; rr < n_rows; ++rr) {
                        if (rr == r) continue;
                        const double factor = tab.t(rr, j);
                        if (factor != 0.0) tab.t.row(rr) -= factor * tab.t.row(r);
                    }
                    tab.basis[r] = j;
                    break;
                }
            }
        }
    }

    // Phase 2: forbid artificials by pricing them prohibitively.
    Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(n_total);
    for (int i = 0; i < S; ++i)
        for (int u = 0; u < U; ++u) phase2[mdp.pair_index(i, u)] = mdp.cost(i, u);
    phase2.segment(N, n_rows).setConstant(1e9);
    return simplex_minimize(tab, phase2, n_total);
}

}  // namespace lp_oracle
