#pragma once

// Test-only oracles for the smoothed squared-norm surrogate
//   A(x) = min_v { 0.5 ||v||^2 + ||x - v||_2^2 / (2q) }.
//
// For max-type base norms the minimizer clamps each coordinate at a common
// level t of the base norm, so the objective reduces to a one-dimensional
// convex function of t minimized here by golden-section search. A separate
// literal grid-refinement oracle and a finite-difference gradient oracle are
// kept as well. All three are independent of the production closed forms.

#include <Eigen/Dense>
#include <cmath>
#include <functional>

namespace moreau_oracle {

// Objective at clamp level t >= 0 for base norm max_j |w_j v_j|.
inline double level_objective(const Eigen::VectorXd& x, const Eigen::VectorXd& w, double q,
                              double t) {
    double value = 0.5 * t * t;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double gap = std::abs(x[j]) - t / w[j];
        if (gap > 0.0) value += gap * gap / (2.0 * q);
    }
    return value;
}

// Golden-section minimization of the level objective over [0, max_j w_j|x_j|].
inline double golden_section_value(const Eigen::VectorXd& x, const Eigen::VectorXd& w, double q) {
    double lo = 0.0;
    double hi = 0.0;
    for (Eigen::Index j = 0; j < x.size(); ++j) hi = std::max(hi, w[j] * std::abs(x[j]));
    if (hi == 0.0) return 0.0;
    const double phi = 0.6180339887498948482;
    double m1 = hi - phi * (hi - lo);
    double m2 = lo + phi * (hi - lo);
    double f1 = level_objective(x, w, q, m1);
    double f2 = level_objective(x, w, q, m2);
    for (int it = 0; it < 200 && hi - lo > 1e-13 * (1.0 + hi); ++it) {
        if (f1 <= f2) {
            hi = m2;
            m2 = m1;
            f2 = f1;
            m1 = hi - phi * (hi - lo);
            f1 = level_objective(x, w, q, m1);
        } else {
            lo = m1;
            m1 = m2;
            f1 = f2;
            m2 = lo + phi * (hi - lo);
            f2 = level_objective(x, w, q, m2);
        }
    }
    return level_objective(x, w, q, 0.5 * (lo + hi));
}

// Literal 2-D grid search over v in [-span, span]^2 at the given resolution,
// for an arbitrary base-norm callable. Only used for tiny frozen examples.
inline double grid_value_2d(const Eigen::VectorXd& x,
                            const std::function<double(const Eigen::VectorXd&)>& base_norm,
                            double q, double span, double resolution) {
    double best = std::numeric_limits<double>::infinity();
    Eigen::VectorXd v(2);
    const long steps = std::lround(2.0 * span / resolution);
    for (long i = 0; i <= steps; ++i) {
        v[0] = -span + static_cast<double>(i) * resolution;
        for (long j = 0; j <= steps; ++j) {
            v[1] = -span + static_cast<double>(j) * resolution;
            const double n = base_norm(v);
            const double obj = 0.5 * n * n + (x - v).squaredNorm() / (2.0 * q);
            best = std::min(best, obj);
        }
    }
    return best;
}

// Central finite differences of a scalar field.
inline Eigen::VectorXd finite_difference_grad(const std::function<double(const Eigen::VectorXd&)>& f,
                                              const Eigen::VectorXd& x) {
    Eigen::VectorXd g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = 1e-6 * (1.0 + std::abs(x[i]));
        Eigen::VectorXd xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        g[i] = (f(xp) - f(xm)) / (2.0 * h);
    }
    return g;
}

}  // namespace moreau_oracle
