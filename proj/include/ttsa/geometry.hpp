#pragma once

#include <Eigen/Dense>
#include <string>

#include "ttsa/rng.hpp"

namespace ttsa {

enum class NormKind { euclidean, max_abs, weighted_max };

/// A base norm on R^d: the Euclidean norm, the max-abs norm, or a weighted
/// max norm max_j |w_j x_j| with strictly positive weights.
class NormSpec {
public:
    static NormSpec euclidean();
    static NormSpec max_abs();
    /// Throws DimensionMismatch on empty weights, PropertyViolated on w_j <= 0.
    static NormSpec weighted_max(Eigen::VectorXd weights);

    NormKind kind() const { return kind_; }
    /// Weights for weighted_max; empty otherwise.
    const Eigen::VectorXd& weights() const { return weights_; }

    /// Norm value. Throws DimensionMismatch if weighted and sizes disagree.
    double operator()(const Eigen::VectorXd& x) const;

    /// Tight constants with ell * ||x|| <= ||x||_2 <= u * ||x|| on R^dim.
    double lower_equivalence(int dim) const;
    double upper_equivalence(int dim) const;

private:
    NormSpec(NormKind kind, Eigen::VectorXd weights)
        : kind_(kind), weights_(std::move(weights)) {}
    NormKind kind_;
    Eigen::VectorXd weights_;
};

inline double norm_eval(const NormSpec& norm, const Eigen::VectorXd& x) { return norm(x); }

struct MoreauEval {
    double value = 0.0;
    Eigen::VectorXd minimizer;
};

/// Moreau smoothing of half the squared base norm in the Euclidean metric:
///   A(x) = min_v { 0.5 ||v||^2 + ||x - v||_2^2 / (2 q) }.
/// A is convex, differentiable with a (1/q)-Lipschitz gradient, and satisfies
///   (1 + q/u^2) A(x) <= 0.5 ||x||^2 <= (1 + q/ell^2) A(x)
/// for the norm-equivalence constants (ell, u) of the base norm.
class MoreauEnvelope {
public:
    /// Throws PropertyViolated for q <= 0, DimensionMismatch for dim mismatch.
    MoreauEnvelope(NormSpec base, double q, int dim);

    const NormSpec& base_norm() const { return base_; }
    double q() const { return q_; }
    int dim() const { return dim_; }
    double ell() const { return ell_; }
    double u() const { return u_; }

    /// Exact envelope value and inner minimizer (closed form per norm kind).
    MoreauEval eval(const Eigen::VectorXd& x) const;

    /// Gradient (x - v*) / q where v* is the inner minimizer.
    Eigen::VectorXd grad(const Eigen::VectorXd& x) const;

private:
    NormSpec base_;
    double q_;
    int dim_;
    double ell_;
    double u_;
};

inline MoreauEval moreau_eval(const MoreauEnvelope& env, const Eigen::VectorXd& x) {
    return env.eval(x);
}

inline Eigen::VectorXd moreau_grad(const MoreauEnvelope& env, const Eigen::VectorXd& x) {
    return env.grad(x);
}

/// Default smoothing parameter: small enough that the envelope is a faithful
/// squared-norm surrogate and stays inside the contraction margin, large
/// enough that 1/q stays usable. `contraction` may be NaN when unknown.
double default_smoothing(double ell, double contraction);

/// Outcome of a sampled geometric property check.
struct GeometryReport {
    std::string property;
    int samples = 0;
    /// Smallest slack across all sampled inequalities; negative means a
    /// violation (which also throws, carrying the witness).
    double worst_slack = 0.0;
    Eigen::VectorXd witness;

    std::string csv_header() const;
    std::string csv_row() const;
};

/// Asserts the sandwich inequality at `samples` points x with coordinates
/// uniform in [-10, 10], tolerance 1e-9. Throws PropertyViolated with the
/// witness on failure.
GeometryReport sandwich_check(const MoreauEnvelope& env, int samples, Rng& rng);

/// Asserts convexity along segments and the gradient smoothness bound
///   ||grad A(x1) - grad A(x2)||_2 <= (1/q) ||x1 - x2||_2 + 1e-7
/// at `samples` sampled pairs. Throws PropertyViolated with the witness.
GeometryReport smoothness_check(const MoreauEnvelope& env, int samples, Rng& rng);

}  // namespace ttsa
