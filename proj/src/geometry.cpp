#include "ttsa/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <vector>

#include "ttsa/csv.hpp"
#include "ttsa/errors.hpp"

namespace ttsa {

namespace {

std::string vector_text(const Eigen::VectorXd& x) {
    std::ostringstream out;
    out << "[";
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (i > 0) out << ", ";
        out << format_double(x(i));
    }
    out << "]";
    return out.str();
}

}  // namespace

NormSpec NormSpec::euclidean() { return NormSpec(NormKind::euclidean, {}); }

NormSpec NormSpec::max_abs() { return NormSpec(NormKind::max_abs, {}); }

NormSpec NormSpec::weighted_max(Eigen::VectorXd weights) {
    if (weights.size() == 0) throw DimensionMismatch("weighted_max needs at least one weight");
    for (Eigen::Index j = 0; j < weights.size(); ++j) {
        if (!(weights(j) > 0.0) || !std::isfinite(weights(j))) {
            throw PropertyViolated("weight " + std::to_string(j) + " is not strictly positive: " +
                                   format_double(weights(j)));
        }
    }
    return NormSpec(NormKind::weighted_max, std::move(weights));
}

double NormSpec::operator()(const Eigen::VectorXd& x) const {
    switch (kind_) {
        case NormKind::euclidean:
            return x.norm();
        case NormKind::max_abs:
            return x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff();
        case NormKind::weighted_max: {
            if (x.size() != weights_.size()) {
                throw DimensionMismatch("weighted norm of size-" + std::to_string(x.size()) +
                                        " vector with " + std::to_string(weights_.size()) +
                                        " weights");
            }
            double best = 0.0;
            for (Eigen::Index j = 0; j < x.size(); ++j) {
                best = std::max(best, weights_(j) * std::abs(x(j)));
            }
            return best;
        }
    }
    return 0.0;
}

double NormSpec::lower_equivalence(int dim) const {
    switch (kind_) {
        case NormKind::euclidean:
            return 1.0;
        case NormKind::max_abs:
            return 1.0;
        case NormKind::weighted_max:
            return 1.0 / weights_.maxCoeff();
    }
    (void)dim;
    return 1.0;
}

double NormSpec::upper_equivalence(int dim) const {
    switch (kind_) {
        case NormKind::euclidean:
            return 1.0;
        case NormKind::max_abs:
            return std::sqrt(static_cast<double>(dim));
        case NormKind::weighted_max:
            // ||x||_2^2 <= sum_j (||x||_w / w_j)^2, attained by x_j = t / w_j.
            return std::sqrt(weights_.cwiseInverse().squaredNorm());
    }
    return 1.0;
}

MoreauEnvelope::MoreauEnvelope(NormSpec base, double q, int dim)
    : base_(std::move(base)), q_(q), dim_(dim) {
    if (!(q > 0.0) || !std::isfinite(q)) {
        throw PropertyViolated("smoothing parameter must be positive, got " + format_double(q));
    }
    if (dim <= 0) throw DimensionMismatch("envelope dimension must be positive");
    if (base_.kind() == NormKind::weighted_max && base_.weights().size() != dim) {
        throw DimensionMismatch("weighted norm has " + std::to_string(base_.weights().size()) +
                                " weights, envelope dimension is " + std::to_string(dim));
    }
    ell_ = base_.lower_equivalence(dim);
    u_ = base_.upper_equivalence(dim);
}

MoreauEval MoreauEnvelope::eval(const Eigen::VectorXd& x) const {
    if (x.size() != dim_) {
        throw DimensionMismatch("envelope of dimension " + std::to_string(dim_) +
                                " evaluated at size-" + std::to_string(x.size()) + " vector");
    }
    if (!x.allFinite()) throw SolverDiverged("envelope evaluated at a non-finite point");

    MoreauEval result;
    if (base_.kind() == NormKind::euclidean) {
        result.minimizer = x / (1.0 + q_);
    } else {
        // Level-variable form: with t = ||v||_w the optimal v clamps each
        // coordinate to |v_j| <= t / w_j, so the objective reduces to
        //   psi(t) = t^2/2 + sum_j max(w_j |x_j| - t, 0)^2 / (2 q w_j^2),
        // a convex piecewise quadratic whose minimizer satisfies
        //   t = (sum_{active} s_j / w_j^2) / (q + sum_{active} 1 / w_j^2),
        // where s_j = w_j |x_j| and "active" means s_j > t. Scanning the
        // sorted breakpoints finds the consistent active set.
        const bool weighted = base_.kind() == NormKind::weighted_max;
        std::vector<double> s(static_cast<size_t>(dim_));
        std::vector<double> inv_w_sq(static_cast<size_t>(dim_));
        for (int j = 0; j < dim_; ++j) {
            const double w = weighted ? base_.weights()(j) : 1.0;
            s[static_cast<size_t>(j)] = w * std::abs(x(j));
            inv_w_sq[static_cast<size_t>(j)] = 1.0 / (w * w);
        }
        std::vector<int> order(static_cast<size_t>(dim_));
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return s[static_cast<size_t>(a)] > s[static_cast<size_t>(b)];
        });

        const double top = s[static_cast<size_t>(order[0])];
        double t = 0.0;
        if (top > 0.0) {
            const double tol = 1e-12 * (1.0 + top);
            double sum_s = 0.0, sum_w = 0.0;
            bool found = false;
            for (int k = 0; k < dim_; ++k) {
                const size_t j = static_cast<size_t>(order[static_cast<size_t>(k)]);
                sum_s += s[j] * inv_w_sq[j];
                sum_w += inv_w_sq[j];
                const double candidate = sum_s / (q_ + sum_w);
                const double next = (k + 1 < dim_) ? s[static_cast<size_t>(order[static_cast<size_t>(k + 1)])] : 0.0;
                if (candidate <= s[j] + tol && candidate >= next - tol) {
                    t = candidate;
                    found = true;
                    break;
                }
            }
            if (!found) {
                throw SolverDiverged("no consistent active set for the envelope at " +
                                     vector_text(x));
            }
        }
        result.minimizer.resize(dim_);
        for (int j = 0; j < dim_; ++j) {
            const double w = weighted ? base_.weights()(j) : 1.0;
            const double cap = t / w;
            result.minimizer(j) = std::clamp(x(j), -cap, cap);
        }
    }
    const double base_value = base_(result.minimizer);
    result.value = 0.5 * base_value * base_value +
                   (x - result.minimizer).squaredNorm() / (2.0 * q_);
    return result;
}

Eigen::VectorXd MoreauEnvelope::grad(const Eigen::VectorXd& x) const {
    return (x - eval(x).minimizer) / q_;
}

double default_smoothing(double ell, double contraction) {
    double q;
    if (std::isnan(contraction)) {
        q = 0.01;
    } else {
        q = 0.1 * std::min(ell * ell, (1.0 - contraction) / (2.0 * contraction + 1.0));
    }
    return std::clamp(q, 1e-6, 1.0);
}

std::string GeometryReport::csv_header() const { return "property,samples,worst_slack,witness"; }

std::string GeometryReport::csv_row() const {
    std::string witness_text;
    for (Eigen::Index i = 0; i < witness.size(); ++i) {
        if (i > 0) witness_text += ";";
        witness_text += format_double(witness(i));
    }
    return property + "," + std::to_string(samples) + "," + format_double(worst_slack) + "," +
           witness_text;
}

GeometryReport sandwich_check(const MoreauEnvelope& env, int samples, Rng& rng) {
    GeometryReport report;
    report.property = "sandwich";
    report.samples = samples;
    report.worst_slack = std::numeric_limits<double>::infinity();
    const double lo_factor = 1.0 + env.q() / (env.u() * env.u());
    const double hi_factor = 1.0 + env.q() / (env.ell() * env.ell());
    Eigen::VectorXd x(env.dim());
    for (int sample = 0; sample < samples; ++sample) {
        for (int j = 0; j < env.dim(); ++j) x(j) = uniform(rng, -10.0, 10.0);
        const double a = env.eval(x).value;
        const double base = env.base_norm()(x);
        const double half_sq = 0.5 * base * base;
        const double slack =
            std::min(half_sq - lo_factor * a, hi_factor * a - half_sq) + 1e-9;
        if (slack < report.worst_slack) {
            report.worst_slack = slack;
            report.witness = x;
        }
        if (slack < 0.0) {
            throw PropertyViolated("sandwich inequality failed at x = " + vector_text(x) +
                                   ": A(x) = " + format_double(a) +
                                   ", 0.5||x||^2 = " + format_double(half_sq));
        }
    }
    return report;
}

GeometryReport smoothness_check(const MoreauEnvelope& env, int samples, Rng& rng) {
    GeometryReport report;
    report.property = "smoothness";
    report.samples = samples;
    report.worst_slack = std::numeric_limits<double>::infinity();
    Eigen::VectorXd x1(env.dim()), x2(env.dim());
    for (int sample = 0; sample < samples; ++sample) {
        for (int j = 0; j < env.dim(); ++j) {
            x1(j) = uniform(rng, -10.0, 10.0);
            x2(j) = uniform(rng, -10.0, 10.0);
        }
        const MoreauEval e1 = env.eval(x1);
        const MoreauEval e2 = env.eval(x2);
        const Eigen::VectorXd g1 = env.grad(x1);
        const Eigen::VectorXd g2 = env.grad(x2);
        const double linear = e1.value + g1.dot(x2 - x1);
        // Convexity (first-order lower bound), the descent upper bound, and
        // gradient Lipschitzness with constant 1/q.
        const double convexity = e2.value - linear + 1e-8;
        const double descent =
            linear + (x2 - x1).squaredNorm() / (2.0 * env.q()) - e2.value + 1e-8;
        const double lipschitz =
            (x1 - x2).norm() / env.q() - (g1 - g2).norm() + 1e-7;
        const double slack = std::min({convexity, descent, lipschitz});
        if (slack < report.worst_slack) {
            report.worst_slack = slack;
            report.witness = x1;
        }
        if (slack < 0.0) {
            throw PropertyViolated("smoothness check failed between x1 = " + vector_text(x1) +
                                   " and x2 = " + vector_text(x2));
        }
    }
    return report;
}

}  // namespace ttsa
