#pragma once

#include <cmath>

namespace ttsa {

/// Polynomial step-size pair
///   alpha(n) = alpha0 / (n+1)^a,   beta(n) = beta0 / (n+1),
/// with a in (0.5, 1]. The value a = 1 puts both iterates on the 1/n regime;
/// a < 1 separates the timescales (beta(n)/alpha(n) -> 0).
///
/// For every n >= 0 the pair satisfies
///   alpha(n)   <= c1() * alpha(n+1),
///   alpha(n) - alpha(n+1) <= c2() * alpha(n+1)^2,
/// the same two bounds for beta, and beta(n)/alpha(n) is non-increasing.
class StepSchedule {
public:
    /// Throws ConfigError unless alpha0 > 0, beta0 > 0, 0.5 < exponent_a <= 1.
    StepSchedule(double alpha0, double beta0, double exponent_a);

    double alpha0() const { return alpha0_; }
    double beta0() const { return beta0_; }
    double exponent_a() const { return exponent_a_; }

    double alpha(long n) const { return alpha0_ / std::pow(static_cast<double>(n) + 1.0, exponent_a_); }
    double beta(long n) const { return beta0_ / (static_cast<double>(n) + 1.0); }
    double ratio(long n) const { return beta(n) / alpha(n); }

    double c1() const { return 2.0; }
    double c2() const { return 2.0 / (alpha0_ < beta0_ ? alpha0_ : beta0_); }

private:
    double alpha0_;
    double beta0_;
    double exponent_a_;
};

/// Smallest slack across the six schedule inequalities over n in [0, n_max]
/// (the four step bounds above plus monotonicity of both sequences and of the
/// ratio). Negative means some inequality failed.
double schedule_worst_slack(const StepSchedule& schedule, long n_max);

}  // namespace ttsa
