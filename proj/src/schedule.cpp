#include "ttsa/schedule.hpp"

#include <algorithm>
#include <limits>

#include "ttsa/csv.hpp"
#include "ttsa/errors.hpp"

namespace ttsa {

StepSchedule::StepSchedule(double alpha0, double beta0, double exponent_a)
    : alpha0_(alpha0), beta0_(beta0), exponent_a_(exponent_a) {
    if (!(alpha0 > 0.0) || !std::isfinite(alpha0)) {
        throw ConfigError("alpha0 must be positive, got " + format_double(alpha0));
    }
    if (!(beta0 > 0.0) || !std::isfinite(beta0)) {
        throw ConfigError("beta0 must be positive, got " + format_double(beta0));
    }
    if (!(exponent_a > 0.5) || !(exponent_a <= 1.0)) {
        throw ConfigError("exponent_a must lie in (0.5, 1], got " + format_double(exponent_a));
    }
}

double schedule_worst_slack(const StepSchedule& schedule, long n_max) {
    double worst = std::numeric_limits<double>::infinity();
    const double c1 = schedule.c1();
    const double c2 = schedule.c2();
    double a_n = schedule.alpha(0);
    double b_n = schedule.beta(0);
    for (long n = 0; n < n_max; ++n) {
        const double a_next = schedule.alpha(n + 1);
        const double b_next = schedule.beta(n + 1);
        const double slacks[6] = {
            c1 * a_next - a_n,
            c2 * a_next * a_next - (a_n - a_next),
            c1 * b_next - b_n,
            c2 * b_next * b_next - (b_n - b_next),
            a_n - a_next,                        // alpha non-increasing
            b_n / a_n - b_next / a_next,         // ratio non-increasing
        };
        worst = std::min(worst, *std::min_element(slacks, slacks + 6));
        a_n = a_next;
        b_n = b_next;
    }
    return worst;
}

}  // namespace ttsa
