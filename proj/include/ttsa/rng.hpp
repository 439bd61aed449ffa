#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>

namespace ttsa {

/// Deterministic RNG for the whole library. All sampling helpers below are
/// written against the raw 64-bit stream so results are identical across
/// standard-library implementations.
using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

/// Integer uniform on {0, ..., n-1} by rejection, bias-free.
inline int uniform_int(Rng& rng, int n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % static_cast<std::uint64_t>(n));
    std::uint64_t v = rng();
    while (v >= limit) v = rng();
    return static_cast<int>(v % static_cast<std::uint64_t>(n));
}

/// Standard normal pair via Box-Muller. Consumes exactly two draws.
inline void normal_pair(Rng& rng, double& a, double& b) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 6.283185307179586476925286766559 * u2;
    a = r * std::cos(t);
    b = r * std::sin(t);
}

inline double normal(Rng& rng) {
    double a, b;
    normal_pair(rng, a, b);
    (void)b;
    return a;
}

/// Fills out with independent standard normals.
inline void fill_normal(Rng& rng, Eigen::VectorXd& out) {
    const auto n = out.size();
    for (Eigen::Index i = 0; i + 1 < n; i += 2) {
        normal_pair(rng, out[i], out[i + 1]);
    }
    if (n % 2 != 0) out[n - 1] = normal(rng);
}

/// Uniform point on the sphere of the given radius (isotropic, bounded noise).
inline void fill_sphere(Rng& rng, double radius, Eigen::VectorXd& out) {
    double norm = 0.0;
    do {
        fill_normal(rng, out);
        norm = out.norm();
    } while (norm < 1e-12);
    out *= radius / norm;
}

/// Samples an index from a probability row by CDF scan.
/// The final index absorbs any rounding slack.
inline int sample_categorical(Rng& rng, const Eigen::VectorXd& probs) {
    const double u = uniform01(rng);
    double acc = 0.0;
    const auto n = probs.size();
    for (Eigen::Index j = 0; j + 1 < n; ++j) {
        acc += probs[j];
        if (u < acc) return static_cast<int>(j);
    }
    return static_cast<int>(n - 1);
}

}  // namespace ttsa
