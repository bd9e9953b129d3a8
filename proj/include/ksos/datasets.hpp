#pragma once

#include "ksos/common.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace ksos {

// Two interleaving half-circles of radius 1: the first spans the upper arc
// (cos t, sin t), the second is its reflection through (1, -0.5)'s trough,
// (1 - cos t, 0.5 - sin t), both for t in [0, pi]. Isotropic Gaussian noise
// of the given standard deviation is added per coordinate. Deterministic for
// a fixed seed.
inline Matrix gen_two_moons(Eigen::Index n, double noise, std::uint64_t seed) {
    require(n >= 1, "gen_two_moons: n must be >= 1");
    require(noise >= 0.0, "gen_two_moons: noise must be nonnegative");

    const Eigen::Index n_outer = n - n / 2;
    const Eigen::Index n_inner = n / 2;
    Matrix pts(n, 2);
    for (Eigen::Index i = 0; i < n_outer; ++i) {
        double t = n_outer > 1
                       ? std::numbers::pi * double(i) / double(n_outer - 1)
                       : 0.0;
        pts(i, 0) = std::cos(t);
        pts(i, 1) = std::sin(t);
    }
    for (Eigen::Index i = 0; i < n_inner; ++i) {
        double t = n_inner > 1
                       ? std::numbers::pi * double(i) / double(n_inner - 1)
                       : 0.0;
        pts(n_outer + i, 0) = 1.0 - std::cos(t);
        pts(n_outer + i, 1) = 0.5 - std::sin(t);
    }
    if (noise > 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, noise);
        for (Eigen::Index i = 0; i < n; ++i) {
            pts(i, 0) += gauss(rng);
            pts(i, 1) += gauss(rng);
        }
    }
    return pts;
}

}  // namespace ksos
