#pragma once

#include "ksos/common.hpp"
#include "ksos/sos_model.hpp"

#include <vector>

namespace ksos {

// Regular evaluation grid: `resolution` equispaced points per axis,
// endpoints included.
struct GridSpec {
    Vector lower;
    Vector upper;
    Eigen::Index resolution = 2;

    Eigen::Index dim() const { return lower.size(); }
    Eigen::Index total() const {
        Eigen::Index t = 1;
        for (Eigen::Index k = 0; k < dim(); ++k) t *= resolution;
        return t;
    }

    void validate() const {
        require_dims(lower.size() == upper.size(),
                     "grid: bound dimensions differ");
        require(lower.size() >= 1, "grid: empty bounds");
        require((lower.array() < upper.array()).all(),
                "grid: lower bounds must be strictly below upper bounds");
        require(resolution >= 2, "grid: resolution must be >= 2");
    }
};

// Rows of (coordinates..., p(x)), ordered lexicographically by grid index
// (first axis slowest). Deterministic and order-independent of evaluation.
inline Matrix eval_density_grid(const SosDensityModel& model,
                                const GridSpec& grid) {
    grid.validate();
    const Eigen::Index d = grid.dim();
    require_dims(d == model.support().dim(), "grid: dimension mismatch");
    const Eigen::Index res = grid.resolution;
    const Eigen::Index total = grid.total();

    Matrix points(total, d);
    std::vector<Eigen::Index> idx(std::size_t(d), 0);
    for (Eigen::Index row = 0; row < total; ++row) {
        for (Eigen::Index k = 0; k < d; ++k)
            points(row, k) = grid.lower[k] + (grid.upper[k] - grid.lower[k]) *
                                                 double(idx[std::size_t(k)]) /
                                                 double(res - 1);
        for (Eigen::Index k = d - 1; k >= 0; --k) {  // last axis fastest
            if (++idx[std::size_t(k)] < res) break;
            idx[std::size_t(k)] = 0;
        }
    }
    Vector p = model.density_batch(points);
    Matrix out(total, d + 1);
    out.leftCols(d) = points;
    out.col(d) = p;
    return out;
}

// Trapezoidal approximation of the integral of the gridded values over the
// box; converges to the model's mass over the box as resolution grows.
inline double grid_mass(const GridSpec& grid,
                        const Eigen::Ref<const Vector>& values) {
    grid.validate();
    require_dims(values.size() == grid.total(), "grid: value count mismatch");
    const Eigen::Index d = grid.dim();
    const Eigen::Index res = grid.resolution;
    double cell = 1.0;
    for (Eigen::Index k = 0; k < d; ++k)
        cell *= (grid.upper[k] - grid.lower[k]) / double(res - 1);

    double total = 0.0;
    std::vector<Eigen::Index> idx(std::size_t(d), 0);
    for (Eigen::Index row = 0; row < values.size(); ++row) {
        double w = 1.0;
        for (Eigen::Index k = 0; k < d; ++k) {
            Eigen::Index i = idx[std::size_t(k)];
            if (i == 0 || i == res - 1) w *= 0.5;
        }
        total += w * values[row];
        for (Eigen::Index k = d - 1; k >= 0; --k) {
            if (++idx[std::size_t(k)] < res) break;
            idx[std::size_t(k)] = 0;
        }
    }
    return total * cell;
}

}  // namespace ksos
