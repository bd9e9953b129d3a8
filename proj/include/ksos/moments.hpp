#pragma once

#include "ksos/common.hpp"
#include "ksos/kernel.hpp"
#include "ksos/quadrature.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace ksos {

enum class MeasureKind { LebesgueRd, LebesgueBox };

// Reference measure the densities integrate against: Lebesgue on R^d, or
// Lebesgue restricted to an axis-aligned box.
class ReferenceMeasure {
  public:
    static ReferenceMeasure lebesgue_rd() { return ReferenceMeasure(); }

    static ReferenceMeasure box(Vector lower, Vector upper) {
        require_dims(lower.size() == upper.size(),
                     "box measure: bound dimensions differ");
        require((lower.array() < upper.array()).all(),
                "box measure: lower bounds must be strictly below upper bounds");
        ReferenceMeasure m;
        m.kind_ = MeasureKind::LebesgueBox;
        m.lower_ = std::move(lower);
        m.upper_ = std::move(upper);
        return m;
    }

    MeasureKind kind() const { return kind_; }
    const Vector& lower() const { return lower_; }
    const Vector& upper() const { return upper_; }

  private:
    ReferenceMeasure() = default;
    MeasureKind kind_ = MeasureKind::LebesgueRd;
    Vector lower_, upper_;
};

enum class MomentProvenance { ClosedFormGaussian, Quadrature };

// Dense moments of the kernel sections against the reference measure:
//   W_pq  = int k(x, s_p) k(x, s_q) drho(x)
//   u_pqr = int k(x, s_p) k(x, s_q) k(x, s_r) drho(x)
// u is stored as an (m^2 x m) matrix with row index p + q*m and column r,
// so both contractions used by the solver are single mat-vec products.
// Memory is the limiting factor: m^3 doubles (1 GiB at m = 512).
struct MomentData {
    Matrix W;           // m x m, symmetric PSD
    Matrix u;           // (m*m) x m, fully symmetric as a 3-tensor
    MomentProvenance provenance = MomentProvenance::ClosedFormGaussian;

    Eigen::Index size() const { return W.rows(); }

    double u_entry(Eigen::Index p, Eigen::Index q, Eigen::Index r) const {
        return u(p + q * W.rows(), r);
    }

    // u_pq as an m-vector (fixed p, q).
    Vector u_vec(Eigen::Index p, Eigen::Index q) const {
        return u.row(p + q * W.rows()).transpose();
    }
};

inline constexpr Eigen::Index kDefaultSupportCap = 512;

// Closed form for the Gaussian kernel against Lebesgue on R^d:
//   W_pq = (pi sigma^2 / 2)^{d/2} exp(-||s_p - s_q||^2 / (2 sigma^2)).
inline Matrix w_matrix_gaussian(const Eigen::Ref<const Matrix>& support_points,
                                double sigma) {
    require(sigma > 0.0, "w_matrix_gaussian: sigma must be positive");
    const Eigen::Index m = support_points.rows();
    const double d = double(support_points.cols());
    const double pi = 3.14159265358979323846;
    const double scale = std::pow(pi * sigma * sigma / 2.0, d / 2.0);
    Matrix W(m, m);
    for (Eigen::Index q = 0; q < m; ++q) {
        for (Eigen::Index p = 0; p <= q; ++p) {
            double sq = (support_points.row(p) - support_points.row(q)).squaredNorm();
            double v = scale * std::exp(-sq / (2.0 * sigma * sigma));
            W(p, q) = v;
            W(q, p) = v;
        }
    }
    return W;
}

// Closed form for the Gaussian kernel against Lebesgue on R^d:
//   u_pqr = (pi sigma^2 / 3)^{d/2}
//           exp(-(||s_p-s_q||^2 + ||s_q-s_r||^2 + ||s_p-s_r||^2) / (3 sigma^2)).
// The pairwise-difference exponent is the translation-invariant form of
// sum_i ||s_i||^2 - (1/3)||sum_i s_i||^2.
inline Matrix u_tensor_gaussian(const Eigen::Ref<const Matrix>& support_points,
                                double sigma) {
    require(sigma > 0.0, "u_tensor_gaussian: sigma must be positive");
    const Eigen::Index m = support_points.rows();
    const double d = double(support_points.cols());
    const double pi = 3.14159265358979323846;
    const double scale = std::pow(pi * sigma * sigma / 3.0, d / 2.0);
    Matrix sq_dist(m, m);
    for (Eigen::Index q = 0; q < m; ++q)
        for (Eigen::Index p = 0; p <= q; ++p) {
            double s = (support_points.row(p) - support_points.row(q)).squaredNorm();
            sq_dist(p, q) = s;
            sq_dist(q, p) = s;
        }
    Matrix u(m * m, m);
    for (Eigen::Index r = 0; r < m; ++r)
        for (Eigen::Index q = r; q < m; ++q)
            for (Eigen::Index p = q; p < m; ++p) {
                double e = (sq_dist(p, q) + sq_dist(q, r) + sq_dist(p, r)) /
                           (3.0 * sigma * sigma);
                double v = scale * std::exp(-e);
                u(p + q * m, r) = v;
                u(q + p * m, r) = v;
                u(p + r * m, q) = v;
                u(r + p * m, q) = v;
                u(q + r * m, p) = v;
                u(r + q * m, p) = v;
            }
    return u;
}

// Contract-checking variants: refuse anything but Gaussian kernel against
// Lebesgue on R^d, where the closed forms hold.
inline Matrix w_matrix_gaussian(const Kernel& kernel,
                                const Eigen::Ref<const Matrix>& support_points,
                                const ReferenceMeasure& measure) {
    if (kernel.family() != KernelFamily::Gaussian ||
        measure.kind() != MeasureKind::LebesgueRd)
        throw Error("w_matrix_gaussian: closed form requires a Gaussian kernel "
                    "and Lebesgue measure on R^d; use the quadrature path");
    return w_matrix_gaussian(support_points, kernel.bandwidth());
}

inline Matrix u_tensor_gaussian(const Kernel& kernel,
                                const Eigen::Ref<const Matrix>& support_points,
                                const ReferenceMeasure& measure) {
    if (kernel.family() != KernelFamily::Gaussian ||
        measure.kind() != MeasureKind::LebesgueRd)
        throw Error("u_tensor_gaussian: closed form requires a Gaussian kernel "
                    "and Lebesgue measure on R^d; use the quadrature path");
    return u_tensor_gaussian(support_points, kernel.bandwidth());
}

namespace detail {

// Per-axis quadrature nodes for the measure: the box itself, or for Lebesgue
// on R^d a box extending past the support hull far enough that the neglected
// tail is below 1e-12 of the integral (8 sigma for Gaussian, 30 sigma for the
// slower Laplace tail). Panels split at support coordinates.
inline PanelRule axis_rule(const Kernel& kernel,
                           const Eigen::Ref<const Matrix>& support_points,
                           const ReferenceMeasure& measure, int axis,
                           int resolution) {
    double lo, hi;
    if (measure.kind() == MeasureKind::LebesgueBox) {
        lo = measure.lower()(axis);
        hi = measure.upper()(axis);
    } else {
        double margin =
            (kernel.family() == KernelFamily::Gaussian ? 8.0 : 30.0) *
            kernel.bandwidth();
        lo = support_points.col(axis).minCoeff() - margin;
        hi = support_points.col(axis).maxCoeff() + margin;
    }
    std::vector<double> breaks;
    if (kernel.family() == KernelFamily::Laplace) {
        breaks.reserve(std::size_t(support_points.rows()));
        for (Eigen::Index i = 0; i < support_points.rows(); ++i)
            breaks.push_back(support_points(i, axis));
    }
    return PanelRule(lo, hi, std::move(breaks), resolution);
}

}  // namespace detail

// Tensor-product Gauss-Legendre moments. Serves as the independent check of
// the Gaussian closed forms and as the only path for the Laplace kernel and
// box measures. Cost grows as resolution^d, hence the d <= 3 limit.
inline MomentData moments_by_quadrature(
    const Kernel& kernel, const Eigen::Ref<const Matrix>& support_points,
    const ReferenceMeasure& measure, int resolution,
    Eigen::Index support_cap = kDefaultSupportCap) {
    const Eigen::Index m = support_points.rows();
    const int d = int(support_points.cols());
    require(m >= 1, "moments_by_quadrature: empty support set");
    require(m <= support_cap,
            "moments_by_quadrature: support size exceeds the dense-tensor cap");
    if (d > 3)
        throw Error("moments_by_quadrature: d > 3 unsupported (cost grows as grid^d)");
    if (measure.kind() == MeasureKind::LebesgueBox)
        require_dims(measure.lower().size() == d,
                     "moments_by_quadrature: measure dimension mismatch");
    require(resolution >= 2, "moments_by_quadrature: resolution must be >= 2");

    std::vector<PanelRule> axes;
    axes.reserve(std::size_t(d));
    for (int ax = 0; ax < d; ++ax)
        axes.push_back(detail::axis_rule(kernel, support_points, measure, ax,
                                         resolution));

    Eigen::Index total = 1;
    for (const auto& a : axes) total *= a.nodes.size();

    Matrix nodes(total, d);
    Vector wts = Vector::Ones(total);
    Eigen::Index repeat = 1;
    for (int ax = 0; ax < d; ++ax) {
        const Eigen::Index na = axes[std::size_t(ax)].nodes.size();
        Eigen::Index idx = 0;
        while (idx < total) {
            for (Eigen::Index i = 0; i < na; ++i) {
                for (Eigen::Index rpt = 0; rpt < repeat; ++rpt, ++idx) {
                    nodes(idx, ax) = axes[std::size_t(ax)].nodes(i);
                    wts(idx) *= axes[std::size_t(ax)].weights(i);
                }
            }
        }
        repeat *= na;
    }

    // Kernel sections at all nodes: column p holds k(node_i, s_p).
    Matrix Kn = kernel.gram(nodes, support_points);

    MomentData out;
    out.provenance = MomentProvenance::Quadrature;
    out.W.resize(m, m);
    out.u.resize(m * m, m);

    Matrix Kw = wts.asDiagonal() * Kn;
    Matrix W = Kw.transpose() * Kn;
    out.W = 0.5 * (W + W.transpose());

    // u_pqr for canonical p <= q <= r, mirrored to all permutations so the
    // stored tensor is exactly symmetric.
    Vector prod(total);
    for (Eigen::Index q = 0; q < m; ++q)
        for (Eigen::Index p = 0; p <= q; ++p) {
            prod = Kw.col(p).cwiseProduct(Kn.col(q));
            for (Eigen::Index r = q; r < m; ++r) {
                double v = prod.dot(Kn.col(r));
                out.u(p + q * m, r) = v;
                out.u(q + p * m, r) = v;
                out.u(p + r * m, q) = v;
                out.u(r + p * m, q) = v;
                out.u(q + r * m, p) = v;
                out.u(r + q * m, p) = v;
            }
        }
    return out;
}

inline constexpr int kDefaultQuadResolution1d = 400;
inline constexpr int kDefaultQuadResolution2d = 200;
inline constexpr int kDefaultQuadResolution3d = 80;

inline int default_quadrature_resolution(int d) {
    if (d <= 1) return kDefaultQuadResolution1d;
    if (d == 2) return kDefaultQuadResolution2d;
    return kDefaultQuadResolution3d;
}

// Closed form when available (Gaussian kernel, Lebesgue on R^d), quadrature
// otherwise. `resolution <= 0` picks the per-dimension default.
inline MomentData compute_moments(const Kernel& kernel,
                                  const Eigen::Ref<const Matrix>& support_points,
                                  const ReferenceMeasure& measure,
                                  int resolution = 0,
                                  Eigen::Index support_cap = kDefaultSupportCap) {
    const Eigen::Index m = support_points.rows();
    require(m >= 1, "compute_moments: empty support set");
    require(m <= support_cap,
            "compute_moments: support size exceeds the dense-tensor cap");
    if (kernel.family() == KernelFamily::Gaussian &&
        measure.kind() == MeasureKind::LebesgueRd) {
        MomentData out;
        out.provenance = MomentProvenance::ClosedFormGaussian;
        out.W = w_matrix_gaussian(support_points, kernel.bandwidth());
        out.u = u_tensor_gaussian(support_points, kernel.bandwidth());
        return out;
    }
    int res = resolution > 0 ? resolution
                             : default_quadrature_resolution(int(support_points.cols()));
    return moments_by_quadrature(kernel, support_points, measure, res, support_cap);
}

}  // namespace ksos
