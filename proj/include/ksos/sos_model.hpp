#pragma once

#include "ksos/common.hpp"
#include "ksos/kernel.hpp"
#include "ksos/moments.hpp"
#include "ksos/psd_projection.hpp"

#include <cmath>
#include <memory>
#include <utility>

namespace ksos {

// Support points with the cached self-Gram matrix and its factorization.
class SupportSet {
  public:
    SupportSet(Matrix points, const Kernel& kernel, double jitter_seed = 0.0)
        : points_(std::move(points)),
          gram_(kernel.gram(points_, points_)),
          factor_(cholesky_with_jitter(gram_, jitter_seed)) {}

    const Matrix& points() const { return points_; }
    const Matrix& gram() const { return gram_; }
    const TraceOneFactorization& factor() const { return factor_; }
    Eigen::Index size() const { return points_.rows(); }
    Eigen::Index dim() const { return points_.cols(); }

  private:
    Matrix points_;
    Matrix gram_;
    TraceOneFactorization factor_;
};

// Coefficients b of the span projection of the empirical embedding:
// solve Ktilde b = K(support, X) a.
inline Vector project_onto_span(const SupportSet& support,
                                const Kernel& kernel,
                                const EmpiricalDistribution& emp) {
    require_dims(support.dim() == emp.dim(),
                 "project_onto_span: dimension mismatch");
    Matrix Kxs = kernel.gram(support.points(), emp.points());
    return support.factor().solve(Vector(Kxs * emp.weights()));
}

// U(B) = sum_pq B_pq u_pq, a single mat-vec against the flattened tensor.
inline Vector u_map(const MomentData& moments,
                    const Eigen::Ref<const Matrix>& B) {
    const Eigen::Index m = moments.size();
    require_dims(B.rows() == m && B.cols() == m, "u_map: dimension mismatch");
    Eigen::Map<const Vector> vecB(B.data(), m * m);
    return moments.u.transpose() * vecB;
}

// Density model p_B(x) = ktilde_x^T B ktilde_x with B PSD, tied to a support
// set, a kernel, and the moments of the reference measure.
class SosDensityModel {
  public:
    SosDensityModel(std::shared_ptr<const SupportSet> support, Kernel kernel,
                    Matrix B, std::shared_ptr<const MomentData> moments)
        : support_(std::move(support)),
          kernel_(kernel),
          B_(std::move(B)),
          moments_(std::move(moments)) {
        require(support_ != nullptr, "model: null support");
        require_dims(B_.rows() == support_->size() && B_.cols() == support_->size(),
                     "model: coefficient matrix does not match support size");
        B_ = 0.5 * (B_ + B_.transpose()).eval();
    }

    const SupportSet& support() const { return *support_; }
    std::shared_ptr<const SupportSet> support_ptr() const { return support_; }
    const Kernel& kernel() const { return kernel_; }
    const Matrix& coefficients() const { return B_; }
    bool has_moments() const { return moments_ != nullptr; }
    const MomentData& moments() const {
        require(has_moments(), "model: no moments attached");
        return *moments_;
    }
    std::shared_ptr<const MomentData> moments_ptr() const { return moments_; }

    double density(const Eigen::Ref<const Vector>& x) const {
        require_dims(x.size() == support_->dim(),
                     "density: point dimension mismatch");
        Vector kx = kernel_.section(x, support_->points());
        return kx.dot(B_ * kx);
    }

    // Densities at each row of X.
    Vector density_batch(const Eigen::Ref<const Matrix>& X) const {
        require_dims(X.cols() == support_->dim(),
                     "density: point dimension mismatch");
        Matrix Kx = kernel_.gram(X, support_->points());  // n x m
        return ((Kx * B_).cwiseProduct(Kx)).rowwise().sum();
    }

    // tr(B W): the total mass of p_B under the reference measure.
    double mass() const { return B_.cwiseProduct(moments().W).sum(); }

    // Plain normalization B <- B / tr(BW).
    SosDensityModel normalized() const {
        double m = mass();
        if (!(m > 0.0))
            throw NumericalError("normalize: degenerate model (mass <= 0)");
        return SosDensityModel(support_, kernel_, Matrix(B_ / m), moments_);
    }

    // Jitter correction: when the fit enforced tr(B (W + jitter I)) = 1,
    // B <- B / (1 - jitter tr B) restores tr(BW) = 1 exactly.
    SosDensityModel normalized_after_jitter(double jitter) const {
        require(jitter >= 0.0, "normalize: negative jitter");
        double denom = 1.0 - jitter * B_.trace();
        if (!(denom > 0.0))
            throw NumericalError(
                "normalize: jitter correction infeasible (1 - jitter tr B <= 0)");
        return SosDensityModel(support_, kernel_, Matrix(B_ / denom), moments_);
    }

  private:
    std::shared_ptr<const SupportSet> support_;
    Kernel kernel_;
    Matrix B_;
    std::shared_ptr<const MomentData> moments_;
};

// Round-off guard for the projected MMD value: clamp tiny negatives, treat
// anything below the threshold as a conditioning failure.
inline double clamp_mmd_sq(double value) {
    if (value >= 0.0) return value;
    if (value >= -1e-9) return 0.0;
    throw NumericalError(
        "projected MMD^2 is negative beyond round-off; factorization is "
        "likely broken (value " + std::to_string(value) + ")");
}

// Closed form of || P_m(v - w_{p_B}) ||^2 for v the empirical embedding:
//   U(B)^T Ktilde^{-1} U(B) - 2 <B, V>_F + ||P_m(v)||^2
// computed via the span coefficients c = Ktilde^{-1} K(support, X) a.
inline double projected_mmd_sq(const SosDensityModel& model,
                               const EmpiricalDistribution& emp) {
    const SupportSet& sup = model.support();
    require_dims(sup.dim() == emp.dim(), "projected_mmd_sq: dimension mismatch");
    Matrix Kxs = model.kernel().gram(sup.points(), emp.points());
    Vector Ka = Kxs * emp.weights();
    Vector c = sup.factor().solve(Ka);
    Vector UB = u_map(model.moments(), model.coefficients());
    Vector y = sup.factor().solve(UB);
    double quad = UB.dot(y);
    double cross = UB.dot(c);        // <B, V>_F
    double vnorm = Ka.dot(c);        // ||P_m(v)||^2
    return clamp_mmd_sq(quad - 2.0 * cross + vnorm);
}

}  // namespace ksos
