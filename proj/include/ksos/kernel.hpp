#pragma once

#include "ksos/common.hpp"

#include <cmath>
#include <string>

namespace ksos {

enum class KernelFamily { Gaussian, Laplace };

inline std::string to_string(KernelFamily f) {
    return f == KernelFamily::Gaussian ? "gaussian" : "laplace";
}

inline KernelFamily kernel_family_from_string(const std::string& s) {
    if (s == "gaussian") return KernelFamily::Gaussian;
    if (s == "laplace") return KernelFamily::Laplace;
    throw Error("unknown kernel family: " + s);
}

// Positive-definite kernel descriptor.
//
// Bandwidth convention: the Gaussian kernel is exp(-||x-x'||^2 / sigma^2),
// with NO factor 2 in the denominator. Most libraries use exp(-r^2/(2 sigma^2));
// here the moment-integral constants (pi sigma^2/2, pi sigma^2/3) assume the
// convention above, so it is fixed throughout. Laplace: exp(-||x-x'|| / sigma).
class Kernel {
  public:
    Kernel(KernelFamily family, double bandwidth)
        : family_(family), sigma_(bandwidth) {
        require(std::isfinite(sigma_) && sigma_ > 0.0,
                "kernel bandwidth must be positive and finite");
    }

    KernelFamily family() const { return family_; }
    double bandwidth() const { return sigma_; }

    // k(x, y); both families map distance 0 to 1.
    double eval(const Eigen::Ref<const Vector>& x,
                const Eigen::Ref<const Vector>& y) const {
        require_dims(x.size() == y.size(),
                     "kernel eval: x and y dimensions differ");
        require(x.allFinite() && y.allFinite(),
                "kernel eval: non-finite input");
        return eval_sq_dist((x - y).squaredNorm());
    }

    // Kernel value from a squared distance (the hot path for Gram assembly).
    double eval_sq_dist(double sq_dist) const {
        if (family_ == KernelFamily::Gaussian) {
            return std::exp(-sq_dist / (sigma_ * sigma_));
        }
        return std::exp(-std::sqrt(sq_dist) / sigma_);
    }

    // Pairwise evaluations: entry (i, j) = k(X_i, Y_j). Rows are points.
    Matrix gram(const Eigen::Ref<const Matrix>& X,
                const Eigen::Ref<const Matrix>& Y) const {
        require_dims(X.cols() == Y.cols(),
                     "gram: point dimensions differ");
        require(X.allFinite() && Y.allFinite(), "gram: non-finite input");
        const Eigen::Index n = X.rows(), m = Y.rows();
        // ||x-y||^2 = ||x||^2 + ||y||^2 - 2 x.y, clamped at 0 against round-off.
        Vector xn = X.rowwise().squaredNorm();
        Vector yn = Y.rowwise().squaredNorm();
        Matrix D = (-2.0 * X * Y.transpose());
        D.colwise() += xn;
        D.rowwise() += yn.transpose();
        Matrix K(n, m);
        for (Eigen::Index j = 0; j < m; ++j)
            for (Eigen::Index i = 0; i < n; ++i)
                K(i, j) = eval_sq_dist(std::max(D(i, j), 0.0));
        return K;
    }

    // k(x, Y_j) for all rows of Y, as a vector.
    Vector section(const Eigen::Ref<const Vector>& x,
                   const Eigen::Ref<const Matrix>& Y) const {
        require_dims(x.size() == Y.cols(),
                     "kernel section: dimension mismatch");
        Vector out(Y.rows());
        for (Eigen::Index j = 0; j < Y.rows(); ++j)
            out(j) = eval_sq_dist((x.transpose() - Y.row(j)).squaredNorm());
        return out;
    }

  private:
    KernelFamily family_;
    double sigma_;
};

// Weighted point cloud; the embedding coefficients a sum to one.
class EmpiricalDistribution {
  public:
    explicit EmpiricalDistribution(Matrix points)
        : points_(std::move(points)),
          weights_(Vector::Constant(points_.rows(), 1.0 / double(points_.rows()))) {
        require(points_.rows() >= 1, "empirical distribution needs n >= 1 points");
        require(points_.allFinite(), "empirical distribution: non-finite points");
    }

    EmpiricalDistribution(Matrix points, Vector weights)
        : points_(std::move(points)), weights_(std::move(weights)) {
        require(points_.rows() >= 1, "empirical distribution needs n >= 1 points");
        require_dims(weights_.size() == points_.rows(),
                     "weights length must match point count");
        require(points_.allFinite() && weights_.allFinite(),
                "empirical distribution: non-finite input");
        require(std::abs(weights_.sum() - 1.0) <= 1e-12,
                "weights must sum to 1 within 1e-12");
    }

    const Matrix& points() const { return points_; }
    const Vector& weights() const { return weights_; }
    Eigen::Index size() const { return points_.rows(); }
    Eigen::Index dim() const { return points_.cols(); }

  private:
    Matrix points_;
    Vector weights_;
};

}  // namespace ksos
