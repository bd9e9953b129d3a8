#pragma once

#include "ksos/common.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace ksos {

// Euclidean projection onto the probability simplex {x >= 0, sum x = 1}.
// Sort-based O(n log n) variant; at the dimensions seen here (a few hundred)
// it is indistinguishable from the O(n) median-finding method.
inline Vector simplex_project(const Eigen::Ref<const Vector>& v) {
    const Eigen::Index n = v.size();
    require(n >= 1, "simplex_project: empty vector");
    require(v.allFinite(), "simplex_project: non-finite entries");

    // The projection is invariant under adding a constant to every entry.
    // Shift so the largest entry is 0: otherwise, for huge inputs, the -1 in
    // the threshold is absorbed and even the top entry fails the active-set
    // test, silently returning a point far off the simplex.
    const double shift = v.maxCoeff();
    std::vector<double> u(v.data(), v.data() + n);
    for (double& x : u) x -= shift;
    std::sort(u.begin(), u.end(), std::greater<double>());
    double cumsum = 0.0;
    double tau = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        cumsum += u[std::size_t(j)];
        double candidate = (cumsum - 1.0) / double(j + 1);
        if (u[std::size_t(j)] - candidate > 0.0) tau = candidate;
    }
    return (v.array() - shift - tau).cwiseMax(0.0);
}

// Frobenius projection onto the spectrahedron {M PSD : tr(M) = 1}:
// eigendecompose, project the spectrum onto the simplex, recompose.
// The input is symmetrized as (X + X^T)/2 first.
inline Matrix project_trace_one_psd(const Eigen::Ref<const Matrix>& X) {
    require_dims(X.rows() == X.cols(), "project_trace_one_psd: matrix not square");
    require(X.allFinite(), "project_trace_one_psd: non-finite entries");
    Matrix S = 0.5 * (X + X.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> evd(S);
    if (evd.info() != Eigen::Success)
        throw NumericalError("project_trace_one_psd: eigendecomposition failed");
    Vector lam = simplex_project(evd.eigenvalues());
    Matrix out = evd.eigenvectors() * lam.asDiagonal() *
                 evd.eigenvectors().transpose();
    return 0.5 * (out + out.transpose());
}

// Cholesky factor R (upper triangular, W + jitter*I = R^T R) together with
// its inverse and the jitter that was actually needed.
struct TraceOneFactorization {
    Matrix R;
    Matrix R_inv;
    double jitter = 0.0;

    // (W + jitter*I)^{-1} b via two triangular solves; b may be a vector or
    // a matrix of right-hand sides.
    template <typename Derived>
    typename Derived::PlainObject solve(
        const Eigen::MatrixBase<Derived>& b) const {
        typename Derived::PlainObject y =
            R.transpose().triangularView<Eigen::Lower>().solve(b.derived());
        return R.triangularView<Eigen::Upper>().solve(y);
    }
};

// Default jitter seed when the caller passes 0 and plain Cholesky fails.
inline double default_jitter_seed(const Eigen::Ref<const Matrix>& W) {
    double t = W.trace() / double(W.rows());
    return 1e-10 * (t > 0.0 ? t : 1.0);
}

// Cholesky of W + jitter*I with a x10 escalation schedule. The first attempt
// uses the seed as given (0 means plain Cholesky); on failure the jitter
// starts from max(seed, default seed) and escalates up to max_retries times.
inline TraceOneFactorization cholesky_with_jitter(
    const Eigen::Ref<const Matrix>& W, double jitter_seed = 0.0,
    int max_retries = 5) {
    require_dims(W.rows() == W.cols(), "cholesky_with_jitter: matrix not square");
    require(W.allFinite(), "cholesky_with_jitter: non-finite entries");
    require(jitter_seed >= 0.0, "cholesky_with_jitter: negative jitter");
    const Eigen::Index m = W.rows();
    Matrix S = 0.5 * (W + W.transpose());

    double jit = jitter_seed;
    for (int attempt = 0;; ++attempt) {
        Matrix A = S;
        if (jit > 0.0) A.diagonal().array() += jit;
        Eigen::LLT<Matrix> llt(A);
        if (llt.info() == Eigen::Success) {
            Matrix L = llt.matrixL();
            // A numerically singular matrix can slip through LLT with a
            // positive but vanishing pivot; treat that as a failure too, or
            // the factor's inverse amplifies round-off past usefulness.
            const double dmin = L.diagonal().minCoeff();
            const double dmax = L.diagonal().maxCoeff();
            if (dmin > 0.0 && dmin >= 1e-8 * dmax) {
                TraceOneFactorization f;
                f.R = L.transpose();
                f.R_inv = f.R.triangularView<Eigen::Upper>().solve(
                    Matrix::Identity(m, m));
                f.jitter = jit;
                return f;
            }
        }
        if (attempt >= max_retries)
            throw NumericalError(
                "cholesky_with_jitter: factorization failed after retries "
                "(final jitter attempted: " + std::to_string(jit) + ")");
        jit = (jit > 0.0) ? 10.0 * jit
                          : std::max(jitter_seed, default_jitter_seed(S));
    }
}

}  // namespace ksos
