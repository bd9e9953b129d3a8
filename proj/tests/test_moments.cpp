#include <catch_amalgamated.hpp>

#include "ksos/moments.hpp"

#include <array>
#include <cmath>
#include <random>

using namespace ksos;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Matrix random_points(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix X(n, d);
    for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index i = 0; i < n; ++i) X(i, j) = gauss(rng);
    return X;
}

double max_rel_err(const Matrix& got, const Matrix& want) {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < got.cols(); ++j)
        for (Eigen::Index i = 0; i < got.rows(); ++i) {
            double denom = std::max(std::abs(want(i, j)), 1e-300);
            worst = std::max(worst, std::abs(got(i, j) - want(i, j)) / denom);
        }
    return worst;
}

}  // namespace

TEST_CASE("Gaussian closed forms hit frozen quadrature-oracle values") {
    // Reference digits computed by an independent Gauss-Legendre oracle
    // (400 nodes on [-10, 10], exact to ~1e-13) and frozen here.
    SECTION("W for a single 1-D point at 0, sigma = 1: sqrt(pi/2)") {
        Matrix X(1, 1);
        X << 0.0;
        Matrix W = w_matrix_gaussian(X, 1.0);
        REQUIRE_THAT(W(0, 0), WithinRel(1.25331413731550, 1e-12));
    }

    SECTION("duplicated support point: every entry is the diagonal value") {
        Matrix X(2, 1);
        X << 0.0, 0.0;
        Matrix W = w_matrix_gaussian(X, 1.0);
        for (int p = 0; p < 2; ++p)
            for (int q = 0; q < 2; ++q)
                REQUIRE_THAT(W(p, q), WithinRel(std::sqrt(M_PI / 2.0), 1e-14));
    }

    SECTION("W off-diagonal in d = 2 at distance 1: (pi/2) exp(-1/2)") {
        Matrix X(2, 2);
        X << 0.0, 0.0, 1.0, 0.0;
        Matrix W = w_matrix_gaussian(X, 1.0);
        REQUIRE_THAT(W(0, 1), WithinRel(0.95273613236509, 1e-12));
        REQUIRE_THAT(W(1, 0), WithinRel(0.95273613236509, 1e-12));
    }

    SECTION("u for a single 1-D point at 0, sigma = 1: sqrt(pi/3)") {
        Matrix X(1, 1);
        X << 0.0;
        Matrix u = u_tensor_gaussian(X, 1.0);
        REQUIRE_THAT(u(0, 0), WithinRel(1.02332670794649, 1e-12));
    }

    SECTION("u_112 for points (0, 1): sqrt(pi/3) exp(-2/3)") {
        Matrix X(2, 1);
        X << 0.0, 1.0;
        MomentData md = compute_moments(Kernel(KernelFamily::Gaussian, 1.0), X,
                                        ReferenceMeasure::lebesgue_rd());
        REQUIRE_THAT(md.u_entry(0, 0, 1), WithinRel(0.52539345022299, 1e-12));
    }
}

TEST_CASE("closed form and quadrature agree on random configurations") {
    std::mt19937_64 rng(42);
    const std::array<double, 3> sigmas = {0.5, 1.0, 2.0};
    int config = 0;
    for (int d : {1, 2}) {
        for (double sigma : sigmas) {
            Matrix X = random_points(4, d, 100 + std::uint64_t(config++));
            Kernel k(KernelFamily::Gaussian, sigma);
            MomentData closed =
                compute_moments(k, X, ReferenceMeasure::lebesgue_rd());
            REQUIRE(closed.provenance == MomentProvenance::ClosedFormGaussian);
            MomentData quad = moments_by_quadrature(
                k, X, ReferenceMeasure::lebesgue_rd(),
                default_quadrature_resolution(d));
            REQUIRE(max_rel_err(quad.W, closed.W) < 1e-5);
            REQUIRE(max_rel_err(quad.u, closed.u) < 1e-5);
        }
    }
    (void)rng;
}

TEST_CASE("quadrature stands on its own where analytic answers exist") {
    SECTION("Laplace, single point on R: W_11 = int exp(-2|x|) dx = 1") {
        Matrix X(1, 1);
        X << 0.0;
        MomentData md = compute_moments(Kernel(KernelFamily::Laplace, 1.0), X,
                                        ReferenceMeasure::lebesgue_rd());
        REQUIRE(md.provenance == MomentProvenance::Quadrature);
        REQUIRE_THAT(md.W(0, 0), WithinRel(1.0, 1e-9));
    }

    SECTION("Laplace u_111 = int exp(-3|x|) dx = 2/3") {
        Matrix X(1, 1);
        X << 0.4;
        MomentData md = compute_moments(Kernel(KernelFamily::Laplace, 1.0), X,
                                        ReferenceMeasure::lebesgue_rd());
        REQUIRE_THAT(md.u_entry(0, 0, 0), WithinRel(2.0 / 3.0, 1e-9));
    }

    SECTION("a wide box reproduces the R^d closed form") {
        Matrix X(2, 1);
        X << -0.3, 0.6;
        Vector lo(1), hi(1);
        lo << -10.0;
        hi << 10.0;
        Kernel k(KernelFamily::Gaussian, 1.0);
        MomentData boxed =
            compute_moments(k, X, ReferenceMeasure::box(lo, hi), 400);
        MomentData closed =
            compute_moments(k, X, ReferenceMeasure::lebesgue_rd());
        REQUIRE(boxed.provenance == MomentProvenance::Quadrature);
        REQUIRE(max_rel_err(boxed.W, closed.W) < 1e-6);
        REQUIRE(max_rel_err(boxed.u, closed.u) < 1e-6);
    }

    SECTION("a genuinely truncating box shrinks every moment") {
        Matrix X(2, 1);
        X << -0.3, 0.6;
        Vector lo(1), hi(1);
        lo << -1.0;
        hi << 1.0;
        Kernel k(KernelFamily::Gaussian, 1.0);
        MomentData boxed =
            compute_moments(k, X, ReferenceMeasure::box(lo, hi), 400);
        MomentData closed =
            compute_moments(k, X, ReferenceMeasure::lebesgue_rd());
        REQUIRE(((closed.W - boxed.W).array() > 0.0).all());
        REQUIRE(((closed.u - boxed.u).array() > 0.0).all());
    }
}

TEST_CASE("moment invariants") {
    SECTION("translation invariance of W and u") {
        Matrix X = random_points(4, 2, 7);
        Matrix Xs = X;
        Xs.array() += 5.0;
        Matrix W = w_matrix_gaussian(X, 0.8);
        Matrix Ws = w_matrix_gaussian(Xs, 0.8);
        REQUIRE(max_rel_err(Ws, W) < 1e-10);
        Matrix u = u_tensor_gaussian(X, 0.8);
        Matrix us = u_tensor_gaussian(Xs, 0.8);
        REQUIRE(max_rel_err(us, u) < 1e-10);
    }

    SECTION("scaling law: sigma -> c sigma, points -> c points multiplies by c^d") {
        const double c = 2.0;
        for (int d : {1, 2}) {
            Matrix X = random_points(3, d, 17 + std::uint64_t(d));
            Matrix W = w_matrix_gaussian(X, 1.3);
            Matrix Wc = w_matrix_gaussian(Matrix(c * X), c * 1.3);
            REQUIRE(max_rel_err(Wc, Matrix(std::pow(c, d) * W)) < 1e-12);
            Matrix u = u_tensor_gaussian(X, 1.3);
            Matrix uc = u_tensor_gaussian(Matrix(c * X), c * 1.3);
            REQUIRE(max_rel_err(uc, Matrix(std::pow(c, d) * u)) < 1e-12);
        }
    }

    SECTION("W is symmetric PSD with strictly positive entries") {
        Matrix X = random_points(6, 2, 23);
        MomentData md = compute_moments(Kernel(KernelFamily::Gaussian, 1.0), X,
                                        ReferenceMeasure::lebesgue_rd());
        REQUIRE((md.W - md.W.transpose()).cwiseAbs().maxCoeff() == 0.0);
        REQUIRE(md.W.minCoeff() > 0.0);
        REQUIRE(md.u.minCoeff() > 0.0);
        Eigen::SelfAdjointEigenSolver<Matrix> evd(md.W);
        REQUIRE(evd.eigenvalues().minCoeff() >= -1e-10 * md.W.trace());
    }

    SECTION("u is symmetric under all six index permutations") {
        Matrix X = random_points(4, 1, 29);
        Kernel k(KernelFamily::Gaussian, 1.0);
        for (const MomentData& md :
             {compute_moments(k, X, ReferenceMeasure::lebesgue_rd()),
              moments_by_quadrature(k, X, ReferenceMeasure::lebesgue_rd(), 200)}) {
            const Eigen::Index m = md.size();
            for (Eigen::Index p = 0; p < m; ++p)
                for (Eigen::Index q = 0; q < m; ++q)
                    for (Eigen::Index r = 0; r < m; ++r) {
                        double v = md.u_entry(p, q, r);
                        REQUIRE(md.u_entry(p, r, q) == v);
                        REQUIRE(md.u_entry(q, p, r) == v);
                        REQUIRE(md.u_entry(q, r, p) == v);
                        REQUIRE(md.u_entry(r, p, q) == v);
                        REQUIRE(md.u_entry(r, q, p) == v);
                    }
        }
    }

    SECTION("u_vec exposes rows of the flattened tensor") {
        Matrix X = random_points(3, 1, 31);
        MomentData md = compute_moments(Kernel(KernelFamily::Gaussian, 1.0), X,
                                        ReferenceMeasure::lebesgue_rd());
        Vector v = md.u_vec(1, 2);
        for (Eigen::Index r = 0; r < 3; ++r)
            REQUIRE(v(r) == md.u_entry(1, 2, r));
    }
}

TEST_CASE("moment computation guards") {
    Matrix X = random_points(3, 1, 37);
    Kernel gauss(KernelFamily::Gaussian, 1.0);

    SECTION("closed-form entry points refuse the wrong regime") {
        Vector lo(1), hi(1);
        lo << -1.0;
        hi << 1.0;
        REQUIRE_THROWS_AS(
            w_matrix_gaussian(Kernel(KernelFamily::Laplace, 1.0), X,
                              ReferenceMeasure::lebesgue_rd()),
            Error);
        REQUIRE_THROWS_AS(
            u_tensor_gaussian(gauss, X, ReferenceMeasure::box(lo, hi)), Error);
    }

    SECTION("support cap is enforced") {
        REQUIRE_THROWS_AS(
            compute_moments(gauss, X, ReferenceMeasure::lebesgue_rd(), 0, 2),
            Error);
    }

    SECTION("quadrature dimension and resolution limits") {
        Matrix X4 = random_points(2, 4, 41);
        REQUIRE_THROWS_AS(moments_by_quadrature(gauss, X4,
                                                ReferenceMeasure::lebesgue_rd(),
                                                50),
                          Error);
        REQUIRE_THROWS_AS(moments_by_quadrature(gauss, X,
                                                ReferenceMeasure::lebesgue_rd(),
                                                1),
                          Error);
    }

    SECTION("box bounds must be ordered") {
        Vector lo(1), hi(1);
        lo << 1.0;
        hi << -1.0;
        REQUIRE_THROWS_AS(ReferenceMeasure::box(lo, hi), Error);
    }
}
