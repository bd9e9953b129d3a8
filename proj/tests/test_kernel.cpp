#include <catch_amalgamated.hpp>

#include "ksos/kernel.hpp"

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

}  // namespace

TEST_CASE("kernel evaluation matches the stated formulas") {
    Kernel gauss(KernelFamily::Gaussian, 1.0);

    SECTION("identity case: k(x, x) = 1") {
        Vector x(2);
        x << 0.0, 0.0;
        REQUIRE(gauss.eval(x, x) == 1.0);
    }

    SECTION("Gaussian sigma=1 at distance 1 gives exp(-1)") {
        Vector x(1), y(1);
        x << 0.0;
        y << 1.0;
        REQUIRE_THAT(gauss.eval(x, y), WithinRel(std::exp(-1.0), 1e-14));
    }

    SECTION("Laplace sigma=2 at distance 1 gives exp(-0.5)") {
        Kernel lap(KernelFamily::Laplace, 2.0);
        Vector x(1), y(1);
        x << 0.0;
        y << 1.0;
        REQUIRE_THAT(lap.eval(x, y), WithinRel(std::exp(-0.5), 1e-14));
    }

    SECTION("values lie in (0, 1] and hit 1 only at x = y") {
        std::mt19937_64 rng(7);
        std::normal_distribution<double> g(0.0, 2.0);
        for (int t = 0; t < 50; ++t) {
            Vector x(3), y(3);
            for (int i = 0; i < 3; ++i) {
                x(i) = g(rng);
                y(i) = g(rng);
            }
            for (const Kernel& k : {Kernel(KernelFamily::Gaussian, 0.7),
                                    Kernel(KernelFamily::Laplace, 1.3)}) {
                double v = k.eval(x, y);
                REQUIRE(v > 0.0);
                REQUIRE(v <= 1.0);
                REQUIRE(k.eval(x, x) == 1.0);
                if ((x - y).norm() > 1e-6) REQUIRE(v < 1.0);
            }
        }
    }

    SECTION("dimension mismatch is rejected") {
        Vector x(2), y(3);
        x.setZero();
        y.setZero();
        REQUIRE_THROWS_AS(gauss.eval(x, y), DimensionError);
    }

    SECTION("non-positive bandwidth is rejected") {
        REQUIRE_THROWS_AS(Kernel(KernelFamily::Gaussian, 0.0), Error);
        REQUIRE_THROWS_AS(Kernel(KernelFamily::Gaussian, -1.0), Error);
    }
}

TEST_CASE("kernel invariances") {
    SECTION("translation invariance") {
        std::mt19937_64 rng(11);
        std::normal_distribution<double> g(0.0, 1.0);
        Kernel gauss(KernelFamily::Gaussian, 0.9);
        Kernel lap(KernelFamily::Laplace, 1.1);
        for (int t = 0; t < 20; ++t) {
            Vector x(2), y(2), shift(2);
            for (int i = 0; i < 2; ++i) {
                x(i) = g(rng);
                y(i) = g(rng);
                shift(i) = g(rng);
            }
            Vector xs = x + shift, ys = y + shift;
            REQUIRE_THAT(gauss.eval(xs, ys), WithinRel(gauss.eval(x, y), 1e-12));
            REQUIRE_THAT(lap.eval(xs, ys), WithinRel(lap.eval(x, y), 1e-12));
        }
    }

    SECTION("Gaussian scaling: bandwidth c*sigma at (cx, cy) equals sigma at (x, y)") {
        std::mt19937_64 rng(13);
        std::normal_distribution<double> g(0.0, 1.0);
        for (double c : {0.5, 2.0, 7.0}) {
            Kernel base(KernelFamily::Gaussian, 1.3);
            Kernel scaled(KernelFamily::Gaussian, c * 1.3);
            for (int t = 0; t < 10; ++t) {
                Vector x(2), y(2);
                for (int i = 0; i < 2; ++i) {
                    x(i) = g(rng);
                    y(i) = g(rng);
                }
                REQUIRE_THAT(scaled.eval(Vector(c * x), Vector(c * y)),
                             WithinRel(base.eval(x, y), 1e-12));
            }
        }
    }
}

TEST_CASE("gram matrices") {
    Kernel gauss(KernelFamily::Gaussian, 1.0);

    SECTION("1x1 gram of a single point with itself") {
        Matrix X(1, 1);
        X << 0.0;
        Matrix K = gauss.gram(X, X);
        REQUIRE(K.rows() == 1);
        REQUIRE(K.cols() == 1);
        REQUIRE(K(0, 0) == 1.0);
    }

    SECTION("2x1 cross gram") {
        Matrix X(2, 1), Y(1, 1);
        X << 0.0, 1.0;
        Y << 0.0;
        Matrix K = gauss.gram(X, Y);
        REQUIRE(K.rows() == 2);
        REQUIRE(K.cols() == 1);
        REQUIRE(K(0, 0) == 1.0);
        REQUIRE_THAT(K(1, 0), WithinRel(std::exp(-1.0), 1e-14));
    }

    SECTION("self-gram of distinct points: symmetric, unit diagonal, PSD") {
        Matrix X(3, 1);
        X << -0.7, 0.1, 2.3;
        Matrix K = gauss.gram(X, X);
        REQUIRE((K - K.transpose()).cwiseAbs().maxCoeff() == 0.0);
        for (int i = 0; i < 3; ++i) REQUIRE_THAT(K(i, i), WithinAbs(1.0, 1e-15));
        Eigen::SelfAdjointEigenSolver<Matrix> evd(K);
        REQUIRE(evd.eigenvalues().minCoeff() >= -1e-10);
    }

    SECTION("entries agree with eval, both families") {
        Matrix X = random_points(6, 2, 3);
        Matrix Y = random_points(4, 2, 4);
        for (const Kernel& k : {Kernel(KernelFamily::Gaussian, 0.8),
                                Kernel(KernelFamily::Laplace, 1.5)}) {
            Matrix K = k.gram(X, Y);
            for (Eigen::Index i = 0; i < X.rows(); ++i)
                for (Eigen::Index j = 0; j < Y.rows(); ++j)
                    REQUIRE_THAT(K(i, j),
                                 WithinRel(k.eval(X.row(i), Y.row(j)), 1e-12));
        }
    }

    SECTION("random self-grams are numerically PSD") {
        for (std::uint64_t seed : {21u, 22u, 23u}) {
            Matrix X = random_points(40, 2, seed);
            for (const Kernel& k : {Kernel(KernelFamily::Gaussian, 1.0),
                                    Kernel(KernelFamily::Laplace, 1.0)}) {
                Matrix K = k.gram(X, X);
                Eigen::SelfAdjointEigenSolver<Matrix> evd(K);
                REQUIRE(evd.eigenvalues().minCoeff() >= -1e-10 * double(X.rows()));
            }
        }
    }

    SECTION("dimension mismatch is rejected") {
        Matrix X = random_points(3, 2, 5);
        Matrix Y = random_points(3, 3, 6);
        REQUIRE_THROWS_AS(gauss.gram(X, Y), DimensionError);
    }
}

TEST_CASE("kernel sections") {
    Kernel k(KernelFamily::Gaussian, 1.2);
    Matrix Y = random_points(7, 2, 8);
    Vector x = random_points(1, 2, 9).row(0);
    Vector s = k.section(x, Y);
    REQUIRE(s.size() == 7);
    for (Eigen::Index j = 0; j < 7; ++j)
        REQUIRE_THAT(s(j), WithinRel(k.eval(x, Y.row(j)), 1e-12));
}

TEST_CASE("kernel family names round-trip") {
    REQUIRE(to_string(KernelFamily::Gaussian) == "gaussian");
    REQUIRE(to_string(KernelFamily::Laplace) == "laplace");
    REQUIRE(kernel_family_from_string("gaussian") == KernelFamily::Gaussian);
    REQUIRE(kernel_family_from_string("laplace") == KernelFamily::Laplace);
    REQUIRE_THROWS_AS(kernel_family_from_string("matern"), Error);
}

TEST_CASE("empirical distributions") {
    SECTION("uniform weights sum to one") {
        EmpiricalDistribution emp(random_points(9, 2, 10));
        REQUIRE(emp.size() == 9);
        REQUIRE(emp.dim() == 2);
        REQUIRE_THAT(emp.weights().sum(), WithinAbs(1.0, 1e-12));
        REQUIRE_THAT(emp.weights().minCoeff(), WithinRel(1.0 / 9.0, 1e-14));
    }

    SECTION("custom weights must sum to one") {
        Matrix X = random_points(3, 1, 11);
        Vector w(3);
        w << 0.2, 0.3, 0.5;
        REQUIRE_NOTHROW(EmpiricalDistribution(X, w));
        w << 0.2, 0.3, 0.6;
        REQUIRE_THROWS_AS(EmpiricalDistribution(X, w), Error);
    }

    SECTION("empty point sets are rejected") {
        REQUIRE_THROWS_AS(EmpiricalDistribution(Matrix(0, 2)), Error);
    }
}
