#include <catch_amalgamated.hpp>

#include "ksos/quadrature.hpp"

#include <cmath>

using namespace ksos;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double integrate(const Vector& nodes, const Vector& weights,
                 double (*f)(double)) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < nodes.size(); ++i)
        s += weights(i) * f(nodes(i));
    return s;
}

}  // namespace

TEST_CASE("Gauss-Legendre rule on [-1, 1]") {
    SECTION("weights are positive and sum to 2") {
        for (int n : {2, 5, 16, 64, 201}) {
            GaussLegendreRule gl(n);
            REQUIRE(gl.nodes.size() == n);
            REQUIRE(gl.weights.minCoeff() > 0.0);
            REQUIRE_THAT(gl.weights.sum(), WithinAbs(2.0, 1e-13));
        }
    }

    SECTION("nodes are symmetric, sorted, and interior") {
        GaussLegendreRule gl(17);
        for (int i = 0; i < 17; ++i) {
            REQUIRE(gl.nodes(i) > -1.0);
            REQUIRE(gl.nodes(i) < 1.0);
            REQUIRE_THAT(gl.nodes(i), WithinAbs(-gl.nodes(16 - i), 1e-14));
            if (i > 0) REQUIRE(gl.nodes(i) > gl.nodes(i - 1));
        }
    }

    SECTION("an n-point rule integrates monomials up to degree 2n-1 exactly") {
        GaussLegendreRule gl(6);
        for (int k = 0; k <= 11; ++k) {
            double got = 0.0;
            for (Eigen::Index i = 0; i < gl.nodes.size(); ++i)
                got += gl.weights(i) * std::pow(gl.nodes(i), k);
            double want = (k % 2 == 1) ? 0.0 : 2.0 / double(k + 1);
            REQUIRE_THAT(got, WithinAbs(want, 1e-13));
        }
        // ... and degree 2n = 12 is visibly inexact (sanity that the
        // exactness ceiling is where theory puts it).
        double got = 0.0;
        for (Eigen::Index i = 0; i < gl.nodes.size(); ++i)
            got += gl.weights(i) * std::pow(gl.nodes(i), 12);
        REQUIRE(std::abs(got - 2.0 / 13.0) > 1e-10);
    }

    SECTION("smooth non-polynomial integrand converges spectrally") {
        GaussLegendreRule gl(20);
        double got = integrate(gl.nodes, gl.weights,
                               +[](double x) { return std::exp(x); });
        REQUIRE_THAT(got, WithinRel(std::exp(1.0) - std::exp(-1.0), 1e-13));
    }
}

TEST_CASE("panelled rule") {
    SECTION("plain panel matches the affine-mapped rule") {
        PanelRule pr(0.0, 2.0, {}, 40);
        REQUIRE_THAT(pr.weights.sum(), WithinAbs(2.0, 1e-13));
        double got = integrate(pr.nodes, pr.weights,
                               +[](double x) { return x * x; });
        REQUIRE_THAT(got, WithinRel(8.0 / 3.0, 1e-14));
    }

    SECTION("breakpoint at a kink restores fast convergence") {
        // integral of |x - 0.5| over [0, 1] = 1/4; the kink sits on a panel
        // edge, so each panel sees a polynomial.
        PanelRule pr(0.0, 1.0, {0.5}, 32);
        double got = integrate(pr.nodes, pr.weights,
                               +[](double x) { return std::abs(x - 0.5); });
        REQUIRE_THAT(got, WithinAbs(0.25, 1e-14));
    }

    SECTION("breakpoints outside the interval are ignored") {
        PanelRule pr(0.0, 1.0, {-3.0, 7.0}, 24);
        double got = integrate(pr.nodes, pr.weights,
                               +[](double x) { return std::cos(x); });
        REQUIRE_THAT(got, WithinRel(std::sin(1.0), 1e-14));
    }

    SECTION("truncated Gaussian integral matches the closed form") {
        // integral of exp(-2x^2) over R = sqrt(pi/2); [-8, 8] captures it to
        // well below 1e-12 relative.
        PanelRule pr(-8.0, 8.0, {0.0}, 160);
        double got = integrate(pr.nodes, pr.weights,
                               +[](double x) { return std::exp(-2.0 * x * x); });
        REQUIRE_THAT(got, WithinRel(std::sqrt(M_PI / 2.0), 1e-12));
    }

    SECTION("degenerate intervals are rejected") {
        REQUIRE_THROWS_AS(PanelRule(1.0, 1.0, {}, 16), Error);
        REQUIRE_THROWS_AS(PanelRule(0.0, 1.0, {}, 1), Error);
    }
}
