#pragma once

#include "ksos/common.hpp"
#include "ksos/kernel.hpp"
#include "ksos/psd_projection.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace ksos {

// Setup for the robust-classification saddle point demo: a Dirac data
// distribution at data_point, decision variable theta and adversary support
// both discretized on [lower, upper], Gaussian kernel of bandwidth sigma.
struct CounterexampleConfig {
    double epsilon = 0.3;     // MMD ball radius
    double lower = -2.0;      // support interval
    double upper = 2.0;
    Eigen::Index grid_points = 401;
    double sigma = 1.0;
    double data_point = 0.0;
};

struct CounterexampleReport {
    Vector theta_grid;
    Vector relaxed_curve;       // (K * mu)(theta) - eps * sqrt(k(theta,theta))
    Vector mmd_curve;           // min over the MMD ball of E_w[k(theta, .)]
    Eigen::Index relaxed_argmax = 0;
    Eigen::Index mmd_argmax = 0;
    double theta_star_relaxed = 0.0;
    double theta_star_mmd = 0.0;
    Vector adversary_weights;   // inner minimizer at theta_star_mmd
    double adversary_mmd_sq = 0.0;  // its squared MMD to the data Dirac
    long inner_iterations = 0;  // total simplex-solver iterations, diagnostic
    bool inner_converged = true;
};

namespace detail {

// Inner problem at fixed theta: minimize c^T w over the probability simplex
// subject to h(w) = w^T K w - 2 kappa^T w + 1 <= eps^2 (the squared MMD
// between the weighted grid measure and the data Dirac). Solved through the
// Lagrangian c^T w + eta h(w): for fixed eta an away-step Frank-Wolfe pass
// over the simplex, with an Illinois regula-falsi search on the multiplier
// eta to land on the constraint boundary.
//
// The Gaussian grid Gram matrix is numerically low-rank, so the quadratic
// form is carried through a thin factor P with K = P P^T up to a 1e-13
// relative spectral cutoff. In factor coordinates v = P^T w the Lagrangian
// is 2 eta-strongly convex, which is what makes away-step Frank-Wolfe
// converge linearly here while methods working against K itself crawl on
// its vanishing spectrum. Boundary decisions and reported constraint values
// always use the exact K.
class MmdBallMinimizer {
  public:
    MmdBallMinimizer(const Matrix& K, const Vector& kappa, double eps_sq)
        : K_(K), kappa_(kappa), eps_sq_(eps_sq) {
        Eigen::SelfAdjointEigenSolver<Matrix> evd(K);
        if (evd.info() != Eigen::Success)
            throw NumericalError(
                "counterexample: Gram eigendecomposition failed");
        const Vector& lam = evd.eigenvalues();
        const double lam_max = std::max(lam.maxCoeff(), 0.0);
        const double cutoff = 1e-13 * std::max(lam_max, 1e-300);
        Eigen::Index r = 0;
        for (Eigen::Index i = 0; i < lam.size(); ++i)
            if (lam[i] > cutoff) ++r;
        P_.resize(K.rows(), r);
        for (Eigen::Index i = lam.size() - r, j = 0; i < lam.size(); ++i, ++j)
            P_.col(j) = evd.eigenvectors().col(i) * std::sqrt(lam[i]);
    }

    // Exact constraint value; used for all feasibility decisions.
    double constraint(const Eigen::Ref<const Vector>& w) const {
        return w.dot(K_ * w) - 2.0 * kappa_.dot(w) + 1.0;
    }

    // Away-step Frank-Wolfe on F(w) = c^T w + eta h(w) over the simplex,
    // with exact line search and the duality gap as the stop rule (the gap
    // upper-bounds the suboptimality, so accuracy is certified). Returns
    // iterations used; w is updated in place (warm-startable).
    long minimize(const Vector& c, double eta, Vector& w,
                  long max_iters) const {
        if (eta <= 0.0) {  // pure linear objective: a vertex is optimal
            Eigen::Index j;
            c.minCoeff(&j);
            w.setZero();
            w[j] = 1.0;
            return 0;
        }
        constexpr double kGapTol = 1e-10;
        Vector v = P_.transpose() * w;  // factor coordinates, kept in sync
        long it = 0;
        for (; it < max_iters; ++it) {
            Vector grad = c + 2.0 * eta * (P_ * v - kappa_);
            Eigen::Index s;
            const double g_min = grad.minCoeff(&s);
            const double g_dot_w = grad.dot(w);
            if (g_dot_w - g_min <= kGapTol) break;  // certified optimal

            // Away vertex: worst gradient among the current support.
            Eigen::Index a = s;
            double g_max = -std::numeric_limits<double>::infinity();
            for (Eigen::Index i = 0; i < w.size(); ++i)
                if (w[i] > 0.0 && grad[i] > g_max) {
                    g_max = grad[i];
                    a = i;
                }

            const bool fw_step = (g_dot_w - g_min) >= (g_max - g_dot_w);
            // direction d = e_s - w (toward) or w - e_a (away)
            Vector pd = fw_step ? (P_.row(s).transpose() - v).eval()
                                : (v - P_.row(a).transpose()).eval();
            const double slope =
                fw_step ? (g_min - g_dot_w) : (g_dot_w - g_max);
            const double curv = 2.0 * eta * pd.squaredNorm();
            double gamma_max =
                fw_step ? 1.0 : (w[a] < 1.0 ? w[a] / (1.0 - w[a]) : 1e30);
            double gamma = curv > 0.0 ? std::min(-slope / curv, gamma_max)
                                      : gamma_max;
            if (!(gamma > 0.0)) break;  // flat direction: nothing to gain

            if (fw_step) {
                w *= (1.0 - gamma);
                w[s] += gamma;
            } else {
                w *= (1.0 + gamma);
                w[a] -= gamma;
                if (gamma >= gamma_max * (1.0 - 1e-12)) w[a] = 0.0;
                if (w[a] < 0.0) w[a] = 0.0;
            }
            v += gamma * pd;
        }
        return it;
    }

    // min c^T w over the simplex subject to h(w) <= eps^2, via a root search
    // on the multiplier: phi(eta) = h(w(eta)) - eps^2 decreases in eta.
    // feasible_seed must satisfy the constraint (the grid representation of
    // the data Dirac); w and eta_guess carry warm starts between neighboring
    // theta values. Returns the achieved objective.
    double solve(const Vector& c, const Vector& feasible_seed, Vector& w,
                 double& eta_guess, long& iteration_count,
                 bool& converged) const {
        constexpr long kBudget = 600;
        // Unconstrained-over-simplex minimizer: if feasible, eta* = 0.
        Eigen::Index j;
        c.minCoeff(&j);
        if (2.0 - 2.0 * kappa_[j] <= eps_sq_) {  // h at that vertex
            w = Vector::Zero(c.size());
            w[j] = 1.0;
            eta_guess = 0.0;
            return c[j];
        }

        // Bracket the root: eta_lo infeasible (phi > 0), eta_hi feasible.
        double eta_lo = 0.0;
        double phi_lo = 2.0 - 2.0 * kappa_[j] - eps_sq_;
        double eta_hi = eta_guess > 0.0 ? eta_guess : 1.0;
        iteration_count += minimize(c, eta_hi, w, kBudget);
        double phi_hi = constraint(w) - eps_sq_;
        int doublings = 0;
        while (phi_hi > 0.0) {
            if (++doublings > 60) {
                converged = false;
                w = feasible_seed;
                return c.dot(w);
            }
            eta_lo = eta_hi;
            phi_lo = phi_hi;
            eta_hi *= 8.0;
            iteration_count += minimize(c, eta_hi, w, kBudget);
            phi_hi = constraint(w) - eps_sq_;
        }
        Vector w_feas = w;

        // Illinois regula falsi on phi; keep the best feasible iterate.
        int stale_lo = 0, stale_hi = 0;
        for (int b = 0; b < 40; ++b) {
            if (eta_hi - eta_lo <= 1e-6 * eta_hi) break;
            if (phi_hi > -1e-8) break;  // feasible side already on boundary
            double flo = stale_lo > 0 ? phi_lo / double(1 << stale_lo) : phi_lo;
            double fhi = stale_hi > 0 ? phi_hi / double(1 << stale_hi) : phi_hi;
            double eta_mid = (eta_lo * (-fhi) + eta_hi * flo) / (flo - fhi);
            const double pad = 0.01 * (eta_hi - eta_lo);
            if (!(eta_mid > eta_lo + pad) || !(eta_mid < eta_hi - pad))
                eta_mid = 0.5 * (eta_lo + eta_hi);
            iteration_count += minimize(c, eta_mid, w, kBudget);
            double phi_mid = constraint(w) - eps_sq_;
            if (phi_mid <= 0.0) {
                eta_hi = eta_mid;
                phi_hi = phi_mid;
                w_feas = w;
                ++stale_lo;
                stale_hi = 0;
            } else {
                eta_lo = eta_mid;
                phi_lo = phi_mid;
                ++stale_hi;
                stale_lo = 0;
            }
        }

        // Polish on the feasible side.
        w = w_feas;
        iteration_count += minimize(c, eta_hi, w, 2 * kBudget);
        if (constraint(w) <= eps_sq_) w_feas = std::move(w);
        w = w_feas;
        eta_guess = eta_hi;
        return c.dot(w);
    }

  private:
    double value(const Vector& c, double eta,
                 const Eigen::Ref<const Vector>& w) const {
        double quad = (P_.transpose() * w).squaredNorm();
        return c.dot(w) + eta * (quad - 2.0 * kappa_.dot(w) + 1.0);
    }

    const Matrix& K_;
    const Vector& kappa_;
    double eps_sq_;
    double k_opnorm_ = 0.0;
    Matrix P_;  // thin factor, K = P P^T up to the spectral cutoff
};

}  // namespace detail

// Compute both sides of the saddle-point demonstration: the relaxed
// objective (K * mu)(theta) - eps sqrt(k(theta,theta)), whose argmax ignores
// eps for kernels with constant diagonal, and the unrelaxed objective
// g(theta) = min over the MMD ball around the data Dirac of the expected
// kernel value. For moderate ball radii the identity
//   (K * mu)(data_point) = (||w_mu||^2 + 1 - MMD^2(mu, data Dirac)) / 2
// anchors g at the data point, so the robust argmax stays there; only once
// eps is large enough to let the adversary vacate the Dirac entirely
// (eps >~ 1 for unit-diagonal kernels) does the argmax split away.
inline CounterexampleReport run_counterexample(const CounterexampleConfig& cfg) {
    require(cfg.epsilon >= 0.0, "counterexample: epsilon must be >= 0");
    require(cfg.grid_points >= 3, "counterexample: grid_points must be >= 3");
    require(cfg.lower < cfg.upper,
            "counterexample: support interval must have lower < upper");

    const Kernel kernel(KernelFamily::Gaussian, cfg.sigma);
    const Eigen::Index N = cfg.grid_points;

    CounterexampleReport rep;
    rep.theta_grid = Vector::LinSpaced(N, cfg.lower, cfg.upper);
    Matrix z(N, 1);
    z.col(0) = rep.theta_grid;
    Matrix K = kernel.gram(z, z);
    Vector x0(1);
    x0[0] = cfg.data_point;
    Vector kappa = kernel.section(x0, z);  // kappa_i = k(z_i, data_point)

    // Relaxed path: for the Gaussian kernel k(theta,theta) = 1, so the
    // penalty is a constant shift and the argmax matches the eps = 0 one.
    rep.relaxed_curve = kappa.array() - cfg.epsilon;
    rep.relaxed_curve.maxCoeff(&rep.relaxed_argmax);
    rep.theta_star_relaxed = rep.theta_grid[rep.relaxed_argmax];

    // Grid representation of the data Dirac: nearest grid point.
    Eigen::Index i0;
    (rep.theta_grid.array() - cfg.data_point).abs().minCoeff(&i0);
    Vector seed = Vector::Zero(N);
    seed[i0] = 1.0;

    rep.mmd_curve.resize(N);
    if (cfg.epsilon == 0.0) {
        // Radius-zero ball: the adversary is pinned to the data Dirac.
        rep.mmd_curve = K.col(i0);
        rep.adversary_weights = seed;
        rep.adversary_mmd_sq = 2.0 - 2.0 * kappa[i0];
    } else {
        const double eps_sq = cfg.epsilon * cfg.epsilon;
        detail::MmdBallMinimizer inner(K, kappa, eps_sq);
        Vector w = seed;
        double eta_guess = 0.0;
        Vector argmax_w = seed;
        double best = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < N; ++j) {
            // theta grid == adversary grid, so c(theta_j) is a column of K.
            bool ok = true;
            rep.mmd_curve[j] = inner.solve(K.col(j), seed, w, eta_guess,
                                           rep.inner_iterations, ok);
            rep.inner_converged = rep.inner_converged && ok;
            if (rep.mmd_curve[j] > best) {
                best = rep.mmd_curve[j];
                argmax_w = w;
            }
        }
        rep.adversary_weights = std::move(argmax_w);
        rep.adversary_mmd_sq = inner.constraint(rep.adversary_weights);
    }
    rep.mmd_curve.maxCoeff(&rep.mmd_argmax);
    rep.theta_star_mmd = rep.theta_grid[rep.mmd_argmax];
    return rep;
}

}  // namespace ksos
