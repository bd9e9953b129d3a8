#pragma once

#include "ksos/common.hpp"
#include "ksos/kernel.hpp"
#include "ksos/moments.hpp"
#include "ksos/psd_projection.hpp"
#include "ksos/sos_model.hpp"

#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

namespace ksos {

// Solver hyperparameters. step_size <= 0 selects the automatic 1/L rule.
struct FitConfig {
    double trace_reg = 0.0;       // weight of the tr(B Ktilde) regularizer
    int max_iters = 2000;
    double step_size = 0.0;       // <= 0: auto
    double tol = 1e-8;            // relative objective decrease threshold
    bool accelerate = true;       // FISTA; false gives plain projected gradient
    double jitter_seed = 0.0;     // first jitter tried on the moment matrix
    std::uint64_t rng_seed = 0;
    int quad_resolution = 0;      // 0: per-dimension default (quadrature paths)
};

struct FitReport {
    std::vector<double> objective_trace;      // f(C_k), k = 0..iterations
    std::vector<double> projected_mmd_trace;  // ||P_m(v - w_{p_B_k})||^2
    double final_mass = 0.0;
    double jitter_used = 0.0;
    int iterations = 0;
    bool converged = false;
    double step_size = 0.0;
};

// Everything the objective needs, precomputed once per fit:
// the reparameterized problem  min_C  U(B)^T Ktilde^{-1} U(B)
//                                     + <C, R^{-T}(lambda Ktilde - 2V) R^{-1}>_F
// over {C PSD, tr C = 1}, with B = R^{-1} C R^{-T} and W + jitter I = R^T R.
//
// The identity <U_r, B>_F = <R^{-T} U_r R^{-1}, C>_F lets every evaluation
// run directly in C coordinates through the transformed tensor u_t (column r
// holds vec(R^{-T} U_r R^{-1})). That matters numerically: when W is badly
// conditioned, forming B = R^{-1} C R^{-T} explicitly creates huge entries
// whose contributions to U(B) cancel analytically but not in floating point,
// while the entries of R^{-T} U_r R^{-1} stay O(1) -- they are moments of
// products of functions orthonormalized in L2(rho).
struct FitContext {
    std::shared_ptr<const SupportSet> support;
    std::shared_ptr<const MomentData> moments;
    TraceOneFactorization w_factor;   // R, R_inv, jitter
    Matrix u_t;                       // (m^2) x m, col r = vec(R^{-T} U_r R^{-1})
    Matrix V;                         // V_pq = u_pq^T Ktilde^{-1} K(support,X) a
    Matrix lin_grad;                  // R^{-T} (lambda Ktilde - 2V) R^{-1}
    Vector span_coeffs;               // c = Ktilde^{-1} K(support,X) a
    double emp_norm_sq = 0.0;         // ||P_m(v)||^2, constant in B
    double trace_reg = 0.0;
};

namespace detail {

// R^{-T} M R^{-1} for the upper-triangular Cholesky factor R, via two
// triangular solves (no explicit inverse product).
inline Matrix congruence_by_inverse(const Matrix& R, const Matrix& M) {
    Matrix X = R.transpose().triangularView<Eigen::Lower>().solve(M);
    Matrix G = R.transpose()
                   .triangularView<Eigen::Lower>()
                   .solve(X.transpose())
                   .transpose();
    return 0.5 * (G + G.transpose());
}

}  // namespace detail

inline FitContext make_fit_context(const EmpiricalDistribution& emp,
                                   std::shared_ptr<const SupportSet> support,
                                   const Kernel& kernel,
                                   std::shared_ptr<const MomentData> moments,
                                   double trace_reg, double jitter_seed) {
    require_dims(support->dim() == emp.dim(), "fit: dimension mismatch");
    require_dims(moments->size() == support->size(),
                 "fit: moments do not match support size");
    FitContext ctx;
    ctx.support = std::move(support);
    ctx.moments = std::move(moments);
    ctx.trace_reg = trace_reg;
    ctx.w_factor = cholesky_with_jitter(ctx.moments->W, jitter_seed);

    const Eigen::Index m = ctx.support->size();
    Matrix Kxs = kernel.gram(ctx.support->points(), emp.points());
    Vector Ka = Kxs * emp.weights();
    ctx.span_coeffs = ctx.support->factor().solve(Ka);
    ctx.emp_norm_sq = Ka.dot(ctx.span_coeffs);

    Vector v_flat = ctx.moments->u * ctx.span_coeffs;
    Matrix V = Eigen::Map<const Matrix>(v_flat.data(), m, m);
    ctx.V = 0.5 * (V + V.transpose());

    Matrix M = trace_reg * ctx.support->gram() - 2.0 * ctx.V;
    ctx.lin_grad = detail::congruence_by_inverse(ctx.w_factor.R, M);

    ctx.u_t.resize(m * m, m);
    for (Eigen::Index r = 0; r < m; ++r) {
        Eigen::Map<const Matrix> Ur(ctx.moments->u.col(r).data(), m, m);
        Matrix T = detail::congruence_by_inverse(ctx.w_factor.R, Ur);
        ctx.u_t.col(r) = Eigen::Map<const Vector>(T.data(), m * m);
    }
    return ctx;
}

namespace detail {

struct Evaluation {
    double objective = 0.0;
    double mmd_sq_raw = 0.0;  // before the round-off clamp
    Matrix gradient;
};

inline Evaluation evaluate_objective(const Eigen::Ref<const Matrix>& C,
                                     const FitContext& ctx,
                                     bool with_gradient) {
    const Eigen::Index m = C.rows();
    Eigen::Map<const Vector> c_flat(C.data(), m * m);
    Vector UB = ctx.u_t.transpose() * c_flat;  // = U(B), B = R^{-1} C R^{-T}
    Vector y = ctx.support->factor().solve(UB);
    double quad = UB.dot(y);
    double cross = UB.dot(ctx.span_coeffs);  // <B, V>_F
    double lin = C.cwiseProduct(ctx.lin_grad).sum();

    Evaluation ev;
    ev.objective = quad + lin;  // lin = trace regularizer - 2*cross
    ev.mmd_sq_raw = quad - 2.0 * cross + ctx.emp_norm_sq;
    if (with_gradient) {
        Vector g_flat = 2.0 * (ctx.u_t * y);
        Matrix G = Eigen::Map<const Matrix>(g_flat.data(), m, m) + ctx.lin_grad;
        ev.gradient = 0.5 * (G + G.transpose());
    }
    return ev;
}

}  // namespace detail

// Objective value and gradient of the C-parameterized problem.
inline std::pair<double, Matrix> objective_and_gradient(
    const Eigen::Ref<const Matrix>& C, const FitContext& ctx) {
    require_dims(C.rows() == ctx.moments->size() && C.cols() == C.rows(),
                 "objective_and_gradient: dimension mismatch");
    auto ev = detail::evaluate_objective(C, ctx, true);
    return {ev.objective, std::move(ev.gradient)};
}

// 1/L step size, where L bounds the gradient Lipschitz constant of the
// quadratic term: L = 2 ||M_U||^2 for the linear map
// C -> Ktilde^{-1/2} U(R^{-1} C R^{-T}). Estimated by 50 power iterations on
// the Hessian action (deterministic given the seed), with a 1% safety margin.
inline double step_size_auto(const FitContext& ctx, std::uint64_t rng_seed) {
    const Eigen::Index m = ctx.moments->size();
    std::mt19937_64 rng(rng_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix C(m, m);
    for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index i = 0; i < m; ++i) C(i, j) = gauss(rng);
    C = 0.5 * (C + C.transpose()).eval();
    double nrm = C.norm();
    if (nrm == 0.0) C = Matrix::Identity(m, m);
    C /= std::max(C.norm(), 1e-300);

    auto hessian_apply = [&](const Matrix& X) -> Matrix {
        Eigen::Map<const Vector> x_flat(X.data(), m * m);
        Vector UX = ctx.u_t.transpose() * x_flat;
        Vector y = ctx.support->factor().solve(UX);
        Vector h_flat = 2.0 * (ctx.u_t * y);
        Eigen::Map<const Matrix> H(h_flat.data(), m, m);
        return 0.5 * (H + H.transpose());
    };

    double lipschitz = 0.0;
    for (int it = 0; it < 50; ++it) {
        Matrix HC = hessian_apply(C);
        double norm = HC.norm();
        if (norm < 1e-300) { lipschitz = 0.0; break; }
        lipschitz = C.cwiseProduct(HC).sum();  // Rayleigh quotient
        C = HC / norm;
    }
    if (lipschitz <= 0.0) return 1.0;  // degenerate u: pure linear objective
    return 1.0 / (1.01 * lipschitz);
}

// Fit with moments supplied by the caller (e.g. from a cache). The
// convenience overload below computes them from the reference measure first.
inline std::pair<SosDensityModel, FitReport> fit_with_moments(
    const EmpiricalDistribution& emp, std::shared_ptr<const SupportSet> support,
    const Kernel& kernel, std::shared_ptr<const MomentData> moments,
    const FitConfig& cfg) {
    require(cfg.max_iters >= 1, "fit: max_iters must be >= 1");
    require(cfg.tol > 0.0, "fit: tol must be positive");

    FitContext ctx = make_fit_context(emp, support, kernel, moments,
                                      cfg.trace_reg, cfg.jitter_seed);
    const Eigen::Index m = support->size();

    double step = cfg.step_size > 0.0 ? cfg.step_size
                                      : step_size_auto(ctx, cfg.rng_seed);

    FitReport report;
    report.jitter_used = ctx.w_factor.jitter;
    report.step_size = step;

    Matrix C = Matrix::Identity(m, m) / double(m);
    Matrix C_prev = C;
    Matrix Y = C;
    double t_momentum = 1.0;

    auto ev = detail::evaluate_objective(C, ctx, false);
    report.objective_trace.push_back(ev.objective);
    report.projected_mmd_trace.push_back(clamp_mmd_sq(ev.mmd_sq_raw));
    double f_curr = ev.objective;

    constexpr int kWindow = 5;
    int iter = 0;
    for (; iter < cfg.max_iters; ++iter) {
        const Matrix& eval_point = cfg.accelerate ? Y : C;
        auto g = detail::evaluate_objective(eval_point, ctx, true);

        Matrix C_next;
        double f_next = 0.0;
        int halvings = 0;
        for (;; ++halvings) {
            if (halvings > 20)
                throw NumericalError(
                    "fit: objective stayed non-finite after 20 step halvings");
            Matrix trial = eval_point - step * g.gradient;
            if (!trial.allFinite()) {  // step overflowed before projection
                step *= 0.5;
                continue;
            }
            C_next = project_trace_one_psd(trial);
            auto evn = detail::evaluate_objective(C_next, ctx, false);
            f_next = evn.objective;
            if (std::isfinite(f_next)) {
                report.projected_mmd_trace.push_back(clamp_mmd_sq(evn.mmd_sq_raw));
                break;
            }
            step *= 0.5;
        }

        if (cfg.accelerate) {
            if (f_next > f_curr) {
                // Function-value restart: drop the momentum.
                Y = C_next;
                t_momentum = 1.0;
            } else {
                double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_momentum *
                                                                 t_momentum));
                Y = C_next + ((t_momentum - 1.0) / t_next) * (C_next - C_prev);
                t_momentum = t_next;
            }
        }
        C_prev = C;
        C = C_next;
        f_curr = f_next;
        report.objective_trace.push_back(f_next);

        const auto& tr = report.objective_trace;
        if (int(tr.size()) > kWindow) {
            double decrease = tr[tr.size() - 1 - kWindow] - tr.back();
            if (decrease >= 0.0 &&
                decrease < cfg.tol * std::max(1.0, std::abs(tr.back()))) {
                report.converged = true;
                ++iter;
                break;
            }
        }
    }
    report.iterations = iter;

    Matrix Z = ctx.w_factor.R.triangularView<Eigen::Upper>().solve(C);
    Matrix B = ctx.w_factor.R.triangularView<Eigen::Upper>()
                   .solve(Z.transpose())
                   .transpose();
    B = 0.5 * (B + B.transpose()).eval();

    // Renormalize to tr(BW) = 1 using the C-side mass identity
    //   tr(B W) = tr(C) - jit * tr(B),
    // exact because tr(B (W + jit I)) = tr(C). tr(C) is 1 to round-off after
    // projection and tr(B) is a cancellation-free sum (B is PSD), so this
    // stays accurate even when W is badly conditioned and ||B|| is large --
    // the regime where the naive <B, W>_F contraction loses ~7 digits.
    const double jit = ctx.w_factor.jitter;
    const double mass_raw = C.trace() - jit * B.trace();
    const double denom = jit > 0.0 ? 1.0 - jit * B.trace() : mass_raw;
    if (!(mass_raw > 0.0) || !(denom > 0.0))
        throw NumericalError("fit: degenerate solution (nonpositive mass)");
    SosDensityModel model(support, kernel, Matrix(B / denom), moments);
    report.final_mass = mass_raw / denom;
    return {std::move(model), std::move(report)};
}

// Fit a trace-one SoS density to the empirical distribution by projected
// gradient descent or FISTA on the C parameterization, then map back
// B = R^{-1} C R^{-T} and renormalize for the jitter if one was needed.
inline std::pair<SosDensityModel, FitReport> fit(
    const EmpiricalDistribution& emp, std::shared_ptr<const SupportSet> support,
    const Kernel& kernel, const ReferenceMeasure& measure,
    const FitConfig& cfg) {
    require(cfg.max_iters >= 1, "fit: max_iters must be >= 1");
    require(cfg.tol > 0.0, "fit: tol must be positive");

    auto moments = std::make_shared<const MomentData>(compute_moments(
        kernel, support->points(), measure, cfg.quad_resolution));
    return fit_with_moments(emp, std::move(support), kernel, std::move(moments),
                            cfg);
}

// Uniform subsample without replacement; the default support selection.
inline Matrix uniform_subsample(const Eigen::Ref<const Matrix>& points,
                                Eigen::Index m, std::uint64_t seed) {
    require(m >= 1 && m <= points.rows(),
            "uniform_subsample: m must be in [1, n]");
    std::vector<Eigen::Index> idx(std::size_t(points.rows()));
    std::iota(idx.begin(), idx.end(), Eigen::Index(0));
    std::mt19937_64 rng(seed);
    for (Eigen::Index i = 0; i < m; ++i) {
        std::uniform_int_distribution<Eigen::Index> pick(i, points.rows() - 1);
        std::swap(idx[std::size_t(i)], idx[std::size_t(pick(rng))]);
    }
    Matrix out(m, points.cols());
    for (Eigen::Index i = 0; i < m; ++i)
        out.row(i) = points.row(idx[std::size_t(i)]);
    return out;
}

}  // namespace ksos
