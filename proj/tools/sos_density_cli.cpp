// Command-line front end: two-moons data generation, density fitting,
// grid evaluation/export, and the MMD-ball saddle-point demonstration.
//
// Exit codes: 0 ok, 1 I/O failure, 2 usage error, 3 numerical failure.

#include "ksos/ksos.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

// "lo1,hi1,lo2,hi2,..." -> (lower, upper)
std::pair<ksos::Vector, ksos::Vector> parse_box(
    const std::vector<double>& flat) {
    ksos::require(!flat.empty() && flat.size() % 2 == 0,
                  "--box needs an even number of values: lo1,hi1,lo2,hi2,...");
    const auto d = Eigen::Index(flat.size() / 2);
    ksos::Vector lo(d), hi(d);
    for (Eigen::Index k = 0; k < d; ++k) {
        lo[k] = flat[std::size_t(2 * k)];
        hi[k] = flat[std::size_t(2 * k + 1)];
    }
    return {lo, hi};
}

std::string sibling_path(const std::string& model_out,
                         const std::string& suffix) {
    std::filesystem::path p(model_out);
    std::filesystem::path base = p.parent_path() / p.stem();
    return base.string() + suffix;
}

struct FitArgs {
    std::string data;
    Eigen::Index m = 0;
    double sigma = 1.0;
    double lambda = 0.0;
    std::string kernel = "gaussian";
    std::string measure = "rd";
    std::vector<double> box;
    int iters = 2000;
    double tol = 1e-8;
    std::uint64_t seed = 0;
    std::string out;
    std::string accelerate = "on";
    int resolution = 0;
};

int run_fit(const FitArgs& a) {
    ksos::Matrix data = ksos::read_points_csv(a.data);
    ksos::require(a.m >= 1 && a.m <= data.rows(),
                  "--m must be between 1 and the number of data points");

    ksos::Kernel kernel(ksos::kernel_family_from_string(a.kernel), a.sigma);
    ksos::ReferenceMeasure measure = ksos::ReferenceMeasure::lebesgue_rd();
    if (a.measure == "box") {
        ksos::require(!a.box.empty(), "--measure box requires --box");
        auto [lo, hi] = parse_box(a.box);
        ksos::require_dims(lo.size() == data.cols(),
                           "--box dimension does not match the data");
        measure = ksos::ReferenceMeasure::box(lo, hi);
    } else {
        ksos::require(a.measure == "rd", "--measure must be 'rd' or 'box'");
    }

    ksos::EmpiricalDistribution emp(data);
    ksos::Matrix support_pts = ksos::uniform_subsample(data, a.m, a.seed);
    auto support = std::make_shared<const ksos::SupportSet>(support_pts, kernel);

    ksos::FitConfig cfg;
    cfg.trace_reg = a.lambda;
    cfg.max_iters = a.iters;
    cfg.tol = a.tol;
    cfg.accelerate = a.accelerate == "on";
    cfg.rng_seed = a.seed;
    cfg.quad_resolution = a.resolution;

    auto moments = ksos::compute_moments_cached(kernel, support_pts, measure,
                                                a.resolution);
    auto [model, report] = ksos::fit_with_moments(emp, support, kernel,
                                                  moments, cfg);

    if (!a.out.empty()) {
        ksos::save_model(a.out, model, measure, report.jitter_used);
        ksos::save_report(sibling_path(a.out, ".report.json"), report);
        ksos::write_trace_csv(sibling_path(a.out, ".trace.csv"), report);
    }
    double mmd_sq = report.projected_mmd_trace.back();
    std::cout << "final mass: " << ksos::fmt17(report.final_mass) << "\n"
              << "projected MMD: " << ksos::fmt17(std::sqrt(mmd_sq))
              << " (squared: " << ksos::fmt17(mmd_sq) << ")\n"
              << "iterations: " << report.iterations
              << (report.converged ? " (converged)" : " (max iterations)")
              << "\n";
    return kExitOk;
}

struct EvalGridArgs {
    std::string model;
    std::string out;
    std::vector<double> box;
    Eigen::Index res = 200;
};

int run_eval_grid(const EvalGridArgs& a) {
    ksos::LoadedModel loaded = ksos::load_model(a.model);
    const Eigen::Index d = loaded.model.support().dim();
    ksos::require(d == 1 || d == 2,
                  "eval-grid supports 1-D curves and 2-D heatmaps only");

    ksos::GridSpec grid;
    grid.resolution = a.res;
    if (!a.box.empty()) {
        auto [lo, hi] = parse_box(a.box);
        grid.lower = lo;
        grid.upper = hi;
    } else if (loaded.measure.kind() == ksos::MeasureKind::LebesgueBox) {
        grid.lower = loaded.measure.lower();
        grid.upper = loaded.measure.upper();
    } else {
        throw ksos::Error(
            "--box is required when the model's measure is all of R^d");
    }
    ksos::require_dims(grid.lower.size() == d,
                       "--box dimension does not match the model");

    ksos::Matrix rows = ksos::eval_density_grid(loaded.model, grid);
    ksos::write_points_csv(a.out, rows);
    double riemann = ksos::grid_mass(grid, rows.col(d));
    std::cout << "rows: " << rows.rows() << "\n"
              << "grid mass (trapezoidal): " << ksos::fmt17(riemann) << "\n"
              << "mass at save time: " << ksos::fmt17(loaded.saved_mass)
              << "\n";
    return kExitOk;
}

struct CounterexampleArgs {
    double epsilon = 0.3;
    double sigma = 1.0;
    Eigen::Index grid_points = 401;
    double lower = -2.0;
    double upper = 2.0;
    double data_point = 0.0;
    std::string out;
};

int run_counterexample_cmd(const CounterexampleArgs& a) {
    ksos::CounterexampleConfig cfg;
    cfg.epsilon = a.epsilon;
    cfg.sigma = a.sigma;
    cfg.grid_points = a.grid_points;
    cfg.lower = a.lower;
    cfg.upper = a.upper;
    cfg.data_point = a.data_point;
    ksos::CounterexampleReport rep = ksos::run_counterexample(cfg);

    if (!rep.inner_converged) {
        std::cerr << "inner solver failed to reach the MMD ball boundary"
                  << " (epsilon = " << a.epsilon
                  << ", iterations = " << rep.inner_iterations << ")\n";
        return kExitNumerical;
    }

    if (!a.out.empty()) {
        // Columns: theta, relaxed objective, unrelaxed (ball) objective.
        ksos::Matrix rows(rep.theta_grid.size(), 3);
        rows.col(0) = rep.theta_grid;
        rows.col(1) = rep.relaxed_curve;
        rows.col(2) = rep.mmd_curve;
        ksos::write_points_csv(sibling_path(a.out, ".csv"), rows);

        nlohmann::json j;
        j["epsilon"] = cfg.epsilon;
        j["sigma"] = cfg.sigma;
        j["grid_points"] = cfg.grid_points;
        j["interval"] = {cfg.lower, cfg.upper};
        j["data_point"] = cfg.data_point;
        j["theta_star_relaxed"] = rep.theta_star_relaxed;
        j["theta_star_mmd"] = rep.theta_star_mmd;
        j["relaxed_argmax_index"] = rep.relaxed_argmax;
        j["mmd_argmax_index"] = rep.mmd_argmax;
        j["adversary_mmd_sq"] = rep.adversary_mmd_sq;
        j["adversary_weights"] = std::vector<double>(
            rep.adversary_weights.begin(), rep.adversary_weights.end());
        j["inner_iterations"] = rep.inner_iterations;
        std::ofstream jout(sibling_path(a.out, ".json"));
        if (!jout) throw ksos::IoError("cannot write counterexample summary");
        jout << j.dump(2) << '\n';
    }
    std::cout << "theta* (relaxed): " << ksos::fmt17(rep.theta_star_relaxed)
              << "\n"
              << "theta* (MMD ball): " << ksos::fmt17(rep.theta_star_mmd)
              << "\n"
              << "adversary MMD^2: " << ksos::fmt17(rep.adversary_mmd_sq)
              << " (budget " << ksos::fmt17(a.epsilon * a.epsilon) << ")\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kernel sum-of-squares density estimation under MMD"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data",
                                   "Sample a two-moons dataset to CSV");
    Eigen::Index gen_n = 100;
    double gen_noise = 0.05;
    std::uint64_t gen_seed = 0;
    std::string gen_out;
    gen->add_option("--n", gen_n, "number of points")
        ->check(CLI::PositiveNumber);
    gen->add_option("--noise", gen_noise, "Gaussian noise std")
        ->check(CLI::NonNegativeNumber);
    gen->add_option("--seed", gen_seed, "RNG seed");
    gen->add_option("--out", gen_out, "output CSV path")->required();

    // fit
    auto* fitc = app.add_subcommand("fit", "Fit a trace-one SoS density");
    FitArgs fa;
    fitc->add_option("--data", fa.data, "input points CSV")->required();
    fitc->add_option("--m", fa.m, "number of support points")->required();
    fitc->add_option("--sigma", fa.sigma, "kernel bandwidth")
        ->check(CLI::PositiveNumber);
    fitc->add_option("--lambda", fa.lambda, "trace regularization weight")
        ->check(CLI::NonNegativeNumber);
    fitc->add_option("--kernel", fa.kernel, "kernel family")
        ->check(CLI::IsMember({"gaussian", "laplace"}));
    fitc->add_option("--measure", fa.measure, "reference measure")
        ->check(CLI::IsMember({"rd", "box"}));
    fitc->add_option("--box", fa.box,
                     "box bounds lo1,hi1,lo2,hi2,... (measure box)")
        ->delimiter(',');
    fitc->add_option("--iters", fa.iters, "max iterations")
        ->check(CLI::PositiveNumber);
    fitc->add_option("--tol", fa.tol, "relative decrease tolerance")
        ->check(CLI::PositiveNumber);
    fitc->add_option("--seed", fa.seed, "subsampling / step-probe seed");
    fitc->add_option("--out", fa.out,
                     "model JSON path (report and trace written alongside)");
    fitc->add_option("--accelerate", fa.accelerate, "FISTA on/off")
        ->check(CLI::IsMember({"on", "off"}));
    fitc->add_option("--res", fa.resolution,
                     "quadrature nodes per axis (0 = default)")
        ->check(CLI::NonNegativeNumber);

    // eval-grid
    auto* evalc = app.add_subcommand("eval-grid",
                                     "Evaluate a saved model on a grid");
    EvalGridArgs ea;
    evalc->add_option("--model", ea.model, "model JSON path")->required();
    evalc->add_option("--out", ea.out, "output CSV path")->required();
    evalc->add_option("--box", ea.box, "grid bounds lo1,hi1,lo2,hi2,...")
        ->delimiter(',');
    evalc->add_option("--res", ea.res, "grid resolution per axis")
        ->check(CLI::Range(Eigen::Index(2), Eigen::Index(100000)));

    // counterexample
    auto* cec = app.add_subcommand(
        "counterexample", "Relaxed vs MMD-ball saddle point demonstration");
    CounterexampleArgs ca;
    cec->add_option("--epsilon", ca.epsilon, "MMD ball radius")
        ->check(CLI::NonNegativeNumber);
    cec->add_option("--sigma", ca.sigma, "kernel bandwidth")
        ->check(CLI::PositiveNumber);
    cec->add_option("--grid", ca.grid_points, "grid points on the interval")
        ->check(CLI::Range(Eigen::Index(3), Eigen::Index(100000)));
    cec->add_option("--lower", ca.lower, "interval lower end");
    cec->add_option("--upper", ca.upper, "interval upper end");
    cec->add_option("--data-point", ca.data_point, "location of the data Dirac");
    cec->add_option("--out", ca.out,
                    "output stem (.csv curves and .json summary)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gen->parsed()) {
            ksos::Matrix pts = ksos::gen_two_moons(gen_n, gen_noise, gen_seed);
            ksos::write_points_csv(gen_out, pts);
            std::cout << "wrote " << pts.rows() << " points to " << gen_out
                      << "\n";
            return kExitOk;
        }
        if (fitc->parsed()) return run_fit(fa);
        if (evalc->parsed()) return run_eval_grid(ea);
        if (cec->parsed()) return run_counterexample_cmd(ca);
    } catch (const ksos::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const ksos::NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const ksos::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitUsage;
}
