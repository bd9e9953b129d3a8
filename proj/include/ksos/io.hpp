#pragma once

#include "ksos/common.hpp"
#include "ksos/fit.hpp"
#include "ksos/kernel.hpp"
#include "ksos/moments.hpp"
#include "ksos/sos_model.hpp"

#include <json.hpp>

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace ksos {

// 17 significant digits: lossless double -> text -> double round trip.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// ---------- points CSV (headerless, one row per point) ----------

inline Matrix read_points_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                double v = std::stod(cell, &used);
                while (used < cell.size() && std::isspace(
                           static_cast<unsigned char>(cell[used])))
                    ++used;
                if (used != cell.size())
                    throw std::invalid_argument(cell);
                row.push_back(v);
            } catch (const std::exception&) {
                throw IoError("'" + path + "' line " + std::to_string(lineno) +
                              ": cannot parse '" + cell + "' as a number");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw IoError("'" + path + "' line " + std::to_string(lineno) +
                          ": inconsistent column count");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IoError("'" + path + "' contains no data rows");
    Matrix M(Eigen::Index(rows.size()), Eigen::Index(rows.front().size()));
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index j = 0; j < M.cols(); ++j)
            M(i, j) = rows[std::size_t(i)][std::size_t(j)];
    return M;
}

inline void write_points_csv(const std::string& path,
                             const Eigen::Ref<const Matrix>& M) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        for (Eigen::Index j = 0; j < M.cols(); ++j) {
            if (j) out << ',';
            out << fmt17(M(i, j));
        }
        out << '\n';
    }
    if (!out) throw IoError("write to '" + path + "' failed");
}

// ---------- measure descriptor ----------

inline nlohmann::json measure_to_json(const ReferenceMeasure& measure) {
    if (measure.kind() == MeasureKind::LebesgueRd)
        return {{"kind", "rd"}};
    nlohmann::json j{{"kind", "box"}};
    j["lower"] = std::vector<double>(measure.lower().begin(),
                                     measure.lower().end());
    j["upper"] = std::vector<double>(measure.upper().begin(),
                                     measure.upper().end());
    return j;
}

inline ReferenceMeasure measure_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "rd") return ReferenceMeasure::lebesgue_rd();
    if (kind == "box") {
        auto lo = j.at("lower").get<std::vector<double>>();
        auto hi = j.at("upper").get<std::vector<double>>();
        return ReferenceMeasure::box(
            Eigen::Map<const Vector>(lo.data(), Eigen::Index(lo.size())),
            Eigen::Map<const Vector>(hi.data(), Eigen::Index(hi.size())));
    }
    throw IoError("unknown measure kind '" + kind + "'");
}

// ---------- model JSON ----------

struct LoadedModel {
    SosDensityModel model;  // without moments; density evaluation only
    ReferenceMeasure measure;
    double jitter = 0.0;
    double saved_mass = 0.0;
};

inline void save_model(const std::string& path, const SosDensityModel& model,
                       const ReferenceMeasure& measure, double jitter) {
    require(model.has_moments(), "save_model: model has no moments (mass unknown)");
    const Eigen::Index m = model.support().size();
    const Eigen::Index d = model.support().dim();
    nlohmann::json j;
    j["kernel"] = to_string(model.kernel().family());
    j["sigma"] = model.kernel().bandwidth();
    j["d"] = d;
    std::vector<double> pts;
    pts.reserve(std::size_t(m * d));
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index k = 0; k < d; ++k)
            pts.push_back(model.support().points()(i, k));
    j["support_points"] = std::move(pts);  // row-major
    std::vector<double> blo;
    blo.reserve(std::size_t(m * (m + 1) / 2));
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index k = 0; k <= i; ++k)
            blo.push_back(model.coefficients()(i, k));
    j["B_lower"] = std::move(blo);  // row-major lower triangle
    j["measure"] = measure_to_json(measure);
    j["jitter"] = jitter;
    j["mass"] = model.mass();
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write to '" + path + "' failed");
}

inline LoadedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("'" + path + "': invalid JSON: " + e.what());
    }
    try {
        Kernel kernel(kernel_family_from_string(j.at("kernel").get<std::string>()),
                      j.at("sigma").get<double>());
        const auto d = j.at("d").get<Eigen::Index>();
        auto pts = j.at("support_points").get<std::vector<double>>();
        require(d >= 1 && pts.size() % std::size_t(d) == 0,
                "model file: support point array does not match dimension");
        const Eigen::Index m = Eigen::Index(pts.size()) / d;
        Matrix points(m, d);
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index k = 0; k < d; ++k)
                points(i, k) = pts[std::size_t(i * d + k)];
        auto blo = j.at("B_lower").get<std::vector<double>>();
        require(Eigen::Index(blo.size()) == m * (m + 1) / 2,
                "model file: B lower triangle has wrong length");
        Matrix B(m, m);
        std::size_t idx = 0;
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index k = 0; k <= i; ++k) {
                B(i, k) = blo[idx];
                B(k, i) = blo[idx];
                ++idx;
            }
        auto support = std::make_shared<const SupportSet>(points, kernel);
        return LoadedModel{
            SosDensityModel(std::move(support), kernel, std::move(B), nullptr),
            measure_from_json(j.at("measure")), j.at("jitter").get<double>(),
            j.at("mass").get<double>()};
    } catch (const nlohmann::json::exception& e) {
        throw IoError("'" + path + "': missing or malformed field: " +
                      e.what());
    }
}

// ---------- fit report ----------

inline nlohmann::json report_to_json(const FitReport& rep) {
    nlohmann::json j;
    j["iterations"] = rep.iterations;
    j["converged"] = rep.converged;
    j["final_mass"] = rep.final_mass;
    j["jitter"] = rep.jitter_used;
    j["step_size"] = rep.step_size;
    j["objective_trace"] = rep.objective_trace;
    j["projected_mmd_trace"] = rep.projected_mmd_trace;
    return j;
}

inline void save_report(const std::string& path, const FitReport& rep) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << report_to_json(rep).dump(2) << '\n';
    if (!out) throw IoError("write to '" + path + "' failed");
}

// Columns: iteration, objective, projected MMD^2 (headerless).
inline void write_trace_csv(const std::string& path, const FitReport& rep) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    for (std::size_t k = 0; k < rep.objective_trace.size(); ++k)
        out << k << ',' << fmt17(rep.objective_trace[k]) << ','
            << fmt17(rep.projected_mmd_trace[k]) << '\n';
    if (!out) throw IoError("write to '" + path + "' failed");
}

// ---------- moment cache ----------
//
// Cache entries are keyed by a content hash of (support points, kernel
// family, sigma, measure, quadrature resolution) and live in the directory
// named by SOS_DENSITY_CACHE_DIR; caching is disabled when it is unset.
// The format is a raw little-endian double dump — the cache is advisory and
// machine-local, not an interchange format.

namespace detail {

inline std::uint64_t fnv1a_bytes(const void* data, std::size_t n,
                                 std::uint64_t h) {
    auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t fnv1a_double(double v, std::uint64_t h) {
    return fnv1a_bytes(&v, sizeof(v), h);
}

}  // namespace detail

inline std::string moment_cache_key(const Kernel& kernel,
                                    const Eigen::Ref<const Matrix>& points,
                                    const ReferenceMeasure& measure,
                                    int resolution) {
    std::uint64_t h = 14695981039346656037ull;
    const std::string tag = "ksos-moments-v1";
    h = detail::fnv1a_bytes(tag.data(), tag.size(), h);
    const std::string fam = to_string(kernel.family());
    h = detail::fnv1a_bytes(fam.data(), fam.size(), h);
    h = detail::fnv1a_double(kernel.bandwidth(), h);
    std::int64_t dims[2] = {points.rows(), points.cols()};
    h = detail::fnv1a_bytes(dims, sizeof(dims), h);
    for (Eigen::Index i = 0; i < points.rows(); ++i)
        for (Eigen::Index j = 0; j < points.cols(); ++j)
            h = detail::fnv1a_double(points(i, j), h);
    if (measure.kind() == MeasureKind::LebesgueRd) {
        h = detail::fnv1a_bytes("rd", 2, h);
    } else {
        h = detail::fnv1a_bytes("box", 3, h);
        for (Eigen::Index i = 0; i < measure.lower().size(); ++i)
            h = detail::fnv1a_double(measure.lower()[i], h);
        for (Eigen::Index i = 0; i < measure.upper().size(); ++i)
            h = detail::fnv1a_double(measure.upper()[i], h);
    }
    std::int64_t res = resolution;
    h = detail::fnv1a_bytes(&res, sizeof(res), h);
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(h));
    return buf;
}

inline std::optional<std::string> moment_cache_dir() {
    const char* dir = std::getenv("SOS_DENSITY_CACHE_DIR");
    if (dir == nullptr || *dir == '\0') return std::nullopt;
    return std::string(dir);
}

inline std::optional<MomentData> try_load_cached_moments(
    const std::string& dir, const std::string& key) {
    namespace fs = std::filesystem;
    fs::path file = fs::path(dir) / (key + ".moments");
    std::ifstream in(file, std::ios::binary);
    if (!in) return std::nullopt;
    char magic[8] = {};
    std::uint64_t m = 0;
    std::uint8_t prov = 0;
    in.read(magic, 8);
    in.read(reinterpret_cast<char*>(&m), sizeof(m));
    in.read(reinterpret_cast<char*>(&prov), sizeof(prov));
    if (!in || std::string(magic, 8) != "KSOSMOM1" || m == 0 ||
        Eigen::Index(m) > kDefaultSupportCap)
        return std::nullopt;
    MomentData data;
    const Eigen::Index mi = Eigen::Index(m);
    data.W.resize(mi, mi);
    data.u.resize(mi * mi, mi);
    data.provenance = prov == 0 ? MomentProvenance::ClosedFormGaussian
                                : MomentProvenance::Quadrature;
    in.read(reinterpret_cast<char*>(data.W.data()),
            std::streamsize(sizeof(double)) * mi * mi);
    in.read(reinterpret_cast<char*>(data.u.data()),
            std::streamsize(sizeof(double)) * mi * mi * mi);
    if (!in || in.peek() != std::ifstream::traits_type::eof())
        return std::nullopt;
    return data;
}

inline void store_cached_moments(const std::string& dir,
                                 const std::string& key,
                                 const MomentData& data) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);  // best effort; cache is advisory
    fs::path file = fs::path(dir) / (key + ".moments");
    fs::path tmp = fs::path(dir) / (key + ".moments.tmp");
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) return;
        const std::uint64_t m = std::uint64_t(data.size());
        const std::uint8_t prov =
            data.provenance == MomentProvenance::ClosedFormGaussian ? 0 : 1;
        out.write("KSOSMOM1", 8);
        out.write(reinterpret_cast<const char*>(&m), sizeof(m));
        out.write(reinterpret_cast<const char*>(&prov), sizeof(prov));
        out.write(reinterpret_cast<const char*>(data.W.data()),
                  std::streamsize(sizeof(double)) * data.W.size());
        out.write(reinterpret_cast<const char*>(data.u.data()),
                  std::streamsize(sizeof(double)) * data.u.size());
        if (!out) return;
    }
    fs::rename(tmp, file, ec);  // atomic publish; failure leaves no entry
    if (ec) fs::remove(tmp, ec);
}

// compute_moments with a transparent cache in SOS_DENSITY_CACHE_DIR.
inline std::shared_ptr<const MomentData> compute_moments_cached(
    const Kernel& kernel, const Eigen::Ref<const Matrix>& points,
    const ReferenceMeasure& measure, int resolution = 0) {
    auto dir = moment_cache_dir();
    std::string key;
    if (dir) {
        // Normalize the resolution so closed-form and default-resolution
        // requests share an entry exactly when they share results.
        int effective = 0;
        if (!(kernel.family() == KernelFamily::Gaussian &&
              measure.kind() == MeasureKind::LebesgueRd))
            effective = resolution > 0
                            ? resolution
                            : default_quadrature_resolution(
                                  int(points.cols()));
        key = moment_cache_key(kernel, points, measure, effective);
        if (auto hit = try_load_cached_moments(*dir, key))
            return std::make_shared<const MomentData>(std::move(*hit));
    }
    auto data = std::make_shared<const MomentData>(
        compute_moments(kernel, points, measure, resolution));
    if (dir) store_cached_moments(*dir, key, *data);
    return data;
}

}  // namespace ksos
