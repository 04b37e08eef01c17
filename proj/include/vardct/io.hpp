#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "geometry.hpp"
#include "simulate.hpp"
#include "system_matrix.hpp"
#include "vard.hpp"

namespace vardct {

using json = nlohmann::json;

// All binary payloads are little-endian, 64-bit indices and doubles. Headers
// are a single JSON line followed by '\n', then the raw payload.

namespace detail {

template <typename T>
void write_raw(std::ofstream& f, const std::vector<T>& v) {
    f.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
void read_raw(std::ifstream& f, std::vector<T>& v, std::size_t count) {
    v.resize(count);
    f.read(reinterpret_cast<char*>(v.data()),
           static_cast<std::streamsize>(count * sizeof(T)));
    if (!f) throw io_error("truncated payload");
}

inline json read_header(std::ifstream& f, const std::string& magic, const std::string& path) {
    std::string line;
    if (!std::getline(f, line)) throw io_error("cannot read header: " + path);
    json h;
    try {
        h = json::parse(line);
    } catch (const json::exception& e) {
        throw io_error("bad header in " + path + ": " + e.what());
    }
    if (!h.contains("magic") || h["magic"] != magic)
        throw io_error("wrong magic in " + path + " (expected " + magic + ")");
    return h;
}

}  // namespace detail

struct ImageFile {
    int nx = 0, ny = 0;
    double pixel_size = 1.0;
    Vec data;
    json meta;  // provenance: config hash, seed, algorithm tag, ...
};

inline void write_image(const std::string& path, const ImageFile& img) {
    require(static_cast<std::int64_t>(img.data.size()) ==
                static_cast<std::int64_t>(img.nx) * img.ny,
            "write_image: data size mismatch");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open for writing: " + path);
    json h{{"magic", "vardct-image"},
           {"version", 1},
           {"nx", img.nx},
           {"ny", img.ny},
           {"pixel_size", img.pixel_size},
           {"meta", img.meta.is_null() ? json::object() : img.meta}};
    f << h.dump() << "\n";
    detail::write_raw(f, img.data);
    if (!f) throw io_error("write failed: " + path);
}

inline ImageFile read_image(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open: " + path);
    const json h = detail::read_header(f, "vardct-image", path);
    ImageFile img;
    img.nx = h.at("nx").get<int>();
    img.ny = h.at("ny").get<int>();
    img.pixel_size = h.at("pixel_size").get<double>();
    img.meta = h.value("meta", json::object());
    detail::read_raw(f, img.data, static_cast<std::size_t>(img.nx) * img.ny);
    return img;
}

inline json geometry_to_json(const FanBeamGeometry& g) {
    return json{{"source_to_isocenter_mm", g.source_to_isocenter},
                {"source_to_detector_mm", g.source_to_detector},
                {"detector_pitch_mm", g.detector_pitch},
                {"n_detectors", g.n_detectors},
                {"n_views", g.n_views},
                {"detector_offset_mm", g.detector_offset}};
}

inline void write_sinogram(const std::string& path, const Sinogram& s, const json& geometry,
                           const json& meta = json::object()) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open for writing: " + path);
    // eta stored as a scalar when uniform, else as a full array
    bool uniform = true;
    for (double e : s.eta)
        if (e != s.eta[0]) {
            uniform = false;
            break;
        }
    json h{{"magic", "vardct-sinogram"}, {"version", 1},          {"n", s.size()},
           {"seed", s.seed},             {"geometry_id", s.geometry_id},
           {"geometry", geometry},       {"meta", meta}};
    if (uniform && !s.eta.empty())
        h["eta"] = s.eta[0];
    else
        h["eta"] = s.eta;
    f << h.dump() << "\n";
    detail::write_raw(f, s.y);
    if (!f) throw io_error("write failed: " + path);
}

struct SinogramFile {
    Sinogram sino;
    json geometry;
    json meta;
};

inline SinogramFile read_sinogram(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open: " + path);
    const json h = detail::read_header(f, "vardct-sinogram", path);
    SinogramFile out;
    const auto n = h.at("n").get<std::int64_t>();
    out.sino.seed = h.at("seed").get<std::uint64_t>();
    out.sino.geometry_id = h.value("geometry_id", "");
    out.geometry = h.value("geometry", json::object());
    out.meta = h.value("meta", json::object());
    if (h.at("eta").is_number())
        out.sino.eta.assign(static_cast<std::size_t>(n), h.at("eta").get<double>());
    else
        out.sino.eta = h.at("eta").get<Vec>();
    detail::read_raw(f, out.sino.y, static_cast<std::size_t>(n));
    out.sino.validate();
    return out;
}

/// 16-bit PGM preview with a linear display window.
inline void write_pgm16(const std::string& path, const Vec& img, int nx, int ny,
                        double window_lo = 0.15, double window_hi = 0.35) {
    require(window_hi > window_lo, "write_pgm16: empty window");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open for writing: " + path);
    f << "P5\n" << nx << " " << ny << "\n65535\n";
    const double scale = 65535.0 / (window_hi - window_lo);
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(img.size()); ++i) {
        double t = (img[static_cast<std::size_t>(i)] - window_lo) * scale;
        const auto v = static_cast<std::uint16_t>(std::clamp(t, 0.0, 65535.0));
        // PGM is big-endian for 16-bit samples
        const char bytes[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)};
        f.write(bytes, 2);
    }
    if (!f) throw io_error("write failed: " + path);
}

inline void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace) {
    std::ofstream f(path);
    if (!f) throw io_error("cannot open for writing: " + path);
    f << "iteration,F,F1,F2,F3,wall_ms\n";
    f.precision(17);
    for (const auto& r : trace)
        f << r.iter << "," << r.f << "," << r.f1 << "," << r.f2 << "," << r.f3 << ","
          << r.wall_ms << "\n";
    if (!f) throw io_error("write failed: " + path);
}

inline void write_json(const std::string& path, const json& j) {
    std::ofstream f(path);
    if (!f) throw io_error("cannot open for writing: " + path);
    f << j.dump(2) << "\n";
    if (!f) throw io_error("write failed: " + path);
}

inline json read_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("cannot open: " + path);
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw io_error("bad JSON in " + path + ": " + e.what());
    }
}

// --- sparse matrix dump -------------------------------------------------------

inline constexpr char kMatrixMagic[8] = {'V', 'C', 'T', 'S', 'M', 'A', 'T', '1'};

inline void write_system_matrix(const std::string& path, const SystemMatrix& A) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open for writing: " + path);
    f.write(kMatrixMagic, 8);
    const std::int64_t version = 1;
    const double z[2] = {A.z1, A.z_mle};
    const std::int64_t dims[2] = {A.n_rows, A.n_cols};
    f.write(reinterpret_cast<const char*>(&version), 8);
    f.write(reinterpret_cast<const char*>(dims), 16);
    f.write(reinterpret_cast<const char*>(z), 16);
    detail::write_raw(f, A.row_ptr);
    std::vector<std::int64_t> cols64(A.cols.begin(), A.cols.end());
    detail::write_raw(f, cols64);
    detail::write_raw(f, A.vals);
    if (!f) throw io_error("write failed: " + path);
}

inline SystemMatrix read_system_matrix(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open: " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMatrixMagic, 8) != 0)
        throw io_error("wrong magic in " + path);
    std::int64_t version = 0, dims[2] = {0, 0};
    double z[2] = {0, 0};
    f.read(reinterpret_cast<char*>(&version), 8);
    f.read(reinterpret_cast<char*>(dims), 16);
    f.read(reinterpret_cast<char*>(z), 16);
    if (!f || version != 1) throw io_error("unsupported matrix file version in " + path);
    SystemMatrix A;
    A.n_rows = dims[0];
    A.n_cols = dims[1];
    detail::read_raw(f, A.row_ptr, static_cast<std::size_t>(A.n_rows) + 1);
    std::vector<std::int64_t> cols64;
    detail::read_raw(f, cols64, static_cast<std::size_t>(A.row_ptr.back()));
    A.cols.assign(cols64.begin(), cols64.end());
    detail::read_raw(f, A.vals, static_cast<std::size_t>(A.row_ptr.back()));
    A.finalize_constants();
    // stored constants are provenance; recomputation must agree
    require(std::abs(A.z1 - z[0]) <= 1e-12 * std::max(1.0, z[0]) &&
                std::abs(A.z_mle - z[1]) <= 1e-12 * std::max(1.0, z[1]),
            "read_system_matrix: inconsistent row-sum constants");
    return A;
}

}  // namespace vardct
