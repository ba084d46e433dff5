#pragma once

#include <algorithm>
#include <array>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecm_invade/config.hpp"
#include "ecm_invade/diagnostics.hpp"
#include "ecm_invade/errors.hpp"
#include "ecm_invade/grid.hpp"
#include "ecm_invade/model.hpp"

namespace ecm_invade {

namespace fs = std::filesystem;

namespace detail {

inline void ensure_directory(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

inline void write_text_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) ensure_directory(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    out.close();
    if (!out) throw IoError("write failed for " + path.string());
}

inline std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void append_g17(std::string& s, double v) {
    char buf[32];
    const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
    s.append(buf, static_cast<std::size_t>(len));
}

inline double parse_double(const std::string& token, const fs::path& path, std::size_t line) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (token.empty() || end != token.c_str() + token.size() || (errno == ERANGE && std::isinf(v))) {
        throw IoError(path.string() + ":" + std::to_string(line) + ": bad number '" + token + "'");
    }
    return v;
}

inline constexpr char snapshot_magic[8] = {'E', 'C', 'M', 'S', 'N', 'A', 'P', '1'};

}  // namespace detail

/// "snap_t" + time rendered as %012.4f + extension, e.g. snap_t0000025.0000.csv.
inline std::string snapshot_filename(double time, SnapshotFormat format = SnapshotFormat::csv) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "snap_t%012.4f.%s", time, format == SnapshotFormat::csv ? "csv" : "bin");
    return buf;
}

/// Writes one snapshot into output_dir and returns its path.
///
/// CSV: header "x,u,m" (1D) or "x,y,u,m" (2D), one row per lattice point in
/// storage order, every value printed with %.17g so it reads back bitwise.
/// Binary: the 8-byte magic "ECMSNAP1", int32 dim, uint64 nx, uint64 ny,
/// float64 x_min, x_max, spacing, time, then u and m as float64 arrays, all
/// in native byte order.
inline fs::path write_snapshot(const FieldPair& fields, double time, const Grid& g, const fs::path& output_dir,
                               SnapshotFormat format = SnapshotFormat::csv) {
    g.require_field(fields.u, "u");
    g.require_field(fields.m, "m");
    detail::ensure_directory(output_dir);
    const fs::path path = output_dir / snapshot_filename(time, format);
    if (format == SnapshotFormat::binary) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + path.string() + " for writing");
        const std::int32_t dim = g.dim();
        const std::uint64_t nx = g.nx();
        const std::uint64_t ny = g.ny();
        const double head[4] = {g.axis(0).min, g.axis(0).max, g.spacing(), time};
        out.write(detail::snapshot_magic, sizeof detail::snapshot_magic);
        out.write(reinterpret_cast<const char*>(&dim), sizeof dim);
        out.write(reinterpret_cast<const char*>(&nx), sizeof nx);
        out.write(reinterpret_cast<const char*>(&ny), sizeof ny);
        out.write(reinterpret_cast<const char*>(head), sizeof head);
        out.write(reinterpret_cast<const char*>(fields.u.data()), static_cast<std::streamsize>(fields.u.size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(fields.m.data()), static_cast<std::streamsize>(fields.m.size() * sizeof(double)));
        out.close();
        if (!out) throw IoError("write failed for " + path.string());
        return path;
    }
    std::string s = g.dim() == 1 ? "x,u,m\n" : "x,y,u,m\n";
    s.reserve(s.size() + g.size() * (g.dim() + 2) * 25);
    for (std::size_t p = 0; p < g.size(); ++p) {
        const Point pt = g.point(p);
        detail::append_g17(s, pt.x);
        s += ',';
        if (g.dim() == 2) {
            detail::append_g17(s, pt.y);
            s += ',';
        }
        detail::append_g17(s, fields.u[p]);
        s += ',';
        detail::append_g17(s, fields.m[p]);
        s += '\n';
    }
    detail::write_text_file(path, s);
    return path;
}

struct SnapshotData {
    double time = std::numeric_limits<double>::quiet_NaN();
    Grid grid;
    FieldPair fields;
};

/// Time encoded in a snapshot filename, or NaN when the name does not match.
inline double snapshot_time_from_name(const fs::path& path) {
    const std::string stem = path.stem().string();
    if (stem.rfind("snap_t", 0) != 0) return std::numeric_limits<double>::quiet_NaN();
    char* end = nullptr;
    const std::string digits = stem.substr(6);
    const double t = std::strtod(digits.c_str(), &end);
    return (end == digits.c_str() + digits.size() && !digits.empty()) ? t : std::numeric_limits<double>::quiet_NaN();
}

inline SnapshotData read_snapshot(const fs::path& path) {
    SnapshotData d;
    if (path.extension() == ".bin") {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open " + path.string());
        char magic[8];
        std::int32_t dim = 0;
        std::uint64_t nx = 0, ny = 0;
        double head[4];
        in.read(magic, sizeof magic);
        if (!in || std::memcmp(magic, detail::snapshot_magic, sizeof magic) != 0) {
            throw IoError(path.string() + ": not a binary snapshot");
        }
        in.read(reinterpret_cast<char*>(&dim), sizeof dim);
        in.read(reinterpret_cast<char*>(&nx), sizeof nx);
        in.read(reinterpret_cast<char*>(&ny), sizeof ny);
        in.read(reinterpret_cast<char*>(head), sizeof head);
        if (!in) throw IoError(path.string() + ": truncated header");
        d.grid = make_grid(dim, head[0], head[1], head[2]);
        if (d.grid.nx() != nx || d.grid.ny() != ny) throw IoError(path.string() + ": header sizes disagree with the axis");
        d.time = head[3];
        d.fields.u.resize(d.grid.size());
        d.fields.m.resize(d.grid.size());
        in.read(reinterpret_cast<char*>(d.fields.u.data()), static_cast<std::streamsize>(d.grid.size() * sizeof(double)));
        in.read(reinterpret_cast<char*>(d.fields.m.data()), static_cast<std::streamsize>(d.grid.size() * sizeof(double)));
        if (!in) throw IoError(path.string() + ": truncated data");
        return d;
    }

    const std::string text = detail::read_text_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw IoError(path.string() + ": empty file");
    int dim = 0;
    if (line == "x,u,m") dim = 1;
    else if (line == "x,y,u,m") dim = 2;
    else throw IoError(path.string() + ": unexpected header '" + line + "'");
    std::vector<double> xs, ys;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        for (std::size_t pos; (pos = line.find(',', start)) != std::string::npos; start = pos + 1) {
            cells.push_back(line.substr(start, pos - start));
        }
        cells.push_back(line.substr(start));
        if (cells.size() != static_cast<std::size_t>(dim + 2)) {
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(dim + 2) + " columns");
        }
        xs.push_back(detail::parse_double(cells[0], path, lineno));
        if (dim == 2) ys.push_back(detail::parse_double(cells[1], path, lineno));
        d.fields.u.push_back(detail::parse_double(cells[static_cast<std::size_t>(dim)], path, lineno));
        d.fields.m.push_back(detail::parse_double(cells[static_cast<std::size_t>(dim) + 1], path, lineno));
    }
    if (xs.size() < 3) throw IoError(path.string() + ": too few rows");
    // Storage order is x-major, so in 2D the first rows walk along y.
    const double x_min = xs.front();
    const double x_max = xs.back();
    std::size_t n_axis = xs.size();
    if (dim == 2) {
        n_axis = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(xs.size()))));
        if (n_axis * n_axis != xs.size()) throw IoError(path.string() + ": 2D snapshot is not square");
    }
    const double spacing = (x_max - x_min) / static_cast<double>(n_axis - 1);
    d.grid = make_grid(dim, x_min, x_max, spacing);
    if (d.grid.size() != xs.size()) throw IoError(path.string() + ": coordinates do not form a uniform grid");
    d.time = snapshot_time_from_name(path);
    return d;
}

/// Snapshot files in dir (either format), ordered by the time in their names.
inline std::vector<fs::path> list_snapshots(const fs::path& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw IoError("not a directory: " + dir.string());
    std::vector<std::pair<double, fs::path>> found;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto& p = entry.path();
        if (p.extension() != ".csv" && p.extension() != ".bin") continue;
        const double t = snapshot_time_from_name(p);
        if (std::isfinite(t)) found.emplace_back(t, p);
    }
    std::sort(found.begin(), found.end());
    std::vector<fs::path> out;
    for (auto& [t, p] : found) out.push_back(std::move(p));
    return out;
}

inline constexpr std::array<const char*, 11> diagnostics_columns{
    "time",        "entropy", "dissipation_tau", "dissipation_mobility", "inequality_residual", "grad_u_sq",
    "grad_m_sq",   "min_u",   "min_m",           "max_rho",              "max_abs_w"};

/// Appends EntropyReport rows to a CSV file whose columns follow the struct order.
class DiagnosticsWriter {
public:
    explicit DiagnosticsWriter(const fs::path& path) : path_(path) {
        if (path.has_parent_path()) detail::ensure_directory(path.parent_path());
        out_.open(path, std::ios::binary | std::ios::trunc);
        if (!out_) throw IoError("cannot open " + path.string() + " for writing");
        for (std::size_t k = 0; k < diagnostics_columns.size(); ++k) out_ << (k ? "," : "") << diagnostics_columns[k];
        out_ << '\n';
    }

    void write(const EntropyReport& r) {
        const double row[] = {r.time,      r.entropy,   r.dissipation_tau, r.dissipation_mobility,
                              r.inequality_residual, r.grad_u_sq, r.grad_m_sq, r.min_u,
                              r.min_m,     r.max_rho,   r.max_abs_w};
        std::string s;
        for (std::size_t k = 0; k < std::size(row); ++k) {
            if (k) s += ',';
            detail::append_g17(s, row[k]);
        }
        s += '\n';
        out_ << s;
        if (!out_) throw IoError("write failed for " + path_.string());
    }

    const fs::path& path() const { return path_; }

private:
    fs::path path_;
    std::ofstream out_;
};

/// One entry of a sweep summary.
struct SweepRecord {
    double lambda = 0.0;
    double m0 = 0.0;
    double fitted_speed = std::numeric_limits<double>::quiet_NaN();
    double analytic_speed = 0.0;
    double residual = std::numeric_limits<double>::quiet_NaN();
    std::array<double, 2> window{0.0, 0.0};
    std::string error;  ///< empty when the member run succeeded

    bool ok() const { return error.empty(); }
};

namespace detail {

/// JSON has no NaN; non-finite numbers are written as null.
inline nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline double number_from(const nlohmann::json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace detail

inline nlohmann::json to_json(const SweepRecord& r) {
    nlohmann::json j{{"lambda", r.lambda},
                     {"m0", r.m0},
                     {"fitted_speed", detail::number_or_null(r.fitted_speed)},
                     {"analytic_speed", r.analytic_speed},
                     {"residual", detail::number_or_null(r.residual)},
                     {"window", {r.window[0], r.window[1]}}};
    if (!r.ok()) j["error"] = r.error;
    return j;
}

inline SweepRecord sweep_record_from_json(const nlohmann::json& j) {
    SweepRecord r;
    r.lambda = j.at("lambda").get<double>();
    r.m0 = j.at("m0").get<double>();
    r.fitted_speed = detail::number_from(j.at("fitted_speed"));
    r.analytic_speed = j.at("analytic_speed").get<double>();
    r.residual = detail::number_from(j.at("residual"));
    r.window = {j.at("window").at(0).get<double>(), j.at("window").at(1).get<double>()};
    if (j.contains("error")) r.error = j.at("error").get<std::string>();
    return r;
}

/// Writes the records as a JSON array sorted by lambda ascending; returns path.
inline fs::path write_sweep_summary(std::vector<SweepRecord> records, const fs::path& path) {
    std::stable_sort(records.begin(), records.end(),
                     [](const SweepRecord& a, const SweepRecord& b) { return a.lambda < b.lambda; });
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : records) j.push_back(to_json(r));
    detail::write_text_file(path, j.dump(2) + "\n");
    return path;
}

inline std::vector<SweepRecord> read_sweep_summary(const fs::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(detail::read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
    if (!j.is_array()) throw IoError(path.string() + ": expected a JSON array");
    std::vector<SweepRecord> out;
    for (const auto& item : j) out.push_back(sweep_record_from_json(item));
    return out;
}

inline fs::path write_json(const nlohmann::json& j, const fs::path& path) {
    detail::write_text_file(path, j.dump(2) + "\n");
    return path;
}

}  // namespace ecm_invade
