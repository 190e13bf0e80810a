#pragma once

// Trajectory containers and their on-disk formats.
//   Trajectory      -> CSV, header "t,<names...>", shortest round-trip floats
//   FieldTrajectory -> <stem>.bin (row-major little-endian float64) and
//                      <stem>.json {N, dx, dt, T, t0, variable}

#include "kandy/core.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <bit>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace kandy {

/// Shortest decimal string that parses back to exactly v.
inline std::string format_double(double v) {
    std::array<char, 32> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc()) throw Error("cannot format floating-point value");
    return std::string(buf.data(), end);
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size())
        throw IoError("malformed number '" + std::string(s) + "'");
    return v;
}

struct Trajectory {
    std::vector<std::string> names;
    Mat states;  // samples x dim
    double dt = 1.0;
    double t0 = 0.0;

    std::size_t size() const noexcept { return static_cast<std::size_t>(states.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(states.cols()); }
    Vec state(std::size_t n) const { return states.row(static_cast<Eigen::Index>(n)).transpose(); }
    double time(std::size_t n) const noexcept { return t0 + static_cast<double>(n) * dt; }
};

struct FieldTrajectory {
    std::string variable = "u";
    Mat u;  // snapshots x grid points
    double dx = 1.0;
    double dt = 1.0;
    double t0 = 0.0;

    std::size_t snapshots() const noexcept { return static_cast<std::size_t>(u.rows()); }
    std::size_t points() const noexcept { return static_cast<std::size_t>(u.cols()); }
    Vec snapshot(std::size_t n) const { return u.row(static_cast<Eigen::Index>(n)).transpose(); }
};

inline void ensure_parent(const std::filesystem::path& p) {
    std::error_code ec;
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + p.parent_path().string() + ": " + ec.message());
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    ensure_parent(p);
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot open " + p.string() + " for writing");
    out << text;
    if (!out) throw IoError("write failed for " + p.string());
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_json(const std::filesystem::path& p, const nlohmann::json& j) { write_text(p, j.dump(2) + "\n"); }

inline nlohmann::json read_json(const std::filesystem::path& p) {
    try {
        return nlohmann::json::parse(read_text(p));
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError("malformed JSON in " + p.string() + ": " + e.what());
    }
}

inline std::string trajectory_csv(const Trajectory& tr) {
    std::string s = "t";
    for (const auto& n : tr.names) s += "," + n;
    s += "\n";
    for (std::size_t r = 0; r < tr.size(); ++r) {
        s += format_double(tr.time(r));
        for (std::size_t c = 0; c < tr.dim(); ++c)
            s += "," + format_double(tr.states(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
        s += "\n";
    }
    return s;
}

inline void write_trajectory_csv(const std::filesystem::path& p, const Trajectory& tr) {
    write_text(p, trajectory_csv(tr));
}

inline Trajectory read_trajectory_csv(const std::filesystem::path& p) {
    std::istringstream in(read_text(p));
    std::string line;
    if (!std::getline(in, line)) throw IoError(p.string() + " is empty");
    auto split = [](const std::string& l) {
        std::vector<std::string> out;
        std::size_t start = 0;
        for (;;) {
            const auto comma = l.find(',', start);
            out.push_back(l.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        return out;
    };
    auto header = split(line);
    if (header.size() < 2 || header[0] != "t") throw IoError(p.string() + " lacks a 't,...' header");
    Trajectory tr;
    tr.names.assign(header.begin() + 1, header.end());
    std::vector<double> times;
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split(line);
        if (cells.size() != header.size()) throw IoError(p.string() + " has a ragged row");
        times.push_back(parse_double(cells[0]));
        for (std::size_t c = 1; c < cells.size(); ++c) values.push_back(parse_double(cells[c]));
    }
    const auto rows = static_cast<Eigen::Index>(times.size());
    const auto cols = static_cast<Eigen::Index>(tr.names.size());
    tr.states = Eigen::Map<Mat>(values.data(), rows, cols);
    tr.t0 = times.empty() ? 0.0 : times[0];
    tr.dt = times.size() > 1 ? (times.back() - times.front()) / static_cast<double>(times.size() - 1) : 1.0;
    return tr;
}

/// Writes <stem>.bin and <stem>.json.
inline void write_field(const std::filesystem::path& stem, const FieldTrajectory& f) {
    static_assert(std::endian::native == std::endian::little, "field format is little-endian");
    nlohmann::json h = {{"N", f.points()},  {"T", f.snapshots()}, {"dx", f.dx},
                        {"dt", f.dt},       {"t0", f.t0},          {"variable", f.variable},
                        {"layout", "row-major float64, one snapshot per row"}};
    write_json(stem.string() + ".json", h);
    ensure_parent(stem);
    std::ofstream out(stem.string() + ".bin", std::ios::binary);
    if (!out) throw IoError("cannot open " + stem.string() + ".bin for writing");
    out.write(reinterpret_cast<const char*>(f.u.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(f.u.size())));
    if (!out) throw IoError("write failed for " + stem.string() + ".bin");
}

inline FieldTrajectory read_field(const std::filesystem::path& stem) {
    const auto h = read_json(stem.string() + ".json");
    FieldTrajectory f;
    const auto n = h.at("N").get<Eigen::Index>();
    const auto t = h.at("T").get<Eigen::Index>();
    f.dx = h.at("dx").get<double>();
    f.dt = h.at("dt").get<double>();
    f.t0 = h.value("t0", 0.0);
    f.variable = h.value("variable", std::string("u"));
    f.u.resize(t, n);
    std::ifstream in(stem.string() + ".bin", std::ios::binary);
    if (!in) throw IoError("cannot open " + stem.string() + ".bin");
    in.read(reinterpret_cast<char*>(f.u.data()), static_cast<std::streamsize>(sizeof(double) * n * t));
    if (in.gcount() != static_cast<std::streamsize>(sizeof(double) * n * t))
        throw IoError(stem.string() + ".bin is shorter than its header declares");
    return f;
}

}  // namespace kandy
