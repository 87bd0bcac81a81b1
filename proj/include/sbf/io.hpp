#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "sbf/data_model.hpp"

namespace sbf {

// Shortest round-trip representation; stable across runs.
inline std::string fmt_num(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace detail {

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, sep)) out.push_back(trim(cur));
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

inline double parse_double(const std::string& s, std::size_t line) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ParseError(line, "not a number: '" + s + "'");
    return v;
}

inline std::int64_t parse_count(const std::string& s, std::size_t line) {
    std::int64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ParseError(line, "not an integer count: '" + s + "'");
    if (v < 0) throw ParseError(line, "negative count " + s);
    return v;
}

}  // namespace detail

// Row i holds underwriting cell i; columns are delay cells 0..r0-1-i. Lines starting with '#' are skipped.
inline RunoffTriangle parse_triangle(std::istream& in, double bin_width = 1.0) {
    std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        rows.emplace_back(lineno, detail::split(t));
    }
    if (rows.empty()) throw ParseError(lineno, "triangle has no rows");
    const std::size_t r0 = rows.size();
    RunoffTriangle tri(r0, bin_width, false);
    for (std::size_t z = 0; z < r0; ++z) {
        const auto& [ln, cells] = rows[z];
        if (cells.size() > r0) throw ParseError(ln, "row has more than r0=" + std::to_string(r0) + " cells");
        for (std::size_t t = 0; t < cells.size(); ++t) {
            if (cells[t].empty()) continue;
            if (t + z + 1 > r0) throw ParseError(ln, "cell above the anti-diagonal at delay " + std::to_string(t));
            tri.at(t, z) = detail::parse_count(cells[t], ln);
        }
    }
    return tri;
}

inline RunoffTriangle load_triangle(const std::string& path, double bin_width = 1.0) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open triangle file: " + path);
    return parse_triangle(in, bin_width);
}

inline void write_triangle(std::ostream& out, const RunoffTriangle& tri) {
    const RunoffTriangle fwd = tri.reversed ? reverse_time(tri) : tri;
    for (std::size_t z = 0; z < fwd.r0; ++z) {
        for (std::size_t t = 0; t + z < fwd.r0; ++t) {
            if (t) out << ',';
            out << fwd.at(t, z);
        }
        out << '\n';
    }
}

inline void save_triangle(const std::string& path, const RunoffTriangle& tri) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write triangle file: " + path);
    write_triangle(out, tri);
}

// Header "delay,underwriting" is required. An optional "# horizon=<value>" line sets the horizon.
inline EventSample parse_events(std::istream& in, double horizon = 0.0) {
    EventSample s;
    s.horizon = horizon;
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        auto t = detail::trim(line);
        if (t.empty()) continue;
        if (t[0] == '#') {
            auto p = t.find("horizon=");
            if (p != std::string::npos && horizon <= 0.0)
                s.horizon = detail::parse_double(detail::trim(t.substr(p + 8)), lineno);
            continue;
        }
        auto cells = detail::split(t);
        if (!header) {
            if (cells.size() < 2 || cells[0] != "delay" || cells[1] != "underwriting")
                throw ParseError(lineno, "expected header 'delay,underwriting'");
            header = true;
            continue;
        }
        if (cells.size() != 2) throw ParseError(lineno, "expected two columns");
        Event e;
        e.delay = detail::parse_double(cells[0], lineno);
        e.underwriting = detail::parse_double(cells[1], lineno);
        if (e.delay < 0 || e.underwriting < 0) throw ParseError(lineno, "negative coordinate");
        s.events.push_back(e);
    }
    if (!header) throw ParseError(lineno, "missing header 'delay,underwriting'");
    if (!(s.horizon > 0.0)) throw ParseError(lineno, "horizon not given");
    return s;
}

inline EventSample load_events(const std::string& path, double horizon = 0.0) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open event file: " + path);
    return parse_events(in, horizon);
}

inline void write_events(std::ostream& out, const EventSample& s) {
    out << "# horizon=" << fmt_num(s.horizon) << '\n' << "delay,underwriting\n";
    for (const auto& e : s.events) out << fmt_num(e.delay) << ',' << fmt_num(e.underwriting) << '\n';
}

// Matrix CSV of a 2-d surface, one row per underwriting cell (axis 1), columns over axis 0.
inline void write_surface_matrix(std::ostream& out, const Shape& s, const std::vector<double>& v, const Mask& mask) {
    for (std::size_t z = 0; z < s.axis(1).n; ++z) {
        for (std::size_t r = 0; r < s.axis(0).n; ++r) {
            if (r) out << ',';
            auto f = s.flat(r, z);
            if (mask.empty() || mask[f]) out << fmt_num(v[f]);
        }
        out << '\n';
    }
}

inline void write_surface_long(std::ostream& out, const Shape& s, const std::vector<double>& v, const Mask& mask,
                               const std::string& name) {
    out << "t,z," << name << '\n';
    for (std::size_t r = 0; r < s.axis(0).n; ++r)
        for (std::size_t z = 0; z < s.axis(1).n; ++z) {
            auto f = s.flat(r, z);
            if (mask.empty() || mask[f])
                out << fmt_num(s.axis(0).center(r)) << ',' << fmt_num(s.axis(1).center(z)) << ',' << fmt_num(v[f]) << '\n';
        }
}

}  // namespace sbf
