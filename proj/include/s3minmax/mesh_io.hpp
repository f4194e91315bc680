#pragma once

#include "mesh.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

namespace s3mm {

inline std::string format_real(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace detail {

inline void write_index_list(std::ostream& os, const std::vector<int>& v)
{
    os << '[';
    for (size_t i = 0; i < v.size(); ++i)
        os << (i ? "," : "") << v[i];
    os << ']';
}

} // namespace detail

/// Writes the .s3m JSON document with every real printed to 17 significant digits.
inline void write_s3m(std::ostream& os, const TriMesh& m)
{
    os << "{\"version\":1,\n\"vertices\":[";
    for (int v = 0; v < m.num_vertices(); ++v) {
        os << (v ? ",\n" : "\n") << '[';
        for (int k = 0; k < 4; ++k)
            os << (k ? "," : "") << format_real(m.vertices[v][k]);
        os << ']';
    }
    os << "],\n\"triangles\":[";
    for (int f = 0; f < m.num_triangles(); ++f) {
        const auto& t = m.triangles[f];
        os << (f ? ",\n" : "\n") << '[' << t[0] << ',' << t[1] << ',' << t[2] << ']';
    }
    os << "],\n\"tags\":{\"S1\":";
    detail::write_index_list(os, m.tags.s1);
    os << ",\"xi\":{";
    bool first = true;
    for (const auto& [i, vs] : m.tags.xi) {
        os << (first ? "" : ",") << '"' << i << "\":";
        detail::write_index_list(os, vs);
        first = false;
    }
    os << "},\"S1perp\":";
    detail::write_index_list(os, m.tags.s1perp);
    os << "},\n\"meta\":{";
    first = true;
    if (m.meta.n) {
        os << "\"n\":" << *m.meta.n;
        first = false;
    }
    if (!m.meta.group.empty()) {
        os << (first ? "" : ",") << "\"group\":" << nlohmann::json(m.meta.group).dump();
        first = false;
    }
    if (m.meta.t)
        os << (first ? "" : ",") << "\"t\":" << format_real(*m.meta.t);
    os << "}}\n";
}

inline void save_s3m(const std::string& path, const TriMesh& m)
{
    std::ofstream f(path);
    if (!f)
        throw std::runtime_error("cannot open " + path + " for writing");
    write_s3m(f, m);
    if (!f)
        throw std::runtime_error("write failed for " + path);
}

/// Parses an .s3m document. The group action is re-attached separately (see attach_orbits).
inline TriMesh parse_s3m(const std::string& text)
{
    auto j = nlohmann::json::parse(text);
    if (j.value("version", 0) != 1)
        throw std::invalid_argument("unsupported .s3m version");
    TriMesh m;
    for (const auto& v : j.at("vertices")) {
        if (v.size() != 4)
            throw std::invalid_argument("vertex must have four coordinates");
        m.vertices.emplace_back(v[0].get<double>(), v[1].get<double>(), v[2].get<double>(), v[3].get<double>());
    }
    for (const auto& t : j.at("triangles")) {
        if (t.size() != 3)
            throw std::invalid_argument("triangle must have three indices");
        m.triangles.push_back({t[0].get<int>(), t[1].get<int>(), t[2].get<int>()});
    }
    if (j.contains("tags")) {
        const auto& tg = j["tags"];
        if (tg.contains("S1"))
            m.tags.s1 = tg["S1"].get<std::vector<int>>();
        if (tg.contains("S1perp"))
            m.tags.s1perp = tg["S1perp"].get<std::vector<int>>();
        if (tg.contains("xi"))
            for (const auto& [k, vs] : tg["xi"].items())
                m.tags.xi[std::stoi(k)] = vs.get<std::vector<int>>();
    }
    if (j.contains("meta")) {
        const auto& mt = j["meta"];
        if (mt.contains("n"))
            m.meta.n = mt["n"].get<int>();
        if (mt.contains("group"))
            m.meta.group = mt["group"].get<std::string>();
        if (mt.contains("t"))
            m.meta.t = mt["t"].get<double>();
    }
    check_mesh(m, 1e-12);
    return m;
}

inline TriMesh load_s3m(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_s3m(ss.str());
}

/// Stereographic image as Wavefront OBJ.
inline void write_obj(std::ostream& os, const TriMesh& m, const Vec4& pole)
{
    for (const auto& v : m.vertices) {
        auto y = stereographic_project(v, pole);
        os << "v " << format_real(y[0]) << ' ' << format_real(y[1]) << ' ' << format_real(y[2]) << '\n';
    }
    for (const auto& t : m.triangles)
        os << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

/// ASCII PLY: stereographic x y z followed by the exact S^3 coordinates x1..x4.
inline void write_ply(std::ostream& os, const TriMesh& m, const Vec4& pole)
{
    os << "ply\nformat ascii 1.0\n";
    os << "element vertex " << m.num_vertices() << '\n';
    for (const char* p : {"x", "y", "z", "x1", "x2", "x3", "x4"})
        os << "property double " << p << '\n';
    os << "element face " << m.num_triangles() << '\n';
    os << "property list uchar int vertex_indices\nend_header\n";
    for (const auto& v : m.vertices) {
        auto y = stereographic_project(v, pole);
        os << format_real(y[0]) << ' ' << format_real(y[1]) << ' ' << format_real(y[2]);
        for (int k = 0; k < 4; ++k)
            os << ' ' << format_real(v[k]);
        os << '\n';
    }
    for (const auto& t : m.triangles)
        os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

} // namespace s3mm
