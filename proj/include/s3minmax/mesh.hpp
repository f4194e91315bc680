#pragma once

#include "geometry.hpp"
#include "symmetry.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_map>
#include <vector>

namespace s3mm {

using Tri = std::array<int, 3>;

/// Vertices known to lie exactly on a distinguished locus. xi[i] lists vertices on the
/// meridian xi_{i/n}.
struct LocusTags {
    std::vector<int> s1;
    std::vector<int> s1perp;
    std::map<int, std::vector<int>> xi;

    bool empty() const { return s1.empty() && s1perp.empty() && xi.empty(); }
};

struct MeshMeta {
    std::optional<int> n;
    std::string group;
    std::optional<double> t;
};

/// Action of a finite group on mesh vertices: perm[g][v] is the vertex at g(x_v).
struct OrbitTable {
    SymmetryGroup group;
    std::vector<std::vector<int>> perm;
};

struct TriMesh {
    std::vector<Vec4> vertices;
    std::vector<Tri> triangles;
    LocusTags tags;
    MeshMeta meta;
    std::shared_ptr<const OrbitTable> orbits;

    int num_vertices() const { return static_cast<int>(vertices.size()); }
    int num_triangles() const { return static_cast<int>(triangles.size()); }

    TriMesh with_vertices(std::vector<Vec4> v) const
    {
        TriMesh m = *this;
        m.vertices = std::move(v);
        return m;
    }
};

inline std::uint64_t edge_key(int a, int b)
{
    if (a > b)
        std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

inline std::pair<int, int> edge_vertices(std::uint64_t k)
{
    return {static_cast<int>(k >> 32), static_cast<int>(k & 0xffffffffu)};
}

/// Undirected edges with their incident triangles.
struct EdgeMap {
    std::unordered_map<std::uint64_t, std::vector<int>> faces;

    explicit EdgeMap(const TriMesh& m)
    {
        faces.reserve(m.triangles.size() * 2);
        for (int f = 0; f < m.num_triangles(); ++f) {
            const auto& t = m.triangles[f];
            for (int k = 0; k < 3; ++k)
                faces[edge_key(t[k], t[(k + 1) % 3])].push_back(f);
        }
    }

    std::vector<std::uint64_t> sorted_keys() const
    {
        std::vector<std::uint64_t> k;
        k.reserve(faces.size());
        for (const auto& [key, _] : faces)
            k.push_back(key);
        std::sort(k.begin(), k.end());
        return k;
    }
};

class UnionFind {
public:
    explicit UnionFind(int n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

    int find(int x)
    {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    bool unite(int a, int b)
    {
        a = find(a);
        b = find(b);
        if (a == b)
            return false;
        if (a < b)
            parent_[b] = a;
        else
            parent_[a] = b;
        return true;
    }

private:
    std::vector<int> parent_;
};

/// Throws std::invalid_argument on broken invariants other than closedness.
inline void check_mesh(const TriMesh& m, double tol = unit_tol)
{
    for (int v = 0; v < m.num_vertices(); ++v)
        if (std::abs(m.vertices[v].norm() - 1.0) > tol)
            throw std::invalid_argument("vertex " + std::to_string(v) + " is not on S^3");
    for (int f = 0; f < m.num_triangles(); ++f) {
        const auto& t = m.triangles[f];
        for (int k = 0; k < 3; ++k)
            if (t[k] < 0 || t[k] >= m.num_vertices())
                throw std::invalid_argument("triangle " + std::to_string(f) + " has a bad index");
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
            throw std::invalid_argument("triangle " + std::to_string(f) + " repeats a vertex");
    }
}

struct TopologyReport {
    int V = 0, E = 0, F = 0;
    int euler = 0;
    std::optional<int> genus;
    bool connected = false;
    bool orientable = false;
    bool consistently_oriented = false;
    int components = 0;
    std::optional<int> j_count;
};

namespace detail {

// Propagates orientation over the dual graph. Returns per-face flip flags or nullopt
// if the surface is not orientable.
inline std::optional<std::vector<char>> orientation_flips(const TriMesh& m, const EdgeMap& edges)
{
    std::vector<char> flip(m.num_triangles(), 0), seen(m.num_triangles(), 0);
    auto directed = [&](int f, int a, int b) {
        const auto& t = m.triangles[f];
        for (int k = 0; k < 3; ++k)
            if (t[k] == a && t[(k + 1) % 3] == b)
                return true;
        return false;
    };
    for (int s = 0; s < m.num_triangles(); ++s) {
        if (seen[s])
            continue;
        seen[s] = 1;
        std::vector<int> stack{s};
        while (!stack.empty()) {
            int f = stack.back();
            stack.pop_back();
            const auto& t = m.triangles[f];
            for (int k = 0; k < 3; ++k) {
                int a = t[k], b = t[(k + 1) % 3];
                const auto& inc = edges.faces.at(edge_key(a, b));
                if (inc.size() != 2)
                    continue;
                int g = inc[0] == f ? inc[1] : inc[0];
                // f traverses a->b (xor flip); g must traverse b->a in the final orientation
                bool g_ab = directed(g, a, b);
                char need = static_cast<char>(g_ab ? !flip[f] : flip[f]);
                if (!seen[g]) {
                    seen[g] = 1;
                    flip[g] = need;
                    stack.push_back(g);
                }
                else if (flip[g] != need) {
                    return std::nullopt;
                }
            }
        }
    }
    return flip;
}

} // namespace detail

inline std::vector<std::uint64_t> boundary_edges(const TriMesh& m)
{
    EdgeMap edges(m);
    std::vector<std::uint64_t> out;
    for (auto k : edges.sorted_keys())
        if (edges.faces.at(k).size() != 2)
            out.push_back(k);
    return out;
}

inline double area(const TriMesh& m);
inline int circle_intersection_count(const TriMesh& m, const GreatSubsphere& circle);

/// Combinatorial topology. Throws topology_error listing boundary edges for open meshes.
inline TopologyReport topology_report(const TriMesh& m, bool with_j_count = true)
{
    EdgeMap edges(m);
    std::vector<std::uint64_t> open;
    for (auto k : edges.sorted_keys())
        if (edges.faces.at(k).size() != 2)
            open.push_back(k);
    if (!open.empty()) {
        std::ostringstream os;
        os << "mesh is not closed; boundary or non-manifold edges:";
        for (size_t i = 0; i < open.size() && i < 20; ++i) {
            auto [a, b] = edge_vertices(open[i]);
            os << " (" << a << "," << b << ")";
        }
        if (open.size() > 20)
            os << " ... (" << open.size() << " total)";
        throw topology_error(os.str());
    }
    TopologyReport r;
    r.F = m.num_triangles();
    r.E = static_cast<int>(edges.faces.size());
    std::vector<char> used(m.num_vertices(), 0);
    for (const auto& t : m.triangles)
        for (int v : t)
            used[v] = 1;
    r.V = static_cast<int>(std::count(used.begin(), used.end(), 1));
    r.euler = r.V - r.E + r.F;

    UnionFind uf(m.num_triangles());
    for (const auto& [k, inc] : edges.faces)
        uf.unite(inc[0], inc[1]);
    std::set<int> roots;
    for (int f = 0; f < m.num_triangles(); ++f)
        roots.insert(uf.find(f));
    r.components = static_cast<int>(roots.size());
    r.connected = r.components == 1;

    auto flips = detail::orientation_flips(m, edges);
    r.orientable = flips.has_value();
    r.consistently_oriented = r.orientable && std::none_of(flips->begin(), flips->end(), [](char c) { return c; });
    if (r.orientable && !r.consistently_oriented) {
        // a consistent orientation may still be the global flip of the stored one
        r.consistently_oriented = std::all_of(flips->begin(), flips->end(), [](char c) { return c; });
    }
    if (r.connected && r.orientable && (2 - r.euler) % 2 == 0)
        r.genus = (2 - r.euler) / 2;
    if (with_j_count) {
        try {
            r.j_count = circle_intersection_count(m, objects::S1perp());
        }
        catch (const numerical_error&) {
            r.j_count.reset();
        }
    }
    return r;
}

/// Reorients triangles so that neighbors induce opposite directions on shared edges.
inline TriMesh orient_consistently(const TriMesh& m)
{
    EdgeMap edges(m);
    auto flips = detail::orientation_flips(m, edges);
    if (!flips)
        throw topology_error("surface is not orientable");
    TriMesh out = m;
    for (int f = 0; f < m.num_triangles(); ++f)
        if ((*flips)[f])
            std::swap(out.triangles[f][1], out.triangles[f][2]);
    return out;
}

/// |u ^ v| from the six bivector components; no cancellation for thin triangles.
inline double wedge_norm(const Vec4& u, const Vec4& v)
{
    double s = 0;
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) {
            double w = u[i] * v[j] - u[j] * v[i];
            s += w * w;
        }
    return std::sqrt(s);
}

inline double triangle_area(const Vec4& a, const Vec4& b, const Vec4& c) { return 0.5 * wedge_norm(b - a, c - a); }

/// Sum of chordal triangle areas.
inline double area(const TriMesh& m)
{
    double s = 0;
    for (const auto& t : m.triangles)
        s += triangle_area(m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]);
    return s;
}

inline double corner_angle(const Vec4& at, const Vec4& b, const Vec4& c)
{
    Vec4 u = b - at, v = c - at;
    return std::atan2(wedge_norm(u, v), u.dot(v));
}

/// Vector orthogonal to a, b, c with length |a ^ b ^ c|; sign follows det(a, b, c, result) > 0.
inline Vec4 cross4(const Vec4& a, const Vec4& b, const Vec4& c)
{
    Vec4 r;
    for (int i = 0; i < 4; ++i) {
        Eigen::Matrix3d M;
        for (int row = 0, k = 0; k < 4; ++k) {
            if (k == i)
                continue;
            M(0, row) = a[k];
            M(1, row) = b[k];
            M(2, row) = c[k];
            ++row;
        }
        r[i] = ((i % 2) ? 1.0 : -1.0) * M.determinant();
    }
    return r;
}

/// Unit normals in S3 (orthogonal to the position and the surface), summed from the triangles'
/// cross products so larger triangles weigh more. Needs a consistently oriented mesh.
inline std::vector<Vec4> vertex_normals(const TriMesh& m)
{
    std::vector<Vec4> n(m.num_vertices(), Vec4::Zero());
    for (const auto& t : m.triangles) {
        const Vec4 &a = m.vertices[t[0]], &b = m.vertices[t[1]], &c = m.vertices[t[2]];
        Vec4 f = cross4(a, b - a, c - a);
        for (int v : t)
            n[v] += f;
    }
    for (int v = 0; v < m.num_vertices(); ++v) {
        const Vec4& x = m.vertices[v];
        n[v] -= n[v].dot(x) * x;
        double len = n[v].norm();
        if (!(len > 0))
            throw numerical_error("vertex normal undefined at vertex " + std::to_string(v));
        n[v] /= len;
    }
    return n;
}

/// Sum over vertices of (2 pi - incident angle sum).
inline double angle_defect_sum(const TriMesh& m)
{
    std::vector<double> sum(m.num_vertices(), 0.0);
    std::vector<char> used(m.num_vertices(), 0);
    for (const auto& t : m.triangles)
        for (int k = 0; k < 3; ++k) {
            sum[t[k]] += corner_angle(m.vertices[t[k]], m.vertices[t[(k + 1) % 3]], m.vertices[t[(k + 2) % 3]]);
            used[t[k]] = 1;
        }
    double total = 0;
    for (int v = 0; v < m.num_vertices(); ++v)
        if (used[v])
            total += 2 * pi - sum[v];
    return total;
}

inline TriMesh transform(const TriMesh& m, const Orthogonal4& g)
{
    TriMesh out = m;
    for (auto& v : out.vertices)
        v = g(v);
    out.tags = {};
    out.orbits.reset();
    return out;
}

/// Per-vertex lookup of meridian tags.
inline std::vector<std::vector<int>> meridians_by_vertex(const TriMesh& m)
{
    std::vector<std::vector<int>> out(m.num_vertices());
    for (const auto& [i, vs] : m.tags.xi)
        for (int v : vs)
            out[v].push_back(i);
    return out;
}

/// 4-to-1 subdivision with midpoints normalized onto S^3. Tags and the group action carry
/// over to midpoints of edges whose endpoints share the tag.
inline TriMesh refine(const TriMesh& m, int levels = 1)
{
    if (levels <= 0)
        return m;
    TriMesh cur = m;
    for (int level = 0; level < levels; ++level) {
        TriMesh next;
        next.meta = cur.meta;
        next.vertices = cur.vertices;
        std::unordered_map<std::uint64_t, int> mid;
        mid.reserve(cur.triangles.size() * 2);
        std::vector<std::uint64_t> mid_edges;
        auto midpoint = [&](int a, int b) {
            auto k = edge_key(a, b);
            auto it = mid.find(k);
            if (it != mid.end())
                return it->second;
            int id = static_cast<int>(next.vertices.size());
            next.vertices.push_back((cur.vertices[a] + cur.vertices[b]).normalized());
            mid.emplace(k, id);
            mid_edges.push_back(k);
            return id;
        };
        for (const auto& t : cur.triangles) {
            int ab = midpoint(t[0], t[1]), bc = midpoint(t[1], t[2]), ca = midpoint(t[2], t[0]);
            next.triangles.push_back({t[0], ab, ca});
            next.triangles.push_back({t[1], bc, ab});
            next.triangles.push_back({t[2], ca, bc});
            next.triangles.push_back({ab, bc, ca});
        }

        auto propagate = [&](const std::vector<int>& tagged) {
            std::vector<char> on(cur.num_vertices(), 0);
            for (int v : tagged)
                on[v] = 1;
            std::vector<int> out = tagged;
            for (auto k : mid_edges) {
                auto [a, b] = edge_vertices(k);
                if (on[a] && on[b])
                    out.push_back(mid.at(k));
            }
            std::sort(out.begin(), out.end());
            return out;
        };
        next.tags.s1 = propagate(cur.tags.s1);
        next.tags.s1perp = propagate(cur.tags.s1perp);
        for (const auto& [i, vs] : cur.tags.xi)
            next.tags.xi[i] = propagate(vs);

        if (cur.orbits) {
            auto table = std::make_shared<OrbitTable>();
            table->group = cur.orbits->group;
            table->perm.resize(cur.orbits->perm.size());
            for (size_t g = 0; g < cur.orbits->perm.size(); ++g) {
                const auto& p = cur.orbits->perm[g];
                auto& q = table->perm[g];
                q.resize(next.vertices.size());
                for (int v = 0; v < cur.num_vertices(); ++v)
                    q[v] = p[v];
                for (auto k : mid_edges) {
                    auto [a, b] = edge_vertices(k);
                    q[mid.at(k)] = mid.at(edge_key(p[a], p[b]));
                }
            }
            next.orbits = std::move(table);
        }
        cur = std::move(next);
    }
    return cur;
}

/// Number of points where the great circle crosses the mesh. Crossings closer than 1e-9
/// are merged, so tagged vertices on the circle count once.
inline int circle_intersection_count(const TriMesh& m, const GreatSubsphere& circle)
{
    if (circle.dim() != 1)
        throw std::invalid_argument("circle_intersection_count: expected a great circle");
    const Vec4& b0 = circle.basis()[0];
    const Vec4& b1 = circle.basis()[1];
    std::vector<Vec4> hits;
    auto record = [&](const Vec4& p) {
        for (const auto& h : hits)
            if ((h - p).norm() < 1e-9)
                return;
        hits.push_back(p);
    };
    // distance from the circle's plane bounds which triangles can meet it
    auto off_plane = [&](const Vec4& x) { return (x - b0.dot(x) * b0 - b1.dot(x) * b1).norm(); };
    for (int f = 0; f < m.num_triangles(); ++f) {
        const auto& t = m.triangles[f];
        const Vec4 &a = m.vertices[t[0]], &b = m.vertices[t[1]], &c = m.vertices[t[2]];
        double reach = std::max({(a - b).norm(), (b - c).norm(), (c - a).norm()});
        if (std::min({off_plane(a), off_plane(b), off_plane(c)}) > reach)
            continue;
        Eigen::Matrix<double, 4, 5> M;
        M << a, b, c, -b0, -b1;
        Eigen::JacobiSVD<Eigen::Matrix<double, 4, 5>> svd(M, Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        if (sv[3] < 1e-12 * sv[0]) {
            std::ostringstream os;
            os << "non-transverse: circle lies in the plane of triangle " << f;
            throw numerical_error(os.str());
        }
        Eigen::Matrix<double, 5, 1> z = svd.matrixV().col(4);
        double scale = z.head<3>().cwiseAbs().maxCoeff();
        double eps = 1e-12 * scale;
        bool pos = z[0] >= -eps && z[1] >= -eps && z[2] >= -eps;
        bool neg = z[0] <= eps && z[1] <= eps && z[2] <= eps;
        if (!pos && !neg)
            continue;
        Vec4 w = z[3] * b0 + z[4] * b1;
        if (w.norm() == 0)
            continue;
        w.normalize();
        record(pos ? w : Vec4(-w));
    }
    return static_cast<int>(hits.size());
}

struct CutComponent {
    TriMesh mesh;
    int euler = 0;
    int boundary_loops = 0;
    int genus = 0;
};

namespace detail {

// Splits triangles straddling the hyperplane normal . x = 0.
inline TriMesh split_along(const TriMesh& m, const Vec4& normal, double tol)
{
    TriMesh out;
    out.vertices = m.vertices;
    out.meta = m.meta;
    std::vector<double> side(m.num_vertices());
    std::vector<int> sgn(m.num_vertices());
    for (int v = 0; v < m.num_vertices(); ++v) {
        side[v] = normal.dot(m.vertices[v]);
        sgn[v] = std::abs(side[v]) < tol ? 0 : (side[v] > 0 ? 1 : -1);
    }
    std::unordered_map<std::uint64_t, int> cut_vertex;
    auto crossing = [&](int a, int b) {
        auto k = edge_key(a, b);
        auto it = cut_vertex.find(k);
        if (it != cut_vertex.end())
            return it->second;
        double s = side[a] / (side[a] - side[b]);
        Vec4 p = ((1 - s) * m.vertices[a] + s * m.vertices[b]);
        p -= normal.dot(p) * normal;
        int id = static_cast<int>(out.vertices.size());
        out.vertices.push_back(p.normalized());
        sgn.push_back(0);
        cut_vertex.emplace(k, id);
        return id;
    };
    for (const auto& t : m.triangles) {
        int np = 0, nn = 0;
        for (int v : t) {
            np += sgn[v] > 0;
            nn += sgn[v] < 0;
        }
        if (np == 0 || nn == 0) {
            out.triangles.push_back(t);
            continue;
        }
        // rotate so that t[0] is the vertex alone on its side (or the on-plane vertex)
        std::array<int, 3> r = t;
        for (int k = 0; k < 3; ++k) {
            int a = t[k], b = t[(k + 1) % 3], c = t[(k + 2) % 3];
            bool alone = sgn[a] != 0 && sgn[b] != sgn[a] && sgn[c] != sgn[a];
            bool onplane = sgn[a] == 0;
            if (alone || onplane) {
                r = {a, b, c};
                if (onplane)
                    break;
            }
        }
        int a = r[0], b = r[1], c = r[2];
        if (sgn[a] == 0) {
            int p = crossing(b, c);
            out.triangles.push_back({a, b, p});
            out.triangles.push_back({a, p, c});
        }
        else {
            int pab = crossing(a, b), pac = crossing(a, c);
            out.triangles.push_back({a, pab, pac});
            out.triangles.push_back({pab, b, c});
            out.triangles.push_back({pab, c, pac});
        }
    }
    return out;
}

} // namespace detail

/// Components of the mesh after cutting along the given great spheres.
inline std::vector<CutComponent> cut_by_spheres(const TriMesh& mesh, const std::vector<GreatSubsphere>& spheres,
                                                double tol = 1e-9)
{
    TriMesh m = mesh;
    m.orbits.reset();
    m.tags = {};
    std::vector<Vec4> normals;
    for (const auto& s : spheres) {
        if (s.dim() != 2)
            throw std::invalid_argument("cut_by_spheres: expected great spheres");
        normals.push_back(s.center());
        m = detail::split_along(m, normals.back(), tol);
    }
    std::vector<int> bad;
    for (int f = 0; f < m.num_triangles(); ++f) {
        const auto& t = m.triangles[f];
        if (triangle_area(m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]) < 1e-14)
            bad.push_back(f);
    }
    if (!bad.empty()) {
        std::ostringstream os;
        os << "cut produced degenerate slivers at triangles:";
        for (size_t i = 0; i < bad.size() && i < 20; ++i)
            os << ' ' << bad[i];
        throw numerical_error(os.str());
    }

    auto on_cut = [&](int a, int b) {
        for (const auto& nrm : normals)
            if (std::abs(nrm.dot(m.vertices[a])) < tol && std::abs(nrm.dot(m.vertices[b])) < tol)
                return true;
        return false;
    };
    EdgeMap edges(m);
    UnionFind uf(m.num_triangles());
    for (const auto& [k, inc] : edges.faces) {
        auto [a, b] = edge_vertices(k);
        if (inc.size() == 2 && !on_cut(a, b))
            uf.unite(inc[0], inc[1]);
    }
    std::map<int, std::vector<int>> groups;
    for (int f = 0; f < m.num_triangles(); ++f)
        groups[uf.find(f)].push_back(f);

    std::vector<CutComponent> out;
    for (const auto& [root, faces] : groups) {
        CutComponent c;
        std::unordered_map<int, int> remap;
        for (int f : faces) {
            Tri t;
            for (int k = 0; k < 3; ++k) {
                int v = m.triangles[f][k];
                auto it = remap.find(v);
                if (it == remap.end()) {
                    it = remap.emplace(v, c.mesh.num_vertices()).first;
                    c.mesh.vertices.push_back(m.vertices[v]);
                }
                t[k] = it->second;
            }
            c.mesh.triangles.push_back(t);
        }
        EdgeMap ce(c.mesh);
        UnionFind loops(c.mesh.num_vertices());
        std::set<int> on_boundary;
        for (const auto& [k, inc] : ce.faces)
            if (inc.size() == 1) {
                auto [a, b] = edge_vertices(k);
                loops.unite(a, b);
                on_boundary.insert(a);
                on_boundary.insert(b);
            }
        std::set<int> roots;
        for (int v : on_boundary)
            roots.insert(loops.find(v));
        c.boundary_loops = static_cast<int>(roots.size());
        c.euler = c.mesh.num_vertices() - static_cast<int>(ce.faces.size()) + c.mesh.num_triangles();
        c.genus = (2 - c.euler - c.boundary_loops) / 2;
        out.push_back(std::move(c));
    }
    return out;
}

} // namespace s3mm
