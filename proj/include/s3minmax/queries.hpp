#pragma once

#include "mesh.hpp"

#include <cmath>
#include <unordered_map>

namespace s3mm {

/// Distance in R^4 from p to triangle abc.
inline double point_triangle_distance(const Vec4& p, const Vec4& a, const Vec4& b, const Vec4& c)
{
    // Closest point by Voronoi regions of the triangle (works in any dimension).
    Vec4 ab = b - a, ac = c - a, ap = p - a;
    double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0)
        return ap.norm();
    Vec4 bp = p - b;
    double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3)
        return bp.norm();
    double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0)
        return (p - (a + d1 / (d1 - d3) * ab)).norm();
    Vec4 cp = p - c;
    double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6)
        return cp.norm();
    double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0)
        return (p - (a + d2 / (d2 - d6) * ac)).norm();
    double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
        return (p - (b + (d4 - d3) / ((d4 - d3) + (d5 - d6)) * (c - b))).norm();
    double denom = 1.0 / (va + vb + vc);
    double v = vb * denom, w = vc * denom;
    return (p - (a + ab * v + ac * w)).norm();
}

/// Uniform hash grid over triangle bounding boxes in R^4.
class TriangleGrid {
public:
    TriangleGrid(const TriMesh& m, double cell) : mesh_(m), cell_(cell)
    {
        for (int f = 0; f < m.num_triangles(); ++f) {
            const auto& t = m.triangles[f];
            Vec4 lo = m.vertices[t[0]].cwiseMin(m.vertices[t[1]]).cwiseMin(m.vertices[t[2]]);
            Vec4 hi = m.vertices[t[0]].cwiseMax(m.vertices[t[1]]).cwiseMax(m.vertices[t[2]]);
            auto a = index(lo), b = index(hi);
            for (int i = a[0]; i <= b[0]; ++i)
                for (int j = a[1]; j <= b[1]; ++j)
                    for (int k = a[2]; k <= b[2]; ++k)
                        for (int l = a[3]; l <= b[3]; ++l)
                            cells_[hash({i, j, k, l})].push_back(f);
        }
    }

    /// Distance from p to the mesh; searches outward ring by ring.
    double distance(const Vec4& p) const
    {
        auto c = index(p);
        double best = std::numeric_limits<double>::infinity();
        for (int r = 0; r < 64; ++r) {
            visit_shell(c, r, [&](int f) {
                const auto& t = mesh_.triangles[f];
                best = std::min(best, point_triangle_distance(p, mesh_.vertices[t[0]], mesh_.vertices[t[1]],
                                                              mesh_.vertices[t[2]]));
            });
            if (best <= r * cell_)
                break;
        }
        return best;
    }

private:
    std::array<int, 4> index(const Vec4& x) const
    {
        return {static_cast<int>(std::floor(x[0] / cell_)), static_cast<int>(std::floor(x[1] / cell_)),
                static_cast<int>(std::floor(x[2] / cell_)), static_cast<int>(std::floor(x[3] / cell_))};
    }

    static std::uint64_t hash(const std::array<int, 4>& c)
    {
        std::uint64_t h = 0;
        for (int x : c)
            h = h * 1000003ULL + static_cast<std::uint64_t>(x + (1 << 20));
        return h;
    }

    template <class F>
    void visit_shell(const std::array<int, 4>& c, int r, F&& f) const
    {
        for (int i = -r; i <= r; ++i)
            for (int j = -r; j <= r; ++j)
                for (int k = -r; k <= r; ++k)
                    for (int l = -r; l <= r; ++l) {
                        if (std::max({std::abs(i), std::abs(j), std::abs(k), std::abs(l)}) != r)
                            continue;
                        auto it = cells_.find(hash({c[0] + i, c[1] + j, c[2] + k, c[3] + l}));
                        if (it == cells_.end())
                            continue;
                        for (int face : it->second)
                            f(face);
                    }
    }

    const TriMesh& mesh_;
    double cell_;
    std::unordered_map<std::uint64_t, std::vector<int>> cells_;
};

inline double mean_edge_length(const TriMesh& m)
{
    double s = 0;
    for (const auto& t : m.triangles)
        for (int k = 0; k < 3; ++k)
            s += (m.vertices[t[k]] - m.vertices[t[(k + 1) % 3]]).norm();
    return m.triangles.empty() ? 0.0 : s / (3.0 * m.num_triangles());
}

/// max over g and v of the distance from g(x_v) to the mesh.
inline double equivariance_residual(const TriMesh& m, const SymmetryGroup& group)
{
    double worst = 0;
    if (m.orbits && m.orbits->group.order() == group.order() &&
        m.orbits->group.spec() == group.spec()) {
        // the mesh records where each g sends each vertex
        for (int g = 0; g < group.order(); ++g)
            for (int v = 0; v < m.num_vertices(); ++v)
                worst = std::max(worst, (group[g](m.vertices[v]) - m.vertices[m.orbits->perm[g][v]]).norm());
        return worst;
    }
    TriangleGrid grid(m, std::max(2.0 * mean_edge_length(m), 1e-3));
    for (const auto& g : group.elements())
        for (const auto& x : m.vertices)
            worst = std::max(worst, grid.distance(g(x)));
    return worst;
}

/// Builds perm[g][v] by nearest-vertex matching; returns nullptr when some image has no
/// vertex within tol.
inline std::shared_ptr<const OrbitTable> match_orbits(const TriMesh& m, const SymmetryGroup& group, double tol = 1e-9)
{
    double cell = 1e-6;
    std::unordered_map<std::uint64_t, std::vector<int>> buckets;
    auto key = [&](const Vec4& x) {
        std::uint64_t h = 0;
        for (int k = 0; k < 4; ++k)
            h = h * 1000003ULL + static_cast<std::uint64_t>(std::llround(x[k] / cell) + (1LL << 30));
        return h;
    };
    for (int v = 0; v < m.num_vertices(); ++v)
        buckets[key(m.vertices[v])].push_back(v);
    auto table = std::make_shared<OrbitTable>();
    table->group = group;
    table->perm.assign(group.order(), std::vector<int>(m.num_vertices(), -1));
    for (int g = 0; g < group.order(); ++g)
        for (int v = 0; v < m.num_vertices(); ++v) {
            Vec4 y = group[g](m.vertices[v]);
            int found = -1;
            for (int dx = 0; dx < 16 && found < 0; ++dx) {
                // probe the neighbouring buckets a rounding step could have moved y into
                Vec4 probe = y;
                for (int k = 0; k < 4; ++k)
                    if (dx & (1 << k))
                        probe[k] += (y[k] / cell - std::floor(y[k] / cell) < 0.5 ? -cell : cell);
                auto it = buckets.find(key(probe));
                if (it == buckets.end())
                    continue;
                for (int w : it->second)
                    if ((m.vertices[w] - y).norm() < tol) {
                        found = w;
                        break;
                    }
            }
            if (found < 0)
                return nullptr;
            table->perm[g][v] = found;
        }
    return table;
}

inline TriMesh attach_orbits(const TriMesh& m, const SymmetryGroup& group, double tol = 1e-9)
{
    auto table = match_orbits(m, group, tol);
    if (!table)
        throw std::invalid_argument("mesh vertices are not permuted by group " + group.spec());
    TriMesh out = m;
    out.orbits = std::move(table);
    return out;
}

namespace detail {

// Separating-axis test for two triangles in R^3 (coplanar pairs handled by edge axes).
inline bool triangles_intersect_3d(const std::array<Eigen::Vector3d, 3>& A, const std::array<Eigen::Vector3d, 3>& B)
{
    std::vector<Eigen::Vector3d> axes;
    Eigen::Vector3d na = (A[1] - A[0]).cross(A[2] - A[0]);
    Eigen::Vector3d nb = (B[1] - B[0]).cross(B[2] - B[0]);
    axes.push_back(na);
    axes.push_back(nb);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            Eigen::Vector3d e = (A[(i + 1) % 3] - A[i]).cross(B[(j + 1) % 3] - B[j]);
            if (e.norm() > 1e-14)
                axes.push_back(e);
        }
    for (int i = 0; i < 3; ++i) {
        axes.push_back(na.cross(A[(i + 1) % 3] - A[i]));
        axes.push_back(nb.cross(B[(i + 1) % 3] - B[i]));
    }
    for (const auto& ax : axes) {
        if (ax.norm() < 1e-14)
            continue;
        double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
        for (int k = 0; k < 3; ++k) {
            double pa = ax.dot(A[k]), pb = ax.dot(B[k]);
            amin = std::min(amin, pa);
            amax = std::max(amax, pa);
            bmin = std::min(bmin, pb);
            bmax = std::max(bmax, pb);
        }
        double slack = 1e-12 * ax.norm();
        if (amax < bmin - slack || bmax < amin - slack)
            return false;
    }
    return true;
}

} // namespace detail

/// Pairs of triangles sharing no vertex whose chordal triangles intersect. Intended for
/// coarse meshes (quadratic in the number of nearby pairs).
inline std::vector<std::pair<int, int>> self_intersections(const TriMesh& m)
{
    std::vector<std::pair<int, int>> out;
    double reach = 0;
    for (const auto& t : m.triangles)
        for (int k = 0; k < 3; ++k)
            reach = std::max(reach, (m.vertices[t[k]] - m.vertices[t[(k + 1) % 3]]).norm());
    std::vector<Vec4> centroid(m.num_triangles());
    for (int f = 0; f < m.num_triangles(); ++f) {
        const auto& t = m.triangles[f];
        centroid[f] = (m.vertices[t[0]] + m.vertices[t[1]] + m.vertices[t[2]]) / 3.0;
    }
    for (int f = 0; f < m.num_triangles(); ++f)
        for (int g = f + 1; g < m.num_triangles(); ++g) {
            if ((centroid[f] - centroid[g]).norm() > 2 * reach)
                continue;
            const auto &a = m.triangles[f], &b = m.triangles[g];
            bool share = false;
            for (int i : a)
                for (int j : b)
                    share |= i == j;
            if (share)
                continue;
            // gnomonic chart centred at the pair's mean point maps great spheres to planes
            Vec4 c = (centroid[f] + centroid[g]).normalized();
            GreatSubsphere axis({c});
            auto frame = axis.complement();
            auto chart = [&](const Vec4& x) {
                double h = x.dot(c);
                return Eigen::Vector3d(frame[0].dot(x) / h, frame[1].dot(x) / h, frame[2].dot(x) / h);
            };
            std::array<Eigen::Vector3d, 3> A, B;
            for (int k = 0; k < 3; ++k) {
                A[k] = chart(m.vertices[a[k]]);
                B[k] = chart(m.vertices[b[k]]);
            }
            if (detail::triangles_intersect_3d(A, B))
                out.emplace_back(f, g);
        }
    return out;
}

} // namespace s3mm
