#pragma once

#include "mesh.hpp"

#include <cmath>

namespace s3mm {

/// Icosahedral triangulation of the equatorial sphere {x4 = 0}, refined `level` times.
inline TriMesh great_sphere_mesh(int level = 5)
{
    const double phi = (1 + std::sqrt(5.0)) / 2;
    std::vector<Eigen::Vector3d> p = {{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
                                      {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
                                      {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
    TriMesh m;
    for (auto& q : p) {
        q.normalize();
        m.vertices.emplace_back(q[0], q[1], q[2], 0.0);
    }
    m.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                   {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                   {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    return refine(m, level);
}

/// Structured grid on C_t with n_alpha x n_beta quads, each split into two triangles.
inline TriMesh cmc_torus_mesh(double t, int n_alpha, int n_beta)
{
    CmcTorus torus(t);
    if (n_alpha < 3 || n_beta < 3)
        throw std::invalid_argument("cmc_torus_mesh: need at least 3 samples per direction");
    TriMesh m;
    for (int i = 0; i < n_alpha; ++i)
        for (int j = 0; j < n_beta; ++j)
            m.vertices.push_back(torus.point(2 * pi * i / n_alpha, 2 * pi * j / n_beta).vec());
    auto id = [&](int i, int j) { return (i % n_alpha) * n_beta + (j % n_beta); };
    for (int i = 0; i < n_alpha; ++i)
        for (int j = 0; j < n_beta; ++j) {
            m.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            m.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    return m;
}

/// Grid resolution with edge length about h in both directions.
inline TriMesh cmc_torus_mesh(double t, double h = 0.06)
{
    CmcTorus torus(t);
    int na = std::max(8, static_cast<int>(std::ceil(2 * pi * torus.t() / h)));
    int nb = std::max(8, static_cast<int>(std::ceil(2 * pi * torus.s() / h)));
    return cmc_torus_mesh(t, na, nb);
}

inline TriMesh clifford_torus_mesh(double h = 0.06) { return cmc_torus_mesh(1.0 / std::sqrt(2.0), h); }

/// Lawson-type surface of genus m*k: the great circles S1 and S1perp carry 2(m+1) and
/// 2(k+1) equally spaced points, and the checkerboard half of the geodesic quadrilaterals
/// P_i Q_j P_{i+1} Q_{j+1} is filled by normalized bilinear patches with r x r cells.
/// Every patch lies in its own tetrahedron of the join tiling, so the surface is embedded.
/// It meets S1perp exactly at the 2(k+1) points Q_j.
inline TriMesh lawson_type_mesh(int m, int k, int r = 8)
{
    if (m < 1 || k < 1 || r < 1)
        throw std::invalid_argument("lawson_type_mesh: need m, k, r >= 1");
    int np = 2 * (m + 1), nq = 2 * (k + 1);
    std::vector<Vec4> P(np), Q(nq);
    for (int i = 0; i < np; ++i)
        P[i] = Vec4(std::cos(2 * pi * i / np), std::sin(2 * pi * i / np), 0, 0);
    for (int j = 0; j < nq; ++j)
        Q[j] = Vec4(0, 0, std::cos(2 * pi * j / nq), std::sin(2 * pi * j / nq));

    TriMesh mesh;
    for (const auto& p : P)
        mesh.vertices.push_back(p);
    for (const auto& q : Q)
        mesh.vertices.push_back(q);
    // interior samples of arc P_a Q_b, s = 1..r-1 measured from P
    std::map<std::pair<int, int>, std::vector<int>> arcs;
    auto arc = [&](int a, int b) -> const std::vector<int>& {
        auto key = std::make_pair(a, b);
        auto it = arcs.find(key);
        if (it != arcs.end())
            return it->second;
        std::vector<int> ids;
        for (int s = 1; s < r; ++s) {
            double u = static_cast<double>(s) / r;
            ids.push_back(mesh.num_vertices());
            mesh.vertices.push_back(((1 - u) * P[a] + u * Q[b]).normalized());
        }
        return arcs.emplace(key, std::move(ids)).first->second;
    };
    auto p_id = [&](int i) { return i % np; };
    auto q_id = [&](int j) { return np + j % nq; };

    for (int i = 0; i < np; ++i)
        for (int j = 0; j < nq; ++j) {
            if ((i + j) % 2)
                continue;
            int a0 = p_id(i), a1 = p_id(i + 1), b0 = (j % nq), b1 = ((j + 1) % nq);
            // corners: (0,0) = P_i, (1,0) = Q_j, (1,1) = P_{i+1}, (0,1) = Q_{j+1}
            std::vector<std::vector<int>> grid(r + 1, std::vector<int>(r + 1, -1));
            grid[0][0] = a0;
            grid[r][0] = q_id(b0);
            grid[r][r] = a1;
            grid[0][r] = q_id(b1);
            const auto& e_bottom = arc(a0, b0); // P_i -> Q_j along u
            const auto& e_right = arc(a1, b0);  // P_{i+1} -> Q_j along v reversed
            const auto& e_top = arc(a1, b1);    // P_{i+1} -> Q_{j+1} along u reversed
            const auto& e_left = arc(a0, b1);   // P_i -> Q_{j+1} along v
            for (int s = 1; s < r; ++s) {
                grid[s][0] = e_bottom[s - 1];
                grid[r][s] = e_right[r - s - 1];
                grid[s][r] = e_top[r - s - 1];
                grid[0][s] = e_left[s - 1];
            }
            const Vec4 &A = P[a0 % np], &B = Q[b0], &C = P[a1 % np], &D = Q[b1];
            for (int s = 1; s < r; ++s)
                for (int q = 1; q < r; ++q) {
                    double u = static_cast<double>(s) / r, v = static_cast<double>(q) / r;
                    Vec4 x = (1 - u) * (1 - v) * A + u * (1 - v) * B + u * v * C + (1 - u) * v * D;
                    grid[s][q] = mesh.num_vertices();
                    mesh.vertices.push_back(x.normalized());
                }
            for (int s = 0; s < r; ++s)
                for (int q = 0; q < r; ++q) {
                    mesh.triangles.push_back({grid[s][q], grid[s + 1][q], grid[s + 1][q + 1]});
                    mesh.triangles.push_back({grid[s][q], grid[s + 1][q + 1], grid[s][q + 1]});
                }
        }
    return orient_consistently(mesh);
}

} // namespace s3mm
