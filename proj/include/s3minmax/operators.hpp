#pragma once

#include "mesh.hpp"

#include <Eigen/Sparse>

#include <sstream>

namespace s3mm {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Cotangent stiffness of the chordal triangles: K_ab = -(cot alpha + cot beta)/2 off the
/// diagonal, rows summing to zero. Positive semidefinite.
inline SparseMatrix cotangent_stiffness(const TriMesh& m)
{
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(m.triangles.size() * 12);
    for (int f = 0; f < m.num_triangles(); ++f) {
        const auto& t = m.triangles[f];
        for (int k = 0; k < 3; ++k) {
            int o = t[k], a = t[(k + 1) % 3], b = t[(k + 2) % 3];
            Vec4 u = m.vertices[a] - m.vertices[o], v = m.vertices[b] - m.vertices[o];
            double cr = wedge_norm(u, v);
            if (!(cr >= 1e-300)) {
                std::ostringstream os;
                os << "degenerate triangle " << f;
                throw numerical_error(os.str());
            }
            double w = 0.5 * u.dot(v) / cr;
            trip.emplace_back(a, b, -w);
            trip.emplace_back(b, a, -w);
            trip.emplace_back(a, a, w);
            trip.emplace_back(b, b, w);
        }
    }
    SparseMatrix K(m.num_vertices(), m.num_vertices());
    K.setFromTriplets(trip.begin(), trip.end());
    return K;
}

/// Barycentric lumped mass: a third of each incident triangle area.
inline Eigen::VectorXd lumped_mass(const TriMesh& m)
{
    Eigen::VectorXd M = Eigen::VectorXd::Zero(m.num_vertices());
    for (const auto& t : m.triangles) {
        double a = triangle_area(m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]) / 3.0;
        for (int v : t)
            M[v] += a;
    }
    return M;
}

} // namespace s3mm
