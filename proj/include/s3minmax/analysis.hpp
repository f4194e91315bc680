#pragma once

#include "mesh.hpp"
#include "operators.hpp"
#include "parallel.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <random>
#include <set>

namespace s3mm {

/// Per-vertex second fundamental form of the surface in S3, relative to `normal`.
struct CurvatureField {
    std::vector<double> k1, k2; // k1 >= k2
    std::vector<double> asq;    // k1^2 + k2^2
    std::vector<Vec4> normal;
    std::vector<Vec4> dir1; // principal direction of k1, tangent to the surface

    int size() const { return static_cast<int>(k1.size()); }
    double split(int v) const { return k1[v] - k2[v]; }
    double max_split() const
    {
        double m = 0;
        for (int v = 0; v < size(); ++v)
            m = std::max(m, split(v));
        return m;
    }
    /// max |k1 + k2|, zero for a minimal surface
    double mean_curvature_residual() const
    {
        double m = 0;
        for (int v = 0; v < size(); ++v)
            m = std::max(m, std::abs(k1[v] + k2[v]));
        return m;
    }
};

inline std::vector<std::vector<int>> vertex_neighbors(const TriMesh& m)
{
    std::vector<std::set<int>> s(m.num_vertices());
    for (const auto& t : m.triangles)
        for (int k = 0; k < 3; ++k) {
            s[t[k]].insert(t[(k + 1) % 3]);
            s[t[k]].insert(t[(k + 2) % 3]);
        }
    std::vector<std::vector<int>> out(s.size());
    for (size_t i = 0; i < s.size(); ++i)
        out[i].assign(s[i].begin(), s[i].end());
    return out;
}

/// Riemannian log map of S3 at x, as a vector in R4 orthogonal to x.
inline Vec4 sphere_log(const Vec4& x, const Vec4& p)
{
    Vec4 w = p - p.dot(x) * x;
    double s = w.norm();
    if (s < 1e-300)
        return Vec4::Zero();
    return std::atan2(s, p.dot(x)) / s * w;
}

namespace detail {

inline void tangent_frame(const Vec4& x, const Vec4& nu, Vec4& e1, Vec4& e2)
{
    // Gram-Schmidt over the coordinate axes, taking the two best-conditioned completions
    std::vector<Vec4> basis = {x, nu};
    for (int a = 0; a < 4 && basis.size() < 4; ++a) {
        Vec4 c = Vec4::Unit(a);
        for (const auto& b : basis)
            c -= c.dot(b) * b;
        if (c.norm() > 0.3)
            basis.push_back(c.normalized());
    }
    if (basis.size() < 4)
        for (int a = 0; a < 4 && basis.size() < 4; ++a) {
            Vec4 c = Vec4::Unit(a);
            for (const auto& b : basis)
                c -= c.dot(b) * b;
            if (c.norm() > 1e-6)
                basis.push_back(c.normalized());
        }
    e1 = basis[2];
    e2 = basis[3];
}

} // namespace detail

/// Least-squares quadric h = a u^2 + b uv + c v^2 + d u + e v over the 2-ring, in geodesic
/// normal coordinates of S3 at the vertex. The normal is re-tilted by the fitted slope
/// `retilt` times before the final fit.
inline CurvatureField curvature_field(const TriMesh& m, int retilt = 2)
{
    const int V = m.num_vertices();
    auto nbr = vertex_neighbors(m);
    auto nu0 = vertex_normals(m);
    CurvatureField f;
    f.k1.resize(V);
    f.k2.resize(V);
    f.asq.resize(V);
    f.normal.resize(V);
    f.dir1.resize(V);
    std::vector<int> bad(V, 0);
    parallel_for(V, [&](int v) {
        std::set<int> ring(nbr[v].begin(), nbr[v].end());
        for (int w : nbr[v])
            ring.insert(nbr[w].begin(), nbr[w].end());
        ring.erase(v);
        const Vec4& x = m.vertices[v];
        std::vector<Vec4> logs;
        for (int w : ring)
            logs.push_back(sphere_log(x, m.vertices[w]));
        Vec4 nu = nu0[v];
        if (logs.size() < 5) {
            bad[v] = 1;
            return;
        }
        Eigen::MatrixXd A(logs.size(), 5);
        Eigen::VectorXd rhs(logs.size());
        Eigen::Matrix<double, 5, 1> c;
        Vec4 e1, e2;
        for (int pass = 0; pass <= retilt; ++pass) {
            detail::tangent_frame(x, nu, e1, e2);
            for (size_t i = 0; i < logs.size(); ++i) {
                double u = logs[i].dot(e1), w = logs[i].dot(e2);
                A.row(i) << u * u, u * w, w * w, u, w;
                rhs[i] = logs[i].dot(nu);
            }
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
            qr.setThreshold(1e-10);
            if (qr.rank() < 5) {
                bad[v] = 1;
                return;
            }
            c = qr.solve(rhs);
            if (pass < retilt)
                nu = (nu - c[3] * e1 - c[4] * e2).normalized();
        }
        Eigen::Vector2d grad(c[3], c[4]);
        Eigen::Matrix2d hess;
        hess << 2 * c[0], c[1], c[1], 2 * c[2];
        Eigen::Matrix2d I = Eigen::Matrix2d::Identity() + grad * grad.transpose();
        Eigen::Matrix2d II = hess / std::sqrt(1 + grad.squaredNorm());
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::Matrix2d> es(II, I);
        f.k2[v] = es.eigenvalues()[0];
        f.k1[v] = es.eigenvalues()[1];
        f.asq[v] = f.k1[v] * f.k1[v] + f.k2[v] * f.k2[v];
        Eigen::Vector2d d = es.eigenvectors().col(1);
        f.dir1[v] = (d[0] * e1 + d[1] * e2).normalized();
        f.normal[v] = nu;
    });
    for (int v = 0; v < V; ++v)
        if (bad[v])
            throw numerical_error("rank-deficient curvature stencil at vertex " + std::to_string(v));
    return f;
}

// ---------------------------------------------------------------------------------------------
// umbilics

struct UmbilicPoint {
    int vertex = -1;
    Vec4 position = Vec4::Zero();
    int cluster_size = 0;
    int winding = 0; // turns of the doubled principal angle around the loop
    int multiplicity = 0;
};

struct UmbilicReport {
    double tol = 0;
    std::vector<int> locations;
    std::vector<int> multiplicities;
    int total_with_multiplicity = 0;
    std::vector<UmbilicPoint> points;
    int rejected = 0; // clusters with zero or positive winding, or no clean surrounding loop
};

namespace detail {

/// Ordered boundary loop of the faces incident to `core`; empty if that is not a single loop.
inline std::vector<int> surrounding_loop(const TriMesh& m, const std::vector<std::vector<int>>& faces_of,
                                         const std::set<int>& core)
{
    std::set<int> faces;
    for (int v : core)
        faces.insert(faces_of[v].begin(), faces_of[v].end());
    std::map<std::pair<int, int>, int> directed;
    for (int f : faces) {
        const auto& t = m.triangles[f];
        for (int k = 0; k < 3; ++k)
            directed[{t[k], t[(k + 1) % 3]}]++;
    }
    std::map<int, int> next;
    for (const auto& [e, cnt] : directed) {
        if (directed.count({e.second, e.first}))
            continue;
        if (next.count(e.first))
            return {};
        next[e.first] = e.second;
    }
    if (next.empty())
        return {};
    std::vector<int> loop;
    int start = next.begin()->first, v = start;
    do {
        loop.push_back(v);
        auto it = next.find(v);
        if (it == next.end() || loop.size() > next.size())
            return {};
        v = it->second;
    } while (v != start);
    if (loop.size() != next.size())
        return {};
    return loop;
}

inline double wrap_angle(double a)
{
    while (a > pi)
        a -= 2 * pi;
    while (a <= -pi)
        a += 2 * pi;
    return a;
}

} // namespace detail

/// Clusters of vertices with k1 - k2 < tol are merged into umbilic points; the multiplicity of
/// each is minus twice the index of the principal line field on a loop two rings out.
/// tol <= 0 selects 0.05 * max(k1 - k2).
inline UmbilicReport detect_umbilics(const CurvatureField& field, const TriMesh& m, double tol = 0)
{
    const int V = m.num_vertices();
    if (field.size() != V)
        throw std::invalid_argument("detect_umbilics: field does not match mesh");
    const double maxsplit = field.max_split();
    if (tol <= 0)
        tol = 0.05 * maxsplit;
    int below = 0;
    for (int v = 0; v < V; ++v)
        below += field.split(v) < tol;
    if (maxsplit < 0.05 || 2 * below > V)
        throw numerical_error("umbilic set has dimension > 0");

    UmbilicReport rep;
    rep.tol = tol;
    auto nbr = vertex_neighbors(m);
    std::vector<std::vector<int>> faces_of(V);
    for (int f = 0; f < m.num_triangles(); ++f)
        for (int v : m.triangles[f])
            faces_of[v].push_back(f);

    std::vector<int> comp(V, -1);
    for (int s = 0; s < V; ++s) {
        if (comp[s] >= 0 || field.split(s) >= tol)
            continue;
        std::vector<int> cluster{s};
        comp[s] = s;
        for (size_t i = 0; i < cluster.size(); ++i)
            for (int w : nbr[cluster[i]])
                if (comp[w] < 0 && field.split(w) < tol) {
                    comp[w] = s;
                    cluster.push_back(w);
                }
        int center = *std::min_element(cluster.begin(), cluster.end(),
                                       [&](int a, int b) { return field.split(a) < field.split(b); });
        // loop around the cluster grown by one ring
        std::set<int> core(cluster.begin(), cluster.end());
        for (int v : cluster)
            core.insert(nbr[v].begin(), nbr[v].end());
        auto loop = detail::surrounding_loop(m, faces_of, core);
        bool clean = !loop.empty();
        for (int v : loop)
            if (field.split(v) < tol)
                clean = false;
        if (!clean) {
            ++rep.rejected;
            continue;
        }
        Vec4 e1, e2;
        detail::tangent_frame(m.vertices[center], field.normal[center], e1, e2);
        double signed_area = 0, turn = 0;
        std::vector<Eigen::Vector2d> pts;
        std::vector<double> ang;
        for (int v : loop) {
            Vec4 l = sphere_log(m.vertices[center], m.vertices[v]);
            pts.emplace_back(l.dot(e1), l.dot(e2));
            Vec4 d = field.dir1[v];
            ang.push_back(2 * std::atan2(d.dot(e2), d.dot(e1)));
        }
        for (size_t i = 0; i < loop.size(); ++i) {
            const auto &p = pts[i], &q = pts[(i + 1) % pts.size()];
            signed_area += p[0] * q[1] - p[1] * q[0];
            turn += detail::wrap_angle(ang[(i + 1) % ang.size()] - ang[i]);
        }
        int w = static_cast<int>(std::lround(turn / (2 * pi)));
        if (signed_area < 0)
            w = -w;
        if (w >= 0) {
            ++rep.rejected;
            continue;
        }
        UmbilicPoint p;
        p.vertex = center;
        p.position = m.vertices[center];
        p.cluster_size = static_cast<int>(cluster.size());
        p.winding = w;
        p.multiplicity = -w;
        rep.points.push_back(p);
        rep.locations.push_back(center);
        rep.multiplicities.push_back(p.multiplicity);
        rep.total_with_multiplicity += p.multiplicity;
    }
    return rep;
}

struct UmbilicSweep {
    std::vector<double> factors; // tol as a fraction of max(k1 - k2)
    std::vector<UmbilicReport> reports;
};

inline UmbilicSweep umbilic_sensitivity(const CurvatureField& field, const TriMesh& m,
                                        std::vector<double> factors = {0.025, 0.05, 0.1, 0.2})
{
    UmbilicSweep s;
    s.factors = factors;
    const double maxsplit = field.max_split();
    for (double f : factors)
        s.reports.push_back(detect_umbilics(field, m, f * maxsplit));
    return s;
}

// ---------------------------------------------------------------------------------------------
// Jacobi operator

enum class JacobiDiscretization {
    cotangent,   // cotangent stiffness, lumped mass, potential |A|^2 + 2 from the curvature field
    area_hessian // exact second variation of the discrete area along vertex-normal graphs
};

struct SpectrumResult {
    std::vector<double> eigenvalues; // ascending
    int negative_count = 0;          // eigenvalues below -spectral_tol that are not Killing modes
    int raw_negative_count = 0;      // every eigenvalue below -spectral_tol
    int zero_count = 0;              // |lambda| <= spectral_tol, plus Killing modes
    int killing_modes = 0;
    std::vector<double> killing_overlap; // M-norm fraction of each eigenvector in the Killing span
    double spectral_tol = 0;
    bool truncated = false; // every computed eigenvalue is negative, so the index may be larger
    int iterations = 0;
    std::string discretization;
    std::string mass_convention = "generalized problem L u = lambda M u, lumped barycentric mass";
};

struct JacobiSystem {
    SparseMatrix L;
    Eigen::VectorXd mass;
    std::vector<Vec4> normal;
};

/// Cotangent stiffness minus mass times (|A|^2 + 2).
inline JacobiSystem jacobi_cotangent(const TriMesh& m, const CurvatureField& field)
{
    JacobiSystem s;
    s.L = cotangent_stiffness(m);
    s.mass = lumped_mass(m);
    s.normal = field.normal;
    for (int v = 0; v < m.num_vertices(); ++v)
        s.L.coeffRef(v, v) -= s.mass[v] * (field.asq[v] + 2);
    return s;
}

/// Second derivatives of the triangle area when vertex a moves by s_a n_a.
inline Eigen::Matrix3d triangle_normal_hessian(const Vec4 p[3], const Vec4 n[3])
{
    Vec4 e1 = p[1] - p[0], e2 = p[2] - p[0];
    Vec4 d1[3], d2[3];
    for (int a = 0; a < 3; ++a) {
        d1[a] = ((a == 1) - (a == 0)) * n[a];
        d2[a] = ((a == 2) - (a == 0)) * n[a];
    }
    double e11 = e1.dot(e1), e22 = e2.dot(e2), e12 = e1.dot(e2);
    double D = e11 * e22 - e12 * e12;
    Eigen::Vector3d dD;
    Eigen::Matrix3d ddD;
    for (int a = 0; a < 3; ++a) {
        double c1 = e1.dot(d1[a]), c2 = e2.dot(d2[a]), x = d1[a].dot(e2) + e1.dot(d2[a]);
        dD[a] = 2 * c1 * e22 + 2 * e11 * c2 - 2 * e12 * x;
    }
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            double xa = d1[a].dot(e2) + e1.dot(d2[a]);
            double xb = d1[b].dot(e2) + e1.dot(d2[b]);
            ddD(a, b) = 2 * d1[b].dot(d1[a]) * e22 + 4 * e1.dot(d1[a]) * e2.dot(d2[b]) + 4 * e1.dot(d1[b]) * e2.dot(d2[a]) +
                        2 * e11 * d2[b].dot(d2[a]) - 2 * xb * xa - 2 * e12 * (d1[a].dot(d2[b]) + d1[b].dot(d2[a]));
        }
    double r = std::sqrt(D);
    return 0.5 * (ddD / (2 * r) - dD * dD.transpose() / (4 * D * r));
}

/// Hessian of the chordal area over X_v(phi) = normalize(x_v + phi_v nu_v) at phi = 0.
inline JacobiSystem jacobi_area_hessian(const TriMesh& m)
{
    const int V = m.num_vertices();
    JacobiSystem s;
    s.normal = vertex_normals(m);
    s.mass = lumped_mass(m);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(9 * m.triangles.size() + V);
    for (int f = 0; f < m.num_triangles(); ++f) {
        const auto& t = m.triangles[f];
        Vec4 p[3] = {m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]};
        Vec4 n[3] = {s.normal[t[0]], s.normal[t[1]], s.normal[t[2]]};
        if (!(triangle_area(p[0], p[1], p[2]) >= 1e-16))
            throw numerical_error("degenerate triangle " + std::to_string(f));
        Eigen::Matrix3d h = triangle_normal_hessian(p, n);
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                trip.emplace_back(t[a], t[b], h(a, b));
    }
    // staying on S3 bends each vertex path toward the origin: d^2 X / dphi^2 = -x
    std::vector<Vec4> g(V, Vec4::Zero());
    for (const auto& t : m.triangles)
        for (int k = 0; k < 3; ++k) {
            const Vec4& p = m.vertices[t[k]];
            const Vec4& q = m.vertices[t[(k + 1) % 3]];
            const Vec4& r = m.vertices[t[(k + 2) % 3]];
            Vec4 e = r - q, d = p - q;
            Vec4 hgt = d - (d.dot(e) / e.squaredNorm()) * e;
            g[t[k]] += 0.5 * e.norm() / hgt.norm() * hgt;
        }
    for (int v = 0; v < V; ++v)
        trip.emplace_back(v, v, -g[v].dot(m.vertices[v]));
    s.L.resize(V, V);
    s.L.setFromTriplets(trip.begin(), trip.end());
    return s;
}

inline JacobiSystem jacobi_system(const TriMesh& m, const CurvatureField& field, JacobiDiscretization disc)
{
    JacobiSystem s = disc == JacobiDiscretization::cotangent ? jacobi_cotangent(m, field) : jacobi_area_hessian(m);
    SparseMatrix Lt = s.L.transpose();
    if ((s.L - Lt).norm() > 1e-10 * std::max(1.0, s.L.norm()))
        throw std::logic_error("assembled Jacobi operator is not symmetric");
    return s;
}

/// Normal components nu . (B x) of the six rotation fields B in so(4), M-orthonormalized;
/// fields that are tangent to the surface (continuous symmetries) drop out.
inline Eigen::MatrixXd killing_basis(const TriMesh& m, const std::vector<Vec4>& normal, const Eigen::VectorXd& mass)
{
    const int V = m.num_vertices();
    std::vector<Eigen::VectorXd> cols;
    const double total = mass.sum();
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) {
            Eigen::VectorXd u(V);
            for (int v = 0; v < V; ++v) {
                const Vec4& x = m.vertices[v];
                Vec4 Bx = Vec4::Zero();
                Bx[i] = -x[j];
                Bx[j] = x[i];
                u[v] = normal[v].dot(Bx);
            }
            for (const auto& c : cols)
                u -= c.cwiseProduct(mass).dot(u) * c;
            double nrm = std::sqrt(u.cwiseProduct(mass).dot(u));
            if (nrm > 1e-3 * std::sqrt(total))
                cols.push_back(u / nrm);
        }
    Eigen::MatrixXd B(V, cols.size());
    for (size_t c = 0; c < cols.size(); ++c)
        B.col(c) = cols[c];
    return B;
}

/// The k lowest eigenvalues of the discrete Jacobi operator, by shift-invert subspace iteration
/// with Rayleigh-Ritz. spectral_tol <= 0 selects 1e-6 times the mass-normalized operator scale
/// (the largest diagonal entry of M^-1 L in absolute value). Eigenvectors lying mostly in the
/// span of the rotation Jacobi fields are counted as zero modes whatever their discrete sign.
inline SpectrumResult jacobi_spectrum(const TriMesh& m, const CurvatureField& field, int k, double spectral_tol = 0,
                                      JacobiDiscretization disc = JacobiDiscretization::area_hessian,
                                      std::uint64_t seed = 12345)
{
    const int V = m.num_vertices();
    if (k < 1 || k > V)
        throw std::invalid_argument("jacobi_spectrum: k out of range");
    JacobiSystem js = jacobi_system(m, field, disc);
    const SparseMatrix& L = js.L;
    Eigen::VectorXd diag = L.diagonal();
    double scale = 0, gersh = std::numeric_limits<double>::infinity();
    {
        Eigen::VectorXd off = Eigen::VectorXd::Zero(V);
        for (int c = 0; c < L.outerSize(); ++c)
            for (SparseMatrix::InnerIterator it(L, c); it; ++it)
                if (it.row() != it.col())
                    off[it.row()] += std::abs(it.value());
        for (int v = 0; v < V; ++v) {
            scale = std::max(scale, std::abs(diag[v]) / js.mass[v]);
            gersh = std::min(gersh, (diag[v] - off[v]) / js.mass[v]);
        }
    }
    if (spectral_tol <= 0)
        spectral_tol = 1e-6 * scale;
    // Gershgorin bound for M^-1/2 L M^-1/2 with diagonal M puts sigma below the spectrum;
    // the shift moves up toward the lowest Ritz value once one is known, and a successful
    // Cholesky factorization certifies that it is still below the spectrum
    double mmax = js.mass.maxCoeff(), mmin = js.mass.minCoeff();
    double sigma = std::min(gersh, 0.0) * (mmax / mmin) - 1;
    auto factor = [&](double s, Eigen::SimplicialLLT<SparseMatrix>& c) {
        SparseMatrix A = L;
        for (int v = 0; v < V; ++v)
            A.coeffRef(v, v) -= s * js.mass[v];
        c.compute(A);
        return c.info() == Eigen::Success;
    };
    Eigen::SimplicialLLT<SparseMatrix> chol;
    if (!factor(sigma, chol))
        throw numerical_error("shifted Jacobi operator is not positive definite");

    const int p = std::min(V, k + std::max(20, k));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0, 1);
    Eigen::MatrixXd X(V, p);
    for (int j = 0; j < p; ++j)
        for (int i = 0; i < V; ++i)
            X(i, j) = N(rng);
    Eigen::VectorXd prev = Eigen::VectorXd::Constant(k, std::numeric_limits<double>::infinity());
    Eigen::VectorXd lam;
    SpectrumResult res;
    for (int it = 0; it < 2000; ++it) {
        Eigen::MatrixXd Y = chol.solve(js.mass.asDiagonal() * X);
        Eigen::MatrixXd Ls = Y.transpose() * (L * Y);
        Eigen::MatrixXd Ms = Y.transpose() * js.mass.asDiagonal() * Y;
        Ls = 0.5 * (Ls + Ls.transpose()).eval();
        Ms = 0.5 * (Ms + Ms.transpose()).eval();
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Ls, Ms);
        if (es.info() != Eigen::Success)
            throw numerical_error("Rayleigh-Ritz step failed");
        lam = es.eigenvalues();
        X = Y * es.eigenvectors();
        res.iterations = it + 1;
        double target = lam[0] - 0.5 - 0.1 * std::abs(lam[0]);
        if (target - sigma > 0.5 * (1 + std::abs(lam[0]))) {
            if (factor(target, chol))
                sigma = target;
            else if (!factor(sigma, chol))
                throw numerical_error("shifted Jacobi operator is not positive definite");
        }
        double change = (lam.head(k) - prev).cwiseAbs().maxCoeff();
        if (change <= 1e-10 * (1 + lam.head(k).cwiseAbs().maxCoeff()))
            break;
        prev = lam.head(k);
    }
    Eigen::MatrixXd Kb = killing_basis(m, js.normal, js.mass);
    res.discretization = disc == JacobiDiscretization::cotangent ? "cotangent" : "area_hessian";
    res.eigenvalues.assign(lam.data(), lam.data() + k);
    res.spectral_tol = spectral_tol;
    for (int i = 0; i < k; ++i) {
        Eigen::VectorXd u = X.col(i);
        double un = u.cwiseProduct(js.mass).dot(u);
        Eigen::VectorXd c = Kb.transpose() * js.mass.asDiagonal() * u;
        double overlap = un > 0 ? c.squaredNorm() / un : 0;
        res.killing_overlap.push_back(overlap);
        bool killing = overlap > 0.5;
        double l = res.eigenvalues[i];
        res.killing_modes += killing;
        res.raw_negative_count += l < -spectral_tol;
        res.negative_count += l < -spectral_tol && !killing;
        res.zero_count += killing || std::abs(l) <= spectral_tol;
    }
    res.truncated = res.eigenvalues.back() < -spectral_tol;
    return res;
}

/// Normal component of the rotation field B x with B = e2 e1^T - e1 e2^T (rotation in the
/// x1 x2 plane, fixing S1perp pointwise).
inline Eigen::VectorXd rotation_jacobi_field(const TriMesh& m, const std::vector<Vec4>& normal)
{
    Eigen::VectorXd u(m.num_vertices());
    for (int v = 0; v < m.num_vertices(); ++v) {
        const Vec4& x = m.vertices[v];
        Vec4 Bx(-x[1], x[0], 0, 0);
        u[v] = normal[v].dot(Bx);
    }
    return u;
}

struct KillingCheck {
    double relative_residual = 0; // |M^-1 L u|_M / (operator scale * |u|_M)
    double u_norm = 0;
    double max_on_mirrors = 0; // max |u| on vertices lying on the cutting spheres
};

/// The rotation field is a Jacobi field; its discrete residual should vanish under refinement.
inline KillingCheck killing_residual(const TriMesh& m, const CurvatureField& field, int n,
                                    JacobiDiscretization disc = JacobiDiscretization::area_hessian)
{
    JacobiSystem js = jacobi_system(m, field, disc);
    Eigen::VectorXd u = rotation_jacobi_field(m, js.normal);
    Eigen::VectorXd Lu = js.L * u;
    for (int v = 0; v < m.num_vertices(); ++v)
        Lu[v] /= js.mass[v];
    auto mnorm = [&](const Eigen::VectorXd& a) { return std::sqrt(a.cwiseProduct(a).dot(js.mass)); };
    KillingCheck c;
    c.u_norm = mnorm(u);
    double scale = 0;
    for (int v = 0; v < m.num_vertices(); ++v)
        scale = std::max(scale, std::abs(js.L.coeff(v, v)) / js.mass[v]);
    c.relative_residual = c.u_norm > 0 ? mnorm(Lu) / (scale * c.u_norm) : 0;
    for (int i = 0; i < n; ++i) {
        GreatSubsphere S = objects::Xi((2.0 * i + 1) / (2.0 * n));
        for (int v = 0; v < m.num_vertices(); ++v)
            if (S.distance(m.vertices[v]) < 1e-9)
                c.max_on_mirrors = std::max(c.max_on_mirrors, std::abs(u[v]));
    }
    return c;
}

// ---------------------------------------------------------------------------------------------
// topology arithmetic

struct GenusCase {
    int n = 0, gprime = 0, k = 0;
    int genus = 0;
    int j = 0;
    std::string label; // "a", "b", "c", or "outside lemma hypotheses"
};

/// g = 2n g' + 2k(n - 1) and j = 2 + 4k, classified into the three admissible cases (genus at most 2n).
inline GenusCase genus_arithmetic(int n, int gprime, int k)
{
    if (n < 2 || gprime < 0 || k < 0)
        throw std::invalid_argument("genus_arithmetic: need n >= 2 and nonnegative g', k");
    GenusCase c{n, gprime, k, 2 * n * gprime + 2 * k * (n - 1), 2 + 4 * k, ""};
    if (c.genus > 2 * n)
        c.label = "outside lemma hypotheses";
    else if (k == 0)
        c.label = "a";
    else if (k == 1 && gprime == 0)
        c.label = "b";
    else if (k == 2 && gprime == 0 && n == 2)
        c.label = "c";
    else
        c.label = "outside lemma hypotheses";
    return c;
}

/// Which admissible case a measured (genus, j) pair falls into, or empty.
inline std::string genus_case(int n, int genus, int j)
{
    for (int gp : {0, 1})
        for (int k : {0, 1, 2}) {
            auto c = genus_arithmetic(n, gp, k);
            if (c.label.size() == 1 && c.genus == genus && c.j == j)
                return c.label;
        }
    return {};
}

struct GaussBonnetReport {
    double curvature_integral = 0; // sum over vertices of (1 + k1 k2) * mass
    double expected = 0;           // 2 pi (2 - 2g)
    double residual = 0;           // |integral - expected| / (4 pi)
    // For a minimal surface K = 2 + (L 1)/(2 m) with L the discrete second variation, so
    // the integral is 2 area + 1'L1/2. Independent of the curvature fit.
    double second_variation_integral = 0;
    double second_variation_residual = 0;
    double angle_defect = 0;       // polyhedral curvature, equals 2 pi chi exactly
    int genus = 0;
    int j = 0;
    int pieces = 0;
    std::optional<int> gamma, beta;
    bool pieces_congruent = false;
    std::optional<int> identity_rhs; // n(2 gamma + beta - 2) + (n - 1) j / 2 + 1
    bool identity_holds = false;
};

/// Global curvature integral and the integer identity from cutting along the n symmetry spheres
/// Xi_{(2i+1)/(2n)}.
inline GaussBonnetReport gauss_bonnet_report(const TriMesh& m, const CurvatureField& field, int n, int j)
{
    GaussBonnetReport r;
    auto topo = topology_report(m, false);
    if (!topo.genus)
        throw topology_error("gauss_bonnet_report: surface is not orientable and connected");
    r.genus = *topo.genus;
    r.j = j;
    Eigen::VectorXd mass = lumped_mass(m);
    for (int v = 0; v < m.num_vertices(); ++v)
        r.curvature_integral += (1 + field.k1[v] * field.k2[v]) * mass[v];
    r.expected = 2 * pi * (2 - 2 * r.genus);
    r.residual = std::abs(r.curvature_integral - r.expected) / (4 * pi);
    SparseMatrix L = jacobi_area_hessian(m).L;
    r.second_variation_integral = 2 * area(m) + 0.5 * (L * Eigen::VectorXd::Ones(m.num_vertices())).sum();
    r.second_variation_residual = std::abs(r.second_variation_integral - r.expected) / (4 * pi);
    r.angle_defect = angle_defect_sum(m);

    std::vector<GreatSubsphere> spheres;
    for (int i = 0; i < n; ++i)
        spheres.push_back(objects::Xi((2.0 * i + 1) / (2.0 * n)));
    auto pieces = cut_by_spheres(m, spheres);
    r.pieces = static_cast<int>(pieces.size());
    if (pieces.empty())
        return r;
    r.pieces_congruent = true;
    for (const auto& p : pieces)
        if (p.genus != pieces[0].genus || p.boundary_loops != pieces[0].boundary_loops)
            r.pieces_congruent = false;
    if (!r.pieces_congruent || pieces[0].genus < 0)
        return r;
    r.gamma = pieces[0].genus;
    r.beta = pieces[0].boundary_loops;
    r.identity_rhs = n * (2 * *r.gamma + *r.beta - 2) + (n - 1) * j / 2 + 1;
    r.identity_holds = (n - 1) * j % 2 == 0 && *r.identity_rhs == r.genus;
    return r;
}

} // namespace s3mm
