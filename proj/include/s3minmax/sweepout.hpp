#pragma once

#include "mesh.hpp"
#include "parallel.hpp"
#include "queries.hpp"
#include "symmetry.hpp"

#include <cmath>
#include <memory>
#include <sstream>

namespace s3mm {

inline constexpr double t_min = 0.02;

/// Upper area bound 2 pi^2 + 4 pi + 1/25 for every slice.
inline constexpr double slice_area_bound = 2 * pi * pi + 4 * pi + 1.0 / 25;

enum class GroupVariant { Gn, Hn };

struct SliceSpec {
    int n = 3;
    double t = 0.5;
    int refinement = 4;
    double fillet_width = 0; // 0 selects pi/(16 n)
    GroupVariant variant = GroupVariant::Gn;

    double effective_fillet_width() const { return fillet_width > 0 ? fillet_width : pi / (16.0 * n); }

    void validate() const
    {
        if (n < 2)
            throw std::invalid_argument("n must be at least 2");
        if (refinement < 1 || refinement > 8)
            throw std::invalid_argument("refinement must lie in 1..8");
        if (fillet_width < 0 || effective_fillet_width() >= pi / (8.0 * n))
            throw std::invalid_argument("fillet too wide for n: fillet_width must be below pi/(8n)");
    }

    GroupKind group_kind() const { return variant == GroupVariant::Gn ? GroupKind::Gn : GroupKind::Hn; }
};

/// Closed area before smoothing: four quarter tori plus the four flap families.
inline double unsmoothed_area_formula(double t)
{
    if (!(t > 0 && t < 1))
        throw std::invalid_argument("unsmoothed_area_formula: t must lie in (0,1)");
    return 4 * (pi * pi * t * std::sqrt(1 - t * t) + pi);
}

namespace sweep {

enum Flag : unsigned {
    xi_plus = 1,
    xi_minus = 2,
    meridian = 4,
    equator = 8,
    pole = 16,
    z_edge = 32,
};

enum class Region { torus, sigma, zeta };

struct PatchVertex {
    Region region;
    unsigned flags = 0;
    int i = 0;          // theta1 sample index (torus, sigma) or position in row (zeta)
    int row = 0;        // psi index (torus) or row index (flaps)
    int row_count = 0;  // intervals in this row (zeta)
    int mirror = -1;    // z-edge partner under theta1 -> -theta1
};

/// Fundamental patch over theta1 in [-pi/(2n), pi/(2n)], theta2 >= 0, theta3 >= 0:
/// quarter torus, sigma flap on the theta1 >= 0 side, zeta flap on the theta1 <= 0 side.
/// The combinatorics depend only on n and the refinement level.
struct PatchLayout {
    int n = 0;
    int K = 0, Npsi = 0, Nsigma = 0, Nzeta = 0;
    std::vector<PatchVertex> vertices;
    std::vector<Tri> triangles;
    std::vector<std::vector<int>> torus_rows; // [psi][i + K]
};

inline void zipper(const std::vector<int>& a, const std::vector<double>& pa, const std::vector<int>& b,
                   const std::vector<double>& pb, std::vector<Tri>& out)
{
    size_t i = 0, j = 0;
    while (i + 1 < a.size() || j + 1 < b.size()) {
        bool advance_a;
        if (i + 1 >= a.size())
            advance_a = false;
        else if (j + 1 >= b.size())
            advance_a = true;
        else
            advance_a = pa[i + 1] <= pb[j + 1] + 1e-12;
        if (advance_a) {
            out.push_back({a[i], a[i + 1], b[j]});
            ++i;
        }
        else {
            out.push_back({a[i], b[j + 1], b[j]});
            ++j;
        }
    }
}

inline PatchLayout make_layout(int n, int refinement)
{
    PatchLayout L;
    L.n = n;
    double h = 0.98 / std::ldexp(1.0, refinement);
    double a_ref = pi / 4, s_ref = std::sqrt(0.5);
    double wedge = pi / (2.0 * n);
    L.K = std::max(2, static_cast<int>(std::ceil(wedge * 0.85 / h)));
    L.Npsi = std::max(3, static_cast<int>(std::ceil(pi / 2 * s_ref / h)));
    L.Nsigma = std::max(2, static_cast<int>(std::ceil(a_ref / h)));
    L.Nzeta = std::max(2, static_cast<int>(std::ceil((pi / 2 - a_ref) / h)));

    auto add = [&](PatchVertex v) {
        L.vertices.push_back(v);
        return static_cast<int>(L.vertices.size()) - 1;
    };
    const int K = L.K;
    L.torus_rows.assign(L.Npsi + 1, std::vector<int>(2 * K + 1));
    for (int j = 0; j <= L.Npsi; ++j)
        for (int i = -K; i <= K; ++i) {
            PatchVertex v{Region::torus};
            v.i = i;
            v.row = j;
            if (i == K)
                v.flags |= xi_plus;
            if (i == -K)
                v.flags |= xi_minus;
            if (j == 0 && i == 0)
                v.flags |= meridian;
            if (j == L.Npsi)
                v.flags |= z_edge;
            L.torus_rows[j][i + K] = add(v);
        }
    for (int i = -K; i <= K; ++i)
        L.vertices[L.torus_rows[L.Npsi][i + K]].mirror = L.torus_rows[L.Npsi][-i + K];

    auto theta_of = [&](int i, int count, double lo) { return lo + wedge * i / count; };

    std::vector<double> full_params;
    for (int i = -K; i <= K; ++i)
        full_params.push_back(theta_of(i, K, 0));
    for (int j = 0; j < L.Npsi; ++j)
        zipper(L.torus_rows[j], full_params, L.torus_rows[j + 1], full_params, L.triangles);

    // sigma flap: crease right half, then rows toward the equator
    std::vector<int> prev(L.torus_rows[0].begin() + K, L.torus_rows[0].end());
    std::vector<double> half_params(full_params.begin() + K, full_params.end());
    for (int k = 1; k <= L.Nsigma; ++k) {
        std::vector<int> row;
        for (int i = 0; i <= K; ++i) {
            PatchVertex v{Region::sigma};
            v.i = i;
            v.row = k;
            if (i == 0)
                v.flags |= meridian;
            if (i == K)
                v.flags |= xi_plus;
            if (k == L.Nsigma)
                v.flags |= equator;
            row.push_back(add(v));
        }
        zipper(prev, half_params, row, half_params, L.triangles);
        prev = row;
    }

    // zeta flap: crease left half, rows thinning toward the pole
    prev.assign(L.torus_rows[0].begin(), L.torus_rows[0].begin() + K + 1);
    std::vector<double> prev_params(full_params.begin(), full_params.begin() + K + 1);
    double c_ref = std::cos(a_ref);
    for (int k = 1; k <= L.Nzeta; ++k) {
        std::vector<int> row;
        std::vector<double> params;
        if (k == L.Nzeta) {
            PatchVertex v{Region::zeta};
            v.row = k;
            v.flags = pole | meridian | xi_minus;
            row.push_back(add(v));
            params.push_back(0);
            // a single apex: fan from the previous row
            for (size_t q = 0; q + 1 < prev.size(); ++q)
                L.triangles.push_back({prev[q], prev[q + 1], row[0]});
            break;
        }
        double th2 = a_ref + (pi / 2 - a_ref) * k / L.Nzeta;
        int m = std::max(1, static_cast<int>(std::ceil(K * std::cos(th2) / c_ref - 1e-9)));
        for (int q = 0; q <= m; ++q) {
            PatchVertex v{Region::zeta};
            v.i = q;
            v.row = k;
            v.row_count = m;
            if (q == 0)
                v.flags |= xi_minus;
            if (q == m)
                v.flags |= meridian;
            row.push_back(add(v));
            params.push_back(theta_of(q, m, -wedge));
        }
        zipper(prev, prev_params, row, params, L.triangles);
        prev = row;
        prev_params = params;
    }
    return L;
}

struct Shape {
    double t = 0, s = 0, a = 0;
    double w = 0;     // fillet band width in the chart
    double eps_f = 0; // fillet displacement at the crease
    double eps_l = 0; // flap lift amplitude
};

inline Shape make_shape(double t, int n, double fillet_width)
{
    Shape S;
    S.t = t;
    S.s = std::sqrt(std::max(0.0, 1 - t * t));
    S.a = std::acos(std::clamp(t, 0.0, 1.0));
    S.w = std::min({fillet_width, 0.45 * S.a, 0.45 * (pi / 2 - S.a)});
    S.w = std::max(S.w, 0.0);
    S.eps_f = 0.3 * S.w;
    S.eps_l = 0.2 * S.w;
    (void)n;
    return S;
}

// Cubic Hermite blend: 1 at 0, 0 at 1, flat at both ends.
inline double blend(double x)
{
    if (x >= 1)
        return 0;
    return (1 - x) * (1 - x) * (1 + 2 * x);
}

inline double angle_sin(int i, int count, double wedge)
{
    // odd symmetry is exact: sin(-x) is computed as -sin(x)
    double v = std::sin(wedge * std::abs(i) / count);
    return i < 0 ? -v : v;
}

inline double angle_cos(int i, int count, double wedge) { return std::cos(wedge * std::abs(i) / count); }

inline Vec4 chart_point(double c1, double s1, double th2, double th3)
{
    double c3 = std::cos(th3);
    return Vec4(c3 * std::cos(th2) * c1, c3 * std::cos(th2) * s1, c3 * std::sin(th2), std::sin(th3));
}

inline Vec4 position(const PatchLayout& L, const PatchVertex& v, const Shape& S)
{
    const double wedge = pi / (2.0 * L.n);
    const int K = L.K;
    if (v.flags & pole)
        return Vec4(0, 0, 1, 0);
    double c1, s1, th1;
    switch (v.region) {
    case Region::torus:
    case Region::sigma:
        c1 = angle_cos(v.i, K, wedge);
        s1 = angle_sin(v.i, K, wedge);
        th1 = wedge * v.i / K;
        break;
    default:
        c1 = angle_cos(v.i - v.row_count, v.row_count, wedge);
        s1 = angle_sin(v.i - v.row_count, v.row_count, wedge);
        th1 = wedge * (v.i - v.row_count) / v.row_count;
        break;
    }
    // switch weight: 0 on the meridian, 1 on the Xi edges
    double m = std::sin(L.n * std::abs(th1));
    if (v.flags & meridian)
        m = 0;
    Eigen::Vector2d dir = th1 > 0 ? Eigen::Vector2d(-1, 1) / std::sqrt(2.0) : Eigen::Vector2d(1, 1) / std::sqrt(2.0);

    if (v.region == Region::torus) {
        double psi = pi / 2 * v.row / L.Npsi;
        double cp = v.row == L.Npsi ? 0.0 : std::cos(psi);
        double sp = v.row == L.Npsi ? 1.0 : std::sin(psi);
        if (v.row == 0) {
            cp = 1.0;
            sp = 0.0;
        }
        Vec4 x(S.t * c1, S.t * s1, S.s * cp, S.s * sp);
        double th3 = std::asin(std::clamp(S.s * sp, -1.0, 1.0));
        double ell = th3;
        if (m == 0 || S.w <= 0 || ell >= S.w)
            return x;
        double th2 = std::atan2(S.s * cp, S.t);
        double d = m * S.eps_f * blend(ell / S.w);
        return chart_point(c1, s1, th2 + d * dir[0], th3 + d * dir[1]);
    }

    double th2, u;
    if (v.region == Region::sigma) {
        th2 = S.a * (1.0 - static_cast<double>(v.row) / L.Nsigma);
        if (v.flags & equator)
            th2 = 0;
        u = S.a > 0 ? th2 / S.a : 0;
    }
    else {
        th2 = S.a + (pi / 2 - S.a) * v.row / L.Nzeta;
        u = S.a < pi / 2 ? (pi / 2 - th2) / (pi / 2 - S.a) : 0;
    }
    double th3 = 0;
    if (m > 0 && S.w > 0) {
        double ell = std::abs(th2 - S.a);
        if (ell < S.w) {
            double d = m * S.eps_f * blend(ell / S.w);
            th2 += d * dir[0];
            th3 += d * dir[1];
        }
        th3 += m * S.eps_l * (256.0 / 27.0) * u * u * u * (1 - u);
    }
    if (th3 == 0 && (v.flags & equator))
        return Vec4(c1, s1, 0, 0);
    return chart_point(c1, s1, th2, th3);
}

/// Vertex identification across group copies of the patch, shared by all slices of a family.
struct Replication {
    SymmetryGroup group;
    PatchLayout layout;
    std::vector<int> class_of;          // [g * Vp + v] -> mesh vertex
    std::vector<std::pair<int, int>> representative; // mesh vertex -> (g, v)
    std::vector<Tri> triangles;
    std::shared_ptr<OrbitTable> orbits;
    std::vector<unsigned> flags;        // mesh vertex -> patch flags
};

inline std::shared_ptr<const Replication> make_replication(int n, int refinement, GroupVariant variant)
{
    auto R = std::make_shared<Replication>();
    R->layout = make_layout(n, refinement);
    R->group = standard_group(variant == GroupVariant::Gn ? GroupKind::Gn : GroupKind::Hn, n);
    const auto& L = R->layout;
    const auto& G = R->group;
    const int Vp = static_cast<int>(L.vertices.size());
    const int order = G.order();
    const double h = 1.0 / (2.0 * n);

    auto index_of = [&](const Orthogonal4& g) {
        int k = G.find(g.matrix());
        if (k < 0)
            throw std::logic_error("stabilizer element missing from group");
        return k;
    };
    const int r_plus = index_of(reflections::Xi(h));
    const int r_minus = index_of(reflections::Xi(-h));
    const int r_mer = index_of(reflections::xi(0));
    const int r_eq = index_of(variant == GroupVariant::Gn ? reflections::S1() : reflections::Z());
    const int r_z = variant == GroupVariant::Hn ? index_of(reflections::Z()) : -1;
    const int r_c = variant == GroupVariant::Gn ? index_of(reflections::xi(0) * reflections::S1()) : -1;

    std::vector<std::vector<int>> mult(order, std::vector<int>(order));
    for (int a = 0; a < order; ++a)
        for (int b = 0; b < order; ++b)
            mult[a][b] = G.product(a, b);

    UnionFind uf(order * Vp);
    for (int v = 0; v < Vp; ++v) {
        const auto& pv = L.vertices[v];
        std::vector<int> stab;
        if (pv.flags & xi_plus)
            stab.push_back(r_plus);
        if (pv.flags & xi_minus)
            stab.push_back(r_minus);
        if (pv.flags & meridian)
            stab.push_back(r_mer);
        if (pv.flags & equator)
            stab.push_back(r_eq);
        if ((pv.flags & z_edge) && variant == GroupVariant::Hn)
            stab.push_back(r_z);
        for (int g = 0; g < order; ++g) {
            for (int s : stab)
                uf.unite(g * Vp + v, mult[g][s] * Vp + v);
            if ((pv.flags & z_edge) && variant == GroupVariant::Gn)
                uf.unite(g * Vp + v, mult[g][r_c] * Vp + pv.mirror);
        }
    }

    R->class_of.assign(order * Vp, -1);
    std::vector<int> root_id(order * Vp, -1);
    for (int g = 0; g < order; ++g)
        for (int v = 0; v < Vp; ++v) {
            int r = uf.find(g * Vp + v);
            if (root_id[r] < 0) {
                root_id[r] = static_cast<int>(R->representative.size());
                R->representative.emplace_back(g, v);
                R->flags.push_back(L.vertices[v].flags);
            }
            R->class_of[g * Vp + v] = root_id[r];
        }
    const int V = static_cast<int>(R->representative.size());
    TriMesh combinatorial;
    combinatorial.vertices.resize(V);
    for (int g = 0; g < order; ++g)
        for (const auto& t : L.triangles)
            combinatorial.triangles.push_back(
                {R->class_of[g * Vp + t[0]], R->class_of[g * Vp + t[1]], R->class_of[g * Vp + t[2]]});
    R->triangles = orient_consistently(combinatorial).triangles;
    R->orbits = std::make_shared<OrbitTable>();
    R->orbits->group = G;
    R->orbits->perm.assign(order, std::vector<int>(V));
    for (int h2 = 0; h2 < order; ++h2)
        for (int c = 0; c < V; ++c) {
            auto [g, v] = R->representative[c];
            R->orbits->perm[h2][c] = R->class_of[mult[h2][g] * Vp + v];
        }
    return R;
}

inline int meridian_index(const Vec4& x, int n)
{
    double th = std::atan2(x[1], x[0]);
    long k = std::lround(th * n / pi);
    return static_cast<int>(((k % n) + n) % n);
}

} // namespace sweep

/// Builds the slice for t exactly as given (no clamping); t = 0 and t = 1 give the
/// collapsed endpoint meshes with degenerate triangles.
inline TriMesh build_slice_raw(const SliceSpec& spec, double t, std::shared_ptr<const sweep::Replication> R = nullptr)
{
    spec.validate();
    if (!R)
        R = sweep::make_replication(spec.n, spec.refinement, spec.variant);
    const auto& L = R->layout;
    const auto& G = R->group;
    const int Vp = static_cast<int>(L.vertices.size());
    auto S = sweep::make_shape(t, spec.n, spec.effective_fillet_width());

    std::vector<Vec4> patch(Vp);
    for (int v = 0; v < Vp; ++v)
        patch[v] = sweep::position(L, L.vertices[v], S);

    TriMesh m;
    m.vertices.resize(R->representative.size());
    for (size_t c = 0; c < R->representative.size(); ++c) {
        auto [g, v] = R->representative[c];
        m.vertices[c] = G[g](patch[v]);
    }
    for (int g = 0; g < G.order(); ++g)
        for (int v = 0; v < Vp; ++v) {
            double err = (G[g](patch[v]) - m.vertices[R->class_of[g * Vp + v]]).norm();
            if (err > 1e-9) {
                std::ostringstream os;
                os << "topology mismatch: identified copies of patch vertex " << v << " under element " << g
                   << " differ by " << err;
                throw topology_error(os.str());
            }
        }
    m.triangles = R->triangles;
    m.orbits = R->orbits;
    for (int c = 0; c < m.num_vertices(); ++c) {
        unsigned f = R->flags[c];
        if (f & sweep::equator)
            m.tags.s1.push_back(c);
        if (f & sweep::pole) {
            m.tags.s1perp.push_back(c);
            for (int i = 0; i < spec.n; ++i)
                m.tags.xi[i].push_back(c);
        }
        else if (f & sweep::meridian) {
            m.tags.xi[sweep::meridian_index(m.vertices[c], spec.n)].push_back(c);
        }
    }
    m.meta.n = spec.n;
    m.meta.group = G.spec();
    m.meta.t = t;
    return m;
}

/// Slice Sigma_t, with t clamped to [t_min, 1 - t_min]. Verifies genus 2n.
inline TriMesh build_slice(const SliceSpec& spec, std::shared_ptr<const sweep::Replication> R = nullptr)
{
    double t = std::clamp(spec.t, t_min, 1 - t_min);
    TriMesh m = build_slice_raw(spec, t, std::move(R));
    auto topo = topology_report(m, false);
    if (!topo.genus || *topo.genus != 2 * spec.n || !topo.consistently_oriented) {
        std::ostringstream os;
        os << "topology mismatch: V=" << topo.V << " E=" << topo.E << " F=" << topo.F << " euler=" << topo.euler
           << " components=" << topo.components << " orientable=" << topo.orientable << " expected genus "
           << 2 * spec.n;
        throw topology_error(os.str());
    }
    return m;
}

struct SweepoutFamily {
    SliceSpec spec;
    std::vector<double> t;
    std::vector<TriMesh> slices;
    std::vector<double> areas;
    double width_estimate = 0;
    double interpolation_correction = 0;
    int argmax = 0;

    void update_profile()
    {
        areas.resize(slices.size());
        for (size_t i = 0; i < slices.size(); ++i)
            areas[i] = area(slices[i]);
        argmax = 0;
        for (size_t i = 1; i < areas.size(); ++i)
            if (areas[i] > areas[argmax])
                argmax = static_cast<int>(i);
        width_estimate = areas.empty() ? 0 : areas[argmax];
        interpolation_correction = 0;
        if (argmax > 0 && argmax + 1 < static_cast<int>(areas.size())) {
            // vertex of the parabola through the argmax and its neighbours
            double y0 = areas[argmax - 1], y1 = areas[argmax], y2 = areas[argmax + 1];
            double denom = y0 - 2 * y1 + y2;
            if (denom < 0)
                interpolation_correction = -(y2 - y0) * (y2 - y0) / (8 * denom);
        }
    }
};

inline SweepoutFamily build_family(const SliceSpec& spec, int slices)
{
    if (slices < 3)
        throw std::invalid_argument("build_family: need at least 3 slices");
    spec.validate();
    auto R = sweep::make_replication(spec.n, spec.refinement, spec.variant);
    SweepoutFamily fam;
    fam.spec = spec;
    fam.t.resize(slices);
    fam.slices.resize(slices);
    for (int k = 0; k < slices; ++k)
        fam.t[k] = t_min + (1 - 2 * t_min) * k / (slices - 1);
    parallel_for(slices, [&](int k) {
        SliceSpec s = spec;
        s.t = fam.t[k];
        fam.slices[k] = build_slice(s, R);
    });
    fam.update_profile();
    return fam;
}

} // namespace s3mm
