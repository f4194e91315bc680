#include <s3minmax/fixtures.hpp>
#include <s3minmax/flow.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace s3mm;

namespace {

double chordal_area(const Positions& X, const std::vector<Tri>& T)
{
    double a = 0;
    for (const auto& t : T)
        a += triangle_area(X[t[0]], X[t[1]], X[t[2]]);
    return a;
}

// sphere mesh with every vertex pushed off S^3 at random, so the check sees generic positions
Positions jitter(const TriMesh& m, std::uint64_t seed, double eps)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0, eps);
    Positions X = m.vertices;
    for (auto& x : X)
        x += Vec4(N(rng), N(rng), N(rng), N(rng));
    return X;
}

// x4 += eps * x3 * Im((x1 + i x2)^3) is odd under the reflection through S1 and under
// xi_0, and even under the mirror Xi_{1/6}, so the bumped sphere is G_3-invariant
TriMesh bumped_sphere(int level, double eps)
{
    TriMesh m = great_sphere_mesh(level);
    for (auto& x : m.vertices) {
        double im = 3 * x[0] * x[0] * x[1] - x[1] * x[1] * x[1];
        x[3] += eps * x[2] * im;
        x.normalize();
    }
    return m;
}

} // namespace

TEST(Gradient, MatchesFiniteDifferences)
{
    std::vector<TriMesh> base = {great_sphere_mesh(1), clifford_torus_mesh(0.5), cmc_torus_mesh(0.4, 6, 8),
                                 lawson_type_mesh(1, 1, 3), great_sphere_mesh(2)};
    for (size_t i = 0; i < base.size(); ++i) {
        Positions X = jitter(base[i], 100 + i, 0.05);
        Positions g = area_gradient_ambient(X, base[i].triangles);
        double worst = 0, scale = 0;
        const double h = 1e-6;
        for (size_t v = 0; v < X.size(); ++v)
            for (int k = 0; k < 4; ++k) {
                Positions P = X, M = X;
                P[v][k] += h;
                M[v][k] -= h;
                double fd = (chordal_area(P, base[i].triangles) - chordal_area(M, base[i].triangles)) / (2 * h);
                worst = std::max(worst, std::abs(fd - g[v][k]));
                scale = std::max(scale, std::abs(g[v][k]));
            }
        EXPECT_LT(worst / scale, 1e-6) << i;
    }
}

TEST(Gradient, TangentToSphere)
{
    TriMesh m = lawson_type_mesh(2, 1, 3);
    Positions g = area_gradient(m);
    for (size_t v = 0; v < g.size(); ++v)
        EXPECT_NEAR(g[v].dot(m.vertices[v]), 0, 1e-14);
}

TEST(Gradient, VanishesOnCliffordTorus)
{
    // the uniform grid on the Clifford torus is critical for the discrete area by symmetry
    EXPECT_LT(field_norm(area_gradient(clifford_torus_mesh(0.1))), 1e-10);
}

TEST(Symmetrize, FixesEquivariantMeshAndIsIdempotent)
{
    SliceSpec s;
    s.n = 3;
    s.t = 0.5;
    s.refinement = 2;
    TriMesh m = build_slice(s);
    TriMesh a = symmetrize(m);
    for (int v = 0; v < m.num_vertices(); ++v)
        EXPECT_LT((a.vertices[v] - m.vertices[v]).norm(), 1e-12);

    std::mt19937_64 rng(9);
    std::normal_distribution<double> N(0, 1e-3);
    TriMesh noisy = m;
    for (auto& x : noisy.vertices)
        x = (x + Vec4(N(rng), N(rng), N(rng), N(rng))).normalized();
    auto G = standard_group(GroupKind::Gn, 3);
    EXPECT_GT(equivariance_residual(noisy, G), 1e-4);
    TriMesh b = symmetrize(noisy, G);
    EXPECT_LT(equivariance_residual(b, G), 1e-12);
    TriMesh c = symmetrize(b);
    for (int v = 0; v < m.num_vertices(); ++v)
        EXPECT_LT((c.vertices[v] - b.vertices[v]).norm(), 1e-13);
    for (int v : b.tags.s1)
        EXPECT_LT(objects::S1().distance(b.vertices[v]), 1e-13);
    for (const auto& [i, vs] : b.tags.xi)
        for (int v : vs)
            EXPECT_LT(objects::xi(double(i) / 3).distance(b.vertices[v]), 1e-13);

    EXPECT_THROW(symmetrize(m, standard_group(GroupKind::Gn, 4)), std::invalid_argument);
    EXPECT_THROW(symmetrize(great_sphere_mesh(1)), std::invalid_argument);
}

TEST(Descend, ConfigValidation)
{
    FlowConfig c;
    c.backtracking = 1;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = FlowConfig{};
    c.grad_tol = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Descend, PerturbedSphereReturns)
{
    // the icosphere is only symmetric under the coordinate reflections; the one through S1
    // already forbids the unstable direction (the constant normal shift)
    auto G = generate_group({reflections::S1(), reflections::xi(0)});
    TriMesh ref = great_sphere_mesh(3);
    TriMesh m = bumped_sphere(3, 0.4);
    double a0 = area(m);
    ASSERT_GT(a0, area(ref) + 0.01);
    FlowConfig cfg;
    cfg.max_steps = 400;
    cfg.grad_tol = 1e-7;
    // tangential sliding lowers the area of a coarse inscribed polyhedron without bound
    cfg.motion = Motion::normal;
    auto [out, rep] = descend(m, G, cfg);
    EXPECT_TRUE(rep.converged);
    EXPECT_NEAR(rep.final_area, area(ref), 1e-3 * area(ref));
    double worst = 0;
    for (const auto& x : out.vertices)
        worst = std::max(worst, std::abs(x[3]));
    EXPECT_LT(worst, 0.02);
    EXPECT_LT(equivariance_residual(out, G), 1e-9);
}

TEST(Descend, AreaMonotoneAndStaysOnSphere)
{
    SliceSpec s;
    s.n = 3;
    s.t = 0.6;
    s.refinement = 3;
    TriMesh m = build_slice(s);
    FlowConfig cfg;
    cfg.max_steps = 40;
    int observed = 0;
    auto [out, rep] = descend(m, cfg, [&](int, const Positions& X, double, double) {
        for (const auto& x : X)
            EXPECT_NEAR(x.norm(), 1, 1e-12);
        ++observed;
        return true;
    });
    EXPECT_GT(observed, 0);
    ASSERT_GE(rep.area_history.size(), 2u);
    for (size_t k = 1; k < rep.area_history.size(); ++k)
        EXPECT_LE(rep.area_history[k], rep.area_history[k - 1] + 1e-12);
    EXPECT_LT(rep.final_area, area(m));
    EXPECT_EQ(*topology_report(out, false).genus, 6);
    EXPECT_LT(equivariance_residual(out, standard_group(GroupKind::Gn, 3)), 1e-9);
    for (int v : out.tags.s1)
        EXPECT_LT(objects::S1().distance(out.vertices[v]), 1e-12);
}

TEST(Descend, ObserverCanStop)
{
    FlowConfig cfg;
    cfg.max_steps = 100;
    auto [out, rep] = descend(bumped_sphere(2, 0.2), cfg, [](int step, const Positions&, double, double) {
        return step < 4;
    });
    EXPECT_LE(rep.steps_taken, 5);
    EXPECT_FALSE(rep.converged);
}

TEST(Descend, CliffordTorusStaysPut)
{
    TriMesh m = clifford_torus_mesh(0.1);
    FlowConfig cfg;
    cfg.max_steps = 20;
    auto [out, rep] = descend(m, cfg);
    EXPECT_NEAR(rep.final_area, area(m), 1e-10);
    EXPECT_TRUE(rep.converged);
}

TEST(Tighten, WidthNonIncreasingGenusKept)
{
    SliceSpec s;
    s.n = 2;
    s.refinement = 2;
    auto fam = build_family(s, 7);
    FlowConfig cfg;
    cfg.max_steps = 10;
    auto t1 = tighten(fam, cfg, 1);
    auto t2 = tighten(t1, cfg, 1);
    EXPECT_LE(t1.width_estimate, fam.width_estimate + 1e-12);
    EXPECT_LE(t2.width_estimate, t1.width_estimate + 1e-12);
    EXPECT_GT(t2.width_estimate, 4 * pi);
    for (const auto& m : t2.slices) {
        EXPECT_EQ(*topology_report(m, false).genus, 4);
        EXPECT_EQ(m.triangles, fam.slices[0].triangles);
    }
}
