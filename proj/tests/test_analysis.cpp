#include <s3minmax/analysis.hpp>
#include <s3minmax/fixtures.hpp>

#include <gtest/gtest.h>

using namespace s3mm;

TEST(Curvature, CliffordTorusIsPlusMinusOne)
{
    TriMesh m = clifford_torus_mesh(0.08);
    auto f = curvature_field(m);
    for (int v = 0; v < f.size(); ++v) {
        EXPECT_NEAR(f.k1[v], 1, 0.02);
        EXPECT_NEAR(f.k2[v], -1, 0.02);
        EXPECT_NEAR(f.asq[v], 2, 0.04);
        EXPECT_NEAR(f.normal[v].dot(m.vertices[v]), 0, 1e-12);
    }
}

TEST(Curvature, CmcTorusConstant)
{
    for (double t : {0.3, 0.5}) {
        CmcTorus C(t);
        auto k = C.principal_curvatures();
        double hi = std::max(k[0], k[1]), lo = std::min(k[0], k[1]);
        double tol = 0.04 * std::max(std::abs(hi), std::abs(lo));
        auto f = curvature_field(cmc_torus_mesh(t, 0.05));
        for (int v = 0; v < f.size(); ++v) {
            // the fit picks its own normal orientation, so compare the pair up to sign
            bool same = std::abs(f.k1[v] - hi) < tol && std::abs(f.k2[v] - lo) < tol;
            bool flip = std::abs(f.k1[v] + lo) < tol && std::abs(f.k2[v] + hi) < tol;
            EXPECT_TRUE(same || flip) << t << " " << f.k1[v] << " " << f.k2[v];
        }
    }
    // frozen from the closed form s/t, -t/s
    EXPECT_NEAR(CmcTorus(0.5).principal_curvatures()[0], 1.7320508075688772, 1e-12);
    EXPECT_NEAR(CmcTorus(0.3).principal_curvatures()[1], -0.31448545101657543, 1e-12);
}

TEST(Curvature, GreatSphereIsTotallyGeodesic)
{
    auto f = curvature_field(great_sphere_mesh(4));
    EXPECT_LT(f.max_split(), 1e-3);
    for (int v = 0; v < f.size(); ++v)
        EXPECT_LT(std::abs(f.k1[v]) + std::abs(f.k2[v]), 2e-3);
}

TEST(Umbilics, SphereIsEntirelyUmbilic)
{
    TriMesh m = great_sphere_mesh(3);
    EXPECT_THROW(detect_umbilics(curvature_field(m), m), numerical_error);
}

TEST(Umbilics, CliffordTorusHasNone)
{
    TriMesh m = clifford_torus_mesh(0.1);
    auto r = detect_umbilics(curvature_field(m), m);
    EXPECT_TRUE(r.locations.empty());
    EXPECT_EQ(r.total_with_multiplicity, 0);
    auto sweep = umbilic_sensitivity(curvature_field(m), m);
    ASSERT_EQ(sweep.reports.size(), 4u);
    for (const auto& rep : sweep.reports)
        EXPECT_EQ(rep.total_with_multiplicity, 0);
}

TEST(Umbilics, FieldSizeChecked)
{
    TriMesh m = clifford_torus_mesh(0.2);
    auto f = curvature_field(m);
    f.k1.pop_back();
    EXPECT_THROW(detect_umbilics(f, m), std::invalid_argument);
}

namespace {

void expect_cluster(const std::vector<double>& ev, int from, int count, double value, double tol)
{
    for (int i = from; i < from + count; ++i)
        EXPECT_NEAR(ev[i], value, tol) << "eigenvalue " << i;
}

} // namespace

TEST(Spectrum, GreatSphere)
{
    // l(l+1) - 2 with multiplicity 2l+1
    for (int level : {3, 4}) {
        TriMesh m = great_sphere_mesh(level);
        auto f = curvature_field(m);
        auto s = jacobi_spectrum(m, f, 12);
        ASSERT_GE(s.eigenvalues.size(), 9u);
        EXPECT_EQ(s.negative_count, 1) << level;
        EXPECT_EQ(s.killing_modes, 3) << level;
        EXPECT_FALSE(s.truncated);
        expect_cluster(s.eigenvalues, 0, 1, -2, 0.05);
        expect_cluster(s.eigenvalues, 1, 3, 0, 1e-6);
        expect_cluster(s.eigenvalues, 4, 5, 4, 0.2);
    }
}

TEST(Spectrum, CliffordTorus)
{
    // 2(a^2 + b^2) - 4: -4 once, -2 four times, 0 four times (Killing), 4 four times
    for (double h : {0.08, 0.05}) {
        TriMesh m = clifford_torus_mesh(h);
        auto f = curvature_field(m);
        auto s = jacobi_spectrum(m, f, 16);
        EXPECT_EQ(s.negative_count, 5) << h;
        EXPECT_EQ(s.killing_modes, 4) << h;
        expect_cluster(s.eigenvalues, 0, 1, -4, 0.05);
        expect_cluster(s.eigenvalues, 1, 4, -2, 0.05);
        expect_cluster(s.eigenvalues, 5, 4, 0, 1e-6);
        expect_cluster(s.eigenvalues, 9, 4, 4, 0.1);
    }
}

TEST(Spectrum, CotangentAgreesOnIndex)
{
    TriMesh m = clifford_torus_mesh(0.08);
    auto f = curvature_field(m);
    auto s = jacobi_spectrum(m, f, 16, 0, JacobiDiscretization::cotangent);
    EXPECT_EQ(s.negative_count, 5);
    EXPECT_GE(s.raw_negative_count, s.negative_count);
    TriMesh sph = great_sphere_mesh(3);
    EXPECT_EQ(jacobi_spectrum(sph, curvature_field(sph), 10, 0, JacobiDiscretization::cotangent).negative_count, 1);
}

TEST(Spectrum, SystemIsSymmetric)
{
    TriMesh m = cmc_torus_mesh(0.4, 0.15);
    for (auto d : {JacobiDiscretization::cotangent, JacobiDiscretization::area_hessian}) {
        auto js = jacobi_system(m, curvature_field(m), d);
        SparseMatrix D = SparseMatrix(js.L.transpose()) - js.L;
        EXPECT_LT(D.norm(), 1e-10 * js.L.norm());
        EXPECT_GT(js.mass.minCoeff(), 0);
        EXPECT_NEAR(js.mass.sum(), area(m), 1e-10);
    }
}

TEST(Spectrum, Deterministic)
{
    TriMesh m = great_sphere_mesh(3);
    auto f = curvature_field(m);
    auto a = jacobi_spectrum(m, f, 8), b = jacobi_spectrum(m, f, 8);
    EXPECT_EQ(a.eigenvalues, b.eigenvalues);
}

TEST(GenusArithmetic, CaseTable)
{
    for (int n = 2; n <= 10; ++n)
        for (int gp : {0, 1})
            for (int k : {0, 1, 2}) {
                auto c = genus_arithmetic(n, gp, k);
                EXPECT_EQ(c.genus, 2 * n * gp + 2 * k * (n - 1));
                EXPECT_EQ(c.j, 2 + 4 * k);
                std::string want = "outside lemma hypotheses";
                if (k == 0)
                    want = "a";
                else if (k == 1 && gp == 0)
                    want = "b";
                else if (k == 2 && gp == 0 && n == 2)
                    want = "c";
                EXPECT_EQ(c.label, want) << n << " " << gp << " " << k;
            }
    EXPECT_EQ(genus_arithmetic(3, 1, 0).genus, 6);
    EXPECT_EQ(genus_arithmetic(3, 0, 1).genus, 4);
    EXPECT_EQ(genus_arithmetic(2, 0, 2).genus, 4);
    EXPECT_EQ(genus_arithmetic(2, 0, 2).j, 10);
    EXPECT_EQ(genus_case(3, 6, 2), "a");
    EXPECT_EQ(genus_case(3, 4, 6), "b");
    EXPECT_EQ(genus_case(2, 4, 10), "c");
    EXPECT_EQ(genus_case(3, 6, 6), "");
    EXPECT_THROW(genus_arithmetic(1, 0, 0), std::invalid_argument);
}

TEST(GaussBonnet, CliffordTorus)
{
    TriMesh m = clifford_torus_mesh(0.08);
    auto r = gauss_bonnet_report(m, curvature_field(m), 2, 0);
    EXPECT_EQ(r.genus, 1);
    EXPECT_EQ(r.expected, 0);
    // the quadric fit is good to about 2% pointwise
    EXPECT_NEAR(r.curvature_integral, 0, 0.03 * area(m));
    EXPECT_NEAR(r.second_variation_integral, 0, 1e-8);
    EXPECT_NEAR(r.angle_defect, 0, 1e-8);
}

TEST(GaussBonnet, GreatSphere)
{
    TriMesh m = great_sphere_mesh(4);
    auto r = gauss_bonnet_report(m, curvature_field(m), 2, 0);
    EXPECT_NEAR(r.curvature_integral, 4 * pi, 0.01 * 4 * pi);
    EXPECT_NEAR(r.second_variation_integral, 4 * pi, 0.01 * 4 * pi);
    EXPECT_NEAR(r.angle_defect, 4 * pi, 1e-8);
}
