#include <s3minmax/fixtures.hpp>
#include <s3minmax/mesh_io.hpp>
#include <s3minmax/queries.hpp>
#include <s3minmax/sweepout.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace s3mm;

namespace {

Orthogonal4 random_rotation(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0, 1);
    Mat4 a;
    for (int i = 0; i < 16; ++i)
        a.data()[i] = N(rng);
    Eigen::HouseholderQR<Mat4> qr(a);
    return Orthogonal4(qr.householderQ() * Mat4::Identity());
}

TriMesh slice(int n, double t, int refine = 3)
{
    SliceSpec s;
    s.n = n;
    s.t = t;
    s.refinement = refine;
    return build_slice(s);
}

} // namespace

TEST(Topology, Fixtures)
{
    auto s = topology_report(great_sphere_mesh(3));
    ASSERT_TRUE(s.genus);
    EXPECT_EQ(*s.genus, 0);
    EXPECT_TRUE(s.connected);
    EXPECT_TRUE(s.orientable);
    EXPECT_EQ(s.euler, s.V - s.E + s.F);

    auto c = topology_report(clifford_torus_mesh(0.1));
    EXPECT_EQ(*c.genus, 1);
    EXPECT_EQ(*c.j_count, 0);

    auto l = topology_report(lawson_type_mesh(2, 3, 4));
    EXPECT_EQ(*l.genus, 6);
}

TEST(Topology, SweepoutSliceGenus)
{
    auto r = topology_report(slice(3, 0.5));
    EXPECT_EQ(*r.genus, 6);
    EXPECT_EQ(*r.j_count, 2);
}

TEST(Topology, OpenMeshIsReported)
{
    TriMesh m = great_sphere_mesh(2);
    m.triangles.pop_back();
    try {
        topology_report(m);
        FAIL() << "expected an error";
    }
    catch (const topology_error& e) {
        EXPECT_NE(std::string(e.what()).find("boundary"), std::string::npos);
    }
}

TEST(Topology, InvariantUnderRefineAndRotation)
{
    TriMesh m = lawson_type_mesh(1, 2, 3);
    int g = *topology_report(m, false).genus;
    EXPECT_EQ(*topology_report(refine(m, 1), false).genus, g);
    EXPECT_EQ(*topology_report(transform(m, random_rotation(4)), false).genus, g);
}

TEST(Area, AnalyticValues)
{
    TriMesh s = great_sphere_mesh();
    ASSERT_GE(s.num_triangles(), 10000);
    EXPECT_NEAR(area(s) / (4 * pi), 1, 0.005);
    EXPECT_NEAR(area(clifford_torus_mesh()) / 19.739208802178717238, 1, 0.005);
    EXPECT_NEAR(area(cmc_torus_mesh(0.3)) / 11.298003048811625886, 1, 0.005);
    EXPECT_NEAR(area(cmc_torus_mesh(0.9)) / 15.487418950946203465, 1, 0.005);
}

TEST(Area, IsometryInvariant)
{
    TriMesh m = cmc_torus_mesh(0.4, 0.1);
    double a = area(m);
    for (std::uint64_t seed : {1, 2, 3})
        EXPECT_NEAR(area(transform(m, random_rotation(seed))), a, 1e-12);
}

TEST(Area, MonotoneUnderSphereRefinement)
{
    double prev = 0;
    for (int level = 1; level <= 5; ++level) {
        double a = area(great_sphere_mesh(level));
        EXPECT_GT(a, prev);
        EXPECT_LT(a, 4 * pi);
        prev = a;
    }
}

TEST(Refine, QuadruplesFacesAndKeepsTags)
{
    TriMesh m = slice(2, 0.4, 2);
    TriMesh r = refine(m, 1);
    EXPECT_EQ(r.num_triangles(), 4 * m.num_triangles());
    EXPECT_GT(r.tags.s1.size(), m.tags.s1.size());
    for (int v : r.tags.s1)
        EXPECT_LT(objects::S1().distance(r.vertices[v]), 1e-13);
    for (const auto& [i, vs] : r.tags.xi)
        for (int v : vs)
            EXPECT_LT(objects::xi(double(i) / 2).distance(r.vertices[v]), 1e-13);
    for (const auto& x : r.vertices)
        EXPECT_NEAR(x.norm(), 1, 1e-14);
}

TEST(AngleDefect, GaussBonnetOnFixtures)
{
    std::vector<TriMesh> ms = {great_sphere_mesh(3), clifford_torus_mesh(0.1), cmc_torus_mesh(0.3, 0.1),
                               lawson_type_mesh(2, 2, 4), slice(3, 0.6)};
    for (const auto& m : ms) {
        auto r = topology_report(m, false);
        EXPECT_NEAR(angle_defect_sum(m), 2 * pi * r.euler, 1e-8);
    }
}

TEST(CircleCrossings, Examples)
{
    for (int n : {2, 3, 4})
        EXPECT_EQ(circle_intersection_count(slice(n, 0.5), objects::S1perp()), 2) << n;
    EXPECT_EQ(circle_intersection_count(clifford_torus_mesh(0.1), objects::S1perp()), 0);
    // the Lawson-type surface of genus m*2 meets S1perp at 2(2+1) points
    EXPECT_EQ(circle_intersection_count(lawson_type_mesh(2, 2, 4), objects::S1perp()), 6);
    EXPECT_EQ(circle_intersection_count(lawson_type_mesh(1, 1, 4), objects::S1perp()), 4);
}

TEST(CircleCrossings, CircleInsideSurface)
{
    EXPECT_THROW(circle_intersection_count(great_sphere_mesh(2), objects::S1()), numerical_error);
    EXPECT_THROW(circle_intersection_count(great_sphere_mesh(2), objects::S2()), std::invalid_argument);
}

TEST(Cut, SphereAlongZ)
{
    auto parts = cut_by_spheres(great_sphere_mesh(3), {objects::Z()});
    ASSERT_EQ(parts.size(), 2u);
    for (const auto& p : parts) {
        EXPECT_EQ(p.genus, 0);
        EXPECT_EQ(p.boundary_loops, 1);
    }
}

TEST(Cut, SliceAlongMirrorSpheres)
{
    for (int n : {2, 3, 4}) {
        TriMesh m = slice(n, 0.55);
        std::vector<GreatSubsphere> spheres;
        for (int i = 0; i < n; ++i)
            spheres.push_back(objects::Xi((2.0 * i + 1) / (2.0 * n)));
        auto parts = cut_by_spheres(m, spheres);
        ASSERT_EQ(static_cast<int>(parts.size()), 2 * n);
        int gamma = parts[0].genus, beta = parts[0].boundary_loops;
        for (const auto& p : parts) {
            EXPECT_EQ(p.genus, gamma);
            EXPECT_EQ(p.boundary_loops, beta);
        }
        auto r = topology_report(m);
        EXPECT_EQ(n * (2 * gamma + beta - 2) + (n - 1) * *r.j_count / 2 + 1, *r.genus);
    }
}

TEST(Io, RoundTrip)
{
    TriMesh m = slice(2, 0.3, 2);
    std::stringstream ss;
    write_s3m(ss, m);
    TriMesh r = parse_s3m(ss.str());
    ASSERT_EQ(r.num_vertices(), m.num_vertices());
    ASSERT_EQ(r.num_triangles(), m.num_triangles());
    for (int v = 0; v < m.num_vertices(); ++v)
        EXPECT_EQ(r.vertices[v], m.vertices[v]); // 17 digits round-trip exactly
    EXPECT_EQ(r.triangles, m.triangles);
    EXPECT_EQ(r.tags.s1, m.tags.s1);
    EXPECT_EQ(r.tags.xi, m.tags.xi);
    EXPECT_EQ(r.meta.group, "Gn:2");
    EXPECT_EQ(r.meta.n, 2);
}

TEST(Io, RejectsBadInput)
{
    EXPECT_THROW(parse_s3m(R"({"version":2,"vertices":[],"triangles":[]})"), std::invalid_argument);
    EXPECT_THROW(parse_s3m(R"({"version":1,"vertices":[[1,1,0,0]],"triangles":[]})"), std::invalid_argument);
    EXPECT_THROW(parse_s3m(R"({"version":1,"vertices":[[1,0,0,0]],"triangles":[[0,0,1]]})"), std::invalid_argument);
}

TEST(Io, ObjCountsAndTorusOfRevolution)
{
    TriMesh m = clifford_torus_mesh(0.1);
    std::stringstream ss;
    write_obj(ss, m, Vec4(0, 0, 0, 1));
    int v = 0, f = 0;
    std::string line;
    double worst = 0;
    while (std::getline(ss, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "v") {
            double x, y, z;
            ls >> x >> y >> z;
            // tube of radius 1 around the circle of radius sqrt(2) in the x y plane
            double rho = std::hypot(x, y);
            worst = std::max(worst, std::abs(std::hypot(rho - std::sqrt(2.0), z) - 1));
            ++v;
        }
        else if (tag == "f")
            ++f;
    }
    EXPECT_EQ(v, m.num_vertices());
    EXPECT_EQ(f, m.num_triangles());
    EXPECT_LT(worst, 1e-12);
}

TEST(Io, PlyCarriesExactCoordinates)
{
    TriMesh m = great_sphere_mesh(1);
    std::stringstream ss;
    write_ply(ss, m, Vec4(0, 0, 0, 1) * -1);
    std::string text = ss.str();
    EXPECT_NE(text.find("element vertex " + std::to_string(m.num_vertices())), std::string::npos);
    EXPECT_NE(text.find("property double x4"), std::string::npos);
    EXPECT_NE(text.find("element face " + std::to_string(m.num_triangles())), std::string::npos);
}

TEST(SelfIntersection, EmbeddedFixtures)
{
    EXPECT_TRUE(self_intersections(lawson_type_mesh(2, 1, 3)).empty());
    EXPECT_TRUE(self_intersections(slice(2, 0.5, 2)).empty());
}
