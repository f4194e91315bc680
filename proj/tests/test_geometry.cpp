#include <s3minmax/geometry.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace s3mm;

namespace {

Vec4 random_unit(std::mt19937_64& rng)
{
    std::normal_distribution<double> N(0, 1);
    Vec4 v(N(rng), N(rng), N(rng), N(rng));
    return v.normalized();
}

} // namespace

TEST(Chart, AxisPoints)
{
    EXPECT_LT((spherical_to_cartesian({0, 0, 0}).vec() - Vec4(1, 0, 0, 0)).norm(), 1e-15);
    EXPECT_LT((spherical_to_cartesian({pi / 2, 0, 0}).vec() - Vec4(0, 1, 0, 0)).norm(), 1e-15);
    EXPECT_LT((spherical_to_cartesian({0, pi / 2, 0}).vec() - Vec4(0, 0, 1, 0)).norm(), 1e-15);
    EXPECT_LT((spherical_to_cartesian({0, 0, pi / 2}).vec() - Vec4(0, 0, 0, 1)).norm(), 1e-15);
}

TEST(Chart, InverseOfAxisPoints)
{
    auto r = cartesian_to_spherical(Point4(1, 0, 0, 0));
    EXPECT_FALSE(r.degenerate);
    EXPECT_NEAR(r.coords.theta1, 0, 1e-15);
    EXPECT_NEAR(r.coords.theta2, 0, 1e-15);
    EXPECT_NEAR(r.coords.theta3, 0, 1e-15);

    auto p = cartesian_to_spherical(Point4(0, 0, 0, 1));
    EXPECT_TRUE(p.degenerate);
    EXPECT_NEAR(p.coords.theta3, pi / 2, 1e-15);
    EXPECT_EQ(p.coords.theta1, 0);
    EXPECT_EQ(p.coords.theta2, 0);
}

TEST(Chart, RoundTripOnRandomPoints)
{
    std::mt19937_64 rng(7);
    for (int i = 0; i < 2000; ++i) {
        Point4 p(random_unit(rng));
        auto c = cartesian_to_spherical(p);
        ASSERT_FALSE(c.degenerate);
        EXPECT_GE(c.coords.theta1, 0);
        EXPECT_LT(c.coords.theta1, 2 * pi);
        EXPECT_LE(std::abs(c.coords.theta2), pi / 2);
        EXPECT_LE(std::abs(c.coords.theta3), pi / 2);
        Point4 q = spherical_to_cartesian(c.coords);
        EXPECT_LT((q.vec() - p.vec()).norm(), 1e-10);
        EXPECT_NEAR(q.vec().norm(), 1, 1e-12);
    }
}

TEST(Chart, CliffordLevelSet)
{
    // cos(theta2) cos(theta3) = 1/sqrt(2) puts x1^2 + x2^2 = 1/2
    auto T = CmcTorus::clifford();
    for (double th1 : {0.0, 0.7, 2.0, 5.5})
        for (double th2 : {0.0, 0.3, -0.6}) {
            double th3 = std::acos(1 / (std::sqrt(2.0) * std::cos(th2)));
            for (double s : {1.0, -1.0})
                EXPECT_TRUE(T.contains(spherical_to_cartesian({th1, th2, s * th3}).vec(), 1e-12));
        }
}

TEST(Point4, RejectsNonUnit)
{
    EXPECT_THROW(Point4(1, 1, 0, 0), std::invalid_argument);
    EXPECT_THROW(Point4::normalized(Vec4::Zero()), std::invalid_argument);
    EXPECT_NO_THROW(Point4::normalized(Vec4(1, 1, 0, 0)));
}

TEST(StandardObjects, Bases)
{
    auto s1 = objects::S1();
    EXPECT_EQ(s1.dim(), 1);
    EXPECT_TRUE(s1.contains(Vec4(0.6, 0.8, 0, 0)));
    EXPECT_FALSE(s1.contains(Vec4(0, 0.8, 0.6, 0)));

    auto perp = objects::S1perp();
    EXPECT_EQ(perp.dim(), 1);
    EXPECT_TRUE(perp.contains(Vec4(0, 0, 0.6, -0.8)));
    EXPECT_EQ(objects::S2().dim(), 2);
    EXPECT_TRUE(objects::Z().contains(Vec4(0, 0.6, 0, 0.8)));
    EXPECT_FALSE(objects::Z().contains(Vec4(0, 0.6, 0.8, 0)));
}

TEST(StandardObjects, MeridianMeetsPerpCircleAtPoles)
{
    auto pts = span_intersection(objects::xi(0), objects::S1perp());
    ASSERT_EQ(pts.size(), 1u); // one direction, i.e. the antipodal pair
    EXPECT_NEAR(std::abs(pts[0][2]), 1, 1e-14);
    EXPECT_NEAR(pts[0][0], 0, 1e-14);
    EXPECT_NEAR(pts[0][1], 0, 1e-14);
    EXPECT_NEAR(pts[0][3], 0, 1e-14);
}

TEST(StandardObjects, MeridianIsBigSphereCapEquator)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(0, 2 * pi);
    for (double t : {0.0, 0.25, 1.0 / 3, 0.9}) {
        auto big = objects::Xi(t), small = objects::xi(t), eq = objects::S2();
        for (int i = 0; i < 200; ++i) {
            double a = U(rng);
            Vec4 p = std::cos(a) * small.basis()[0] + std::sin(a) * small.basis()[1];
            EXPECT_TRUE(big.contains(p));
            EXPECT_TRUE(eq.contains(p));
            // and a point of Xi off xi leaves S2
            Vec4 q = std::cos(a) * big.basis()[0] + std::sin(a) * Vec4::Unit(3);
            if (std::abs(std::sin(a)) > 1e-3)
                EXPECT_FALSE(eq.contains(q));
        }
    }
}

TEST(CmcTorus, DistanceToEquator)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0, 2 * pi);
    auto s1 = objects::S1();
    for (double t : {0.1, 0.3, 1 / std::sqrt(2.0), 0.95}) {
        CmcTorus C(t);
        for (int i = 0; i < 100; ++i) {
            Vec4 p = C.point(U(rng), U(rng)).vec();
            EXPECT_TRUE(C.contains(p));
            EXPECT_NEAR(p[0] * p[0] + p[1] * p[1], t * t, 1e-12);
            EXPECT_NEAR(s1.distance(p), std::acos(t), 1e-10);
        }
    }
}

TEST(CmcTorus, AreaFormula)
{
    // 4 pi^2 t sqrt(1 - t^2), evaluated independently at 20 digits
    EXPECT_NEAR(CmcTorus(0.3).area(), 11.298003048811625886, 1e-12);
    EXPECT_NEAR(CmcTorus::clifford().area(), 19.739208802178717238, 1e-12);
    EXPECT_NEAR(CmcTorus(0.9).area(), 15.487418950946203465, 1e-12);
}

TEST(Stereographic, Formula)
{
    Vec4 pole(0, 0, 0, 1);
    auto o = stereographic_project(-pole, pole);
    EXPECT_NEAR(std::hypot(o[0], o[1], o[2]), 0, 1e-15);
    EXPECT_THROW(stereographic_project(pole, pole), numerical_error);

    // x = (cos a, 0, 0, sin a) lands at cos a / (1 - sin a) on the first axis
    double a = 0.3;
    auto y = stereographic_project(Vec4(std::cos(a), 0, 0, std::sin(a)), pole);
    EXPECT_NEAR(y[0], 1.3560878511477088, 1e-14);
    EXPECT_NEAR(y[1], 0, 1e-15);
    EXPECT_NEAR(y[2], 0, 1e-15);
}

TEST(Stereographic, EquatorOfPoleGoesToUnitSphere)
{
    std::mt19937_64 rng(5);
    for (int i = 0; i < 50; ++i) {
        Vec4 pole = random_unit(rng);
        Vec4 p = random_unit(rng);
        p = (p - p.dot(pole) * pole).normalized();
        auto y = stereographic_project(p, pole);
        EXPECT_NEAR(std::hypot(y[0], y[1], y[2]), 1, 1e-12);
    }
}
