#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace s3mm {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

inline constexpr double pi = std::numbers::pi;
inline constexpr double unit_tol = 1e-12;

class numerical_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class topology_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unit vector of R^4. Construction checks the norm; normalizing is always explicit.
class Point4 {
public:
    Point4() : v_(1, 0, 0, 0) {}

    explicit Point4(const Vec4& v, double tol = unit_tol) : v_(v)
    {
        if (std::abs(v.norm() - 1.0) > tol)
            throw std::invalid_argument("Point4: vector is not unit norm");
    }

    Point4(double x1, double x2, double x3, double x4) : Point4(Vec4(x1, x2, x3, x4)) {}

    static Point4 normalized(const Vec4& v)
    {
        double n = v.norm();
        if (n == 0.0)
            throw std::invalid_argument("Point4: cannot normalize the zero vector");
        return Point4(Vec4(v / n));
    }

    const Vec4& vec() const { return v_; }
    double operator[](int i) const { return v_[i]; }
    double x1() const { return v_[0]; }
    double x2() const { return v_[1]; }
    double x3() const { return v_[2]; }
    double x4() const { return v_[3]; }

private:
    Vec4 v_;
};

/// Spherical distance between two unit vectors.
inline double sphere_distance(const Vec4& a, const Vec4& b)
{
    // atan2 form stays accurate for nearly equal or antipodal points
    return std::atan2((a - (a.dot(b)) * b).norm(), a.dot(b));
}

struct SphericalCoords {
    double theta1 = 0;
    double theta2 = 0;
    double theta3 = 0;
};

struct ChartResult {
    SphericalCoords coords;
    bool degenerate = false;
};

inline double reduce_angle(double a)
{
    double r = std::fmod(a, 2 * pi);
    if (r < 0)
        r += 2 * pi;
    if (r >= 2 * pi)
        r = 0;
    return r;
}

inline Point4 spherical_to_cartesian(const SphericalCoords& c)
{
    double c1 = std::cos(c.theta1), s1 = std::sin(c.theta1);
    double c2 = std::cos(c.theta2), s2 = std::sin(c.theta2);
    double c3 = std::cos(c.theta3), s3 = std::sin(c.theta3);
    Vec4 v(c3 * c2 * c1, c3 * c2 * s1, c3 * s2, s3);
    return Point4(v, 1e-14);
}

/// Inverse chart. At theta3 = +-pi/2 the other angles are set to 0 and the result is
/// flagged degenerate; the same happens for theta1 on the circle x1 = x2 = 0.
inline ChartResult cartesian_to_spherical(const Point4& p)
{
    const Vec4& x = p.vec();
    ChartResult r;
    double rho12 = std::hypot(x[0], x[1]);
    double rho123 = std::hypot(rho12, x[2]);
    r.coords.theta3 = std::atan2(x[3], rho123);
    if (rho123 < 1e-15) {
        r.coords.theta3 = x[3] > 0 ? pi / 2 : -pi / 2;
        r.degenerate = true;
        return r;
    }
    r.coords.theta2 = std::atan2(x[2], rho12);
    if (rho12 < 1e-15) {
        r.degenerate = true;
        return r;
    }
    r.coords.theta1 = reduce_angle(std::atan2(x[1], x[0]));
    return r;
}

/// Great circle (dim 1) or great sphere (dim 2) stored by an orthonormal basis of its span.
/// dim 0 (antipodal pair) and dim 3 (all of S^3) are allowed for fixed-locus results.
class GreatSubsphere {
public:
    GreatSubsphere() = default;

    GreatSubsphere(std::vector<Vec4> basis, std::string name = {})
        : basis_(std::move(basis)), name_(std::move(name))
    {
        if (basis_.empty() || basis_.size() > 4)
            throw std::invalid_argument("GreatSubsphere: basis must have 1 to 4 vectors");
        for (size_t i = 0; i < basis_.size(); ++i)
            for (size_t j = 0; j < basis_.size(); ++j) {
                double expect = i == j ? 1.0 : 0.0;
                if (std::abs(basis_[i].dot(basis_[j]) - expect) > 1e-12)
                    throw std::invalid_argument("GreatSubsphere: basis is not orthonormal");
            }
    }

    int dim() const { return static_cast<int>(basis_.size()) - 1; }
    const std::vector<Vec4>& basis() const { return basis_; }
    const std::string& name() const { return name_; }

    Vec4 project(const Vec4& p) const
    {
        Vec4 r = Vec4::Zero();
        for (const auto& b : basis_)
            r += b.dot(p) * b;
        return r;
    }

    bool contains(const Vec4& p, double tol = 1e-10) const
    {
        return std::abs(project(p).norm() - 1.0) <= tol && (p - project(p)).norm() <= tol;
    }

    double distance(const Vec4& p) const
    {
        Vec4 q = project(p);
        double n = q.norm();
        if (n == 0.0)
            return pi / 2;
        return sphere_distance(p, q / n);
    }

    /// Orthonormal basis of the orthogonal complement of the span.
    std::vector<Vec4> complement() const
    {
        std::vector<Vec4> out;
        for (int k = 0; k < 4 && static_cast<int>(out.size()) < 4 - static_cast<int>(basis_.size()); ++k) {
            Vec4 e = Vec4::Unit(k);
            Vec4 r = e - project(e);
            for (const auto& o : out)
                r -= o.dot(r) * o;
            if (r.norm() > 1e-6)
                out.push_back(r.normalized());
        }
        return out;
    }

    /// For a great sphere, the unit normal of its hyperplane (a center of the sphere).
    Vec4 center() const
    {
        if (dim() != 2)
            throw std::logic_error("GreatSubsphere::center: only defined for great spheres");
        return complement().front();
    }

private:
    std::vector<Vec4> basis_;
    std::string name_;
};

/// Great sphere whose center (hyperplane normal) is p.
inline GreatSubsphere great_sphere_with_center(const Vec4& p, std::string name = {})
{
    GreatSubsphere line({p.normalized()});
    return GreatSubsphere(line.complement(), std::move(name));
}

inline Vec4 meridian_direction(double t)
{
    return Vec4(std::cos(t * pi), std::sin(t * pi), 0, 0);
}

namespace objects {

inline GreatSubsphere S1() { return GreatSubsphere({Vec4::Unit(0), Vec4::Unit(1)}, "S1"); }
inline GreatSubsphere S1perp() { return GreatSubsphere({Vec4::Unit(2), Vec4::Unit(3)}, "S1perp"); }
inline GreatSubsphere S2() { return GreatSubsphere({Vec4::Unit(0), Vec4::Unit(1), Vec4::Unit(2)}, "S2"); }
inline GreatSubsphere Z() { return GreatSubsphere({Vec4::Unit(0), Vec4::Unit(1), Vec4::Unit(3)}, "Z"); }

/// Xi_t = {x1 sin(t pi) - x2 cos(t pi) = 0}
inline GreatSubsphere Xi(double t)
{
    return GreatSubsphere({meridian_direction(t), Vec4::Unit(2), Vec4::Unit(3)}, "Xi");
}

/// xi_t = Xi_t intersected with S2, a meridian through (0,0,+-1,0)
inline GreatSubsphere xi(double t) { return GreatSubsphere({meridian_direction(t), Vec4::Unit(2)}, "xi"); }

} // namespace objects

/// Intersection of the spans of two subspheres, or empty when they meet only at 0.
inline std::vector<Vec4> span_intersection(const GreatSubsphere& a, const GreatSubsphere& b)
{
    // x in span(a) with x in span(b): null space of (I - P_b) restricted to span(a)
    int k = static_cast<int>(a.basis().size());
    Eigen::MatrixXd M(4, k);
    for (int i = 0; i < k; ++i)
        M.col(i) = a.basis()[i] - b.project(a.basis()[i]);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
    std::vector<Vec4> out;
    const auto& s = svd.singularValues();
    for (int i = 0; i < k; ++i) {
        double sv = i < s.size() ? s[i] : 0.0;
        if (sv < 1e-10) {
            Vec4 x = Vec4::Zero();
            for (int j = 0; j < k; ++j)
                x += svd.matrixV()(j, i) * a.basis()[j];
            out.push_back(x.normalized());
        }
    }
    return out;
}

/// C_t = {x1^2 + x2^2 = t^2}; t = 1/sqrt(2) is the Clifford torus.
class CmcTorus {
public:
    explicit CmcTorus(double t) : t_(t)
    {
        if (!(t > 0 && t < 1))
            throw std::invalid_argument("CmcTorus: t must lie in (0,1)");
    }

    static CmcTorus clifford() { return CmcTorus(1.0 / std::sqrt(2.0)); }

    double t() const { return t_; }
    double s() const { return std::sqrt(1 - t_ * t_); }
    double area() const { return 4 * pi * pi * t_ * s(); }
    double distance_to_S1() const { return std::acos(t_); }

    Point4 point(double alpha, double beta) const
    {
        return Point4(Vec4(t_ * std::cos(alpha), t_ * std::sin(alpha), s() * std::cos(beta), s() * std::sin(beta)),
                      1e-14);
    }

    bool contains(const Vec4& p, double tol = 1e-10) const
    {
        return std::abs(p[0] * p[0] + p[1] * p[1] - t_ * t_) <= tol;
    }

    /// Principal curvatures in S^3 with respect to the normal pointing away from S1.
    std::array<double, 2> principal_curvatures() const { return {s() / t_, -t_ / s()}; }

private:
    double t_;
};

/// Stereographic projection from `pole` onto the equatorial R^3 orthogonal to it.
/// Coordinates are taken in the basis obtained by Gram-Schmidt on e1..e4 with pole removed,
/// so pole = e4 gives (x1, x2, x3) / (1 - x4).
inline std::array<double, 3> stereographic_project(const Vec4& p, const Vec4& pole)
{
    if ((p - pole).norm() < 1e-9)
        throw numerical_error("projection pole hit");
    GreatSubsphere axis({pole.normalized()});
    std::vector<Vec4> frame = axis.complement();
    double denom = 1.0 - p.dot(pole);
    std::array<double, 3> y{};
    for (int i = 0; i < 3; ++i)
        y[i] = frame[i].dot(p) / denom;
    return y;
}

} // namespace s3mm
