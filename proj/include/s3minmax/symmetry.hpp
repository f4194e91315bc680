#pragma once

#include "geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace s3mm {

/// Element of O(4).
class Orthogonal4 {
public:
    Orthogonal4() : m_(Mat4::Identity()) {}

    explicit Orthogonal4(const Mat4& m, double tol = 1e-10) : m_(m)
    {
        if ((m.transpose() * m - Mat4::Identity()).cwiseAbs().maxCoeff() > tol)
            throw std::invalid_argument("Orthogonal4: matrix is not orthogonal");
    }

    static Orthogonal4 diagonal(double a, double b, double c, double d)
    {
        return Orthogonal4(Vec4(a, b, c, d).asDiagonal().toDenseMatrix());
    }

    const Mat4& matrix() const { return m_; }
    Vec4 operator()(const Vec4& x) const { return m_ * x; }
    Orthogonal4 operator*(const Orthogonal4& o) const { return Orthogonal4(m_ * o.m_, 1e-9); }
    Orthogonal4 inverse() const { return Orthogonal4(m_.transpose(), 1e-9); }
    double det() const { return m_.determinant(); }

    double distance(const Orthogonal4& o) const { return (m_ - o.m_).cwiseAbs().maxCoeff(); }

private:
    Mat4 m_;
};

/// +1 on the span of x, -1 on its orthogonal complement.
inline Orthogonal4 reflection_through_span(const GreatSubsphere& x)
{
    Mat4 P = Mat4::Zero();
    for (const auto& b : x.basis())
        P += b * b.transpose();
    return Orthogonal4(2 * P - Mat4::Identity());
}

enum class GroupKind { An, Gn, Hn, Yn, Zn, custom };

inline std::string_view kind_name(GroupKind k)
{
    switch (k) {
    case GroupKind::An: return "An";
    case GroupKind::Gn: return "Gn";
    case GroupKind::Hn: return "Hn";
    case GroupKind::Yn: return "Yn";
    case GroupKind::Zn: return "Zn";
    default: return "custom";
    }
}

class SymmetryGroup {
public:
    SymmetryGroup() = default;

    GroupKind kind() const { return kind_; }
    int n() const { return n_; }
    std::string spec() const
    {
        if (kind_ == GroupKind::custom)
            return "custom";
        return std::string(kind_name(kind_)) + ":" + std::to_string(n_);
    }

    const std::vector<Orthogonal4>& generators() const { return generators_; }
    const std::vector<Orthogonal4>& elements() const { return elements_; }
    int order() const { return static_cast<int>(elements_.size()); }
    const Orthogonal4& operator[](int i) const { return elements_[i]; }

    /// Index of an element equal to m within 1e-8, or -1.
    int find(const Mat4& m) const
    {
        auto it = lookup_.find(key(m));
        if (it != lookup_.end() && (elements_[it->second].matrix() - m).cwiseAbs().maxCoeff() < 1e-8)
            return it->second;
        for (int i = 0; i < order(); ++i)
            if ((elements_[i].matrix() - m).cwiseAbs().maxCoeff() < 1e-8)
                return i;
        return -1;
    }

    int product(int a, int b) const
    {
        int r = find(elements_[a].matrix() * elements_[b].matrix());
        if (r < 0)
            throw std::logic_error("SymmetryGroup: product left the group");
        return r;
    }

    int inverse(int a) const
    {
        int r = find(elements_[a].matrix().transpose());
        if (r < 0)
            throw std::logic_error("SymmetryGroup: inverse left the group");
        return r;
    }

    friend SymmetryGroup generate_group(const std::vector<Orthogonal4>&, int, GroupKind, int);

private:
    static std::uint64_t key(const Mat4& m)
    {
        std::uint64_t h = 1469598103934665603ULL;
        for (int i = 0; i < 16; ++i) {
            auto q = static_cast<std::int64_t>(std::llround(m.data()[i] * 1e5));
            h = (h ^ static_cast<std::uint64_t>(q)) * 1099511628211ULL;
        }
        return h;
    }

    GroupKind kind_ = GroupKind::custom;
    int n_ = 0;
    std::vector<Orthogonal4> generators_;
    std::vector<Orthogonal4> elements_;
    std::unordered_map<std::uint64_t, int> lookup_;
};

/// Breadth-first closure of the generators. Elements are identified when their entries
/// agree to 1e-8; more than max_order elements is an error.
inline SymmetryGroup generate_group(const std::vector<Orthogonal4>& generators, int max_order = 1024,
                                    GroupKind kind = GroupKind::custom, int n = 0)
{
    SymmetryGroup g;
    g.kind_ = kind;
    g.n_ = n;
    g.generators_ = generators;
    g.elements_.push_back(Orthogonal4());
    g.lookup_.emplace(SymmetryGroup::key(Mat4::Identity()), 0);
    std::deque<int> queue{0};
    while (!queue.empty()) {
        int cur = queue.front();
        queue.pop_front();
        for (const auto& gen : generators) {
            Mat4 m = gen.matrix() * g.elements_[cur].matrix();
            if (g.find(m) >= 0)
                continue;
            if (g.order() >= max_order)
                throw numerical_error("group order exceeds cap");
            g.elements_.emplace_back(m, 1e-9);
            g.lookup_.emplace(SymmetryGroup::key(m), g.order() - 1);
            queue.push_back(g.order() - 1);
        }
    }
    return g;
}

namespace reflections {

inline Orthogonal4 S1() { return reflection_through_span(objects::S1()); }
inline Orthogonal4 Z() { return reflection_through_span(objects::Z()); }
inline Orthogonal4 xi(double t) { return reflection_through_span(objects::xi(t)); }
inline Orthogonal4 Xi(double t) { return reflection_through_span(objects::Xi(t)); }

} // namespace reflections

inline std::vector<Orthogonal4> standard_generators(GroupKind kind, int n)
{
    if (n < 1)
        throw std::invalid_argument("group parameter n must be positive");
    double h = 1.0 / (2.0 * n);
    switch (kind) {
    case GroupKind::An: return {reflections::xi(0), reflections::Xi(h)};
    case GroupKind::Gn: return {reflections::xi(0), reflections::Xi(h), reflections::S1()};
    case GroupKind::Hn: return {reflections::xi(0), reflections::Xi(h), reflections::Z()};
    case GroupKind::Yn: return {reflections::Xi(h), reflections::Xi(-h)};
    case GroupKind::Zn: return {reflections::xi(1.0 / n) * reflections::xi(0)};
    default: throw std::invalid_argument("no standard generators for a custom group");
    }
}

inline SymmetryGroup standard_group(GroupKind kind, int n, int max_order = 1024)
{
    return generate_group(standard_generators(kind, n), max_order, kind, n);
}

/// Parses "An:3", "Gn:4", "Hn:3", "Yn:5", "Zn:6".
inline SymmetryGroup parse_group(std::string_view spec)
{
    auto colon = spec.find(':');
    if (colon == std::string_view::npos)
        throw std::invalid_argument("group specifier must look like Gn:3");
    std::string_view name = spec.substr(0, colon);
    std::string_view num = spec.substr(colon + 1);
    int n = 0;
    auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), n);
    if (ec != std::errc() || ptr != num.data() + num.size() || n < 1)
        throw std::invalid_argument("bad group parameter in '" + std::string(spec) + "'");
    for (GroupKind k : {GroupKind::An, GroupKind::Gn, GroupKind::Hn, GroupKind::Yn, GroupKind::Zn})
        if (name == kind_name(k))
            return standard_group(k, n);
    throw std::invalid_argument("unknown group '" + std::string(name) + "'");
}

struct FixedLocus {
    int dim = -1; // -1 empty, 0 point pair, 1 circle, 2 sphere, 3 all of S^3
    std::vector<Vec4> basis;

    std::optional<GreatSubsphere> subsphere() const
    {
        if (basis.empty())
            return std::nullopt;
        return GreatSubsphere(basis);
    }
};

inline std::vector<Vec4> eigenspace(const Mat4& g, double lambda)
{
    Eigen::JacobiSVD<Mat4> svd(g - lambda * Mat4::Identity(), Eigen::ComputeFullV);
    std::vector<Vec4> out;
    for (int i = 0; i < 4; ++i)
        if (svd.singularValues()[i] < 1e-9)
            out.push_back(svd.matrixV().col(i));
    return out;
}

/// Unit sphere of the +1 eigenspace of g.
inline FixedLocus fixed_locus(const Orthogonal4& g)
{
    FixedLocus f;
    f.basis = eigenspace(g.matrix(), 1.0);
    f.dim = static_cast<int>(f.basis.size()) - 1;
    return f;
}

struct EquivariantSpheres {
    std::vector<GreatSubsphere> spheres;
    bool unconstrained = false; // some family of admissible centers is continuous
};

namespace detail {

inline Eigen::MatrixXd orthonormalize(const std::vector<Vec4>& vs)
{
    if (vs.empty())
        return Eigen::MatrixXd(4, 0);
    Eigen::MatrixXd A(4, vs.size());
    for (size_t i = 0; i < vs.size(); ++i)
        A.col(i) = vs[i];
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU);
    int r = 0;
    for (int i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()[i] > 1e-9)
            ++r;
    return svd.matrixU().leftCols(r);
}

// Orthonormal basis of span(U) intersected with the lambda eigenspace of g.
inline Eigen::MatrixXd restrict_to_eigenspace(const Eigen::MatrixXd& U, const Mat4& g, double lambda)
{
    if (U.cols() == 0)
        return U;
    Eigen::MatrixXd M = (g - lambda * Mat4::Identity()) * U;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
    std::vector<Vec4> out;
    for (int i = 0; i < U.cols(); ++i) {
        double sv = i < svd.singularValues().size() ? svd.singularValues()[i] : 0.0;
        if (sv < 1e-9)
            out.push_back(U * svd.matrixV().col(i));
    }
    return orthonormalize(out);
}

} // namespace detail

/// A great sphere S with center p is preserved by g exactly when g p = +-p.
/// Candidate centers come from intersecting +-1 eigenspaces of the generators; when the
/// admissible set of centers is continuous, it is sampled on a grid and flagged.
inline EquivariantSpheres equivariant_great_spheres(const SymmetryGroup& group, int grid = 12)
{
    std::vector<Eigen::MatrixXd> spaces{Mat4::Identity()};
    for (const auto& gen : group.generators()) {
        std::vector<Eigen::MatrixXd> next;
        for (const auto& U : spaces)
            for (double lambda : {1.0, -1.0}) {
                Eigen::MatrixXd W = detail::restrict_to_eigenspace(U, gen.matrix(), lambda);
                if (W.cols() > 0)
                    next.push_back(W);
            }
        spaces = std::move(next);
    }

    EquivariantSpheres out;
    std::vector<Vec4> centers;
    auto add_center = [&](Vec4 p) {
        p.normalize();
        for (const auto& c : centers)
            if ((c - p).norm() < 1e-8 || (c + p).norm() < 1e-8)
                return;
        centers.push_back(p);
    };
    for (const auto& U : spaces) {
        if (U.cols() == 1) {
            add_center(U.col(0));
            continue;
        }
        out.unconstrained = true;
        // Sample the unit sphere of span(U) with a product-angle grid.
        int d = static_cast<int>(U.cols());
        int m = std::max(grid, 2);
        std::vector<int> idx(d - 1, 0);
        while (true) {
            Eigen::VectorXd c(d);
            double r = 1.0;
            for (int k = 0; k < d - 1; ++k) {
                double a = pi * (idx[k] + 0.5) / m;
                c[k] = r * std::cos(a);
                r *= std::sin(a);
            }
            c[d - 1] = r;
            Vec4 p = U * c;
            bool ok = true;
            for (const auto& g : group.elements()) {
                Vec4 q = g(p);
                if ((q - p).norm() > 1e-9 && (q + p).norm() > 1e-9) {
                    ok = false;
                    break;
                }
            }
            if (ok)
                add_center(p);
            int k = 0;
            while (k < d - 1 && ++idx[k] == m)
                idx[k++] = 0;
            if (k == d - 1)
                break;
        }
    }
    for (const auto& p : centers)
        out.spheres.push_back(great_sphere_with_center(p));
    return out;
}

} // namespace s3mm
