#pragma once

#include "mesh.hpp"
#include "operators.hpp"
#include "parallel.hpp"
#include "queries.hpp"
#include "sweepout.hpp"

#include <Eigen/SparseCholesky>
#include <unsupported/Eigen/IterativeSolvers>

#include <functional>
#include <limits>
#include <optional>
#include <sstream>

namespace s3mm {

using Positions = std::vector<Vec4>;

/// Gradient of the chordal area with respect to vertex positions in R^4.
inline Positions area_gradient_ambient(const Positions& X, const std::vector<Tri>& T)
{
    Positions g(X.size(), Vec4::Zero());
    for (size_t f = 0; f < T.size(); ++f) {
        const auto& t = T[f];
        if (!(triangle_area(X[t[0]], X[t[1]], X[t[2]]) >= 1e-16)) {
            std::ostringstream os;
            os << "degenerate triangle " << f;
            throw numerical_error(os.str());
        }
        for (int k = 0; k < 3; ++k) {
            const Vec4& p = X[t[k]];
            const Vec4& q = X[t[(k + 1) % 3]];
            const Vec4& r = X[t[(k + 2) % 3]];
            Vec4 e = r - q;
            Vec4 d = p - q;
            Vec4 h = d - (d.dot(e) / e.squaredNorm()) * e;
            g[t[k]] += 0.5 * e.norm() / h.norm() * h;
        }
    }
    return g;
}

inline void project_tangent(const Positions& X, Positions& v)
{
    for (size_t i = 0; i < X.size(); ++i)
        v[i] -= v[i].dot(X[i]) * X[i];
}

/// Area gradient projected so each vertex vector is orthogonal to its position.
inline Positions area_gradient(const TriMesh& m)
{
    Positions g = area_gradient_ambient(m.vertices, m.triangles);
    project_tangent(m.vertices, g);
    return g;
}

inline double field_norm(const Positions& v)
{
    double s = 0;
    for (const auto& x : v)
        s += x.squaredNorm();
    return std::sqrt(s);
}

inline double field_dot(const Positions& a, const Positions& b)
{
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i)
        s += a[i].dot(b[i]);
    return s;
}

/// Projections keeping tagged vertices on their loci.
class LocusSnap {
public:
    LocusSnap() = default;

    explicit LocusSnap(const TriMesh& m)
    {
        if (m.tags.empty())
            return;
        if (!m.tags.xi.empty() && !m.meta.n)
            throw std::invalid_argument("meridian tags need meta.n");
        std::vector<std::vector<GreatSubsphere>> loci(m.num_vertices());
        for (int v : m.tags.s1)
            loci[v].push_back(objects::S1());
        for (int v : m.tags.s1perp)
            loci[v].push_back(objects::S1perp());
        for (const auto& [i, vs] : m.tags.xi)
            for (int v : vs)
                loci[v].push_back(objects::xi(static_cast<double>(i) / *m.meta.n));
        for (int v = 0; v < m.num_vertices(); ++v) {
            if (loci[v].empty())
                continue;
            std::vector<Vec4> basis = loci[v][0].basis();
            for (size_t k = 1; k < loci[v].size() && !basis.empty(); ++k)
                basis = span_intersection(GreatSubsphere(basis), loci[v][k]);
            if (basis.empty())
                throw std::invalid_argument("vertex " + std::to_string(v) + " has incompatible locus tags");
            for (auto& b : basis)
                for (int c = 0; c < 4; ++c)
                    if (std::abs(b[c]) < 1e-14)
                        b[c] = 0;
            Mat4 P = Mat4::Zero();
            for (const auto& b : basis)
                P += b * b.transpose();
            entries_.push_back({v, P, basis.size() == 1 ? std::optional<Vec4>(basis[0].normalized()) : std::nullopt});
        }
    }

    void apply(Positions& X) const
    {
        for (const auto& e : entries_) {
            if (e.point) {
                X[e.vertex] = X[e.vertex].dot(*e.point) >= 0 ? *e.point : Vec4(-*e.point);
                continue;
            }
            X[e.vertex] = (e.projector * X[e.vertex]).normalized();
        }
    }

    void apply_tangent(Positions& v) const
    {
        for (const auto& e : entries_)
            v[e.vertex] = e.point ? Vec4::Zero() : Vec4(e.projector * v[e.vertex]);
    }

    void zero(Positions& v) const
    {
        for (const auto& e : entries_)
            v[e.vertex] = Vec4::Zero();
    }

    bool empty() const { return entries_.empty(); }

private:
    struct Entry {
        int vertex;
        Mat4 projector;
        std::optional<Vec4> point;
    };
    std::vector<Entry> entries_;
};

/// Reynolds averaging over a recorded group action.
class OrbitAverager {
public:
    OrbitAverager() = default;

    explicit OrbitAverager(std::shared_ptr<const OrbitTable> table) : table_(std::move(table))
    {
        if (!table_)
            return;
        int V = table_->perm.empty() ? 0 : static_cast<int>(table_->perm[0].size());
        std::vector<char> done(V, 0);
        for (int v = 0; v < V; ++v) {
            if (done[v])
                continue;
            reps_.push_back(v);
            for (const auto& p : table_->perm)
                done[p[v]] = 1;
        }
        inv_.resize(table_->group.order());
        for (int g = 0; g < table_->group.order(); ++g)
            inv_[g] = table_->group[g].matrix().transpose();
    }

    bool active() const { return table_ != nullptr; }

    /// Average of g^{-1}(value at g(v)) over the group, written back to the whole orbit.
    void average(Positions& X, bool normalize) const
    {
        if (!table_)
            return;
        const auto& G = table_->group;
        const auto& perm = table_->perm;
        const double inv_order = 1.0 / G.order();
        for (int r : reps_) {
            Vec4 acc = Vec4::Zero();
            for (int g = 0; g < G.order(); ++g)
                acc += inv_[g] * X[perm[g][r]];
            acc *= inv_order;
            if (normalize)
                acc.normalize();
            for (int g = G.order() - 1; g >= 0; --g)
                X[perm[g][r]] = G[g].matrix() * acc;
            X[r] = acc;
        }
    }

    const OrbitTable* table() const { return table_.get(); }

private:
    std::shared_ptr<const OrbitTable> table_;
    std::vector<int> reps_;
    std::vector<Mat4> inv_;
};

/// Orbit-averages the vertices and snaps tagged vertices onto their loci.
inline TriMesh symmetrize(const TriMesh& m)
{
    if (!m.orbits)
        throw std::invalid_argument("symmetrize: mesh carries no orbit bookkeeping");
    Positions X = m.vertices;
    OrbitAverager(m.orbits).average(X, true);
    LocusSnap(m).apply(X);
    return m.with_vertices(std::move(X));
}

inline TriMesh symmetrize(const TriMesh& m, const SymmetryGroup& group)
{
    if (!m.orbits)
        throw std::invalid_argument("symmetrize: mesh carries no orbit bookkeeping");
    if (m.orbits->group.spec() != group.spec() || m.orbits->group.order() != group.order())
        throw std::invalid_argument("symmetrize: mesh orbits were recorded for a different group");
    return symmetrize(m);
}

enum class Preconditioner { none, sobolev };

/// normal: vertices move along the surface normal only and tagged vertices stay put, so the
/// triangulation cannot drift tangentially into slivers. full: the whole tangential gradient.
enum class Motion { normal, full };

struct FlowConfig {
    double step = 1.0;
    int max_steps = 500;
    double grad_tol = 1e-6;
    int symmetrize_every = 10;
    double backtracking = 0.5;
    Preconditioner preconditioner = Preconditioner::sobolev;
    double sobolev_weight = 0.01;
    double armijo = 1e-4;
    Motion motion = Motion::full;
    double max_displacement = 0.25; // per step, in mean edge lengths

    void validate() const
    {
        if (!(step > 0))
            throw std::invalid_argument("FlowConfig: step must be positive");
        if (!(grad_tol > 0))
            throw std::invalid_argument("FlowConfig: grad_tol must be positive");
        if (!(backtracking > 0 && backtracking < 1))
            throw std::invalid_argument("FlowConfig: backtracking must lie in (0,1)");
        if (!(max_displacement > 0))
            throw std::invalid_argument("FlowConfig: max_displacement must be positive");
        if (max_steps < 0 || symmetrize_every < 1)
            throw std::invalid_argument("FlowConfig: bad step counts");
    }
};

struct FlowReport {
    int steps_taken = 0;
    double final_area = 0;
    double final_grad_norm = 0;
    double final_full_grad_norm = 0; // includes the tangential part, for reference
    std::vector<double> area_history;
    std::vector<double> grad_history;
    bool converged = false;
    std::string diagnostic;
};

/// Called after every accepted step; returning false stops the flow.
using FlowObserver = std::function<bool(int step, const Positions& X, double area, double grad_norm)>;

/// Working state shared by the flow routines: topology, loci, symmetry.
class FlowProblem {
public:
    explicit FlowProblem(const TriMesh& m, Motion motion = Motion::full)
        : mesh_(m), snap_(m), avg_(m.orbits), motion_(motion)
    {
    }

    const TriMesh& mesh() const { return mesh_; }
    bool symmetric() const { return avg_.active(); }
    Motion motion() const { return motion_; }

    double area(const Positions& X) const
    {
        double s = 0;
        for (const auto& t : mesh_.triangles)
            s += triangle_area(X[t[0]], X[t[1]], X[t[2]]);
        return s;
    }

    /// Area gradient on S3, averaged over the group and kept tangent to the loci.
    Positions full_gradient(const Positions& X) const
    {
        Positions g = area_gradient_ambient(X, mesh_.triangles);
        project_tangent(X, g);
        avg_.average(g, false);
        snap_.apply_tangent(g);
        project_tangent(X, g);
        return g;
    }

    /// Gradient over the admissible motions (see restrict).
    Positions gradient(const Positions& X) const
    {
        Positions g = area_gradient_ambient(X, mesh_.triangles);
        project_tangent(X, g);
        restrict(X, g);
        return g;
    }

    /// Projects a vector field onto the admissible motions: equivariant, tangent to the loci and
    /// to S3; in normal mode also normal to the surface, with tagged vertices held fixed.
    void restrict(const Positions& X, Positions& v) const
    {
        avg_.average(v, false);
        if (motion_ == Motion::normal) {
            snap_.zero(v);
            auto nu = vertex_normals(mesh_.with_vertices(X));
            for (size_t i = 0; i < v.size(); ++i)
                v[i] = v[i].dot(nu[i]) * nu[i];
            return;
        }
        snap_.apply_tangent(v);
        project_tangent(X, v);
    }

    /// Group average with tagged vertices zeroed; used for normal-graph variations.
    void restrict_normal_field(Positions& v) const
    {
        avg_.average(v, false);
        snap_.zero(v);
    }

    void snap(Positions& X) const { snap_.apply(X); }

    void symmetrize(Positions& X) const
    {
        avg_.average(X, true);
        snap_.apply(X);
    }

    bool degenerate(const Positions& X) const
    {
        for (const auto& t : mesh_.triangles)
            if (!(triangle_area(X[t[0]], X[t[1]], X[t[2]]) >= 1e-16))
                return true;
        return false;
    }

    Positions retract(const Positions& X, const Positions& d, double alpha) const
    {
        Positions Y(X.size());
        for (size_t i = 0; i < X.size(); ++i)
            Y[i] = (X[i] + alpha * d[i]).normalized();
        snap(Y);
        return Y;
    }

private:
    TriMesh mesh_;
    LocusSnap snap_;
    OrbitAverager avg_;
    Motion motion_;
};

namespace detail {

class SobolevSolver {
public:
    void factor(const TriMesh& m, const Positions& X, double weight)
    {
        TriMesh cur = m.with_vertices(X);
        SparseMatrix A = weight * cotangent_stiffness(cur);
        Eigen::VectorXd M = lumped_mass(cur);
        for (int i = 0; i < M.size(); ++i)
            A.coeffRef(i, i) += M[i];
        solver_.compute(A);
        if (solver_.info() != Eigen::Success)
            throw numerical_error("Sobolev preconditioner factorization failed");
    }

    Positions apply(const Positions& g) const
    {
        const int n = static_cast<int>(g.size());
        Eigen::MatrixXd B(n, 4);
        for (int i = 0; i < n; ++i)
            B.row(i) = g[i].transpose();
        Eigen::MatrixXd D = solver_.solve(B);
        Positions d(n);
        for (int i = 0; i < n; ++i)
            d[i] = D.row(i).transpose();
        return d;
    }

private:
    Eigen::SimplicialLDLT<SparseMatrix> solver_;
};

} // namespace detail

/// Projected, preconditioned gradient descent with Armijo backtracking. Area never increases.
inline std::pair<TriMesh, FlowReport> descend(const TriMesh& mesh, const FlowConfig& cfg, const FlowObserver& observer = {})
{
    cfg.validate();
    FlowProblem P(mesh, cfg.motion);
    Positions X = mesh.vertices;
    if (P.symmetric())
        P.symmetrize(X);
    else
        P.snap(X);
    FlowReport rep;
    double A = P.area(X);
    Positions g = P.gradient(X);
    double gn = field_norm(g);
    rep.area_history.push_back(A);
    rep.grad_history.push_back(gn);
    double mean_mass = A / std::max(1, mesh.num_vertices());
    detail::SobolevSolver sob;
    double alpha = cfg.step;
    const double edge_scale = mean_edge_length(mesh);
    int since_factor = cfg.symmetrize_every;
    int step = 0;
    for (; step < cfg.max_steps; ++step) {
        if (gn < cfg.grad_tol)
            break;
        Positions d;
        if (cfg.preconditioner == Preconditioner::sobolev) {
            if (since_factor >= cfg.symmetrize_every) {
                sob.factor(mesh, X, cfg.sobolev_weight);
                since_factor = 0;
            }
            ++since_factor;
            d = sob.apply(g);
            for (auto& v : d)
                v = -v;
        }
        else {
            d = g;
            for (auto& v : d)
                v *= -1.0 / mean_mass;
        }
        P.restrict(X, d);
        double slope = field_dot(g, d);
        if (!(slope < 0)) {
            rep.diagnostic = "search direction is not a descent direction";
            break;
        }
        bool sym_now = P.symmetric() && (step + 1) % cfg.symmetrize_every == 0;
        bool accepted = false;
        double a = alpha;
        double dmax = 0;
        for (const auto& v : d)
            dmax = std::max(dmax, v.norm());
        if (dmax > 0)
            a = std::min(a, cfg.max_displacement * edge_scale / dmax);
        Positions Y;
        double AY = 0;
        for (int tries = 0; tries < 60; ++tries) {
            Y = P.retract(X, d, a);
            if (sym_now)
                P.symmetrize(Y);
            if (!P.degenerate(Y)) {
                AY = P.area(Y);
                if (AY <= A + cfg.armijo * a * slope) {
                    accepted = true;
                    break;
                }
            }
            a *= cfg.backtracking;
        }
        if (!accepted) {
            rep.diagnostic = "step underflow in line search";
            break;
        }
        X = std::move(Y);
        A = AY;
        alpha = std::min(cfg.step, a / cfg.backtracking);
        g = P.gradient(X);
        gn = field_norm(g);
        rep.area_history.push_back(A);
        rep.grad_history.push_back(gn);
        if (observer && !observer(step + 1, X, A, gn)) {
            ++step;
            break;
        }
    }
    if (P.symmetric()) {
        Positions Y = X;
        P.symmetrize(Y);
        double AY = P.area(Y);
        if (!P.degenerate(Y) && AY <= A + 1e-14) {
            X = std::move(Y);
            A = AY;
            g = P.gradient(X);
            gn = field_norm(g);
        }
    }
    rep.steps_taken = step;
    rep.final_area = A;
    rep.final_grad_norm = gn;
    rep.final_full_grad_norm = field_norm(P.full_gradient(X));
    rep.converged = gn < cfg.grad_tol;
    if (rep.area_history.back() != A) {
        rep.area_history.push_back(A);
        rep.grad_history.push_back(gn);
    }
    return {mesh.with_vertices(std::move(X)), std::move(rep)};
}

/// descend with the symmetry taken from `group`: the mesh's recorded action is used when
/// it matches, otherwise the action is rebuilt by nearest-vertex matching.
inline std::pair<TriMesh, FlowReport> descend(const TriMesh& mesh, const SymmetryGroup& group, const FlowConfig& cfg,
                                              const FlowObserver& observer = {})
{
    if (group.order() <= 1) {
        TriMesh m = mesh;
        m.orbits.reset();
        return descend(m, cfg, observer);
    }
    if (mesh.orbits && mesh.orbits->group.spec() == group.spec() && mesh.orbits->group.order() == group.order())
        return descend(mesh, cfg, observer);
    return descend(attach_orbits(mesh, group), cfg, observer);
}

/// One or more rounds of capped descent on every slice.
inline SweepoutFamily tighten(const SweepoutFamily& family, const FlowConfig& cfg, int rounds)
{
    SweepoutFamily out = family;
    for (int r = 0; r < rounds; ++r) {
        parallel_for(static_cast<int>(out.slices.size()), [&](int k) {
            out.slices[k] = descend(out.slices[k], cfg).first;
        });
        out.update_profile();
    }
    return out;
}

/// Raised when the candidate flow degenerates; carries the last mesh that was still healthy.
class neck_pinch_error : public topology_error {
public:
    neck_pinch_error(const std::string& what, TriMesh last_good) : topology_error(what), last_good(std::move(last_good)) {}
    TriMesh last_good;
};

namespace detail {
class LinearOperator;
}
} // namespace s3mm

template <>
struct Eigen::internal::traits<s3mm::detail::LinearOperator> : public Eigen::internal::traits<Eigen::SparseMatrix<double>> {};

namespace s3mm {
namespace detail {

/// Matrix-free symmetric operator for Eigen's iterative solvers.
class LinearOperator : public Eigen::EigenBase<LinearOperator> {
public:
    using Scalar = double;
    using RealScalar = double;
    using StorageIndex = int;
    enum { ColsAtCompileTime = Eigen::Dynamic, MaxColsAtCompileTime = Eigen::Dynamic, IsRowMajor = false };

    LinearOperator(Eigen::Index size, std::function<Eigen::VectorXd(const Eigen::VectorXd&)> f) : size_(size), f_(std::move(f)) {}

    Eigen::Index rows() const { return size_; }
    Eigen::Index cols() const { return size_; }
    Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return f_(x); }

    template <typename Rhs>
    Eigen::Product<LinearOperator, Rhs, Eigen::AliasFreeProduct> operator*(const Eigen::MatrixBase<Rhs>& x) const
    {
        return Eigen::Product<LinearOperator, Rhs, Eigen::AliasFreeProduct>(*this, x.derived());
    }

private:
    Eigen::Index size_;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> f_;
};

/// MINRES preconditioner given as a function. Set through reset() after the solver's compute,
/// which only sees the operator.
class FunctionPreconditioner {
public:
    using StorageIndex = int;
    enum { ColsAtCompileTime = Eigen::Dynamic, MaxColsAtCompileTime = Eigen::Dynamic };

    FunctionPreconditioner() = default;
    template <class M>
    explicit FunctionPreconditioner(const M&)
    {
    }
    template <class M>
    FunctionPreconditioner& analyzePattern(const M&) { return *this; }
    template <class M>
    FunctionPreconditioner& factorize(const M&) { return *this; }
    template <class M>
    FunctionPreconditioner& compute(const M&) { return *this; }
    Eigen::ComputationInfo info() const { return Eigen::Success; }

    void reset(std::function<Eigen::VectorXd(const Eigen::VectorXd&)> f) { f_ = std::move(f); }

    template <class Rhs>
    Eigen::VectorXd solve(const Rhs& b) const
    {
        return f_ ? f_(b) : Eigen::VectorXd(b);
    }

private:
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> f_;
};

} // namespace detail
} // namespace s3mm

namespace Eigen::internal {
template <typename Rhs>
struct generic_product_impl<s3mm::detail::LinearOperator, Rhs, SparseShape, DenseShape, GemvProduct>
    : generic_product_impl_base<s3mm::detail::LinearOperator, Rhs,
                                generic_product_impl<s3mm::detail::LinearOperator, Rhs>> {
    template <typename Dest>
    static void scaleAndAddTo(Dest& dst, const s3mm::detail::LinearOperator& lhs, const Rhs& rhs, const double& alpha)
    {
        dst.noalias() += alpha * lhs.apply(rhs);
    }
};
} // namespace Eigen::internal

namespace s3mm {

struct CandidateConfig {
    int probe_steps = 600;          // flow budget for deciding which end a surface falls to
    double side_margin = 0.15;      // radians from the end values of the tracked angle
    int bisection_steps = 40;
    int newton_steps = 30;
    int minres_iterations = 400;
    double minres_tol = 1e-4;
    double trust = 0.1;             // max vertex move per Newton step, in mean edge lengths
    double preconditioner_shift = 4.0; // mass multiple added to the stiffness in the Newton preconditioner
};

struct CandidateReport {
    FlowReport flow;
    double bracket_lo = 0, bracket_hi = 0; // slice parameters enclosing the pass
    double bisection_s = 0;
    int newton_steps = 0;
    std::vector<double> newton_grad_history;
    std::vector<double> newton_area_history;
    double graph_grad_norm = 0; // area gradient over normal graphs at the returned surface
};

namespace detail {

inline Eigen::VectorXd flatten(const Positions& v)
{
    Eigen::VectorXd x(4 * v.size());
    for (size_t i = 0; i < v.size(); ++i)
        x.segment<4>(4 * i) = v[i];
    return x;
}

inline Positions unflatten(const Eigen::VectorXd& x)
{
    Positions v(x.size() / 4);
    for (size_t i = 0; i < v.size(); ++i)
        v[i] = x.segment<4>(4 * i);
    return v;
}

/// Vertex on the circle {x2 = x3 = 0, x1 > 0, x4 > 0}; its angle atan2(x4, x1) equals arccos t
/// along the sweepout and tends to pi/2 or 0 as a surface falls toward either end.
inline int tracking_vertex(const TriMesh& m)
{
    int best = -1;
    for (int v = 0; v < m.num_vertices(); ++v) {
        const Vec4& x = m.vertices[v];
        if (std::abs(x[1]) < 1e-9 && std::abs(x[2]) < 1e-9 && x[0] > 0 && x[3] > 0)
            if (best < 0 || x[3] > m.vertices[best][3])
                best = v;
    }
    if (best < 0)
        throw std::invalid_argument("extract_candidate: slice has no vertex on the {x2 = x3 = 0} circle");
    return best;
}

enum class Side { low, high, undecided };

struct ProbeResult {
    Side side = Side::undecided;
    Positions best;
    double best_grad = std::numeric_limits<double>::infinity();
    double best_area = 0;
};

/// Flows X and records which end it falls toward, plus the smallest-gradient state met on the way.
inline ProbeResult probe(const FlowProblem& P, const Positions& X, int tracker, const FlowConfig& cfg,
                         const CandidateConfig& cc)
{
    ProbeResult r;
    FlowConfig c = cfg;
    c.max_steps = cc.probe_steps;
    c.grad_tol = std::numeric_limits<double>::min();
    auto record = [&](const Positions& Y, double a, double g) {
        if (g < r.best_grad) {
            r.best_grad = g;
            r.best = Y;
            r.best_area = a;
        }
    };
    record(X, P.area(X), field_norm(P.gradient(X)));
    auto observer = [&](int, const Positions& Y, double a, double g) {
        record(Y, a, g);
        double d = std::atan2(Y[tracker][3], Y[tracker][0]);
        if (d > pi / 2 - cc.side_margin)
            r.side = Side::low;
        else if (d < cc.side_margin)
            r.side = Side::high;
        return r.side == Side::undecided;
    };
    TriMesh start = P.mesh().with_vertices(X);
    try {
        descend(start, c, observer);
    }
    catch (const numerical_error&) {
        // a collapsing handle can stall the preconditioner; the side is known by then
    }
    return r;
}

inline Positions blend(const FlowProblem& P, const Positions& A, const Positions& B, double s)
{
    Positions X(A.size());
    for (size_t i = 0; i < A.size(); ++i)
        X[i] = ((1 - s) * A[i] + s * B[i]).normalized();
    P.symmetrize(X);
    return X;
}

} // namespace detail

/// Surfaces written as normal graphs over a fixed reference: X(phi)_v = normalize(X0_v + phi_v nu_v).
/// One unknown per vertex, tagged vertices fixed, phi invariant under the group. Area as a
/// function of phi is smooth as long as the graph stays thin, which the tangential gradient
/// modes (pure reparametrizations) never are.
class NormalGraph {
public:
    NormalGraph(const FlowProblem& P, Positions X0) : P_(P), X0_(std::move(X0))
    {
        nu_ = vertex_normals(P.mesh().with_vertices(X0_));
        for (size_t i = 0; i < nu_.size(); ++i)
            nu_[i] -= nu_[i].dot(X0_[i]) * X0_[i];
    }

    Eigen::Index size() const { return static_cast<Eigen::Index>(X0_.size()); }

    Positions position(const Eigen::VectorXd& phi) const
    {
        Positions X(X0_.size());
        for (size_t i = 0; i < X.size(); ++i)
            X[i] = (X0_[i] + phi[i] * nu_[i]).normalized();
        P_.snap(X);
        return X;
    }

    /// Projection onto invariant phi vanishing at tagged vertices.
    Eigen::VectorXd restrict(const Eigen::VectorXd& phi) const
    {
        Positions f(X0_.size());
        for (size_t i = 0; i < f.size(); ++i)
            f[i] = phi[i] * nu_[i];
        P_.restrict_normal_field(f);
        Eigen::VectorXd out(size());
        for (size_t i = 0; i < f.size(); ++i)
            out[i] = f[i].dot(nu_[i]);
        return out;
    }

    /// dA/dphi, restricted.
    Eigen::VectorXd gradient(const Eigen::VectorXd& phi) const
    {
        Positions X = position(phi);
        Positions g = area_gradient_ambient(X, P_.mesh().triangles);
        Eigen::VectorXd out(size());
        for (size_t i = 0; i < X.size(); ++i) {
            Vec4 y = X0_[i] + phi[i] * nu_[i];
            Vec4 J = (nu_[i] - X[i].dot(nu_[i]) * X[i]) / y.norm();
            out[i] = g[i].dot(J);
        }
        return restrict(out);
    }

    const Positions& reference() const { return X0_; }

private:
    const FlowProblem& P_;
    Positions X0_;
    std::vector<Vec4> nu_;
};

/// Newton iteration for a critical point of area over normal graphs. The Hessian is applied
/// matrix-free by central differences and inverted with MINRES (the pass point is a saddle),
/// preconditioned by stiffness plus a mass shift. Steps are capped and kept only when the
/// gradient norm drops. The reference is rebuilt when the graph grows thick.
inline Positions newton_polish(const FlowProblem& P, Positions X, const FlowConfig& cfg, const CandidateConfig& cc,
                               CandidateReport& report)
{
    const double h = mean_edge_length(P.mesh().with_vertices(X));
    std::unique_ptr<NormalGraph> graph;
    Eigen::VectorXd phi, F;
    double fn = 0;
    for (int it = 0;; ++it) {
        // rebase so F is measured against the current surface's own normals
        graph = std::make_unique<NormalGraph>(P, graph ? graph->position(phi) : X);
        phi = Eigen::VectorXd::Zero(graph->size());
        F = graph->gradient(phi);
        fn = F.norm();
        report.newton_grad_history.push_back(fn);
        report.newton_area_history.push_back(P.area(graph->position(phi)));
        if (fn < cfg.grad_tol || it >= cc.newton_steps)
            break;
        const NormalGraph& G = *graph;
        const double eps = 1e-6 * h;
        detail::LinearOperator H(G.size(), [&](const Eigen::VectorXd& x) {
            Eigen::VectorXd v = G.restrict(x);
            double nv = v.norm();
            if (nv == 0)
                return Eigen::VectorXd(Eigen::VectorXd::Zero(G.size()));
            double e = eps / v.cwiseAbs().maxCoeff();
            return Eigen::VectorXd(G.restrict((G.gradient(phi + e * v) - G.gradient(phi - e * v)) / (2 * e)));
        });
        TriMesh cur = P.mesh().with_vertices(G.position(phi));
        SparseMatrix S = cotangent_stiffness(cur);
        Eigen::VectorXd mass = lumped_mass(cur);
        for (int i = 0; i < mass.size(); ++i)
            S.coeffRef(i, i) += cc.preconditioner_shift * mass[i];
        Eigen::SimplicialLDLT<SparseMatrix> factor(S);
        if (factor.info() != Eigen::Success)
            throw numerical_error("Newton preconditioner factorization failed");
        Eigen::MINRES<detail::LinearOperator, Eigen::Lower | Eigen::Upper, detail::FunctionPreconditioner> solver;
        solver.setMaxIterations(cc.minres_iterations);
        solver.setTolerance(cc.minres_tol);
        solver.compute(H);
        solver.preconditioner().reset(
            [&](const Eigen::VectorXd& b) { return Eigen::VectorXd(G.restrict(factor.solve(G.restrict(b)))); });
        Eigen::VectorXd d = G.restrict(solver.solve(-F));
        double dmax = d.cwiseAbs().maxCoeff();
        double scale = dmax > cc.trust * h ? cc.trust * h / dmax : 1.0;
        bool accepted = false;
        for (int k = 0; k < 12; ++k, scale *= 0.5) {
            Eigen::VectorXd trial = phi + scale * d;
            if (P.degenerate(G.position(trial)))
                continue;
            Eigen::VectorXd Ft = G.gradient(trial);
            if (Ft.norm() < fn) {
                phi = std::move(trial);
                F = std::move(Ft);
                fn = F.norm();
                accepted = true;
                break;
            }
        }
        ++report.newton_steps;
        if (!accepted)
            break;
    }
    Positions out = graph->position(phi);
    P.symmetrize(out);
    report.graph_grad_norm = fn;
    return out;
}

/// Mountain-pass search along the family: find adjacent slices whose flows fall to opposite
/// ends, bisect on the straight blend between them, keep the lowest-gradient state seen by the
/// bisection flows, then polish it to a critical point.
inline std::pair<TriMesh, CandidateReport> extract_candidate(const SweepoutFamily& family, const FlowConfig& cfg,
                                                             const CandidateConfig& cc = {})
{
    cfg.validate();
    if (family.slices.empty())
        throw std::invalid_argument("extract_candidate: empty family");
    const TriMesh& base = family.slices[family.argmax];
    if (!base.orbits)
        throw std::invalid_argument("extract_candidate: slices carry no orbit bookkeeping");
    FlowProblem P(base, cfg.motion);
    const int tracker = detail::tracking_vertex(base);
    const int K = static_cast<int>(family.slices.size());
    std::vector<std::optional<detail::ProbeResult>> probes(K);
    auto probe_slice = [&](int k) -> const detail::ProbeResult& {
        if (!probes[k])
            probes[k] = detail::probe(P, family.slices[k].vertices, tracker, cfg, cc);
        return *probes[k];
    };
    CandidateReport report;
    detail::ProbeResult best;
    auto keep = [&](const detail::ProbeResult& r) {
        if (r.best_grad < best.best_grad)
            best = r;
    };

    int lo = family.argmax, hi = family.argmax;
    detail::Side s0 = probe_slice(family.argmax).side;
    keep(*probes[family.argmax]);
    if (s0 == detail::Side::low || s0 == detail::Side::undecided) {
        // a low outcome means the pass lies at larger t
        while (hi + 1 < K && probe_slice(hi + 1).side != detail::Side::high)
            keep(*probes[++hi]);
        if (hi + 1 < K) {
            keep(*probes[hi + 1]);
            lo = hi;
            hi = hi + 1;
        }
    }
    if (s0 == detail::Side::high || (s0 == detail::Side::undecided && hi == lo)) {
        lo = hi = family.argmax;
        while (lo - 1 >= 0 && probe_slice(lo - 1).side != detail::Side::low)
            keep(*probes[--lo]);
        if (lo - 1 >= 0) {
            keep(*probes[lo - 1]);
            hi = lo;
            lo = lo - 1;
        }
    }
    report.bracket_lo = family.t[lo];
    report.bracket_hi = family.t[hi];

    if (lo != hi) {
        const Positions& A = family.slices[lo].vertices;
        const Positions& B = family.slices[hi].vertices;
        double a = 0, b = 1;
        for (int it = 0; it < cc.bisection_steps; ++it) {
            double m = 0.5 * (a + b);
            auto r = detail::probe(P, detail::blend(P, A, B, m), tracker, cfg, cc);
            keep(r);
            if (r.side == detail::Side::low)
                a = m;
            else if (r.side == detail::Side::high)
                b = m;
            else
                break;
        }
        report.bisection_s = 0.5 * (a + b);
    }

    Positions X = best.best;
    TriMesh last_good = base.with_vertices(X);
    X = newton_polish(P, std::move(X), cfg, cc, report);
    if (P.degenerate(X))
        throw neck_pinch_error("neck pinch suspected", last_good);

    // zero-step descent: symmetrizes and fills the report
    FlowConfig fin = cfg;
    fin.max_steps = 0;
    auto [mesh, flow] = descend(base.with_vertices(std::move(X)), fin);
    // the candidate is judged over normal graphs; the full gradient adds only reparametrization
    FlowProblem Q(mesh, cfg.motion);
    flow.final_grad_norm = NormalGraph(Q, mesh.vertices).gradient(Eigen::VectorXd::Zero(mesh.num_vertices())).norm();
    flow.converged = flow.final_grad_norm < cfg.grad_tol;
    flow.grad_history.back() = flow.final_grad_norm;
    report.flow = std::move(flow);
    return {std::move(mesh), std::move(report)};
}

} // namespace s3mm
