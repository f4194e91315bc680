// One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.
#include <s3minmax/fixtures.hpp>
#include <s3minmax/pipeline.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>

using namespace s3mm;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void verdict(int id, const char* name, bool ok, double secs, double budget, const std::string& detail)
{
    bool pass = ok && secs <= budget;
    failures += !pass;
    std::printf("[%s] %2d %-22s %7.1f s (budget %.0f s)  %s\n", pass ? "PASS" : "FAIL", id, name, secs, budget,
                detail.c_str());
    std::fflush(stdout);
}

std::string fmt(double x, int prec = 6)
{
    std::ostringstream os;
    os.precision(prec);
    os << x;
    return os.str();
}

void group_orders()
{
    auto t0 = Clock::now();
    bool ok = true;
    for (int n = 2; n <= 8; ++n) {
        ok &= standard_group(GroupKind::An, n).order() == 4 * n;
        ok &= standard_group(GroupKind::Gn, n).order() == 8 * n;
        ok &= standard_group(GroupKind::Yn, n).order() == 2 * n;
        ok &= standard_group(GroupKind::Zn, n).order() == n;
    }
    verdict(1, "group orders", ok, seconds_since(t0), 1, "A_n=4n G_n=8n Y_n=2n Z_n=n for n=2..8");
}

void area_oracles()
{
    auto t0 = Clock::now();
    struct Case {
        const char* name;
        TriMesh mesh;
        double exact;
    };
    std::vector<Case> cases;
    cases.push_back({"sphere", great_sphere_mesh(), 4 * pi});
    cases.push_back({"clifford", clifford_torus_mesh(), 2 * pi * pi});
    for (double t : {0.3, 1 / std::sqrt(2.0), 0.9})
        cases.push_back({"cmc", cmc_torus_mesh(t), CmcTorus(t).area()});
    bool ok = true;
    double worst = 0;
    for (const auto& c : cases) {
        double rel = std::abs(area(c.mesh) / c.exact - 1);
        worst = std::max(worst, rel);
        ok &= rel <= 0.005;
    }
    verdict(2, "analytic areas", ok, seconds_since(t0), 10, "worst relative error " + fmt(worst, 3) + " (tol 0.005)");
}

void sweepout_certification()
{
    auto t0 = Clock::now();
    bool ok = true;
    double max_area = 0, max_res = 0;
    int slices = 0;
    for (int n = 2; n <= 5; ++n) {
        SliceSpec s;
        s.n = n; // default refinement
        auto fam = build_family(s, 21);
        auto G = standard_group(GroupKind::Gn, n);
        for (const auto& m : fam.slices) {
            auto topo = topology_report(m, false);
            double res = equivariance_residual(m, G);
            double a = area(m);
            ok &= topo.genus && *topo.genus == 2 * n;
            ok &= !m.tags.s1.empty() && static_cast<int>(m.tags.xi.size()) == n;
            for (const auto& [i, vs] : m.tags.xi)
                ok &= !vs.empty();
            ok &= res < 1e-9;
            ok &= a <= slice_area_bound * 1.01;
            max_area = std::max(max_area, a);
            max_res = std::max(max_res, res);
            ++slices;
        }
    }
    verdict(3, "sweepout slices", ok, seconds_since(t0), 300,
            std::to_string(slices) + " slices genus 2n, max area " + fmt(max_area, 7) + " <= " +
                fmt(slice_area_bound, 7) + ", max residual " + fmt(max_res, 2));
}

void width_window(const MinmaxResult& r3, double secs_run)
{
    auto t0 = Clock::now();
    // tighten further than the pipeline does and check the window still holds; long runs need
    // normal motion, tangential sliding collapses triangles of the flatter slices
    FlowConfig tc;
    tc.max_steps = 100;
    tc.motion = Motion::normal;
    SweepoutFamily fam = tighten(r3.family, tc, 3);
    double w = fam.width_estimate;
    bool ok = r3.family.width_estimate > 4 * pi && r3.family.width_estimate <= slice_area_bound;
    ok &= w > 4 * pi && w <= slice_area_bound;
    verdict(4, "width window n=3", ok, seconds_since(t0) + secs_run, 1800,
            "initial " + fmt(r3.report["sweepout"]["initial_width"].get<double>(), 7) + ", pipeline " +
                fmt(r3.family.width_estimate, 7) + ", after 3x100 more normal steps " + fmt(w, 7) + " in (" +
                fmt(4 * pi, 7) + ", " + fmt(slice_area_bound, 7) + "]");
}

bool candidate_ok(const MinmaxResult& r, const RunConfig& cfg, std::string& detail)
{
    const auto& a = r.analysis.report;
    int n = cfg.n;
    int g = a["genus"].get<int>();
    double A = a["area"].get<double>();
    bool ok = g == 2 * n || g == 2 * n - 2;
    ok &= A > 2 * pi * pi && A < slice_area_bound;
    ok &= r.analysis.graph_grad_norm < cfg.flow.grad_tol;
    std::string gc = a["genus_case"].is_string() ? a["genus_case"].get<std::string>() : "";
    ok &= !gc.empty();
    ok &= a["self_intersections"].get<int>() == 0;
    detail += "n=" + std::to_string(n) + ": genus " + std::to_string(g) + ", area " + fmt(A, 7) + ", j " +
              std::to_string(a["j_count"].get<int>()) + " (case " + gc + "), gradient " +
              fmt(r.analysis.graph_grad_norm, 2) + " < " + fmt(cfg.flow.grad_tol, 2) + "; ";
    return ok;
}

void index_bound(const std::vector<std::pair<RunConfig, const MinmaxResult*>>& runs)
{
    bool ok = true;
    std::string detail;
    for (const auto& [cfg, r] : runs) {
        const auto& s = r->analysis.spectrum;
        int lower = 4 * cfg.n - 1;
        ok &= s.negative_count >= lower;
        detail += "n=" + std::to_string(cfg.n) + ": index " + std::to_string(s.negative_count) + " >= " +
                  std::to_string(lower) + " (conjectured " + std::to_string(4 * cfg.n + 5) + ", tol " +
                  fmt(s.spectral_tol, 2) + "); ";
    }
    verdict(7, "index lower bound", ok, 0, 1, detail);
}

void spectrum_calibration()
{
    auto t0 = Clock::now();
    std::vector<int> sphere, clifford;
    for (int level : {3, 4}) {
        TriMesh m = great_sphere_mesh(level);
        sphere.push_back(jacobi_spectrum(m, curvature_field(m), 12).negative_count);
    }
    for (double h : {0.08, 0.05}) {
        TriMesh m = clifford_torus_mesh(h);
        clifford.push_back(jacobi_spectrum(m, curvature_field(m), 16).negative_count);
    }
    bool ok = sphere == std::vector<int>{1, 1} && clifford == std::vector<int>{5, 5};
    verdict(6, "spectrum calibration", ok, seconds_since(t0), 300,
            "sphere index " + std::to_string(sphere[0]) + "," + std::to_string(sphere[1]) + " (want 1), clifford " +
                std::to_string(clifford[0]) + "," + std::to_string(clifford[1]) + " (want 5)");
}

void umbilic_audit(const MinmaxResult& r)
{
    const auto& a = r.analysis;
    bool ok = a.umbilic_default.has_value() && a.umbilic_sweep.has_value();
    std::string detail;
    if (ok) {
        const auto& u = *a.umbilic_default;
        int at_poles = 0;
        for (const auto& p : u.points)
            if (std::abs(std::abs(p.position[2]) - 1) < 1e-6 && p.multiplicity >= 1)
                ++at_poles;
        ok &= at_poles == 2;
        ok &= u.total_with_multiplicity <= 8 * 3 - 4;
        detail = "poles found " + std::to_string(at_poles) + "/2, total " + std::to_string(u.total_with_multiplicity) +
                 " <= 20, sweep";
        for (const auto& rep : a.umbilic_sweep->reports)
            detail += " " + std::to_string(rep.total_with_multiplicity);
    }
    else
        detail = "umbilic detection failed";
    verdict(8, "umbilic audit n=3", ok, 0, 1, detail);
}

void genus_table()
{
    auto t0 = Clock::now();
    bool ok = true;
    for (int n = 2; n <= 10; ++n)
        for (int gp : {0, 1})
            for (int k : {0, 1, 2}) {
                auto c = genus_arithmetic(n, gp, k);
                std::string want = "outside lemma hypotheses";
                if (k == 0)
                    want = "a";
                else if (k == 1 && gp == 0)
                    want = "b";
                else if (k == 2 && gp == 0 && n == 2)
                    want = "c";
                ok &= c.genus == 2 * n * gp + 2 * k * (n - 1) && c.j == 2 + 4 * k && c.label == want;
            }
    verdict(9, "genus arithmetic", ok, seconds_since(t0), 1, "54 cases, n=2..10");
}

double chordal_area(const std::vector<Vec4>& X, const std::vector<Tri>& T)
{
    double a = 0;
    for (const auto& t : T)
        a += triangle_area(X[t[0]], X[t[1]], X[t[2]]);
    return a;
}

void hygiene()
{
    auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> N(0, 1);
    std::vector<TriMesh> base = {great_sphere_mesh(1), clifford_torus_mesh(0.5), cmc_torus_mesh(0.4, 6, 8),
                                 lawson_type_mesh(1, 1, 3), great_sphere_mesh(2)};
    double worst_fd = 0;
    for (auto& m : base) {
        std::vector<Vec4> X = m.vertices;
        for (auto& x : X)
            x = (x + 0.05 * Vec4(N(rng), N(rng), N(rng), N(rng))).normalized();
        auto g = area_gradient_ambient(X, m.triangles);
        double err = 0, scale = 0;
        for (size_t v = 0; v < X.size(); ++v)
            for (int k = 0; k < 4; ++k) {
                auto P = X, M = X;
                P[v][k] += 1e-6;
                M[v][k] -= 1e-6;
                double fd = (chordal_area(P, m.triangles) - chordal_area(M, m.triangles)) / 2e-6;
                err = std::max(err, std::abs(fd - g[v][k]));
                scale = std::max(scale, std::abs(g[v][k]));
            }
        worst_fd = std::max(worst_fd, err / scale);
    }

    SliceSpec s;
    s.refinement = 3;
    std::vector<TriMesh> fixtures = {great_sphere_mesh(),       clifford_torus_mesh(),      cmc_torus_mesh(0.3),
                                     lawson_type_mesh(2, 2),    lawson_type_mesh(3, 1),     build_slice(s)};
    double worst_gb = 0;
    for (const auto& m : fixtures)
        worst_gb = std::max(worst_gb, std::abs(angle_defect_sum(m) - 2 * pi * topology_report(m, false).euler));

    auto eq = equivariant_great_spheres(standard_group(GroupKind::An, 3));
    bool s2 = false, z = false;
    for (const auto& S : eq.spheres) {
        s2 = s2 || std::abs(std::abs(S.center()[3]) - 1) < 1e-9;
        z = z || std::abs(std::abs(S.center()[2]) - 1) < 1e-9;
    }
    bool spheres_ok = !eq.unconstrained && eq.spheres.size() == 2 && s2 && z;
    bool ok = worst_fd < 1e-6 && worst_gb < 1e-8 && spheres_ok;
    verdict(10, "numerical hygiene", ok, seconds_since(t0), 300,
            "FD gradient " + fmt(worst_fd, 2) + ", angle defect " + fmt(worst_gb, 2) + ", A_3 spheres " +
                (spheres_ok ? "{S2, Z}" : "wrong"));
}

} // namespace

int main()
{
    group_orders();
    area_oracles();
    sweepout_certification();

    std::vector<RunConfig> cfgs(2);
    cfgs[0].n = 2;
    cfgs[1].n = 3;
    std::vector<MinmaxResult> runs(2);
    std::vector<double> secs(2);
    bool ok5 = true;
    std::string detail5;
    for (int i = 0; i < 2; ++i) {
        auto t0 = Clock::now();
        try {
            runs[i] = run_minmax(cfgs[i]);
            secs[i] = seconds_since(t0);
            ok5 &= candidate_ok(runs[i], cfgs[i], detail5) && secs[i] <= 7200;
        }
        catch (const std::exception& e) {
            secs[i] = seconds_since(t0);
            ok5 = false;
            detail5 += "n=" + std::to_string(cfgs[i].n) + ": " + e.what() + "; ";
        }
    }

    if (ok5 || !runs[1].candidate.vertices.empty())
        width_window(runs[1], secs[1]);
    else
        verdict(4, "width window n=3", false, 0, 1800, "minmax run failed");
    verdict(5, "candidate surfaces", ok5, std::max(secs[0], secs[1]), 7200, detail5);
    spectrum_calibration();
    if (ok5)
        index_bound({{cfgs[0], &runs[0]}, {cfgs[1], &runs[1]}});
    else
        verdict(7, "index lower bound", false, 0, 1, "no candidates");
    if (!runs[1].candidate.vertices.empty())
        umbilic_audit(runs[1]);
    else
        verdict(8, "umbilic audit n=3", false, 0, 1, "no candidate");
    genus_table();
    hygiene();
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
