#pragma once

#include "analysis.hpp"
#include "flow.hpp"
#include "mesh_io.hpp"
#include "sweepout.hpp"

#include <json.hpp>

#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace s3mm {

using ordered_json = nlohmann::ordered_json;

struct RunConfig {
    int n = 3;
    GroupVariant variant = GroupVariant::Gn;
    int slices = 21;
    int refinement = 3;
    double fillet_width = 0;
    FlowConfig flow;
    CandidateConfig candidate;
    int tighten_rounds = 1;
    int tighten_steps = 20;
    int spectrum_k = 0; // 0 picks 8n + 10
    JacobiDiscretization jacobi = JacobiDiscretization::area_hessian;
    std::string output_dir = "out";
    std::uint64_t seed = 1;

    SliceSpec slice_spec() const
    {
        SliceSpec s;
        s.n = n;
        s.refinement = refinement;
        s.fillet_width = fillet_width;
        s.variant = variant;
        return s;
    }

    int spectrum_size() const { return spectrum_k > 0 ? spectrum_k : 8 * n + 10; }

    void validate() const
    {
        slice_spec().validate();
        flow.validate();
        if (slices < 3)
            throw std::invalid_argument("slices must be at least 3");
        if (tighten_rounds < 0 || tighten_steps < 0)
            throw std::invalid_argument("tighten rounds and steps must be nonnegative");
        if (output_dir.empty())
            throw std::invalid_argument("output_dir must not be empty");
    }
};

inline std::string to_string(GroupVariant v) { return v == GroupVariant::Gn ? "Gn" : "Hn"; }
inline std::string to_string(JacobiDiscretization d)
{
    return d == JacobiDiscretization::cotangent ? "cotangent" : "area_hessian";
}

inline GroupVariant parse_variant(const std::string& s)
{
    if (s == "Gn")
        return GroupVariant::Gn;
    if (s == "Hn")
        return GroupVariant::Hn;
    throw std::invalid_argument("group variant must be Gn or Hn, got '" + s + "'");
}

/// "Hn:3" sets variant and n; a bare "Gn" or "Hn" sets only the variant.
inline void apply_group_spec(const std::string& spec, GroupVariant& variant, int& n)
{
    auto colon = spec.find(':');
    variant = parse_variant(spec.substr(0, colon));
    if (colon == std::string::npos)
        return;
    const std::string num = spec.substr(colon + 1);
    int v = 0;
    auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
    if (ec != std::errc() || ptr != num.data() + num.size())
        throw std::invalid_argument("bad group specifier '" + spec + "'");
    n = v;
}

inline JacobiDiscretization parse_jacobi(const std::string& s)
{
    if (s == "cotangent")
        return JacobiDiscretization::cotangent;
    if (s == "area_hessian")
        return JacobiDiscretization::area_hessian;
    throw std::invalid_argument("jacobi must be cotangent or area_hessian, got '" + s + "'");
}

inline ordered_json to_json(const FlowConfig& f)
{
    return {{"step", f.step},
            {"max_steps", f.max_steps},
            {"grad_tol", f.grad_tol},
            {"symmetrize_every", f.symmetrize_every},
            {"backtracking", f.backtracking},
            {"preconditioner", f.preconditioner == Preconditioner::sobolev ? "sobolev" : "none"},
            {"sobolev_weight", f.sobolev_weight},
            {"armijo", f.armijo},
            {"motion", f.motion == Motion::full ? "full" : "normal"},
            {"max_displacement", f.max_displacement}};
}

inline ordered_json to_json(const CandidateConfig& c)
{
    return {{"probe_steps", c.probe_steps},         {"side_margin", c.side_margin},
            {"bisection_steps", c.bisection_steps}, {"newton_steps", c.newton_steps},
            {"minres_iterations", c.minres_iterations}, {"minres_tol", c.minres_tol},
            {"trust", c.trust},                     {"preconditioner_shift", c.preconditioner_shift}};
}

inline ordered_json to_json(const RunConfig& c)
{
    return {{"n", c.n},
            {"group", to_string(c.variant)},
            {"slices", c.slices},
            {"refine", c.refinement},
            {"fillet_width", c.fillet_width},
            {"flow", to_json(c.flow)},
            {"candidate", to_json(c.candidate)},
            {"tighten_rounds", c.tighten_rounds},
            {"tighten_steps", c.tighten_steps},
            {"spectrum_k", c.spectrum_k},
            {"jacobi", to_string(c.jacobi)},
            {"seed", c.seed}};
}

namespace detail {

template <class T>
void read_key(const nlohmann::json& j, const char* key, T& out)
{
    if (j.contains(key))
        out = j.at(key).get<T>();
}

inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> keys, const std::string& where)
{
    if (!j.is_object())
        throw std::invalid_argument(where + " must be a JSON object");
    for (const auto& [k, v] : j.items())
        if (std::find_if(keys.begin(), keys.end(), [&](const char* s) { return k == s; }) == keys.end())
            throw std::invalid_argument("unknown key '" + k + "' in " + where);
}

} // namespace detail

/// Overlays the keys present in j onto cfg. Unknown keys are rejected so typos do not pass silently.
inline void apply_json(const nlohmann::json& j, RunConfig& cfg)
{
    using detail::read_key;
    detail::check_keys(j,
                       {"n", "group", "slices", "refine", "fillet_width", "flow", "candidate", "tighten_rounds",
                        "tighten_steps", "spectrum_k", "jacobi", "output_dir", "seed"},
                       "config");
    read_key(j, "n", cfg.n);
    if (j.contains("group"))
        apply_group_spec(j["group"].get<std::string>(), cfg.variant, cfg.n);
    read_key(j, "slices", cfg.slices);
    read_key(j, "refine", cfg.refinement);
    read_key(j, "fillet_width", cfg.fillet_width);
    read_key(j, "tighten_rounds", cfg.tighten_rounds);
    read_key(j, "tighten_steps", cfg.tighten_steps);
    read_key(j, "spectrum_k", cfg.spectrum_k);
    if (j.contains("jacobi"))
        cfg.jacobi = parse_jacobi(j["jacobi"].get<std::string>());
    read_key(j, "output_dir", cfg.output_dir);
    read_key(j, "seed", cfg.seed);
    if (j.contains("flow")) {
        const auto& f = j["flow"];
        detail::check_keys(f,
                           {"step", "max_steps", "grad_tol", "symmetrize_every", "backtracking", "preconditioner",
                            "sobolev_weight", "armijo", "motion", "max_displacement"},
                           "flow");
        read_key(f, "step", cfg.flow.step);
        read_key(f, "max_steps", cfg.flow.max_steps);
        read_key(f, "grad_tol", cfg.flow.grad_tol);
        read_key(f, "symmetrize_every", cfg.flow.symmetrize_every);
        read_key(f, "backtracking", cfg.flow.backtracking);
        read_key(f, "sobolev_weight", cfg.flow.sobolev_weight);
        read_key(f, "armijo", cfg.flow.armijo);
        read_key(f, "max_displacement", cfg.flow.max_displacement);
        if (f.contains("preconditioner")) {
            auto p = f["preconditioner"].get<std::string>();
            if (p != "sobolev" && p != "none")
                throw std::invalid_argument("flow.preconditioner must be sobolev or none");
            cfg.flow.preconditioner = p == "sobolev" ? Preconditioner::sobolev : Preconditioner::none;
        }
        if (f.contains("motion")) {
            auto p = f["motion"].get<std::string>();
            if (p != "full" && p != "normal")
                throw std::invalid_argument("flow.motion must be full or normal");
            cfg.flow.motion = p == "full" ? Motion::full : Motion::normal;
        }
    }
    if (j.contains("candidate")) {
        const auto& c = j["candidate"];
        detail::check_keys(c,
                           {"probe_steps", "side_margin", "bisection_steps", "newton_steps", "minres_iterations",
                            "minres_tol", "trust", "preconditioner_shift"},
                           "candidate");
        read_key(c, "probe_steps", cfg.candidate.probe_steps);
        read_key(c, "side_margin", cfg.candidate.side_margin);
        read_key(c, "bisection_steps", cfg.candidate.bisection_steps);
        read_key(c, "newton_steps", cfg.candidate.newton_steps);
        read_key(c, "minres_iterations", cfg.candidate.minres_iterations);
        read_key(c, "minres_tol", cfg.candidate.minres_tol);
        read_key(c, "trust", cfg.candidate.trust);
        read_key(c, "preconditioner_shift", cfg.candidate.preconditioner_shift);
    }
}

inline RunConfig load_config(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw std::invalid_argument("cannot open config " + path);
    RunConfig cfg;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(f);
    }
    catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("config " + path + ": " + e.what());
    }
    apply_json(j, cfg);
    return cfg;
}

// ---------------------------------------------------------------------------------------------
// file output

inline void write_text(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream f(p, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot write " + p.string());
    f << text;
}

inline void write_json(const std::filesystem::path& p, const ordered_json& j) { write_text(p, j.dump(2) + "\n"); }

inline std::string profile_csv(const SweepoutFamily& fam, const SymmetryGroup& group)
{
    std::ostringstream os;
    os << "t,area,genus,equivariance_residual\n";
    for (size_t k = 0; k < fam.slices.size(); ++k) {
        auto topo = topology_report(fam.slices[k], false);
        os << format_real(fam.t[k]) << ',' << format_real(fam.areas[k]) << ',' << (topo.genus ? *topo.genus : -1) << ','
           << format_real(equivariance_residual(fam.slices[k], group)) << '\n';
    }
    return os.str();
}

inline std::string flow_csv(const std::vector<double>& area, const std::vector<double>& grad)
{
    std::ostringstream os;
    os << "step,area,grad_norm\n";
    for (size_t i = 0; i < area.size(); ++i)
        os << i << ',' << format_real(area[i]) << ',' << format_real(i < grad.size() ? grad[i] : 0.0) << '\n';
    return os.str();
}

inline std::string spectrum_csv(const SpectrumResult& s)
{
    std::ostringstream os;
    os << "index,eigenvalue\n";
    for (size_t i = 0; i < s.eigenvalues.size(); ++i)
        os << i << ',' << format_real(s.eigenvalues[i]) << '\n';
    return os.str();
}

inline ordered_json to_json(const UmbilicReport& r)
{
    ordered_json pts = ordered_json::array();
    for (const auto& p : r.points)
        pts.push_back({{"vertex", p.vertex},
                       {"position", {p.position[0], p.position[1], p.position[2], p.position[3]}},
                       {"cluster_size", p.cluster_size},
                       {"winding", p.winding},
                       {"multiplicity", p.multiplicity}});
    return {{"tol", r.tol},
            {"locations", r.locations},
            {"multiplicities", r.multiplicities},
            {"total_with_multiplicity", r.total_with_multiplicity},
            {"rejected_clusters", r.rejected},
            {"points", pts}};
}

inline ordered_json to_json(const SpectrumResult& s)
{
    return {{"discretization", s.discretization},
            {"negative_count", s.negative_count},
            {"raw_negative_count", s.raw_negative_count},
            {"zero_count", s.zero_count},
            {"killing_modes", s.killing_modes},
            {"spectral_tol", s.spectral_tol},
            {"truncated", s.truncated},
            {"iterations", s.iterations},
            {"mass_convention", s.mass_convention},
            {"eigenvalues", s.eigenvalues}};
}

// ---------------------------------------------------------------------------------------------
// analysis of a single surface

struct AnalysisResult {
    ordered_json report;
    ordered_json umbilics;
    SpectrumResult spectrum;
    std::optional<UmbilicReport> umbilic_default;
    std::optional<UmbilicSweep> umbilic_sweep;
    TopologyReport topology;
    double graph_grad_norm = 0;
};

/// Area gradient over normal graphs, restricted to equivariant motions when the mesh carries orbits.
inline double normal_graph_gradient_norm(const TriMesh& m)
{
    FlowProblem P(m);
    return NormalGraph(P, m.vertices).gradient(Eigen::VectorXd::Zero(m.num_vertices())).norm();
}

inline AnalysisResult analyze(const TriMesh& mesh, int n, const SymmetryGroup& group, const RunConfig& cfg)
{
    AnalysisResult out;
    TriMesh m = mesh;
    if (!m.orbits && group.order() > 1) {
        try {
            m = attach_orbits(m, group);
        }
        catch (const std::exception&) {
            // not equivariant to orbit precision; gradient is then measured without symmetry
        }
    }
    out.topology = topology_report(m);
    const auto& topo = out.topology;
    const double A = area(m);
    const int g = topo.genus ? *topo.genus : -1;
    const int j = topo.j_count ? *topo.j_count : -1;
    out.graph_grad_norm = normal_graph_gradient_norm(m);
    CurvatureField field = curvature_field(m);
    out.spectrum = jacobi_spectrum(m, field, std::min(cfg.spectrum_size(), m.num_vertices()), 0, cfg.jacobi, cfg.seed);
    SpectrumResult cross = jacobi_spectrum(m, field, std::min(cfg.spectrum_size(), m.num_vertices()), 0,
                                           cfg.jacobi == JacobiDiscretization::cotangent
                                               ? JacobiDiscretization::area_hessian
                                               : JacobiDiscretization::cotangent,
                                           cfg.seed);
    KillingCheck kc = killing_residual(m, field, n, cfg.jacobi);

    ordered_json umb;
    try {
        out.umbilic_default = detect_umbilics(field, m);
        out.umbilic_sweep = umbilic_sensitivity(field, m);
        umb["default"] = to_json(*out.umbilic_default);
        ordered_json sweep = ordered_json::array();
        for (size_t i = 0; i < out.umbilic_sweep->factors.size(); ++i) {
            ordered_json r = to_json(out.umbilic_sweep->reports[i]);
            r["factor"] = out.umbilic_sweep->factors[i];
            sweep.push_back(r);
        }
        umb["sensitivity"] = sweep;
    }
    catch (const numerical_error& e) {
        umb["error"] = e.what();
    }
    umb["bound"] = 8 * n - 4;
    out.umbilics = umb;

    ordered_json gb;
    if (topo.genus) {
        auto r = gauss_bonnet_report(m, field, n, j);
        gb = {{"curvature_integral", r.curvature_integral},
              {"expected", r.expected},
              {"relative_residual", r.residual},
              {"second_variation_integral", r.second_variation_integral},
              {"second_variation_residual", r.second_variation_residual},
              {"angle_defect", r.angle_defect},
              {"angle_defect_expected", 2 * pi * topo.euler},
              {"pieces", r.pieces},
              {"pieces_congruent", r.pieces_congruent},
              {"gamma", r.gamma ? ordered_json(*r.gamma) : ordered_json()},
              {"beta", r.beta ? ordered_json(*r.beta) : ordered_json()},
              {"identity_rhs", r.identity_rhs ? ordered_json(*r.identity_rhs) : ordered_json()},
              {"identity_holds", r.identity_holds}};
    }

    const double lo = 2 * pi * pi;
    const std::string label = topo.genus && topo.j_count ? genus_case(n, g, j) : std::string();
    ordered_json loci = {{"S1", m.tags.s1.size()}, {"S1perp", m.tags.s1perp.size()}};
    ordered_json xi = ordered_json::object();
    for (const auto& [i, vs] : m.tags.xi)
        xi[std::to_string(i)] = vs.size();
    loci["xi"] = xi;

    ordered_json& rep = out.report;
    rep["n"] = n;
    rep["group"] = group.spec();
    rep["group_order"] = group.order();
    rep["vertices"] = topo.V;
    rep["triangles"] = topo.F;
    rep["area"] = A;
    rep["area_window"] = {lo, slice_area_bound};
    rep["area_in_window"] = A > lo && A < slice_area_bound;
    rep["euler"] = topo.euler;
    rep["genus"] = topo.genus ? ordered_json(g) : ordered_json();
    rep["genus_allowed"] = {2 * n - 2, 2 * n};
    rep["j_count"] = topo.j_count ? ordered_json(j) : ordered_json();
    rep["genus_case"] = label.empty() ? ordered_json() : ordered_json(label);
    rep["equivariance_residual"] = group.order() > 1 ? equivariance_residual(m, group) : 0.0;
    rep["tagged_vertices"] = loci;
    rep["graph_gradient_norm"] = out.graph_grad_norm;
    rep["self_intersections"] = self_intersections(m).size();
    rep["mean_curvature_residual"] = field.mean_curvature_residual();
    rep["max_principal_split"] = field.max_split();
    rep["spectrum"] = to_json(out.spectrum);
    rep["spectrum"]["index_lower_bound"] = 4 * n - 1;
    rep["spectrum"]["conjectured_index"] = 4 * n + 5;
    rep["spectrum_cross_check"] = {{"discretization", cross.discretization},
                                   {"negative_count", cross.negative_count},
                                   {"raw_negative_count", cross.raw_negative_count},
                                   {"killing_modes", cross.killing_modes}};
    rep["rotation_jacobi_field"] = {{"relative_residual", kc.relative_residual},
                                    {"max_on_mirrors", kc.max_on_mirrors}};
    if (out.umbilic_default)
        rep["umbilics_total_with_multiplicity"] = out.umbilic_default->total_with_multiplicity;
    rep["umbilic_bound"] = 8 * n - 4;
    rep["gauss_bonnet"] = gb;
    return out;
}

// ---------------------------------------------------------------------------------------------
// min-max run

struct MinmaxResult {
    SweepoutFamily family;
    TriMesh candidate;
    CandidateReport candidate_report;
    AnalysisResult analysis;
    ordered_json report;
};

inline void log_stage(const char* what, std::chrono::steady_clock::time_point t0)
{
    double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "[s3minmax] " << what << " (" << std::fixed << std::setprecision(1) << s << " s)\n";
}

/// Sweepout, tightening, mountain-pass extraction and analysis. Writes nothing.
inline MinmaxResult run_minmax(const RunConfig& cfg, bool verbose = false)
{
    cfg.validate();
    auto t0 = std::chrono::steady_clock::now();
    MinmaxResult r;
    r.family = build_family(cfg.slice_spec(), cfg.slices);
    if (verbose)
        log_stage("sweepout built", t0);
    const double initial_width = r.family.width_estimate;
    if (cfg.tighten_rounds > 0 && cfg.tighten_steps > 0) {
        FlowConfig tc = cfg.flow;
        tc.max_steps = cfg.tighten_steps;
        r.family = tighten(r.family, tc, cfg.tighten_rounds);
        if (verbose)
            log_stage("family tightened", t0);
    }
    auto [mesh, rep] = extract_candidate(r.family, cfg.flow, cfg.candidate);
    r.candidate = std::move(mesh);
    r.candidate_report = std::move(rep);
    if (verbose)
        log_stage("candidate extracted", t0);
    SymmetryGroup group = standard_group(cfg.slice_spec().group_kind(), cfg.n);
    r.analysis = analyze(r.candidate, cfg.n, group, cfg);
    if (verbose)
        log_stage("analysis done", t0);

    const auto& cr = r.candidate_report;
    ordered_json& j = r.report;
    j["config"] = to_json(cfg);
    j["sweepout"] = {{"initial_width", initial_width},
                     {"width_estimate", r.family.width_estimate},
                     {"interpolation_correction", r.family.interpolation_correction},
                     {"argmax_t", r.family.t[r.family.argmax]},
                     {"width_window", {4 * pi, slice_area_bound}}};
    j["candidate"] = {{"bracket", {cr.bracket_lo, cr.bracket_hi}},
                      {"bisection_s", cr.bisection_s},
                      {"newton_steps", cr.newton_steps},
                      {"newton_grad_history", cr.newton_grad_history},
                      {"grad_tol", cfg.flow.grad_tol},
                      {"final_grad_norm", cr.flow.final_grad_norm},
                      {"final_full_grad_norm", cr.flow.final_full_grad_norm},
                      {"converged", cr.flow.converged}};
    j["analysis"] = r.analysis.report;
    return r;
}

inline void write_minmax(const MinmaxResult& r, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    SymmetryGroup group = standard_group(r.family.spec.group_kind(), r.family.spec.n);
    write_text(dir / "profile.csv", profile_csv(r.family, group));
    write_text(dir / "flow.csv", flow_csv(r.candidate_report.newton_area_history, r.candidate_report.newton_grad_history));
    save_s3m((dir / "candidate.s3m").string(), r.candidate);
    write_text(dir / "spectrum.csv", spectrum_csv(r.analysis.spectrum));
    write_json(dir / "umbilics.json", r.analysis.umbilics);
    write_json(dir / "report.json", r.report);
}

} // namespace s3mm
