// s3minmax command line: sweepout, flow, minmax, analyze, export.
//
// Exit codes: 0 ok, 1 usage, 2 numerical failure, 3 topology mismatch.

#include <s3minmax/pipeline.hpp>

#include <CLI11.hpp>

#include <random>

namespace fs = std::filesystem;
using namespace s3mm;

namespace {

enum Exit { ok = 0, usage = 1, numerical = 2, topology = 3 };

struct Options {
    std::string config;
    std::string out;
    std::string group;
    std::string input;
    std::string output;
    std::string pole = "0,0,0,1";
    std::string format = "obj";
    std::string jacobi;
    int n = 0;
    int slices = 0;
    int refine = 0;
    int steps = -1;
    int spectrum_k = 0;
    int tighten_rounds = -1;
    int tighten_steps = -1;
    double fillet_width = 0;
    double grad_tol = 0;
    double perturb = 0;
    std::uint64_t seed = 0;
    bool verbose = false;
};

RunConfig resolve(const Options& o, const CLI::App& sub)
{
    RunConfig cfg;
    if (!o.config.empty())
        cfg = load_config(o.config);
    // count() throws for options the subcommand does not define
    auto given = [&](const char* name) {
        const CLI::Option* opt = sub.get_option_no_throw(name);
        return opt && opt->count() > 0;
    };
    if (given("--n"))
        cfg.n = o.n;
    if (given("--group"))
        apply_group_spec(o.group, cfg.variant, cfg.n);
    if (given("--slices"))
        cfg.slices = o.slices;
    if (given("--refine"))
        cfg.refinement = o.refine;
    if (given("--fillet-width"))
        cfg.fillet_width = o.fillet_width;
    if (given("--steps"))
        cfg.flow.max_steps = o.steps;
    if (given("--grad-tol"))
        cfg.flow.grad_tol = o.grad_tol;
    if (given("--spectrum-k"))
        cfg.spectrum_k = o.spectrum_k;
    if (given("--jacobi"))
        cfg.jacobi = parse_jacobi(o.jacobi);
    if (given("--tighten-rounds"))
        cfg.tighten_rounds = o.tighten_rounds;
    if (given("--tighten-steps"))
        cfg.tighten_steps = o.tighten_steps;
    if (given("--out"))
        cfg.output_dir = o.out;
    if (given("--seed"))
        cfg.seed = o.seed;
    if (cfg.n < 2)
        throw std::invalid_argument("n must be at least 2");
    return cfg;
}

Vec4 parse_pole(const std::string& s)
{
    std::vector<double> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        v.push_back(std::stod(item));
    if (v.size() != 4)
        throw std::invalid_argument("pole must have four comma-separated coordinates");
    Vec4 p(v[0], v[1], v[2], v[3]);
    if (!(p.norm() > 0))
        throw std::invalid_argument("pole must be nonzero");
    return p.normalized();
}

SymmetryGroup mesh_group(const TriMesh& m, const std::string& flag)
{
    if (!flag.empty())
        return parse_group(flag);
    if (!m.meta.group.empty())
        return parse_group(m.meta.group);
    if (m.meta.n)
        return standard_group(GroupKind::Gn, *m.meta.n);
    return generate_group({});
}

int cmd_sweepout(const Options& o, const CLI::App& sub)
{
    RunConfig cfg = resolve(o, sub);
    cfg.validate();
    auto t0 = std::chrono::steady_clock::now();
    SweepoutFamily fam = build_family(cfg.slice_spec(), cfg.slices);
    if (o.verbose)
        log_stage("slices built", t0);
    SymmetryGroup group = standard_group(cfg.slice_spec().group_kind(), cfg.n);
    fs::path dir = cfg.output_dir;
    fs::create_directories(dir);
    for (size_t k = 0; k < fam.slices.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "slice_%03zu.s3m", k);
        save_s3m((dir / name).string(), fam.slices[k]);
    }
    write_text(dir / "profile.csv", profile_csv(fam, group));
    std::cout << "wrote " << fam.slices.size() << " slices to " << dir.string() << ", width estimate "
              << format_real(fam.width_estimate) << '\n';
    return ok;
}

int cmd_flow(const Options& o, const CLI::App& sub)
{
    RunConfig cfg;
    if (!o.config.empty())
        cfg = load_config(o.config);
    if (sub.count("--steps"))
        cfg.flow.max_steps = o.steps;
    if (sub.count("--grad-tol"))
        cfg.flow.grad_tol = o.grad_tol;
    if (sub.count("--out"))
        cfg.output_dir = o.out;
    if (sub.count("--seed"))
        cfg.seed = o.seed;
    cfg.flow.validate();
    TriMesh m = load_s3m(o.input);
    SymmetryGroup group = mesh_group(m, o.group);
    if (o.perturb > 0) {
        std::mt19937_64 rng(cfg.seed);
        std::normal_distribution<double> N(0, 1);
        for (auto& x : m.vertices) {
            Vec4 d(N(rng), N(rng), N(rng), N(rng));
            x = (x + o.perturb * d).normalized();
        }
    }
    auto [out, rep] = descend(m, group, cfg.flow);
    fs::path dir = cfg.output_dir;
    fs::create_directories(dir);
    write_text(dir / "flow.csv", flow_csv(rep.area_history, rep.grad_history));
    save_s3m((dir / "flowed.s3m").string(), out);
    std::cout << "steps " << rep.steps_taken << ", area " << format_real(rep.final_area) << ", gradient "
              << format_real(rep.final_grad_norm) << (rep.converged ? ", converged" : ", not converged");
    if (!rep.diagnostic.empty())
        std::cout << " (" << rep.diagnostic << ")";
    std::cout << '\n';
    return ok;
}

int cmd_minmax(const Options& o, const CLI::App& sub)
{
    RunConfig cfg = resolve(o, sub);
    cfg.validate();
    fs::path dir = cfg.output_dir;
    try {
        MinmaxResult r = run_minmax(cfg, o.verbose);
        write_minmax(r, dir);
        const auto& a = r.analysis.report;
        std::cout << "candidate area " << format_real(r.candidate_report.flow.final_area) << ", genus " << a["genus"]
                  << ", j " << a["j_count"] << ", index " << r.analysis.spectrum.negative_count << ", gradient "
                  << format_real(r.candidate_report.flow.final_grad_norm) << '\n';
        if (!r.candidate_report.flow.converged) {
            std::cerr << "candidate gradient did not reach grad_tol\n";
            return numerical;
        }
    }
    catch (const neck_pinch_error& e) {
        fs::create_directories(dir);
        save_s3m((dir / "last_good.s3m").string(), e.last_good);
        throw;
    }
    return ok;
}

int cmd_analyze(const Options& o, const CLI::App& sub)
{
    RunConfig cfg;
    if (!o.config.empty())
        cfg = load_config(o.config);
    TriMesh m = load_s3m(o.input);
    int n = sub.count("--n") ? o.n : m.meta.n.value_or(cfg.n);
    if (n < 2)
        throw std::invalid_argument("n must be at least 2");
    if (sub.count("--spectrum-k"))
        cfg.spectrum_k = o.spectrum_k;
    if (sub.count("--jacobi"))
        cfg.jacobi = parse_jacobi(o.jacobi);
    if (sub.count("--out"))
        cfg.output_dir = o.out;
    if (sub.count("--seed"))
        cfg.seed = o.seed;
    cfg.n = n;
    SymmetryGroup group = mesh_group(m, o.group);
    AnalysisResult a = analyze(m, n, group, cfg);
    fs::path dir = cfg.output_dir;
    fs::create_directories(dir);
    write_json(dir / "report.json", a.report);
    write_text(dir / "spectrum.csv", spectrum_csv(a.spectrum));
    write_json(dir / "umbilics.json", a.umbilics);
    std::cout << "area " << format_real(area(m)) << ", genus " << a.report["genus"] << ", index "
              << a.spectrum.negative_count << '\n';
    return ok;
}

int cmd_export(const Options& o)
{
    TriMesh m = load_s3m(o.input);
    Vec4 pole = parse_pole(o.pole);
    // the image is unbounded if the pole touches any triangle, not only a vertex
    TriangleGrid grid(m, 2 * mean_edge_length(m));
    if (grid.distance(pole) < 1e-9) {
        std::string hint;
        for (int k = 0; k < 4 && hint.empty(); ++k)
            for (double s : {1.0, -1.0}) {
                Vec4 c = s * Vec4::Unit(k);
                if (grid.distance(c) > 1e-3) {
                    hint = format_real(c[0]) + "," + format_real(c[1]) + "," + format_real(c[2]) + "," +
                           format_real(c[3]);
                    break;
                }
            }
        throw numerical_error("projection pole lies on the surface" +
                              (hint.empty() ? std::string() : "; try --pole " + hint));
    }
    std::string out = o.output.empty() ? fs::path(o.input).replace_extension(o.format).string() : o.output;
    std::ofstream f(out, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot write " + out);
    if (o.format == "obj")
        write_obj(f, m, pole);
    else
        write_ply(f, m, pole);
    std::cout << "wrote " << out << '\n';
    return ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Equivariant min-max surfaces in the 3-sphere"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* s) {
        s->add_option("--config", o.config, "JSON run configuration; flags override it")->check(CLI::ExistingFile);
        s->add_option("--out", o.out, "output directory");
        s->add_option("--seed", o.seed, "seed for every random choice");
        s->add_flag("-v,--verbose", o.verbose, "stage timings on stderr");
    };
    auto family_opts = [&](CLI::App* s) {
        s->add_option("--n", o.n, "symmetry parameter n >= 2");
        s->add_option("--group", o.group, "Gn or Hn, optionally with n as in Hn:3");
        s->add_option("--slices", o.slices, "number of t-slices");
        s->add_option("--refine", o.refine, "patch refinement level");
        s->add_option("--fillet-width", o.fillet_width, "fillet band width in radians");
    };

    auto* sweep = app.add_subcommand("sweepout", "build the equivariant sweepout and its area profile");
    common(sweep);
    family_opts(sweep);

    auto* flow = app.add_subcommand("flow", "symmetrized area descent of one mesh");
    common(flow);
    flow->add_option("--input", o.input, ".s3m mesh")->required()->check(CLI::ExistingFile);
    flow->add_option("--group", o.group, "symmetry group, e.g. Gn:3 (default: from the mesh)");
    flow->add_option("--steps", o.steps, "maximum descent steps");
    flow->add_option("--grad-tol", o.grad_tol, "gradient tolerance");
    flow->add_option("--perturb", o.perturb, "random vertex perturbation before flowing");

    auto* minmax = app.add_subcommand("minmax", "sweepout, tightening, candidate extraction and analysis");
    common(minmax);
    family_opts(minmax);
    minmax->add_option("--grad-tol", o.grad_tol, "gradient tolerance for the candidate");
    minmax->add_option("--steps", o.steps, "descent step budget");
    minmax->add_option("--tighten-rounds", o.tighten_rounds, "tightening rounds over the family");
    minmax->add_option("--tighten-steps", o.tighten_steps, "descent steps per slice per round");
    minmax->add_option("--spectrum-k", o.spectrum_k, "number of Jacobi eigenvalues");
    minmax->add_option("--jacobi", o.jacobi, "area_hessian or cotangent");

    auto* analyze = app.add_subcommand("analyze", "curvature, umbilics, spectrum and topology of a mesh");
    common(analyze);
    analyze->add_option("--input", o.input, ".s3m mesh")->required()->check(CLI::ExistingFile);
    analyze->add_option("--n", o.n, "symmetry parameter (default: from the mesh)");
    analyze->add_option("--group", o.group, "symmetry group (default: from the mesh)");
    analyze->add_option("--spectrum-k", o.spectrum_k, "number of Jacobi eigenvalues");
    analyze->add_option("--jacobi", o.jacobi, "area_hessian or cotangent");

    auto* exp = app.add_subcommand("export", "stereographic OBJ or PLY");
    exp->add_option("--input", o.input, ".s3m mesh")->required()->check(CLI::ExistingFile);
    exp->add_option("--pole", o.pole, "projection pole x1,x2,x3,x4");
    exp->add_option("--format", o.format, "obj or ply")->check(CLI::IsMember({"obj", "ply"}));
    exp->add_option("--output", o.output, "output file");

    try {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e) {
        app.exit(e);
        return usage;
    }

    try {
        if (sweep->parsed())
            return cmd_sweepout(o, *sweep);
        if (flow->parsed())
            return cmd_flow(o, *flow);
        if (minmax->parsed())
            return cmd_minmax(o, *minmax);
        if (analyze->parsed())
            return cmd_analyze(o, *analyze);
        return cmd_export(o);
    }
    catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage;
    }
    catch (const topology_error& e) {
        std::cerr << "topology mismatch: " << e.what() << '\n';
        return topology;
    }
    catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return numerical;
    }
}
