#include <meshot/cli.hpp>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include <meshot/functionals.hpp>
#include <meshot/harmonic.hpp>
#include <meshot/io.hpp>
#include <meshot/oracle.hpp>

namespace meshot {

namespace fs = std::filesystem;

namespace {

struct Common {
    std::string mesh;
    std::string rho0;
    std::string rho1;
    int N = 31;
    double alpha = 0.0;
    double tol = 1e-4;
    int max_iters = 5000;
    double r = 0.0;
    bool fixed_penalty = false;
    std::string backend = "modal";
    std::string out;
    std::uint64_t seed = 0;

    SolverConfig config() const
    {
        SolverConfig cfg;
        cfg.N = N;
        cfg.alpha = alpha;
        cfg.tol = tol;
        cfg.max_iters = max_iters;
        cfg.r = r;
        cfg.penalty_adapt = !fixed_penalty;
        cfg.backend = backend == "direct" ? LinearBackend::Direct : LinearBackend::Modal;
        cfg.validate();
        return cfg;
    }
};

void add_solver_flags(CLI::App* app, Common& c, int default_N, double default_tol)
{
    c.N = default_N;
    c.tol = default_tol;
    app->add_option("--time-steps", c.N, "Number of centered time samples N")->capture_default_str();
    app->add_option("--alpha", c.alpha, "Congestion weight")->capture_default_str();
    app->add_option("--tol", c.tol, "Residual tolerance")->capture_default_str();
    app->add_option("--max-iters", c.max_iters, "Iteration cap")->capture_default_str();
    app->add_option("--r", c.r, "Initial penalty (0 picks 1/area^2)")->capture_default_str();
    app->add_flag("--fixed-penalty", c.fixed_penalty, "Disable penalty adaptation");
    app->add_option("--backend", c.backend, "Linear solver")
        ->check(CLI::IsMember({"modal", "direct"}))
        ->capture_default_str();
    app->add_option("--seed", c.seed, "Recorded in the manifest; the solvers are deterministic");
}

double seconds_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

fs::path prepare_dir(const std::string& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create " + dir + ": " + ec.message());
    }
    return fs::path(dir);
}

RunManifest base_manifest(const std::string& command, const Common& c, const SolverConfig& cfg)
{
    RunManifest m;
    m.command = command;
    m.mesh_path = c.mesh;
    m.mesh_hash = file_hash(c.mesh);
    m.config = config_to_json(cfg);
    m.config["seed"] = c.seed;
    return m;
}

int run_transport(const Common& c, bool full_output, std::ostream& out)
{
    const auto start = std::chrono::steady_clock::now();
    const TriangleMesh mesh = load_mesh(c.mesh);
    const MeshOperators ops = build_operators(mesh);
    const DensityField mu0 = load_density(c.rho0, mesh);
    const DensityField mu1 = load_density(c.rho1, mesh);
    const SolverConfig cfg = c.config();
    const GeodesicResult res = solve_geodesic(mesh, ops, mu0, mu1, cfg);

    out << std::setprecision(10);
    if (full_output) {
        out << "distance " << res.distance << "\niterations " << res.iterations << "\nconverged "
            << (res.converged ? "yes" : "no") << '\n';
    } else {
        out << res.distance << '\n';
    }
    if (!c.out.empty()) {
        const fs::path dir = prepare_dir(c.out);
        RunManifest m = base_manifest(full_output ? "geodesic" : "distance", c, cfg);
        m.iterations = res.iterations;
        m.converged = res.converged;
        m.distance = res.distance;
        write_values(dir / "rho0.txt", mu0.values);
        write_values(dir / "rho1.txt", mu1.values);
        m.extra["endpoints"] = {"rho0.txt", "rho1.txt"};
        m.extra["primal_action"] = res.primal_action;
        m.extra["dual_objective"] = res.dual_objective;
        m.extra["final_r"] = res.final_r;
        m.wall_time_seconds = seconds_since(start);
        save_frames(dir, res.mu_curve, res.history, m);
    }
    return res.converged ? ExitConverged : ExitNotConverged;
}

struct JkoFlags {
    std::string functional;
    double exponent = 2.0;
    double step = 0.01;
    int steps = 8;
    double cap = 0.0;
    std::string potential;
};

int run_jko(const Common& c, const JkoFlags& j, std::ostream& out)
{
    const auto start = std::chrono::steady_clock::now();
    const TriangleMesh mesh = load_mesh(c.mesh);
    const MeshOperators ops = build_operators(mesh);
    const DensityField mu0 = load_density(c.rho0, mesh);
    FlowFunctional F;
    if (j.functional == "crowd") {
        if (j.potential.empty()) {
            throw InputError("crowd functional needs --potential");
        }
        const Eigen::VectorXd W = read_values(j.potential);
        if (W.size() != mesh.num_vertices()) {
            throw InputError("potential has " + std::to_string(W.size()) + " values, mesh has "
                             + std::to_string(mesh.num_vertices()) + " vertices");
        }
        F = crowd_functional(W, j.cap);
    } else {
        F = porous_functional(j.exponent);
    }
    const SolverConfig cfg = c.config();
    const FlowTrace trace = run_flow(mesh, ops, mu0, F, j.step, j.steps, cfg);

    out << std::setprecision(10) << "step,energy,transport_cost,inner_iterations\n";
    for (std::size_t k = 0; k < trace.energies.size(); ++k) {
        out << k << ',' << trace.energies[k] << ',';
        if (k > 0) {
            out << trace.transport_costs[k - 1] << ',' << trace.inner_iterations[k - 1];
        } else {
            out << "0,0";
        }
        out << '\n';
    }
    if (!c.out.empty()) {
        const fs::path dir = prepare_dir(c.out);
        RunManifest m = base_manifest("jko", c, cfg);
        m.config["functional"] = j.functional;
        m.config["step"] = j.step;
        m.config["steps"] = j.steps;
        if (j.functional == "crowd") {
            m.config["cap"] = j.cap;
            m.config["potential"] = j.potential;
        } else {
            m.config["exponent"] = j.exponent;
        }
        TimeField rows(static_cast<Eigen::Index>(trace.densities.size()), mesh.num_vertices());
        for (std::size_t k = 0; k < trace.densities.size(); ++k) {
            rows.row(static_cast<Eigen::Index>(k)) = trace.densities[k].transpose();
        }
        m.frames = write_frames(dir, rows, "step_");
        std::ofstream csv(dir / "flow.csv");
        csv << std::setprecision(17) << "step,energy,transport_cost,inner_iterations\n";
        for (std::size_t k = 0; k < trace.energies.size(); ++k) {
            csv << k << ',' << trace.energies[k] << ','
                << (k > 0 ? trace.transport_costs[k - 1] : 0.0) << ','
                << (k > 0 ? trace.inner_iterations[k - 1] : 0) << '\n';
        }
        if (!csv) {
            throw IoError("failed writing flow.csv");
        }
        int total = 0;
        for (int it : trace.inner_iterations) {
            total += it;
        }
        m.iterations = total;
        m.converged = trace.all_converged;
        m.extra["flow_table"] = "flow.csv";
        m.wall_time_seconds = seconds_since(start);
        write_manifest(dir / "manifest.json", m);
    }
    return trace.all_converged ? ExitConverged : ExitNotConverged;
}

DomainMesh parse_domain(const std::string& spec)
{
    auto count_after = [&](const std::string& prefix) -> std::optional<int> {
        if (spec.rfind(prefix, 0) != 0) {
            return std::nullopt;
        }
        try {
            return std::stoi(spec.substr(prefix.size()));
        } catch (const std::logic_error&) {
            throw InputError("bad domain '" + spec + "'");
        }
    };
    if (auto n = count_after("segment:")) {
        return make_segment_domain(*n);
    }
    if (auto n = count_after("triangle:")) {
        return make_triangle_domain(*n);
    }
    const TriangleMesh planar = load_mesh(spec);
    std::vector<Eigen::Vector2d> points;
    for (const Vec3& p : planar.vertices) {
        points.emplace_back(p.x(), p.y());
    }
    return make_planar_domain(std::move(points), planar.faces);
}

/// Lines "<domain vertex> <density source>"; relative paths resolve against the index file.
BoundaryData read_boundary(const std::string& index_path, const DomainMesh& domain,
                           const TriangleMesh& mesh)
{
    std::ifstream in(index_path);
    if (!in) {
        throw IoError("cannot open " + index_path);
    }
    const fs::path base = fs::path(index_path).parent_path();
    std::map<int, std::string> sources;
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') {
            continue;
        }
        std::istringstream fields(line);
        int vertex = -1;
        std::string source;
        if (!(fields >> vertex >> source)) {
            throw InputError(index_path + ": malformed line: " + line);
        }
        if (source.rfind("delta:", 0) != 0 && fs::path(source).is_relative()) {
            source = (base / source).string();
        }
        sources[vertex] = source;
    }
    BoundaryData bc;
    for (int v : domain.boundary) {
        const auto it = sources.find(v);
        if (it == sources.end()) {
            throw InputError(index_path + ": no density for boundary vertex " + std::to_string(v));
        }
        bc.densities.push_back(load_density(it->second, mesh));
    }
    if (sources.size() != domain.boundary.size()) {
        throw InputError(index_path + ": lists vertices that are not on the domain boundary");
    }
    return bc;
}

int run_harmonic(const Common& c, const std::string& domain_spec, const std::string& index,
                 std::ostream& out)
{
    const auto start = std::chrono::steady_clock::now();
    const TriangleMesh mesh = load_mesh(c.mesh);
    const MeshOperators ops = build_operators(mesh);
    const DomainMesh domain = parse_domain(domain_spec);
    const BoundaryData bc = read_boundary(index, domain, mesh);
    const SolverConfig cfg = c.config();
    const HarmonicResult res = solve_harmonic(domain, mesh, ops, bc, cfg);

    out << std::setprecision(10) << "energy " << res.energy << "\niterations " << res.iterations
        << "\nconverged " << (res.converged ? "yes" : "no") << '\n';
    if (!c.out.empty()) {
        const fs::path dir = prepare_dir(c.out);
        RunManifest m = base_manifest("harmonic", c, cfg);
        m.config.erase("N");
        m.config["domain"] = domain_spec;
        m.config["boundary_index"] = index;
        m.iterations = res.iterations;
        m.converged = res.converged;
        m.distance = res.energy;
        m.frames = write_frames(dir, res.vertex_mu, "vertex_");
        m.residuals_file = "residuals.csv";
        write_residuals(dir / m.residuals_file, res.history);
        m.wall_time_seconds = seconds_since(start);
        write_manifest(dir / "manifest.json", m);
    }
    return res.converged ? ExitConverged : ExitNotConverged;
}

int run_oracle(const Common& c, bool euclidean, std::ostream& out)
{
    const TriangleMesh mesh = load_mesh(c.mesh);
    const DensityField mu0 = load_density(c.rho0, mesh);
    const DensityField mu1 = load_density(c.rho1, mesh);
    const Eigen::MatrixXd cost =
        cost_matrix(graph_distances(mesh, euclidean ? DistanceMode::Euclidean : DistanceMode::Graph));
    const TransportPlan plan = lp_transport(cost, mesh, mu0, mu1);
    out << std::setprecision(10) << plan.value << '\n';
    if (!c.out.empty()) {
        const fs::path dir = prepare_dir(c.out);
        std::ofstream csv(dir / "plan.csv");
        csv << std::setprecision(17) << "source,target,mass\n";
        for (Eigen::Index i = 0; i < plan.plan.rows(); ++i) {
            for (Eigen::Index k = 0; k < plan.plan.cols(); ++k) {
                if (plan.plan(i, k) > 0.0) {
                    csv << i << ',' << k << ',' << plan.plan(i, k) << '\n';
                }
            }
        }
        if (!csv) {
            throw IoError("failed writing plan.csv");
        }
    }
    return ExitConverged;
}

int run_convergence(const Common& c, const std::vector<int>& sides, const std::vector<int>& Ns,
                    double radius, std::ostream& out)
{
    ConvergenceSetup setup;
    setup.radius = radius;
    Common copy = c;
    copy.N = Ns.empty() ? 1 : Ns.front();
    setup.solver = copy.config();
    const std::vector<ConvergenceRow> rows = convergence_experiment(sides, Ns, setup);

    std::ostringstream table;
    table << std::setprecision(10) << "side,N,l1_error,iterations,converged\n";
    bool all = true;
    for (const ConvergenceRow& row : rows) {
        table << row.side << ',' << row.N << ',' << row.l1_error << ',' << row.iterations << ','
              << (row.converged ? 1 : 0) << '\n';
        all = all && row.converged;
    }
    out << table.str();
    if (!c.out.empty()) {
        const fs::path dir = prepare_dir(c.out);
        std::ofstream csv(dir / "convergence.csv");
        csv << table.str();
        if (!csv) {
            throw IoError("failed writing convergence.csv");
        }
    }
    return all ? ExitConverged : ExitNotConverged;
}

} // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Dynamical optimal transport on triangle meshes", "meshot"};
    app.require_subcommand(1);

    // One flag set per subcommand so each keeps its own defaults.
    Common cg, cd, cj, ch, co, cc;
    JkoFlags jko;
    std::string domain;
    std::string boundary;
    bool euclidean = false;
    std::vector<int> sides{16, 32, 64};
    std::vector<int> Ns{63};
    double radius = 0.2;

    auto* geodesic = app.add_subcommand("geodesic", "Geodesic between two densities");
    auto* distance = app.add_subcommand("distance", "Print the transport distance");
    for (auto [sub, c] : {std::pair{geodesic, &cg}, std::pair{distance, &cd}}) {
        sub->add_option("--mesh", c->mesh, "Mesh file (.off or .obj)")->required();
        sub->add_option("--rho0", c->rho0, "Start density file or delta:<i>")->required();
        sub->add_option("--rho1", c->rho1, "End density file or delta:<i>")->required();
        sub->add_option("--out", c->out, "Output directory");
        add_solver_flags(sub, *c, 31, 1e-4);
    }

    auto* flow = app.add_subcommand("jko", "Gradient flow by repeated free-endpoint steps");
    flow->add_option("--mesh", cj.mesh, "Mesh file")->required();
    flow->add_option("--rho0", cj.rho0, "Initial density")->required();
    flow->add_option("--functional", jko.functional, "Energy")
        ->required()
        ->check(CLI::IsMember({"porous", "crowd"}));
    flow->add_option("--exponent", jko.exponent, "Porous medium exponent m > 1")->capture_default_str();
    flow->add_option("--step", jko.step, "Time step")->capture_default_str();
    flow->add_option("--steps", jko.steps, "Number of steps")->capture_default_str();
    flow->add_option("--cap", jko.cap, "Crowd density cap");
    flow->add_option("--potential", jko.potential, "Crowd potential, one value per vertex");
    flow->add_option("--out", cj.out, "Output directory");
    add_solver_flags(flow, cj, 5, 1e-3);

    auto* harmonic = app.add_subcommand("harmonic", "Harmonic map into densities");
    harmonic->add_option("--mesh", ch.mesh, "Target surface mesh")->required();
    harmonic->add_option("--domain", domain, "segment:<n>, triangle:<n> or a planar mesh file")
        ->required();
    harmonic->add_option("--boundary", boundary, "Boundary index file")->required();
    harmonic->add_option("--out", ch.out, "Output directory");
    add_solver_flags(harmonic, ch, 31, 1e-4);
    harmonic->remove_option(harmonic->get_option("--time-steps"));

    auto* oracle = app.add_subcommand("oracle", "Exact discrete transport cost by linear programming");
    oracle->add_option("--mesh", co.mesh, "Mesh file")->required();
    oracle->add_option("--rho0", co.rho0, "Start density")->required();
    oracle->add_option("--rho1", co.rho1, "End density")->required();
    oracle->add_flag("--euclidean", euclidean, "Straight-line distances (flat meshes)");
    oracle->add_option("--out", co.out, "Output directory");

    auto* conv = app.add_subcommand("convergence", "Translation refinement study on the unit square");
    conv->add_option("--sides", sides, "Points per side")->capture_default_str();
    conv->add_option("--Ns", Ns, "Time step counts (odd)")->capture_default_str();
    conv->add_option("--radius", radius, "Bump radius")->capture_default_str();
    conv->add_option("--out", cc.out, "Output directory");
    add_solver_flags(conv, cc, 63, 1e-4);
    conv->remove_option(conv->get_option("--time-steps"));

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return ExitConverged;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return ExitConverged;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return ExitUsage;
    }

    try {
        if (geodesic->parsed()) {
            return run_transport(cg, true, out);
        }
        if (distance->parsed()) {
            return run_transport(cd, false, out);
        }
        if (flow->parsed()) {
            return run_jko(cj, jko, out);
        }
        if (harmonic->parsed()) {
            return run_harmonic(ch, domain, boundary, out);
        }
        if (oracle->parsed()) {
            return run_oracle(co, euclidean, out);
        }
        return run_convergence(cc, sides, Ns, radius, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return ExitUsage;
    }
}

int dispatch(int argc, const char* const* argv)
{
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) {
        args.emplace_back(argv[i]);
    }
    return dispatch(args);
}

} // namespace meshot
