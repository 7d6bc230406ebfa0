#include <doctest.h>

#include <fstream>
#include <sstream>

#include <meshot/cli.hpp>
#include <meshot/io.hpp>
#include <meshot/oracle.hpp>

#include "support.hpp"

using namespace meshot;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("meshot_io_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream(path) << text;
}

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run cli(const std::vector<std::string>& args)
{
    std::ostringstream out;
    std::ostringstream err;
    Run r;
    r.code = dispatch(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

nlohmann::json without_time(const fs::path& manifest)
{
    nlohmann::json j = nlohmann::json(read_manifest(manifest));
    j.erase("wall_time_seconds");
    return j;
}

} // namespace

TEST_CASE("density loading")
{
    const fs::path dir = scratch("load");
    const TriangleMesh mesh = make_unit_square(4);
    std::string ones;
    for (int v = 0; v < mesh.num_vertices(); ++v) ones += "1\n";
    write_text(dir / "ones.txt", ones);
    CHECK(load_density((dir / "ones.txt").string(), mesh).values.isApproxToConstant(1.0, 1e-14));

    write_text(dir / "list.json", "[2,2,2,2, 2,2,2,2, 2,2,2,2, 2,2,2,2]");
    CHECK(load_density((dir / "list.json").string(), mesh).values.isApproxToConstant(1.0, 1e-14));

    const DensityField d = load_density("delta:7", mesh);
    CHECK(d[7] == doctest::Approx(1.0 / mesh.vertex_areas[7]));
    CHECK_THROWS_AS(load_density("delta:99", mesh), InputError);
    CHECK_THROWS_AS(load_density("delta:x", mesh), InputError);

    write_text(dir / "short.txt", ones.substr(2));
    CHECK_THROWS_AS(load_density((dir / "short.txt").string(), mesh), InputError);
    write_text(dir / "neg.txt", "-1\n" + ones.substr(2));
    CHECK_THROWS_AS(load_density((dir / "neg.txt").string(), mesh), InputError);
    write_text(dir / "nan.txt", "nan\n" + ones.substr(2));
    CHECK_THROWS_AS(load_density((dir / "nan.txt").string(), mesh), InputError);
    write_text(dir / "junk.txt", "1 2 x");
    CHECK_THROWS_AS(load_density((dir / "junk.txt").string(), mesh), InputError);
    CHECK_THROWS_AS(load_density((dir / "missing.txt").string(), mesh), IoError);
}

TEST_CASE("frames and manifest round trip")
{
    const fs::path dir = scratch("frames");
    const TriangleMesh mesh = make_unit_square(5);
    const MeshOperators ops = build_operators(mesh);
    SolverConfig cfg;
    cfg.N = 3;
    const GeodesicResult res = solve_geodesic(mesh, ops, bump_density(mesh, Vec3(0.3, 0.3, 0), 0.4),
                                              bump_density(mesh, Vec3(0.7, 0.6, 0), 0.4), cfg);
    RunManifest m;
    m.command = "geodesic";
    m.config = config_to_json(cfg);
    m.distance = res.distance;
    m.iterations = res.iterations;
    save_frames(dir / "out", res.mu_curve, res.history, m);
    REQUIRE(m.frames.size() == 3);
    for (int t = 0; t < 3; ++t) {
        const DensityField back = load_density((dir / "out" / m.frames[t]).string(), mesh, DensityLoad::Raw);
        CHECK(back.values == res.mu_curve.row(t).transpose());
    }
    const RunManifest again = read_manifest(dir / "out" / "manifest.json");
    CHECK(again.distance == res.distance);
    CHECK(again.frames == m.frames);
    CHECK(fs::exists(dir / "out" / again.residuals_file));
    const SolverConfig cfg_back = config_from_json(again.config);
    CHECK(cfg_back.N == cfg.N);
    CHECK(cfg_back.tol == cfg.tol);
    CHECK(cfg_back.r == cfg.r);
    CHECK(cfg_back.max_iters == cfg.max_iters);
    CHECK(cfg_back.penalty_adapt == cfg.penalty_adapt);

    std::ifstream csv(dir / "out" / "residuals.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "iteration,primal,dual,r");

    write_text(dir / "blocker", "x");
    CHECK_THROWS_AS(save_frames(dir / "blocker" / "sub", res.mu_curve, res.history, m), IoError);
}

TEST_CASE("command line")
{
    const fs::path dir = scratch("cli");
    const TriangleMesh mesh = make_unit_square(8);
    save_off(mesh, dir / "sq.off");
    write_values(dir / "a.txt", bump_density(mesh, Vec3(0.3, 0.3, 0), 0.35).values);
    write_values(dir / "b.txt", bump_density(mesh, Vec3(0.65, 0.6, 0), 0.35).values);
    const std::string M = (dir / "sq.off").string();
    const std::string A = (dir / "a.txt").string();
    const std::string B = (dir / "b.txt").string();

    SUBCASE("identical densities have distance zero")
    {
        const Run r = cli({"distance", "--mesh", M, "--rho0", A, "--rho1", A, "--time-steps", "7"});
        CHECK(r.code == 0);
        CHECK(std::abs(std::stod(r.out)) <= 1e-5);
    }
    SUBCASE("usage errors")
    {
        CHECK(cli({"distance", "--mesh", M, "--rho0", A}).code == 1);
        CHECK(cli({"distance", "--mesh", M, "--rho0", A, "--rho1", B, "--bogus"}).code == 1);
        CHECK(cli({"teleport"}).code == 1);
        CHECK(cli({}).code == 1);
        CHECK(cli({"distance", "--mesh", (dir / "none.off").string(), "--rho0", A, "--rho1", B}).code == 1);
        CHECK(cli({"distance", "--mesh", M, "--rho0", A, "--rho1", B, "--time-steps", "0"}).code == 1);
    }
    SUBCASE("non-convergence exits with 2")
    {
        CHECK(cli({"distance", "--mesh", M, "--rho0", A, "--rho1", B, "--max-iters", "3"}).code == 2);
    }
    SUBCASE("geodesic writes frames and a deterministic manifest")
    {
        const std::vector<std::string> args{"geodesic", "--mesh", M, "--rho0", A, "--rho1", B, "--time-steps", "5",
                                            "--out", (dir / "run1").string(), "--seed", "4"};
        const Run r = cli(args);
        REQUIRE(r.code == 0);
        const RunManifest m = read_manifest(dir / "run1" / "manifest.json");
        CHECK(m.frames.size() == 5);
        for (const std::string& f : m.frames) CHECK(fs::exists(dir / "run1" / f));
        CHECK(fs::exists(dir / "run1" / "rho0.txt"));
        CHECK(m.config.at("seed") == 4);
        CHECK(m.mesh_hash == file_hash(M));
        CHECK(r.out.find("distance") != std::string::npos);

        std::vector<std::string> again = args;
        again[again.size() - 3] = (dir / "run2").string();
        REQUIRE(cli(again).code == 0);
        CHECK(without_time(dir / "run1" / "manifest.json") == without_time(dir / "run2" / "manifest.json"));
        for (const std::string& f : m.frames) {
            CHECK(read_values((dir / "run1" / f).string()) == read_values((dir / "run2" / f).string()));
        }
    }
    SUBCASE("jko and oracle")
    {
        const Run j = cli({"jko", "--mesh", M, "--rho0", A, "--functional", "porous", "--exponent", "2",
                           "--step", "0.01", "--steps", "2", "--out", (dir / "flow").string()});
        CHECK(j.code == 0);
        CHECK(fs::exists(dir / "flow" / "step_0002.txt"));
        CHECK(fs::exists(dir / "flow" / "flow.csv"));
        CHECK(cli({"jko", "--mesh", M, "--rho0", A, "--functional", "crowd"}).code == 1);

        const Run o = cli({"oracle", "--mesh", M, "--rho0", A, "--rho1", B, "--euclidean"});
        CHECK(o.code == 0);
        CHECK(std::stod(o.out) > 0.0);
    }
    SUBCASE("harmonic with a boundary index")
    {
        write_text(dir / "index.txt", "# vertex density\n0 a.txt\n3 b.txt\n");
        const Run h = cli({"harmonic", "--mesh", M, "--domain", "segment:3", "--boundary",
                           (dir / "index.txt").string(), "--out", (dir / "harm").string()});
        CHECK(h.code == 0);
        CHECK(fs::exists(dir / "harm" / "vertex_0003.txt"));
        write_text(dir / "partial.txt", "0 a.txt\n");
        CHECK(cli({"harmonic", "--mesh", M, "--domain", "segment:3", "--boundary",
                   (dir / "partial.txt").string()}).code == 1);
    }
}
