#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "support.hpp"

using namespace meshot;

namespace {

double max_rel_diff(const SparseMatrix& a, const SparseMatrix& b)
{
    const Eigen::MatrixXd da = Eigen::MatrixXd(a);
    const Eigen::MatrixXd db = Eigen::MatrixXd(b);
    return (da - db).cwiseAbs().maxCoeff() / db.cwiseAbs().maxCoeff();
}

std::filesystem::path temp_file(const std::string& name)
{
    return std::filesystem::temp_directory_path() / ("meshot_test_" + name);
}

} // namespace

TEST_CASE("laplacian agrees with edge-wise cotangent weights")
{
    for (const TriangleMesh& mesh :
         {make_unit_square(7), make_icosphere(1), make_punctured_sphere(1), make_grid(5, 3, 0, 0, 4, 1)}) {
        const MeshOperators ops = build_operators(mesh);
        CHECK(max_rel_diff(ops.laplacian, testing::cotan_laplacian(mesh)) < 1e-12);
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(mesh.num_vertices());
        CHECK((ops.laplacian * ones).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("gradient reproduces linear functions and stays tangent")
{
    const TriangleMesh flat = make_grid(6, 5, -1.0, 0.0, 2.0, 1.5);
    const MeshOperators ops = build_operators(flat);
    Eigen::VectorXd f(flat.num_vertices());
    for (int v = 0; v < flat.num_vertices(); ++v) {
        f[v] = 2.0 * flat.vertices[v].x() - 0.5 * flat.vertices[v].y() + 3.0;
    }
    const Eigen::VectorXd g = ops.gradient * f;
    for (int t = 0; t < flat.num_faces(); ++t) {
        CHECK(g[3 * t] == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(g[3 * t + 1] == doctest::Approx(-0.5).epsilon(1e-12));
        CHECK(std::abs(g[3 * t + 2]) < 1e-12);
    }

    const TriangleMesh sphere = make_icosphere(2);
    const MeshOperators sops = build_operators(sphere);
    Eigen::VectorXd h(sphere.num_vertices());
    for (int v = 0; v < sphere.num_vertices(); ++v) {
        h[v] = std::sin(3.0 * sphere.vertices[v].x()) + sphere.vertices[v].z();
    }
    const Eigen::VectorXd gs = sops.gradient * h;
    for (int t = 0; t < sphere.num_faces(); ++t) {
        CHECK(std::abs(gs.segment<3>(3 * t).dot(sphere.face_normals[t])) < 1e-12);
    }
}

TEST_CASE("area identities")
{
    const TriangleMesh mesh = make_punctured_sphere(2);
    const MeshOperators ops = build_operators(mesh);
    CHECK(mesh.vertex_areas.sum() == doctest::Approx(mesh.total_area()).epsilon(1e-13));
    CHECK(ops.face_mass.sum() == doctest::Approx(3.0 * mesh.total_area()).epsilon(1e-13));
    CHECK(make_unit_square(9).total_area() == doctest::Approx(1.0).epsilon(1e-14));
    // Laplacian equals G^T M_T G.
    const SparseMatrix GtMG = SparseMatrix(ops.gradient.transpose()) * ops.face_mass.asDiagonal() * ops.gradient;
    CHECK(max_rel_diff(GtMG, ops.laplacian) < 1e-12);
    // Every corner list entry points back at its vertex.
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        for (int k = ops.corner_offsets[v]; k < ops.corner_offsets[v + 1]; ++k) {
            const int c = ops.corners[k];
            CHECK(mesh.faces[c / 3][c % 3] == v);
        }
    }
}

TEST_CASE("hat gradients sum to zero on each face")
{
    const TriangleMesh mesh = make_icosphere(1);
    const MeshOperators ops = build_operators(mesh);
    for (const auto& g : ops.hat_gradients) {
        CHECK((g[0] + g[1] + g[2]).norm() < 1e-12);
    }
}

TEST_CASE("OFF and OBJ round trip")
{
    const TriangleMesh mesh = make_punctured_sphere(1);
    const auto off = temp_file("roundtrip.off");
    save_off(mesh, off);
    const TriangleMesh back = load_mesh(off);
    REQUIRE(back.num_vertices() == mesh.num_vertices());
    REQUIRE(back.num_faces() == mesh.num_faces());
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        CHECK(back.vertices[v] == mesh.vertices[v]);
    }

    const auto obj = temp_file("tri.obj");
    {
        std::ofstream out(obj);
        out << "# comment\nv 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nvn 0 0 1\nf 1//1 2//1 3//1\nf 2/1/1 4/1/1 3/1/1\n";
    }
    const TriangleMesh quad = load_mesh(obj);
    CHECK(quad.num_faces() == 2);
    CHECK(quad.total_area() == doctest::Approx(1.0));
}

TEST_CASE("malformed meshes are rejected")
{
    const auto bad = temp_file("bad.off");
    {
        std::ofstream out(bad);
        out << "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 5\n";
    }
    CHECK_THROWS_AS(load_mesh(bad), MeshError);
    {
        std::ofstream out(bad);
        out << "OFF\n4 1 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 1 2\n";
    }
    CHECK_THROWS_AS(load_mesh(bad), MeshError); // isolated vertex
    {
        std::ofstream out(bad);
        out << "OFF\n3 1 0\n0 0 0\n1 0 0\n2 0 0\n3 0 1 2\n";
    }
    CHECK_THROWS_AS(load_mesh(bad), MeshError); // zero area
    CHECK_THROWS_AS(load_mesh(temp_file("missing.off")), MeshError);
    CHECK_THROWS_AS(make_mesh({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}, {{0, 1, 1}}), MeshError);
}

TEST_CASE("density helpers")
{
    const TriangleMesh mesh = make_unit_square(5);
    const DensityField d = delta_density(mesh, 7);
    CHECK(d[7] == doctest::Approx(1.0 / mesh.vertex_areas[7]));
    CHECK(total_mass(mesh, d.values) == doctest::Approx(1.0));
    Eigen::VectorXd raw = Eigen::VectorXd::Constant(mesh.num_vertices(), 3.0);
    CHECK(normalize_density(mesh, raw).values.isApproxToConstant(1.0, 1e-14));
    raw[2] = -1.0;
    CHECK_THROWS_AS(normalize_density(mesh, raw), InputError);
    raw[2] = std::nan("");
    CHECK_THROWS_AS(normalize_density(mesh, raw), InputError);
    CHECK_THROWS_AS(delta_density(mesh, mesh.num_vertices()), InputError);
}
