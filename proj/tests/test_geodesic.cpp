#include <doctest.h>

#include <random>

#include <meshot/geodesic.hpp>
#include <meshot/oracle.hpp>

#include "support.hpp"

using namespace meshot;

TEST_CASE("config validation")
{
    SolverConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.N = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = SolverConfig{};
    cfg.tol = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = SolverConfig{};
    cfg.alpha = -1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("penalty update rule")
{
    CHECK(update_penalty(1.0, 11.0, 1.0) == 2.0);
    CHECK(update_penalty(1.0, 1.0, 11.0) == 0.5);
    CHECK(update_penalty(1.0, 5.0, 1.0) == 1.0);
    CHECK(update_penalty(1.0, 1.0, 5.0) == 1.0);
}

TEST_CASE("unnormalized densities are rejected")
{
    const TriangleMesh mesh = make_unit_square(4);
    const MeshOperators ops = build_operators(mesh);
    const DensityField good = normalize_density(mesh, Eigen::VectorXd::Ones(mesh.num_vertices()));
    DensityField bad{2.0 * good.values};
    CHECK_THROWS_AS(solve_geodesic(mesh, ops, good, bad, SolverConfig{}), InputError);
    bad.values = good.values;
    bad.values[0] = -1e-3;
    CHECK_THROWS_AS(solve_geodesic(mesh, ops, bad, good, SolverConfig{}), InputError);
}

TEST_CASE("identical endpoints give a static curve")
{
    const TriangleMesh mesh = make_icosphere(1);
    const MeshOperators ops = build_operators(mesh);
    std::mt19937 rng(1);
    const DensityField mu{testing::smooth_random_density(mesh, rng)};
    SolverConfig cfg;
    cfg.N = 7;
    const GeodesicResult res = solve_geodesic(mesh, ops, mu, mu, cfg);
    CHECK(res.converged);
    CHECK(res.distance <= 1e-5);
    for (int t = 0; t < cfg.N; ++t) {
        CHECK((res.mu_curve.row(t).transpose() - mu.values).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("translated bump: distance, mass and velocity")
{
    const TriangleMesh mesh = make_unit_square(14);
    const MeshOperators ops = build_operators(mesh);
    const Vec3 shift(0.35, 0.25, 0.0);
    const DensityField mu0 = bump_density(mesh, Vec3(0.3, 0.3, 0.0), 0.25);
    const DensityField mu1 = bump_density(mesh, Vec3(0.3, 0.3, 0.0) + shift, 0.25);
    SolverConfig cfg;
    cfg.N = 9;
    const GeodesicResult res = solve_geodesic(mesh, ops, mu0, mu1, cfg);
    REQUIRE(res.converged);
    CHECK(res.distance == doctest::Approx(shift.norm() / std::sqrt(2.0)).epsilon(0.05));
    // Reconstructed action and dual objective use different face averages.
    CHECK(std::abs(res.gap()) <= 0.03 * res.dual_objective);
    for (int t = 0; t < cfg.N; ++t) {
        CHECK(total_mass(mesh, res.mu_curve.row(t).transpose()) == doctest::Approx(1.0).epsilon(1e-5));
    }

    // Mass-weighted mean velocity equals the displacement.
    const Eigen::Matrix3Xd vel = reconstruct_velocity(mesh, res.momentum, res.mu_curve);
    Vec3 mean = Vec3::Zero();
    double weight = 0.0;
    for (int t = 0; t < cfg.N; ++t) {
        const Eigen::VectorXd mu_hat = average_to_faces(mesh, res.mu_curve.row(t).transpose());
        for (int f = 0; f < mesh.num_faces(); ++f) {
            const double w = mesh.face_areas[f] * mu_hat[f];
            mean += w * vel.col(t * mesh.num_faces() + f);
            weight += w;
        }
    }
    mean /= weight;
    CHECK((mean - shift).norm() <= 0.05 * shift.norm());
    CHECK(res.primal_action == doctest::Approx(res.dual_objective).epsilon(0.02));

    // Swapping the endpoints reverses the curve and keeps the distance.
    const GeodesicResult back = solve_geodesic(mesh, ops, mu1, mu0, cfg);
    CHECK(back.distance == doctest::Approx(res.distance).epsilon(1e-3));
}

TEST_CASE("face momentum combines the six copies")
{
    const TriangleMesh mesh = make_unit_square(3);
    const int N = 2;
    CopyField m = CopyField::Zero(3, N * 2 * mesh.num_faces() * 3);
    const Vec3 w(1.0, -2.0, 0.5);
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        m.col(c) = w;
    }
    const Eigen::Matrix3Xd mh = face_momentum(mesh, m, N);
    for (Eigen::Index c = 0; c < mh.cols(); ++c) {
        CHECK((mh.col(c) - 3.0 * w).norm() < 1e-14);
    }
    const TimeField mu = TimeField::Constant(N, mesh.num_vertices(), 2.0);
    const Eigen::Matrix3Xd v = reconstruct_velocity(mesh, m, mu);
    CHECK((v.col(0) - 1.5 * w).norm() < 1e-14);
    // 0.5 * sum_t tau sum_f |f| mu |v|^2 with total area 1.
    CHECK(evaluate_action(mesh, m, mu) == doctest::Approx(0.5 * 2.0 * (1.5 * w).squaredNorm()));
    CHECK(evaluate_action(mesh, m, mu, 0.1) ==
          doctest::Approx(0.5 * 2.0 * (1.5 * w).squaredNorm() + 0.05 * 4.0));
}

TEST_CASE("gradient copies and their adjoint")
{
    std::mt19937 rng(2);
    std::normal_distribution<double> g;
    const TriangleMesh mesh = make_punctured_sphere(1);
    const MeshOperators ops = build_operators(mesh);
    const TimeGrid grid(3);
    TimeField phi(4, mesh.num_vertices());
    for (auto& x : phi.reshaped()) x = g(rng);
    const CopyField Gphi = admm::duplicate_gradients(ops, phi);
    CopyField y(3, Gphi.cols());
    for (auto& x : y.reshaped()) x = g(rng);
    double lhs = 0.0;
    for (Eigen::Index c = 0; c < y.cols(); ++c) {
        const int f = static_cast<int>((c / 3) % mesh.num_faces());
        lhs += grid.tau * mesh.face_areas[f] / 2.0 * y.col(c).dot(Gphi.col(c));
    }
    const double rhs = phi.cwiseProduct(admm::duplicate_gradients_adjoint(mesh, ops, y, grid)).sum();
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    // Copy (t, s) holds the gradient of staggered row t + s.
    const Eigen::VectorXd g2 = ops.gradient * phi.row(2).transpose();
    const int f = 4;
    CHECK((Gphi.col(((1 * 2 + 1) * mesh.num_faces() + f) * 3 + 2) - g2.segment<3>(3 * f)).norm() < 1e-14);
}

TEST_CASE("dual update")
{
    TimeField mu = TimeField::Ones(2, 3);
    CopyField m = CopyField::Zero(3, 2);
    admm::dual_update(mu, m, TimeField::Constant(2, 3, 2.0), CopyField::Ones(3, 2),
                      TimeField::Constant(2, 3, 1.5), CopyField::Zero(3, 2), 4.0);
    CHECK(mu.isApproxToConstant(3.0));
    CHECK(m.isApproxToConstant(4.0));
}

TEST_CASE("potential step vanishes at a static optimum")
{
    const TriangleMesh mesh = make_unit_square(5);
    const MeshOperators ops = build_operators(mesh);
    const TimeGrid grid(4);
    std::mt19937 rng(4);
    const Eigen::VectorXd mu0 = testing::smooth_random_density(mesh, rng);
    TimeField mu(4, mesh.num_vertices());
    for (int t = 0; t < 4; ++t) mu.row(t) = mu0.transpose();
    const CopyField zero = CopyField::Zero(3, 4 * 2 * mesh.num_faces() * 3);
    const admm::PotentialSystem sys =
        admm::potential_system(mesh, ops, grid, mu0, mu0, mu, zero, TimeField::Zero(4, mesh.num_vertices()), zero, 2.0);
    CHECK(sys.rhs.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("tangent norm of a cosine mode on a flat strip")
{
    // Uniform mu on [0, L] x [0, 1] and delta = cos(k x): phi = cos(k x) / (mu k^2), so
    // |delta|^2 = 1/2 int mu |grad phi|^2 = area / (4 mu k^2).
    const double L = 2.0;
    const TriangleMesh mesh = make_grid(61, 16, 0.0, 0.0, L, 1.0);
    const MeshOperators ops = build_operators(mesh);
    const double mu_value = 1.0 / L;
    const DensityField mu{Eigen::VectorXd::Constant(mesh.num_vertices(), mu_value)};
    const double k = M_PI / L;
    Eigen::VectorXd delta(mesh.num_vertices());
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        delta[v] = std::cos(k * mesh.vertices[v].x());
    }
    delta.array() -= mesh.vertex_areas.dot(delta) / L;
    const double expected = L / (4.0 * mu_value * k * k);
    CHECK(tangent_norm(mesh, ops, mu, delta) == doctest::Approx(expected).epsilon(0.01));
    CHECK_THROWS_AS(tangent_norm(mesh, ops, mu, delta + Eigen::VectorXd::Ones(delta.size())), InputError);
}
