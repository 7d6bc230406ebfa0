#include <doctest.h>

#include <random>

#include <meshot/kronecker_solver.hpp>

#include "support.hpp"

using namespace meshot;

namespace {

/// Dense matrix of op acting on row-major slabs.
Eigen::MatrixXd dense(const SpaceTimeOperator& op)
{
    const int n = op.outer_size() * op.space_size();
    Eigen::MatrixXd out(n, n);
    for (int c = 0; c < n; ++c) {
        TimeField e = TimeField::Zero(op.outer_size(), op.space_size());
        e.reshaped<Eigen::RowMajor>()[c] = 1.0;
        out.col(c) = op.apply(e).reshaped<Eigen::RowMajor>();
    }
    return out;
}

SpaceTimeOperator time_operator(const TriangleMesh& mesh, int N, double p_scale, bool free_end)
{
    const MeshOperators ops = build_operators(mesh);
    const TimeGrid grid(N);
    SpaceTimeOperator op;
    op.P = p_scale * derivative_gram(grid);
    if (free_end) {
        op.P(N, N) += 1.0;
    }
    op.Q = gradient_copy_weights(grid);
    op.M = mesh.vertex_areas;
    op.L = ops.laplacian;
    return op;
}

TimeField random_slab(int rows, int cols, std::mt19937& rng)
{
    std::normal_distribution<double> g;
    TimeField x(rows, cols);
    for (auto& v : x.reshaped()) v = g(rng);
    return x;
}

} // namespace

TEST_CASE("outer matrices")
{
    const TimeGrid grid(4);
    const Eigen::MatrixXd T = derivative_gram(grid);
    // tau * D^T D with D the forward difference divided by tau.
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(4, 5);
    for (int t = 0; t < 4; ++t) {
        D(t, t) = -1.0 / grid.tau;
        D(t, t + 1) = 1.0 / grid.tau;
    }
    CHECK((T - grid.tau * D.transpose() * D).norm() < 1e-12);
    const Eigen::VectorXd w = gradient_copy_weights(grid);
    CHECK(w[0] == doctest::Approx(1.5 * grid.tau));
    CHECK(w[2] == doctest::Approx(3.0 * grid.tau));
    CHECK(w[4] == doctest::Approx(1.5 * grid.tau));
}

TEST_CASE("modal and direct backends agree with a dense solve")
{
    std::mt19937 rng(5);
    const TriangleMesh mesh = make_grid(5, 4, 0, 0, 1.3, 1.0);
    for (bool free_end : {true, false}) {
        for (double p_scale : {1.0, 0.25}) {
            const SpaceTimeOperator op = time_operator(mesh, 6, p_scale, free_end);
            const Eigen::MatrixXd A = dense(op);
            // Right-hand side in the range of the operator.
            const TimeField rhs = op.apply(random_slab(op.outer_size(), op.space_size(), rng));
            const Eigen::VectorXd ref =
                A.completeOrthogonalDecomposition().solve(Eigen::VectorXd(rhs.reshaped<Eigen::RowMajor>()));
            for (LinearBackend backend : {LinearBackend::Modal, LinearBackend::Direct}) {
                const TimeField X = make_space_time_solver(op, backend)->solve(rhs);
                CHECK((op.apply(X) - rhs).norm() <= 1e-9 * rhs.norm());
                const Eigen::VectorXd diff = Eigen::VectorXd(X.reshaped<Eigen::RowMajor>()) - ref;
                if (free_end) {
                    CHECK(diff.norm() <= 1e-9 * ref.norm());
                } else {
                    // Solutions differ only by a constant.
                    CHECK((diff.array() - diff.mean()).matrix().norm() <= 1e-9 * ref.norm());
                }
            }
        }
    }
}

TEST_CASE("singular operator: inconsistent data is projected onto the range")
{
    std::mt19937 rng(8);
    const TriangleMesh mesh = make_icosphere(1);
    const SpaceTimeOperator op = time_operator(mesh, 4, 1.0, false);
    TimeField rhs = random_slab(op.outer_size(), op.space_size(), rng);
    const TimeField Xm = make_space_time_solver(op, LinearBackend::Modal)->solve(rhs);
    const TimeField Xd = make_space_time_solver(op, LinearBackend::Direct)->solve(rhs);
    // The kernel is the constant slab; both solve the system with its component removed.
    rhs.array() -= rhs.mean();
    CHECK((op.apply(Xm) - rhs).norm() <= 1e-9 * rhs.norm());
    CHECK((op.apply(Xd) - rhs).norm() <= 1e-9 * rhs.norm());
    const TimeField diff = Xm - Xd;
    CHECK((diff.array() - diff.mean()).matrix().norm() <= 1e-9 * Xm.norm());
}

TEST_CASE("solver rejects inconsistent blocks")
{
    const TriangleMesh mesh = make_unit_square(3);
    SpaceTimeOperator op = time_operator(mesh, 2, 1.0, true);
    op.M = Eigen::VectorXd::Ones(4);
    CHECK_THROWS_AS(make_space_time_solver(op, LinearBackend::Modal), std::invalid_argument);
}
