#include <doctest.h>

#include <random>

#include <meshot/timegrid.hpp>

using namespace meshot;

TEST_CASE("time derivative adjoint")
{
    std::mt19937 rng(3);
    std::normal_distribution<double> g;
    for (int N : {1, 2, 7, 31}) {
        const TimeGrid grid(N);
        TimeField phi(N + 1, 5);
        TimeField psi(N, 5);
        for (auto& x : phi.reshaped()) x = g(rng);
        for (auto& x : psi.reshaped()) x = g(rng);
        const double lhs = grid.tau * (time_derivative(grid, phi).cwiseProduct(psi)).sum();
        const double rhs = (phi.cwiseProduct(time_derivative_adjoint(grid, psi))).sum();
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("derivative and average of simple fields")
{
    const TimeGrid grid(4);
    CHECK(grid.tau == doctest::Approx(0.25));
    CHECK(grid.centered_time(0) == doctest::Approx(0.125));
    TimeField phi(5, 2);
    for (int k = 0; k <= 4; ++k) {
        phi(k, 0) = 3.0 * grid.staggered_time(k) - 1.0;
        phi(k, 1) = 2.0;
    }
    const TimeField d = time_derivative(grid, phi);
    const TimeField a = time_average(grid, phi);
    for (int t = 0; t < 4; ++t) {
        CHECK(d(t, 0) == doctest::Approx(3.0));
        CHECK(d(t, 1) == doctest::Approx(0.0));
        CHECK(a(t, 0) == doctest::Approx(3.0 * grid.centered_time(t) - 1.0));
        CHECK(a(t, 1) == doctest::Approx(2.0));
    }
}

TEST_CASE("time grid rejects bad shapes")
{
    CHECK_THROWS_AS(TimeGrid(0), std::invalid_argument);
    const TimeGrid grid(3);
    CHECK_THROWS_AS(time_derivative(grid, TimeField::Zero(3, 2)), std::invalid_argument);
    CHECK_THROWS_AS(time_derivative_adjoint(grid, TimeField::Zero(4, 2)), std::invalid_argument);
}
