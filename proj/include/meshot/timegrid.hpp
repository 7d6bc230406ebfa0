#pragma once

#include <Eigen/Core>

namespace meshot {

/// Space-time slab: rows are time slices, columns are vertices.
using TimeField = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Uniform grid on [0, 1] with N centered cells and N + 1 staggered nodes.
struct TimeGrid {
    int N = 1;
    double tau = 1.0;

    explicit TimeGrid(int steps);

    int staggered_count() const { return N + 1; }
    int centered_count() const { return N; }
    double staggered_time(int k) const { return k * tau; }
    double centered_time(int t) const { return (t + 0.5) * tau; }
};

/// Forward difference from N + 1 staggered rows to N centered rows.
TimeField time_derivative(const TimeGrid& grid, const TimeField& phi);

/// Mean of neighbouring staggered rows.
TimeField time_average(const TimeGrid& grid, const TimeField& phi);

///
/// Adjoint of time_derivative for the inner products
/// <a, b>_centered = tau * sum a b and <a, b>_staggered = sum a b.
/// Returns N + 1 rows: (D^T psi)^k = psi^{k-1} - psi^k with psi^{-1} = psi^N = 0.
///
TimeField time_derivative_adjoint(const TimeGrid& grid, const TimeField& psi);

} // namespace meshot
