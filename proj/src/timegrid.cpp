#include <meshot/timegrid.hpp>

#include <stdexcept>

namespace meshot {

TimeGrid::TimeGrid(int steps) : N(steps), tau(1.0 / steps)
{
    if (steps < 1) {
        throw std::invalid_argument("time grid needs at least one step");
    }
}

namespace {

void check_staggered(const TimeGrid& grid, const TimeField& phi)
{
    if (phi.rows() != grid.staggered_count()) {
        throw std::invalid_argument("field does not live on the staggered grid");
    }
}

} // namespace

TimeField time_derivative(const TimeGrid& grid, const TimeField& phi)
{
    check_staggered(grid, phi);
    return (phi.bottomRows(grid.N) - phi.topRows(grid.N)) / grid.tau;
}

TimeField time_average(const TimeGrid& grid, const TimeField& phi)
{
    check_staggered(grid, phi);
    return 0.5 * (phi.bottomRows(grid.N) + phi.topRows(grid.N));
}

TimeField time_derivative_adjoint(const TimeGrid& grid, const TimeField& psi)
{
    if (psi.rows() != grid.centered_count()) {
        throw std::invalid_argument("field does not live on the centered grid");
    }
    TimeField out = TimeField::Zero(grid.staggered_count(), psi.cols());
    out.topRows(grid.N) -= psi;
    out.bottomRows(grid.N) += psi;
    return out;
}

} // namespace meshot
