#include <meshot/projection.hpp>

#include <cmath>
#include <stdexcept>

namespace meshot {

namespace {

double residual(double a, double S, double beta)
{
    const double s = 1.0 + beta / 3.0;
    return a - beta + S / (s * s);
}

} // namespace

double paraboloid_shift(double a, double S)
{
    if (a + S <= 0.0) {
        return 0.0;
    }
    const double scale = 1.0 + std::abs(a) + S;
    // g is convex and decreasing, so Newton from zero climbs monotonically to the root.
    double beta = 0.0;
    for (int it = 0; it < 50; ++it) {
        const double s = 1.0 + beta / 3.0;
        const double g = a - beta + S / (s * s);
        if (std::abs(g) <= 1e-12 * scale) {
            return beta;
        }
        const double dg = -1.0 - (2.0 / 3.0) * S / (s * s * s);
        const double next = beta - g / dg;
        if (!(next >= beta) || !std::isfinite(next)) {
            break;
        }
        beta = next;
    }

    double lo = 0.0;
    double hi = 1.0;
    while (residual(a, S, hi) > 0.0) {
        lo = hi;
        hi *= 2.0;
        if (!std::isfinite(hi)) {
            throw std::runtime_error("projection bracket diverged");
        }
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (residual(a, S, mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

ProjectionResult pointwise_projection(double a_target, double vertex_area,
                                      const std::vector<SlackCopy>& copies)
{
    if (!(vertex_area > 0.0)) {
        throw std::invalid_argument("vertex area must be positive");
    }
    double S = 0.0;
    for (const SlackCopy& c : copies) {
        S += c.face_area / (12.0 * vertex_area) * c.target.squaredNorm();
    }
    const double beta = paraboloid_shift(a_target, S);
    ProjectionResult out;
    out.A = a_target - beta;
    out.multiplier = 2.0 * vertex_area * beta;
    out.B.reserve(copies.size());
    const double shrink = 1.0 / (1.0 + beta / 3.0);
    for (const SlackCopy& c : copies) {
        out.B.push_back(shrink * c.target);
    }
    return out;
}

} // namespace meshot
