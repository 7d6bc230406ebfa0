#pragma once

#include <vector>

#include <meshot/mesh.hpp>

namespace meshot {

///
/// Root of the scalar projection problem.
///
/// Every pointwise subproblem in the solvers reduces to finding beta >= 0 with
///     a - beta + S / (1 + beta/3)^2 = 0,
/// after which A = a - beta and every slack copy is scaled by 1 / (1 + beta/3).
/// Returns 0 when (a, S) is already feasible, i.e. a + S <= 0.
///
double paraboloid_shift(double a, double S);

/// One slack copy: its face area and its unconstrained target.
struct SlackCopy {
    double face_area = 0.0;
    Vec3 target = Vec3::Zero();
};

struct ProjectionResult {
    double A = 0.0;
    std::vector<Vec3> B;
    /// KKT multiplier of the quadratic constraint for the objective below.
    double multiplier = 0.0;
};

///
/// Closest point, for the weighted norm
///     |v| (A - a)^2 + sum_j (|f_j| / 2) |B_j - b_j|^2,
/// of the set  A + sum_j |f_j| |B_j|^2 / (12 |v|) <= 0.
/// The copies are the (i = -1, +1) x (faces around v) slack vectors.
///
ProjectionResult pointwise_projection(double a_target, double vertex_area,
                                      const std::vector<SlackCopy>& copies);

} // namespace meshot
