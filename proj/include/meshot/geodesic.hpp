#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <meshot/kronecker_solver.hpp>
#include <meshot/mesh.hpp>
#include <meshot/timegrid.hpp>

namespace meshot {

/// Per-copy momentum or slack vectors, one column per (t, i, face, corner).
using CopyField = Eigen::Matrix3Xd;

struct SolverConfig {
    int N = 31;
    /// Initial penalty; non-positive selects 1 / (total area)^2.
    double r = 0.0;
    double tol = 1e-4;
    int max_iters = 5000;
    double alpha = 0.0;
    bool penalty_adapt = true;
    /// Iterations between penalty checks.
    int adapt_interval = 10;
    LinearBackend backend = LinearBackend::Modal;

    void validate() const;
};

struct ResidualRecord {
    int iteration = 0;
    double primal = 0.0;
    double dual = 0.0;
    double r = 0.0;
    double objective = 0.0;
    /// max_t |sum_v |v| mu^t_v - 1|.
    double mass_defect = 0.0;
};

struct GeodesicResult {
    TimeGrid grid{1};
    /// Densities on the centered grid, N x |V|.
    TimeField mu_curve;
    /// Potential on the staggered grid, (N + 1) x |V|.
    TimeField phi;
    /// Momentum multipliers, index ((t * 2 + s) * |T| + f) * 3 + corner, s = 0 for i = -1.
    CopyField momentum;
    /// Density at t = 1 (the input for geodesics, the computed step for free endpoints).
    Eigen::VectorXd terminal;
    double distance = 0.0;
    double primal_action = 0.0;
    double dual_objective = 0.0;
    int iterations = 0;
    bool converged = false;
    double final_r = 0.0;
    std::vector<ResidualRecord> history;

    double gap() const;
};

///
/// Terminal term for a free endpoint: the objective gains g(mu(1)) with g
/// separable per vertex and weighted by vertex areas.
///
struct FreeEndpoint {
    /// prox_{r g}(z), applied per vertex.
    std::function<Eigen::VectorXd(const Eigen::VectorXd& z, double r)> prox;
    /// sum_v |v| g*(p_v).
    std::function<double(const Eigen::VectorXd& p)> conjugate;
};

/// Geodesic between two densities.
GeodesicResult solve_geodesic(const TriangleMesh& mesh, const MeshOperators& ops,
                              const DensityField& mu0, const DensityField& mu1,
                              const SolverConfig& cfg);

///
/// Minimizes action(mu0 -> mu) + g(mu) over the terminal density mu. The
/// reported dual objective is the optimal value of that sum.
///
GeodesicResult solve_free_endpoint(const TriangleMesh& mesh, const MeshOperators& ops,
                                   const DensityField& mu0, const FreeEndpoint& end,
                                   const SolverConfig& cfg);

/// Doubles or halves r when one residual dominates the other by a factor 10.
double update_penalty(double r, double primal, double dual);

/// Sum over faces of the two time copies and the three corner copies, halved.
/// Returns one 3-vector per (centered t, face): column t * |T| + f.
Eigen::Matrix3Xd face_momentum(const TriangleMesh& mesh, const CopyField& m, int N);

/// v = m / mu_hat per (t, face), zero where mu_hat < threshold / |f|.
Eigen::Matrix3Xd reconstruct_velocity(const TriangleMesh& mesh, const CopyField& m,
                                      const TimeField& mu_curve, double threshold = 1e-8);

///
/// sum_t tau sum_f |f| mu_hat |v|^2 / 2 with reconstructed velocities,
/// plus the congestion term alpha tau / 2 sum |v| mu^2 when alpha > 0.
///
double evaluate_action(const TriangleMesh& mesh, const CopyField& m,
                       const TimeField& mu_curve, double alpha = 0.0);

/// Squared norm of the tangent vector delta_mu at mu (mu strictly positive).
double tangent_norm(const TriangleMesh& mesh, const MeshOperators& ops,
                    const DensityField& mu, const Eigen::VectorXd& delta_mu);

/// Primitive steps, exposed for testing.
namespace admm {

/// mu + r (Dphi - A) and m + r (Gphi - B), for the plain (alpha = 0) constraint.
void dual_update(TimeField& mu, CopyField& m, const TimeField& Dphi, const CopyField& Gphi,
                 const TimeField& A, const CopyField& B, double r);

/// Slack copies of G phi: column ((t * 2 + s) * |T| + f) * 3 + j holds (G phi^{t+s})_f.
CopyField duplicate_gradients(const MeshOperators& ops, const TimeField& phi);

/// Adjoint of duplicate_gradients for the copy weights tau |f| / 2.
TimeField duplicate_gradients_adjoint(const TriangleMesh& mesh, const MeshOperators& ops,
                                      const CopyField& y, const TimeGrid& grid);

/// Operator and right-hand side of the potential step, divided by r.
struct PotentialSystem {
    SpaceTimeOperator op;
    TimeField rhs;
};

/// Assembles the potential step for the geodesic problem with alpha = 0.
PotentialSystem potential_system(const TriangleMesh& mesh, const MeshOperators& ops,
                                 const TimeGrid& grid, const Eigen::VectorXd& mu0,
                                 const Eigen::VectorXd& mu1, const TimeField& mu,
                                 const CopyField& m, const TimeField& A, const CopyField& B,
                                 double r);

} // namespace admm

} // namespace meshot
