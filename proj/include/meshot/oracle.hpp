#pragma once

#include <vector>

#include <meshot/geodesic.hpp>

namespace meshot {

enum class DistanceMode { Graph, Euclidean };

///
/// All-pairs vertex distances: shortest paths along mesh edges, or straight
/// lines (exact geodesics only on flat convex meshes).
///
Eigen::MatrixXd graph_distances(const TriangleMesh& mesh, DistanceMode mode = DistanceMode::Graph);

/// Cost c(u, v) = d(u, v)^2 / 2.
Eigen::MatrixXd cost_matrix(const Eigen::MatrixXd& distances);

struct TransportPlan {
    double value = 0.0;
    /// Mass moved from u to w (rows: sources, columns: targets).
    Eigen::MatrixXd plan;
};

///
/// Exact discrete optimal transport between the atoms |v| mu0_v and |v| mu1_v,
/// solved with the transportation simplex.
///
TransportPlan lp_transport(const Eigen::MatrixXd& cost, const TriangleMesh& mesh,
                           const DensityField& mu0, const DensityField& mu1);

/// Same, for explicit atom masses (each side summing to the same total).
TransportPlan lp_transport(const Eigen::MatrixXd& cost, const Eigen::VectorXd& supply,
                           const Eigen::VectorXd& demand);

/// Normalized bump (1 - |x - c|^2 / R^2)^2 supported in the ball of radius R.
DensityField bump_density(const TriangleMesh& mesh, const Vec3& center, double radius);

struct ConvergenceRow {
    int side = 0;
    int N = 0;
    double l1_error = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct ConvergenceSetup {
    Vec3 start{0.3, 0.3, 0.0};
    Vec3 end{0.7, 0.7, 0.0};
    double radius = 0.2;
    SolverConfig solver;
};

///
/// Unit-square grids with the given points per side; a bump moves from
/// `start` to `end`, and the density at t = 1/2 is compared in weighted L1
/// with the bump centred halfway. Every N must be odd.
///
std::vector<ConvergenceRow> convergence_experiment(const std::vector<int>& side_counts,
                                                   const std::vector<int>& N_values,
                                                   const ConvergenceSetup& setup);

} // namespace meshot
