#pragma once

#include <vector>

#include <meshot/geodesic.hpp>

namespace meshot {

enum class FunctionalKind { Crowd, Porous };

///
/// Energy driving a gradient flow.
/// Crowd: sum |v| W_v mu_v, +inf when some mu_v exceeds the cap.
/// Porous: sum |v| mu_v^m / (m - 1).
///
struct FlowFunctional {
    FunctionalKind kind = FunctionalKind::Porous;
    Eigen::VectorXd potential; // crowd only, one value per vertex
    double cap = 0.0;          // crowd only
    double exponent = 2.0;     // porous only

    void validate(const TriangleMesh& mesh) const;
};

FlowFunctional crowd_functional(Eigen::VectorXd potential, double cap);
FlowFunctional porous_functional(double exponent);

double evaluate_functional(const FlowFunctional& F, const TriangleMesh& mesh,
                           const Eigen::VectorXd& mu);

/// Per-vertex conjugate of c * F at vertex v: sup_{x >= 0} (p x - c F_v(x)).
double functional_conjugate(const FlowFunctional& F, double c, int v, double p);

/// Per-vertex prox: argmin_{x >= 0} r c F_v(x) + (x - z)^2 / 2.
double functional_prox(const FlowFunctional& F, double c, int v, double z, double r);

struct JkoStep {
    DensityField density;
    double energy = 0.0;
    /// Action of the inner transport curve, an estimate of W_d^2 to the previous density.
    double transport_cost = 0.0;
    GeodesicResult inner;
};

/// Default inner configuration: five time steps, tolerance 1e-3.
SolverConfig default_jko_config();

///
/// One minimizing-movement step: argmin_mu W_d^2(mu_prev, mu) / (2 s) + F(mu).
///
JkoStep jko_step(const TriangleMesh& mesh, const MeshOperators& ops, const DensityField& mu_prev,
                 const FlowFunctional& F, double s, const SolverConfig& cfg);

struct FlowTrace {
    std::vector<Eigen::VectorXd> densities; // steps + 1 entries, starting with mu0
    std::vector<double> energies;
    std::vector<double> transport_costs; // one per step
    std::vector<int> inner_iterations;
    bool all_converged = true;
};

FlowTrace run_flow(const TriangleMesh& mesh, const MeshOperators& ops, const DensityField& mu0,
                   const FlowFunctional& F, double s, int steps, const SolverConfig& cfg);

} // namespace meshot
