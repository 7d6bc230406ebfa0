#pragma once

#include <vector>

#include <Eigen/Core>

#include <meshot/geodesic.hpp>

namespace meshot {

///
/// Parameter domain: a segment split into intervals (dim 1) or a planar
/// triangulation (dim 2). Cells carry their measure and the gradients of
/// their barycentric coordinates; only the first `dim` components of the
/// 2-vectors are used.
///
struct DomainMesh {
    int dim = 1;
    std::vector<Eigen::Vector2d> points;
    std::vector<std::vector<int>> cells;
    std::vector<double> cell_measure;
    std::vector<std::vector<Eigen::Vector2d>> cell_gradients;
    std::vector<double> vertex_measure;
    /// Boundary vertices and their flux vectors sum_F |F| grad(lambda_x^F),
    /// which equal half the incident boundary edge lengths times the outward normal.
    std::vector<int> boundary;
    std::vector<Eigen::Vector2d> boundary_flux;

    int num_vertices() const { return static_cast<int>(points.size()); }
    int num_cells() const { return static_cast<int>(cells.size()); }
};

/// Segment [0, length] with `intervals` equal cells; boundary = {0, intervals}.
DomainMesh make_segment_domain(int intervals, double length = 1.0);

/// Planar triangulation; boundary vertices are the endpoints of unshared edges.
DomainMesh make_planar_domain(std::vector<Eigen::Vector2d> points, std::vector<Face> triangles);

/// Equilateral triangle with unit sides, each side split into `divisions` pieces.
/// Corners are vertices 0, 1, 2 at (0,0), (1,0), (1/2, sqrt(3)/2).
DomainMesh make_triangle_domain(int divisions);

/// One density per entry of domain.boundary, in the same order.
struct BoundaryData {
    std::vector<DensityField> densities;
};

struct HarmonicResult {
    /// Density per (domain cell, target vertex).
    TimeField cell_mu;
    /// Per domain vertex: boundary data on the boundary, measure-weighted cell average inside.
    TimeField vertex_mu;
    /// Potential rows indexed by domain vertex * dim + component.
    TimeField phi;
    /// Reconstructed Dirichlet energy.
    double energy = 0.0;
    double dual_objective = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<ResidualRecord> history;
};

HarmonicResult solve_harmonic(const DomainMesh& domain, const TriangleMesh& target,
                              const MeshOperators& ops, const BoundaryData& bc,
                              const SolverConfig& cfg);

} // namespace meshot
