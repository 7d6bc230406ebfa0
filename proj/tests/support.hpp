#pragma once

#include <cmath>
#include <random>

#include <meshot/mesh.hpp>
#include <meshot/mesh_generators.hpp>

namespace meshot::testing {

/// Cotangent stiffness matrix built edge by edge from the classical formula,
/// sharing no code with the gradient-based assembly.
inline SparseMatrix cotan_laplacian(const TriangleMesh& mesh)
{
    std::vector<Eigen::Triplet<double>> trip;
    for (const Face& f : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            const int i = f[(k + 1) % 3];
            const int j = f[(k + 2) % 3];
            const Vec3 a = mesh.vertices[i] - mesh.vertices[f[k]];
            const Vec3 b = mesh.vertices[j] - mesh.vertices[f[k]];
            const double cot = a.dot(b) / a.cross(b).norm();
            trip.emplace_back(i, j, -0.5 * cot);
            trip.emplace_back(j, i, -0.5 * cot);
            trip.emplace_back(i, i, 0.5 * cot);
            trip.emplace_back(j, j, 0.5 * cot);
        }
    }
    SparseMatrix L(mesh.num_vertices(), mesh.num_vertices());
    L.setFromTriplets(trip.begin(), trip.end());
    return L;
}

/// Positive density built from a few random low-frequency cosines.
inline Eigen::VectorXd smooth_random_density(const TriangleMesh& mesh, std::mt19937& rng)
{
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    std::uniform_real_distribution<double> freq(0.5, 3.0);
    Eigen::VectorXd out = Eigen::VectorXd::Constant(mesh.num_vertices(), 1.0);
    for (int term = 0; term < 3; ++term) {
        const Vec3 k(freq(rng), freq(rng), freq(rng));
        const double a = 0.3 * coef(rng);
        const double phase = 3.0 * coef(rng);
        for (int v = 0; v < mesh.num_vertices(); ++v) {
            out[v] += a * std::cos(k.dot(mesh.vertices[v]) + phase);
        }
    }
    return normalize_density(mesh, out).values;
}

/// Weighted L1 distance sum_v |v| |a - b|.
inline double l1(const TriangleMesh& mesh, const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
    return mesh.vertex_areas.dot((a - b).cwiseAbs());
}

} // namespace meshot::testing
