#pragma once

#include <array>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SparseCore>

namespace meshot {

using Vec3 = Eigen::Vector3d;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Face = std::array<int, 3>;

/// Thrown for malformed mesh files and invalid connectivity or geometry.
class MeshError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown when a density or other per-vertex input violates its contract.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

///
/// Triangulated surface with cached per-face and per-vertex geometry.
///
/// Vertex areas are barycentric dual-cell areas: one third of the summed
/// area of the incident faces. Build instances through make_mesh() or
/// load_mesh(); both validate connectivity.
///
struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    Eigen::VectorXd face_areas;
    Eigen::VectorXd vertex_areas;
    std::vector<Vec3> face_normals;
    /// Orthonormal pair spanning each face plane.
    std::vector<std::array<Vec3, 2>> face_tangent_basis;

    int num_vertices() const { return static_cast<int>(vertices.size()); }
    int num_faces() const { return static_cast<int>(faces.size()); }
    double total_area() const { return face_areas.sum(); }
};

/// One nonnegative density value per vertex (units 1/area).
struct DensityField {
    Eigen::VectorXd values;

    Eigen::Index size() const { return values.size(); }
    double operator[](Eigen::Index i) const { return values[i]; }
};

///
/// Linear operators of the first-order finite element discretization.
///
/// `gradient` maps per-vertex values to one ambient 3-vector per face (rows
/// 3f..3f+2). `laplacian` is gradient^T * diag(face_mass) * gradient, the
/// positive semidefinite cotangent stiffness matrix.
///
struct MeshOperators {
    SparseMatrix gradient;
    Eigen::VectorXd face_mass;   // 3|T|, each face area repeated three times
    Eigen::VectorXd vertex_mass; // |V|
    SparseMatrix laplacian;
    /// Gradient of the hat function of the j-th corner of each face.
    std::vector<std::array<Vec3, 3>> hat_gradients;
    /// Corners (3 * face + slot) incident to each vertex, CSR layout.
    std::vector<int> corner_offsets;
    std::vector<int> corners;
};

enum class MeshFormat { Off, Obj };

/// Validates connectivity and computes cached geometry.
TriangleMesh make_mesh(std::vector<Vec3> vertices, std::vector<Face> faces);

TriangleMesh load_mesh(const std::filesystem::path& path, MeshFormat format);
/// Picks the format from the file extension (.off / .obj).
TriangleMesh load_mesh(const std::filesystem::path& path);

void save_off(const TriangleMesh& mesh, const std::filesystem::path& path);

MeshOperators build_operators(const TriangleMesh& mesh);

/// Per-face mean of the three vertex values.
Eigen::VectorXd average_to_faces(const TriangleMesh& mesh, const Eigen::VectorXd& mu);

/// Area-weighted total mass sum_v |v| mu_v.
double total_mass(const TriangleMesh& mesh, const Eigen::VectorXd& mu);

/// Scales a nonnegative, not identically zero vector to unit mass.
DensityField normalize_density(const TriangleMesh& mesh, const Eigen::VectorXd& raw);

/// Unit-mass spike 1/|v| at a single vertex.
DensityField delta_density(const TriangleMesh& mesh, int vertex);

} // namespace meshot
