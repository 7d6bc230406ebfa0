#pragma once

#include <meshot/mesh.hpp>

namespace meshot {

///
/// Regular triangulation of the rectangle [x0, x1] x [y0, y1] in the z = 0
/// plane with `points_x` by `points_y` vertices. Cell diagonals alternate in
/// a checkerboard pattern so the mesh has no preferred diagonal direction.
/// Vertex (i, j) has index j * points_x + i.
///
TriangleMesh make_grid(int points_x, int points_y, double x0 = 0.0, double y0 = 0.0,
                       double x1 = 1.0, double y1 = 1.0);

/// Unit-square grid with `points_per_side` vertices along each side.
inline TriangleMesh make_unit_square(int points_per_side)
{
    return make_grid(points_per_side, points_per_side);
}

/// Subdivided icosahedron projected to the unit sphere.
TriangleMesh make_icosphere(int subdivisions);

/// Icosphere with the one-ring of its first vertex removed (a disk-like hole).
TriangleMesh make_punctured_sphere(int subdivisions);

/// Index of the vertex closest to `p`.
int closest_vertex(const TriangleMesh& mesh, const Vec3& p);

} // namespace meshot
