#include <meshot/mesh_generators.hpp>

#include <map>

namespace meshot {

TriangleMesh make_grid(int points_x, int points_y, double x0, double y0, double x1, double y1)
{
    if (points_x < 2 || points_y < 2) {
        throw MeshError("grid needs at least two points per side");
    }
    std::vector<Vec3> vertices;
    vertices.reserve(static_cast<std::size_t>(points_x) * points_y);
    for (int j = 0; j < points_y; ++j) {
        for (int i = 0; i < points_x; ++i) {
            const double x = x0 + (x1 - x0) * i / (points_x - 1);
            const double y = y0 + (y1 - y0) * j / (points_y - 1);
            vertices.emplace_back(x, y, 0.0);
        }
    }
    auto id = [points_x](int i, int j) { return j * points_x + i; };
    std::vector<Face> faces;
    faces.reserve(2 * static_cast<std::size_t>(points_x - 1) * (points_y - 1));
    for (int j = 0; j + 1 < points_y; ++j) {
        for (int i = 0; i + 1 < points_x; ++i) {
            const int a = id(i, j);
            const int b = id(i + 1, j);
            const int c = id(i + 1, j + 1);
            const int d = id(i, j + 1);
            if ((i + j) % 2 == 0) {
                faces.push_back({a, b, c});
                faces.push_back({a, c, d});
            } else {
                faces.push_back({a, b, d});
                faces.push_back({b, c, d});
            }
        }
    }
    return make_mesh(std::move(vertices), std::move(faces));
}

namespace {

struct RawMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
};

RawMesh icosahedron()
{
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    RawMesh m;
    m.vertices = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
                  {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
    for (auto& v : m.vertices) {
        v.normalize();
    }
    m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
               {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
               {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
               {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    return m;
}

RawMesh subdivide(const RawMesh& in)
{
    RawMesh out{in.vertices, {}};
    std::map<std::pair<int, int>, int> midpoints;
    auto midpoint = [&](int a, int b) {
        const auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
        const auto it = midpoints.find(key);
        if (it != midpoints.end()) {
            return it->second;
        }
        out.vertices.push_back((out.vertices[a] + out.vertices[b]).normalized());
        const int id = static_cast<int>(out.vertices.size()) - 1;
        midpoints.emplace(key, id);
        return id;
    };
    for (const Face& f : in.faces) {
        const int ab = midpoint(f[0], f[1]);
        const int bc = midpoint(f[1], f[2]);
        const int ca = midpoint(f[2], f[0]);
        out.faces.push_back({f[0], ab, ca});
        out.faces.push_back({f[1], bc, ab});
        out.faces.push_back({f[2], ca, bc});
        out.faces.push_back({ab, bc, ca});
    }
    return out;
}

RawMesh raw_icosphere(int subdivisions)
{
    if (subdivisions < 0) {
        throw MeshError("negative subdivision count");
    }
    RawMesh m = icosahedron();
    for (int s = 0; s < subdivisions; ++s) {
        m = subdivide(m);
    }
    return m;
}

} // namespace

TriangleMesh make_icosphere(int subdivisions)
{
    RawMesh m = raw_icosphere(subdivisions);
    return make_mesh(std::move(m.vertices), std::move(m.faces));
}

TriangleMesh make_punctured_sphere(int subdivisions)
{
    RawMesh m = raw_icosphere(subdivisions);
    std::vector<Face> kept;
    for (const Face& f : m.faces) {
        if (f[0] != 0 && f[1] != 0 && f[2] != 0) {
            kept.push_back(f);
        }
    }
    // Drop vertex 0 and shift the remaining indices down by one.
    std::vector<Vec3> vertices(m.vertices.begin() + 1, m.vertices.end());
    for (Face& f : kept) {
        for (int& v : f) {
            --v;
        }
    }
    return make_mesh(std::move(vertices), std::move(kept));
}

int closest_vertex(const TriangleMesh& mesh, const Vec3& p)
{
    int best = 0;
    double best_d2 = (mesh.vertices[0] - p).squaredNorm();
    for (int v = 1; v < mesh.num_vertices(); ++v) {
        const double d2 = (mesh.vertices[v] - p).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best = v;
        }
    }
    return best;
}

} // namespace meshot
