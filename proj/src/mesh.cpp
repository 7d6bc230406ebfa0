#include <meshot/mesh.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <queue>
#include <sstream>

namespace meshot {

namespace {

using EdgeKey = std::pair<int, int>;

EdgeKey undirected(int a, int b)
{
    return a < b ? EdgeKey{a, b} : EdgeKey{b, a};
}

void check_connectivity(int num_vertices, const std::vector<Face>& faces)
{
    // undirected edge -> (face, +1 if stored as a->b with a<b, else -1)
    std::map<EdgeKey, std::vector<std::pair<int, int>>> edge_faces;
    for (int f = 0; f < static_cast<int>(faces.size()); ++f) {
        const Face& face = faces[f];
        for (int j = 0; j < 3; ++j) {
            if (face[j] < 0 || face[j] >= num_vertices) {
                throw MeshError("face " + std::to_string(f) + " references vertex "
                                + std::to_string(face[j]) + " out of range");
            }
        }
        if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) {
            throw MeshError("face " + std::to_string(f) + " repeats a vertex");
        }
        for (int j = 0; j < 3; ++j) {
            const int a = face[j];
            const int b = face[(j + 1) % 3];
            edge_faces[undirected(a, b)].emplace_back(f, a < b ? 1 : -1);
        }
    }

    std::vector<std::vector<std::pair<int, bool>>> neighbours(faces.size());
    for (const auto& [edge, incident] : edge_faces) {
        if (incident.size() > 2) {
            throw MeshError("non-manifold edge (" + std::to_string(edge.first) + ", "
                            + std::to_string(edge.second) + ") has "
                            + std::to_string(incident.size()) + " incident faces");
        }
        if (incident.size() == 2) {
            // Consistent orientation traverses a shared edge in opposite directions.
            const bool same_direction = incident[0].second == incident[1].second;
            neighbours[incident[0].first].emplace_back(incident[1].first, same_direction);
            neighbours[incident[1].first].emplace_back(incident[0].first, same_direction);
        }
    }

    std::vector<int> flip(faces.size(), -1);
    for (std::size_t seed = 0; seed < faces.size(); ++seed) {
        if (flip[seed] != -1) {
            continue;
        }
        flip[seed] = 0;
        std::queue<int> pending;
        pending.push(static_cast<int>(seed));
        while (!pending.empty()) {
            const int f = pending.front();
            pending.pop();
            for (const auto& [g, same_direction] : neighbours[f]) {
                const int wanted = same_direction ? 1 - flip[f] : flip[f];
                if (flip[g] == -1) {
                    flip[g] = wanted;
                    pending.push(g);
                } else if (flip[g] != wanted) {
                    throw MeshError("non-orientable mesh");
                }
            }
        }
    }
}

std::string strip_comment(const std::string& line)
{
    const auto hash = line.find('#');
    return hash == std::string::npos ? line : line.substr(0, hash);
}

TriangleMesh read_off(std::istream& in)
{
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ss(strip_comment(line));
        std::string token;
        while (ss >> token) {
            tokens.push_back(token);
        }
    }
    std::size_t pos = 0;
    auto next = [&]() -> const std::string& {
        if (pos >= tokens.size()) {
            throw MeshError("OFF parse failure: unexpected end of file");
        }
        return tokens[pos++];
    };
    auto next_number = [&]() {
        const std::string& token = next();
        try {
            std::size_t used = 0;
            const double value = std::stod(token, &used);
            if (used != token.size()) {
                throw MeshError("OFF parse failure: bad number '" + token + "'");
            }
            return value;
        } catch (const std::logic_error&) {
            throw MeshError("OFF parse failure: bad number '" + token + "'");
        }
    };
    auto next_index = [&]() {
        const double value = next_number();
        if (value != static_cast<double>(static_cast<long>(value))) {
            throw MeshError("OFF parse failure: non-integer index");
        }
        return static_cast<long>(value);
    };

    std::string header = next();
    if (header.rfind("OFF", 0) != 0) {
        throw MeshError("OFF parse failure: missing OFF header");
    }
    if (header.size() > 3) {
        throw MeshError("OFF parse failure: unsupported header '" + header + "'");
    }
    const long nv = next_index();
    const long nf = next_index();
    next_index(); // edge count, unused
    if (nv < 0 || nf < 0) {
        throw MeshError("OFF parse failure: negative counts");
    }
    std::vector<Vec3> vertices(static_cast<std::size_t>(nv));
    for (auto& v : vertices) {
        v.x() = next_number();
        v.y() = next_number();
        v.z() = next_number();
    }
    std::vector<Face> faces;
    faces.reserve(static_cast<std::size_t>(nf));
    for (long f = 0; f < nf; ++f) {
        const long count = next_index();
        if (count != 3) {
            throw MeshError("non-triangular face " + std::to_string(f) + " with "
                            + std::to_string(count) + " vertices");
        }
        Face face{};
        for (auto& idx : face) {
            idx = static_cast<int>(next_index());
        }
        faces.push_back(face);
    }
    if (pos != tokens.size()) {
        throw MeshError("OFF parse failure: trailing data after faces");
    }
    return make_mesh(std::move(vertices), std::move(faces));
}

TriangleMesh read_obj(std::istream& in)
{
    std::vector<Vec3> vertices;
    std::vector<std::vector<long>> raw_faces;
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        std::istringstream ss(strip_comment(line));
        std::string tag;
        if (!(ss >> tag)) {
            continue;
        }
        if (tag == "v") {
            Vec3 p;
            if (!(ss >> p.x() >> p.y() >> p.z())) {
                throw MeshError("OBJ parse failure at line " + std::to_string(line_number));
            }
            vertices.push_back(p);
        } else if (tag == "f") {
            std::vector<long> face;
            std::string token;
            while (ss >> token) {
                const std::string head = token.substr(0, token.find('/'));
                try {
                    std::size_t used = 0;
                    const long idx = std::stol(head, &used);
                    if (used != head.size() || idx == 0) {
                        throw MeshError("OBJ parse failure at line "
                                        + std::to_string(line_number));
                    }
                    face.push_back(idx);
                } catch (const std::logic_error&) {
                    throw MeshError("OBJ parse failure at line " + std::to_string(line_number));
                }
            }
            raw_faces.push_back(std::move(face));
        }
        // vt, vn, g, o, s, usemtl, mtllib: ignored
    }
    std::vector<Face> faces;
    faces.reserve(raw_faces.size());
    const long nv = static_cast<long>(vertices.size());
    for (std::size_t f = 0; f < raw_faces.size(); ++f) {
        const auto& raw = raw_faces[f];
        if (raw.size() != 3) {
            throw MeshError("non-triangular face " + std::to_string(f) + " with "
                            + std::to_string(raw.size()) + " vertices");
        }
        Face face{};
        for (int j = 0; j < 3; ++j) {
            // OBJ is 1-based; negative indices count back from the last vertex.
            const long idx = raw[j] > 0 ? raw[j] - 1 : nv + raw[j];
            face[j] = static_cast<int>(idx);
        }
        faces.push_back(face);
    }
    return make_mesh(std::move(vertices), std::move(faces));
}

} // namespace

TriangleMesh make_mesh(std::vector<Vec3> vertices, std::vector<Face> faces)
{
    if (faces.empty()) {
        throw MeshError("mesh has no faces");
    }
    const int nv = static_cast<int>(vertices.size());
    check_connectivity(nv, faces);

    TriangleMesh mesh;
    mesh.vertices = std::move(vertices);
    mesh.faces = std::move(faces);
    const int nf = mesh.num_faces();
    mesh.face_areas.resize(nf);
    mesh.face_normals.resize(nf);
    mesh.face_tangent_basis.resize(nf);
    for (int f = 0; f < nf; ++f) {
        const Face& face = mesh.faces[f];
        const Vec3 e1 = mesh.vertices[face[1]] - mesh.vertices[face[0]];
        const Vec3 e2 = mesh.vertices[face[2]] - mesh.vertices[face[0]];
        const Vec3 cross = e1.cross(e2);
        const double twice_area = cross.norm();
        mesh.face_areas[f] = 0.5 * twice_area;
        if (twice_area > 0.0) {
            mesh.face_normals[f] = cross / twice_area;
            const Vec3 t0 = e1.normalized();
            mesh.face_tangent_basis[f] = {t0, mesh.face_normals[f].cross(t0)};
        }
    }
    const double mean_area = mesh.face_areas.mean();
    for (int f = 0; f < nf; ++f) {
        if (!(mesh.face_areas[f] >= 1e-12 * mean_area) || mesh.face_areas[f] <= 0.0) {
            throw MeshError("zero-area face " + std::to_string(f));
        }
    }
    mesh.vertex_areas = Eigen::VectorXd::Zero(nv);
    for (int f = 0; f < nf; ++f) {
        for (int v : mesh.faces[f]) {
            mesh.vertex_areas[v] += mesh.face_areas[f] / 3.0;
        }
    }
    for (int v = 0; v < nv; ++v) {
        if (mesh.vertex_areas[v] <= 0.0) {
            throw MeshError("isolated vertex " + std::to_string(v));
        }
    }
    return mesh;
}

TriangleMesh load_mesh(const std::filesystem::path& path, MeshFormat format)
{
    std::ifstream in(path);
    if (!in) {
        throw MeshError("cannot open mesh file " + path.string());
    }
    return format == MeshFormat::Off ? read_off(in) : read_obj(in);
}

TriangleMesh load_mesh(const std::filesystem::path& path)
{
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
    });
    if (ext == ".off") {
        return load_mesh(path, MeshFormat::Off);
    }
    if (ext == ".obj") {
        return load_mesh(path, MeshFormat::Obj);
    }
    throw MeshError("unknown mesh extension '" + ext + "' (expected .off or .obj)");
}

void save_off(const TriangleMesh& mesh, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw MeshError("cannot write mesh file " + path.string());
    }
    out.precision(17);
    out << "OFF\n" << mesh.num_vertices() << ' ' << mesh.num_faces() << " 0\n";
    for (const Vec3& p : mesh.vertices) {
        out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    }
    for (const Face& f : mesh.faces) {
        out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    }
}

MeshOperators build_operators(const TriangleMesh& mesh)
{
    const int nv = mesh.num_vertices();
    const int nf = mesh.num_faces();
    MeshOperators ops;
    ops.hat_gradients.resize(nf);
    ops.face_mass.resize(3 * nf);
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(9 * static_cast<std::size_t>(nf));
    for (int f = 0; f < nf; ++f) {
        const Face& face = mesh.faces[f];
        const Vec3& n = mesh.face_normals[f];
        const double twice_area = 2.0 * mesh.face_areas[f];
        for (int j = 0; j < 3; ++j) {
            // The hat of corner j grows across the opposite edge, rotated into the plane.
            const Vec3 opposite = mesh.vertices[face[(j + 2) % 3]] - mesh.vertices[face[(j + 1) % 3]];
            const Vec3 grad = n.cross(opposite) / twice_area;
            ops.hat_gradients[f][j] = grad;
            for (int k = 0; k < 3; ++k) {
                triplets.emplace_back(3 * f + k, face[j], grad[k]);
            }
        }
        ops.face_mass.segment<3>(3 * f).setConstant(mesh.face_areas[f]);
    }
    ops.gradient.resize(3 * nf, nv);
    ops.gradient.setFromTriplets(triplets.begin(), triplets.end());
    ops.vertex_mass = mesh.vertex_areas;
    ops.laplacian = SparseMatrix(ops.gradient.transpose() * ops.face_mass.asDiagonal() * ops.gradient);
    ops.laplacian.prune(0.0);
    ops.laplacian.makeCompressed();

    ops.corner_offsets.assign(nv + 1, 0);
    for (const Face& face : mesh.faces) {
        for (int v : face) {
            ++ops.corner_offsets[v + 1];
        }
    }
    for (int v = 0; v < nv; ++v) {
        ops.corner_offsets[v + 1] += ops.corner_offsets[v];
    }
    ops.corners.resize(3 * static_cast<std::size_t>(nf));
    std::vector<int> fill(ops.corner_offsets.begin(), ops.corner_offsets.end() - 1);
    for (int f = 0; f < nf; ++f) {
        for (int j = 0; j < 3; ++j) {
            ops.corners[fill[mesh.faces[f][j]]++] = 3 * f + j;
        }
    }
    return ops;
}

Eigen::VectorXd average_to_faces(const TriangleMesh& mesh, const Eigen::VectorXd& mu)
{
    if (mu.size() != mesh.num_vertices()) {
        throw InputError("density size does not match vertex count");
    }
    Eigen::VectorXd out(mesh.num_faces());
    for (int f = 0; f < mesh.num_faces(); ++f) {
        const Face& face = mesh.faces[f];
        out[f] = (mu[face[0]] + mu[face[1]] + mu[face[2]]) / 3.0;
    }
    return out;
}

double total_mass(const TriangleMesh& mesh, const Eigen::VectorXd& mu)
{
    return mesh.vertex_areas.dot(mu);
}

DensityField normalize_density(const TriangleMesh& mesh, const Eigen::VectorXd& raw)
{
    if (raw.size() != mesh.num_vertices()) {
        throw InputError("density has " + std::to_string(raw.size()) + " entries, mesh has "
                         + std::to_string(mesh.num_vertices()) + " vertices");
    }
    for (Eigen::Index i = 0; i < raw.size(); ++i) {
        if (!std::isfinite(raw[i])) {
            throw InputError("density entry " + std::to_string(i) + " is not finite");
        }
        if (raw[i] < 0.0) {
            throw InputError("density entry " + std::to_string(i) + " is negative");
        }
    }
    const double mass = total_mass(mesh, raw);
    if (!(mass > 0.0)) {
        throw InputError("density is identically zero");
    }
    return DensityField{raw / mass};
}

DensityField delta_density(const TriangleMesh& mesh, int vertex)
{
    if (vertex < 0 || vertex >= mesh.num_vertices()) {
        throw InputError("delta vertex " + std::to_string(vertex) + " out of range");
    }
    Eigen::VectorXd values = Eigen::VectorXd::Zero(mesh.num_vertices());
    values[vertex] = 1.0 / mesh.vertex_areas[vertex];
    return DensityField{std::move(values)};
}

} // namespace meshot
