#include <meshot/io.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace meshot {

namespace fs = std::filesystem;

DensityField load_density(const std::string& source, const TriangleMesh& mesh, DensityLoad mode)
{
    const std::string delta = "delta:";
    if (source.rfind(delta, 0) == 0) {
        int vertex = -1;
        try {
            std::size_t used = 0;
            vertex = std::stoi(source.substr(delta.size()), &used);
            if (used != source.size() - delta.size()) {
                vertex = -1;
            }
        } catch (const std::logic_error&) {
            vertex = -1;
        }
        if (vertex < 0 || vertex >= mesh.num_vertices()) {
            throw InputError("bad vertex in '" + source + "'");
        }
        return delta_density(mesh, vertex);
    }

    const Eigen::VectorXd raw = read_values(source);
    if (raw.size() != mesh.num_vertices()) {
        throw InputError(source + ": expected " + std::to_string(mesh.num_vertices()) +
                         " values, found " + std::to_string(raw.size()));
    }
    if (mode == DensityLoad::Raw) {
        return DensityField{raw};
    }
    return normalize_density(mesh, raw);
}

Eigen::VectorXd read_values(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    std::vector<double> values;
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '[') {
        try {
            values = nlohmann::json::parse(text).get<std::vector<double>>();
        } catch (const nlohmann::json::exception& e) {
            throw InputError(path + ": " + e.what());
        }
    } else {
        std::istringstream tokens(text);
        std::string tok;
        while (tokens >> tok) {
            char* end = nullptr;
            const double x = std::strtod(tok.c_str(), &end);
            if (end == tok.c_str() || *end != '\0') {
                throw InputError(path + ": not a number: " + tok);
            }
            values.push_back(x);
        }
    }
    Eigen::VectorXd out = Eigen::Map<Eigen::VectorXd>(values.data(), values.size());
    if (!out.allFinite()) {
        throw InputError(path + ": non-finite value");
    }
    return out;
}
void write_values(const fs::path& path, const Eigen::VectorXd& values)
{
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << std::setprecision(17);
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        out << values[i] << '\n';
    }
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

void to_json(nlohmann::json& j, const RunManifest& m)
{
    j = nlohmann::json{{"command", m.command},
                       {"mesh_path", m.mesh_path},
                       {"mesh_hash", m.mesh_hash},
                       {"config", m.config},
                       {"iterations", m.iterations},
                       {"converged", m.converged},
                       {"residuals_file", m.residuals_file},
                       {"distance", m.distance},
                       {"frames", m.frames},
                       {"wall_time_seconds", m.wall_time_seconds},
                       {"extra", m.extra}};
}

void from_json(const nlohmann::json& j, RunManifest& m)
{
    j.at("command").get_to(m.command);
    j.at("mesh_path").get_to(m.mesh_path);
    j.at("mesh_hash").get_to(m.mesh_hash);
    m.config = j.at("config");
    j.at("iterations").get_to(m.iterations);
    j.at("converged").get_to(m.converged);
    j.at("residuals_file").get_to(m.residuals_file);
    j.at("distance").get_to(m.distance);
    j.at("frames").get_to(m.frames);
    j.at("wall_time_seconds").get_to(m.wall_time_seconds);
    m.extra = j.value("extra", nlohmann::json::object());
}

nlohmann::json config_to_json(const SolverConfig& cfg)
{
    return nlohmann::json{{"N", cfg.N},
                          {"alpha", cfg.alpha},
                          {"tol", cfg.tol},
                          {"max_iters", cfg.max_iters},
                          {"r_initial", cfg.r},
                          {"penalty_adapt", cfg.penalty_adapt},
                          {"adapt_interval", cfg.adapt_interval},
                          {"backend", cfg.backend == LinearBackend::Direct ? "direct" : "modal"}};
}

SolverConfig config_from_json(const nlohmann::json& j)
{
    SolverConfig cfg;
    j.at("N").get_to(cfg.N);
    j.at("alpha").get_to(cfg.alpha);
    j.at("tol").get_to(cfg.tol);
    j.at("max_iters").get_to(cfg.max_iters);
    j.at("r_initial").get_to(cfg.r);
    j.at("penalty_adapt").get_to(cfg.penalty_adapt);
    j.at("adapt_interval").get_to(cfg.adapt_interval);
    cfg.backend = j.at("backend").get<std::string>() == "direct" ? LinearBackend::Direct
                                                                 : LinearBackend::Modal;
    return cfg;
}

std::string file_hash(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::uint64_t h = 1469598103934665603ULL;
    char c = 0;
    while (in.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<std::string> write_frames(const fs::path& dir, const TimeField& rows,
                                      const std::string& prefix)
{
    std::vector<std::string> names;
    for (Eigen::Index t = 0; t < rows.rows(); ++t) {
        char name[64];
        std::snprintf(name, sizeof name, "%s%04d.txt", prefix.c_str(), static_cast<int>(t));
        write_values(dir / name, rows.row(t).transpose());
        names.emplace_back(name);
    }
    return names;
}

void write_residuals(const fs::path& path, const std::vector<ResidualRecord>& history)
{
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << "iteration,primal,dual,r\n" << std::setprecision(17);
    for (const ResidualRecord& rec : history) {
        out << rec.iteration << ',' << rec.primal << ',' << rec.dual << ',' << rec.r << '\n';
    }
}

void write_manifest(const fs::path& path, const RunManifest& manifest)
{
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << std::setw(2) << nlohmann::json(manifest) << '\n';
}

RunManifest read_manifest(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    try {
        return nlohmann::json::parse(in).get<RunManifest>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void save_frames(const fs::path& dir, const TimeField& mu_curve,
                 const std::vector<ResidualRecord>& history, RunManifest& manifest)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }
    manifest.frames = write_frames(dir, mu_curve);
    manifest.residuals_file = "residuals.csv";
    write_residuals(dir / manifest.residuals_file, history);
    write_manifest(dir / "manifest.json", manifest);
}

} // namespace meshot
