#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include <meshot/geodesic.hpp>

namespace meshot {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raw keeps the stored values untouched (solver frames may hold tiny
/// negative round-off), Normalize validates and rescales to unit mass.
enum class DensityLoad { Normalize, Raw };

///
/// Reads one value per vertex from a text file (whitespace separated) or a
/// JSON array. The literal `delta:<i>` yields the unit-mass spike at vertex i.
///
DensityField load_density(const std::string& source, const TriangleMesh& mesh,
                          DensityLoad mode = DensityLoad::Normalize);

/// Any finite values, same file formats as load_density (no sign or count check).
Eigen::VectorXd read_values(const std::string& path);

/// One value per line with 17 significant digits.
void write_values(const std::filesystem::path& path, const Eigen::VectorXd& values);

struct RunManifest {
    std::string command;
    std::string mesh_path;
    std::string mesh_hash;
    nlohmann::json config = nlohmann::json::object();
    int iterations = 0;
    bool converged = false;
    std::string residuals_file;
    double distance = 0.0;
    std::vector<std::string> frames;
    double wall_time_seconds = 0.0;
    nlohmann::json extra = nlohmann::json::object();
};

void to_json(nlohmann::json& j, const RunManifest& m);
void from_json(const nlohmann::json& j, RunManifest& m);

nlohmann::json config_to_json(const SolverConfig& cfg);
SolverConfig config_from_json(const nlohmann::json& j);

/// FNV-1a 64-bit digest of the file contents, as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);

/// Writes frame_0000.txt ... one per row and returns their file names.
std::vector<std::string> write_frames(const std::filesystem::path& dir, const TimeField& rows,
                                      const std::string& prefix = "frame_");

/// iteration,primal,dual,r rows.
void write_residuals(const std::filesystem::path& path, const std::vector<ResidualRecord>& history);

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);
RunManifest read_manifest(const std::filesystem::path& path);

///
/// Writes the frames, residuals.csv and manifest.json into `dir` (created if
/// needed). Fills in the frame list and residual file name of the manifest.
///
void save_frames(const std::filesystem::path& dir, const TimeField& mu_curve,
                 const std::vector<ResidualRecord>& history, RunManifest& manifest);

} // namespace meshot
