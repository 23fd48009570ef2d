#pragma once

#include "sdot/error.hpp"
#include "sdot/ma_dirichlet.hpp"
#include "sdot/scenarios.hpp"

#include "json.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace sdot {

inline constexpr const char* kArtifactVersion = "sdot 1.0.0";

// Sorted keys, no whitespace, doubles as %.17g, non-finite doubles as null.
std::string canonical_json(const nlohmann::json& j);

// Lowercase hex SHA-256 of the bytes.
std::string sha256_hex(const std::string& bytes);

// Validated config with every default filled in. Unknown keys and schema
// violations raise a config error naming the field path.
ScenarioConfig config_from_json(const nlohmann::json& j);
ScenarioConfig parse_config(const std::filesystem::path& path);
nlohmann::json to_json(const ScenarioConfig& cfg);

// Dirichlet problem det D^2 w = 1 on a convex region with polynomial
// boundary data g = c0 + c1 x + c2 y + c3 x^2 + c4 xy + c5 y^2.
struct MaConfig {
    std::string name = "ma_dirichlet";
    ShapeSpec region;
    std::array<double, 6> boundary{0.0, 0.0, 0.0, 0.5, 0.0, 0.5};
    double h_mesh = 0.1;
    MaMethod method = MaMethod::newton;
    double tol = 1e-9;
    int max_iter = 200;
    std::string output_dir = "out";
};

MaConfig ma_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MaConfig& c);
MaConfig parse_ma_config(const std::filesystem::path& path);

// Solves the Dirichlet problem; nodes.csv holds x, y, value, measure, target.
// When the boundary quadratic has unit Hessian determinant it is the exact
// solution and the report carries the nodal error against it.
RegularityReport run_ma_dirichlet(const MaConfig& c);

struct ManifestFile {
    std::string path;   // relative to the output directory
    std::string sha256;
    std::uintmax_t bytes = 0;
};

struct RunManifest {
    nlohmann::json config;
    std::string config_hash;
    std::map<std::string, std::uint64_t> seeds;
    std::string version = kArtifactVersion;
    std::map<std::string, double> wall_times;
    std::vector<ManifestFile> files;
};

nlohmann::json to_json(const RunManifest& m);

// Seeds derived from the config seed, by purpose.
std::map<std::string, std::uint64_t> seed_registry(std::uint64_t seed);

// Writes report.json plus artifacts. With several reports, all but the last
// go to entry_<k>/ and the last (sweep summary) to the top level. The
// manifest is written last; an existing manifest is an io error unless force.
RunManifest write_outputs(const std::vector<RegularityReport>& reports, const nlohmann::json& config,
                          const std::map<std::string, std::uint64_t>& seeds, const std::filesystem::path& dir, bool force);
RunManifest write_outputs(const std::vector<RegularityReport>& reports, const ScenarioConfig& cfg,
                          const std::filesystem::path& dir, bool force);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace sdot
