#pragma once
/**
 * @file io.hpp
 * @brief JSON instance, solution and benchmark-config files, and SVG rendering.
 */

#include "mapf/bench.hpp"
#include "mapf/traj.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mapf {

inline constexpr const char* kInstanceSchema = "mapf-instance/1";
inline constexpr const char* kSolutionSchema = "mapf-solution/1";
inline constexpr const char* kBenchConfigSchema = "mapf-bench-config/1";

/// Malformed or schema-violating file content.
class FormatError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

nlohmann::json environment_to_json(const Environment& env, const std::string& name);
/// Accepts a builtin name string or an inline {name, boundary, obstacles} object.
Environment environment_from_json(const nlohmann::json& j);
/// 16 hex digits of FNV-1a over the canonical geometry JSON.
std::string environment_hash(const Environment& env);

struct InstanceFile {
    std::string env_name;
    ProblemInstance instance;
    std::optional<std::uint64_t> generator_seed;
    bool operator==(const InstanceFile&) const = default;
};

nlohmann::json instance_to_json(const InstanceFile& f);
InstanceFile instance_from_json(const nlohmann::json& j);

struct SolutionFile {
    std::string instance_ref; ///< instance file name or id
    std::string env_hash;
    std::string algorithm;
    std::uint64_t seed{0};
    double cost{0.0};
    std::vector<Trajectory> trajectories;
    std::vector<EmissionPoint> emissions;
    bool operator==(const SolutionFile&) const = default;
};

nlohmann::json solution_to_json(const SolutionFile& f);
SolutionFile solution_from_json(const nlohmann::json& j);

nlohmann::json sim_params_to_json(const SimParams& p);
/// Missing keys keep their defaults.
SimParams sim_params_from_json(const nlohmann::json& j);

nlohmann::json config_to_json(const BenchmarkConfig& cfg);
BenchmarkConfig config_from_json(const nlohmann::json& j);

/// Parses a file; throws FormatError on I/O or JSON syntax errors.
nlohmann::json read_json(const std::filesystem::path& path);
/// Two-space indented with a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

/// SVG 1.1 drawing of the instance and, when given, one polyline per trajectory.
std::string render_svg(const ProblemInstance& inst, const std::vector<Trajectory>* trajectories = nullptr);

} // namespace mapf
