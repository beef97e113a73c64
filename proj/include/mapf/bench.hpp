#pragma once
/**
 * @file bench.hpp
 * @brief Benchmark environments, the random instance generator, solution
 *        quality metrics and the batch experiment runner.
 */

#include "mapf/orca.hpp"
#include "mapf/planner.hpp"
#include "mapf/traj.hpp"
#include "mapf/visnav.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mapf {

enum class Algorithm { OrcaOnly, LineRrt, VgRrt, OrcaRrt };

/// CLI names: orca, line-rrt, vg-rrt, orca-rrt.
std::string to_string(Algorithm a);
std::optional<Algorithm> parse_algorithm(std::string_view name);
std::span<const Algorithm> all_algorithms();
/// Whether repeated seeds produce different runs (false only for OrcaOnly).
bool is_stochastic(Algorithm a);

struct EnvironmentSpec {
    std::string name;
    Environment env;
};

/// empty, door, cross, maze.
std::span<const std::string_view> builtin_environment_names();
/// Throws std::invalid_argument for unknown names.
EnvironmentSpec builtin_environment(std::string_view name);

class GenerationTimeout : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Unit-speed single-agent shortest-path trajectories, ignoring other agents.
std::vector<Trajectory> ideal_trajectories(const ProblemInstance& inst, GraphCache& graphs);

/// Sum over agents of shortest-path length / max_speed. Throws std::invalid_argument on NoPath.
double idealistic_cost(const ProblemInstance& inst, GraphCache& graphs);

/**
 * @brief Random instance whose ideal trajectories form one collision cluster.
 *
 * Agents are added one by one. A candidate start/goal pair is kept only if a
 * shortest path exists and its unit-speed trajectory comes within r_i + r_j of
 * some trajectory already accepted (the first agent is accepted on the first
 * feasible pair). Throws GenerationTimeout after `max_attempts` candidate
 * pairs for a single agent.
 */
ProblemInstance generate_instance(const Environment& env, std::size_t n, double radius, std::mt19937_64& rng,
                                  GraphCache& graphs, std::size_t max_attempts = 100'000);

struct EmissionPoint {
    double time{0.0}; ///< seconds from run start
    double cost{0.0};
    bool operator==(const EmissionPoint&) const = default;
};

struct RunRecord {
    std::string instance_id;
    std::string env;
    std::size_t n_agents{0};
    double radius{0.0};
    Algorithm algorithm{Algorithm::OrcaOnly};
    std::uint64_t seed{0};
    std::optional<double> best_cost;
    double ideal_cost{0.0};
    std::optional<double> suboptimality;
    double wall_ms{0.0};
    std::size_t iterations{0};
    std::vector<EmissionPoint> emissions;
    bool validated{true}; ///< best solution re-checked with check_cf at margin 0

    bool solved() const { return best_cost.has_value(); }
    bool operator==(const RunRecord&) const = default;
};

/// False without a solution; otherwise true iff no threshold or suboptimality < threshold.
bool success(const RunRecord& rec, std::optional<double> threshold);

/**
 * @brief Ranks for one instance and seed across the four algorithms.
 *
 * Solved algorithms are ordered by suboptimality and take ranks 1, 2, ...;
 * groups of exactly equal suboptimality are shuffled with `rng`. Every
 * unsolved algorithm gets rank 4.
 */
std::map<Algorithm, int> rank_table(std::span<const RunRecord> records, std::mt19937_64& rng);

struct BenchmarkConfig {
    std::vector<std::string> environments;
    std::vector<std::size_t> agent_counts;
    std::vector<double> radii;
    std::size_t instances_per_cell{10};
    std::size_t seeds_per_instance{5};
    Budget budget; ///< per run; seconds for experiments, iterations for reproducible tests
    std::vector<double> thresholds;
    std::vector<Algorithm> algorithms{Algorithm::OrcaOnly, Algorithm::LineRrt, Algorithm::VgRrt, Algorithm::OrcaRrt};
    std::uint64_t seed{1}; ///< instance generation seed
    std::size_t workers{0}; ///< 0 selects hardware concurrency
    std::size_t max_generation_attempts{100'000};
    SimParams orca;
    bool record_timing{true}; ///< false writes zero wall times, making outputs reproducible
};

/// Throws std::invalid_argument when a field is out of range.
void validate_config(const BenchmarkConfig& cfg);
/// environments x agent counts x radii x instances.
std::size_t scenario_count(const BenchmarkConfig& cfg);
/// Runs per scenario summed over algorithms: 1 for OrcaOnly, seeds_per_instance otherwise.
std::size_t runs_per_scenario(const BenchmarkConfig& cfg);
std::size_t run_count(const BenchmarkConfig& cfg);

/// The experiment grid of the original study: 4 envs, 2..10 agents, radii 50..100 step 10, 10 instances, 5 seeds.
BenchmarkConfig paper_config();
/// Reduced grid: 4 envs, n in {2,4,7}, r in {50,100}, 3 instances, 3 seeds, 5 s.
BenchmarkConfig desk_config();

/// "<env>_n<n>_r<r>_i<k>".
std::string instance_id(std::string_view env, std::size_t n, double radius, std::size_t index);
/// Per-instance generator seed derived from the config seed and the cell coordinates.
std::uint64_t instance_seed(std::uint64_t config_seed, std::string_view env, std::size_t n, double radius,
                            std::size_t index);

struct UngeneratableCell {
    std::string env;
    std::size_t n_agents{0};
    double radius{0.0};
    std::size_t index{0};
    std::string message;
};

struct SuccessRateRow {
    std::string env;
    std::size_t n_agents{0};
    double radius{0.0};
    Algorithm algorithm{Algorithm::OrcaOnly};
    std::optional<double> threshold;
    std::size_t runs{0};
    std::size_t successes{0};
    double rate() const { return runs == 0 ? 0.0 : static_cast<double>(successes) / static_cast<double>(runs); }
};

struct RankHistogramRow {
    std::string env;
    Algorithm algorithm{Algorithm::OrcaOnly};
    int rank{0};
    std::size_t count{0};
};

struct BatchResult {
    std::vector<RunRecord> records; ///< canonical order
    std::vector<UngeneratableCell> ungeneratable;
    std::vector<SuccessRateRow> success_rates;
    std::vector<RankHistogramRow> rank_histogram;
    std::size_t resumed{0}; ///< records taken from an existing results file
};

/// Success counts per (env, n, r, algorithm) for "no threshold" and each configured threshold.
std::vector<SuccessRateRow> success_rates(std::span<const RunRecord> records, std::span<const double> thresholds);

/// Rank counts per environment over every (instance, seed); OrcaOnly's single run joins every seed.
std::vector<RankHistogramRow> rank_histogram(std::span<const RunRecord> records, std::uint64_t seed);

/**
 * @brief Generates every instance and runs every algorithm on it.
 *
 * With `out_dir`, writes results.csv (rows appended as runs finish, then
 * rewritten in canonical order), success_rates.csv, rank_histogram.csv,
 * ungeneratable.csv and accounting.json. Rows already present in
 * results.csv are reused, so an interrupted batch can be resumed.
 */
BatchResult run_batch(const BenchmarkConfig& cfg, const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                      const std::function<void(const RunRecord&)>& on_record = {});

/// One run of one algorithm on one instance.
RunRecord run_single(const ProblemInstance& inst, Algorithm algorithm, std::uint64_t seed, const Budget& budget,
                     const SimParams& orca, std::shared_ptr<GraphCache> graphs, std::optional<Solution>* best = nullptr,
                     std::vector<Emission>* emissions = nullptr);

inline constexpr std::string_view kResultsHeader = "instance_id,env,n_agents,radius,algorithm,seed,solved,best_cost,"
                                                   "ideal_cost,suboptimality,wall_ms,iterations,emissions_json,validated";

std::string to_csv_row(const RunRecord& rec);
/// Throws std::invalid_argument on malformed rows.
RunRecord from_csv_row(std::string_view line);

} // namespace mapf
