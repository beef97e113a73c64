#pragma once
/**
 * @file planner.hpp
 * @brief Multi-agent RRT* over the joint configuration space with pluggable
 *        steering (straight lines, visibility-graph paths, or ORCA simulation).
 *
 * The tree grows from the joint start state. Each iteration samples a joint
 * state, steers from its nearest tree vertex, picks the cheapest feasible
 * parent among nearby vertices, inserts the sample, and rewires nearby
 * vertices through it. Edge bundles are synchronous: every agent starts an
 * edge when the parent vertex is reached by all agents, so collision checks
 * never have to look across edges.
 */

#include "mapf/orca.hpp"
#include "mapf/traj.hpp"
#include "mapf/visnav.hpp"

#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mapf {

using JointState = std::vector<Point>;

enum class ExtensionKind { Line, VisibilityGraph, Orca };

std::string to_string(ExtensionKind kind);

/// Sum of per-agent Euclidean displacements.
double joint_dist(const JointState& a, const JointState& b);

/// Every position disc-free at its agent's radius and all pairs strictly separated.
bool valid_joint_state(const JointState& s, const ProblemInstance& inst);

class SamplingStarvation : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct SamplerStats {
    std::size_t rejections{0};
};

/**
 * @brief Draws a joint state.
 *
 * With probability `goal_bias` returns the instance goals. Otherwise places
 * agents one at a time uniformly in the boundary inset by their radius,
 * redrawing an agent until it is disc-free and clear of the agents already
 * placed. A draw is restarted after 1e4 rejections; SamplingStarvation is
 * thrown once `stats` has accumulated 1e6 rejections.
 */
JointState sample(const ProblemInstance& inst, std::mt19937_64& rng, double goal_bias, SamplerStats& stats);

struct Vertex {
    JointState state;
    std::optional<std::size_t> parent;
    std::vector<Trajectory> edge; ///< bundle from the parent, each trajectory starting at t = 0
    double edge_cost{0.0};
    double cost{0.0};
    std::vector<std::size_t> children;
};

/// Sum of per-agent traversal times of a steering bundle.
double edge_cost(std::span<const Trajectory> bundle);

class PlanTree {
  public:
    explicit PlanTree(JointState root);

    std::size_t size() const { return vertices_.size(); }
    const Vertex& operator[](std::size_t i) const { return vertices_[i]; }
    std::size_t add(JointState state, std::size_t parent, std::vector<Trajectory> edge);
    /// Moves v under new_parent and propagates the cost change through v's subtree.
    void reparent(std::size_t v, std::size_t new_parent, std::vector<Trajectory> edge);
    /// Vertex indices from the root to v inclusive.
    std::vector<std::size_t> path_to(std::size_t v) const;
    /// Per-agent trajectories following the tree path to v and their total arrival-time cost.
    Solution compose(std::size_t v) const;
    /// Sum of arrival times of compose(v) without materialising the trajectories.
    double composed_cost(std::size_t v) const;
    /// Throws std::logic_error if any cost disagrees with parent cost + edge cost.
    void audit() const;

  private:
    std::vector<Vertex> vertices_;
};

/// Lowest-index vertex minimising joint_dist to s.
std::size_t nearest(const PlanTree& tree, const JointState& s);

/// gamma * (ln n_v / n_v)^(1 / (2 n_agents)); zero for n_v <= 1.
double near_radius(double gamma, std::size_t n_vertices, std::size_t n_agents);

/// Vertices with joint_dist(v, s) < near_radius(gamma, |V|, n_agents), in index order.
std::vector<std::size_t> near(const PlanTree& tree, const JointState& s, double gamma, std::size_t n_agents);

/**
 * @brief Steering attempt x -> y with the chosen extension.
 *
 * Returns the joint bundle when it is obstacle-free, mutually collision-free
 * and ends exactly at y; nullopt otherwise. With `cost_bound`, a bundle whose
 * edge cost would be >= the bound may also be reported as nullopt, which
 * lets ORCA simulations stop early.
 */
std::optional<std::vector<Trajectory>> extend(ExtensionKind kind, const JointState& x, const JointState& y,
                                              const ProblemInstance& inst, const SimParams& orca, GraphCache& graphs,
                                              std::optional<double> cost_bound = std::nullopt);

struct Budget {
    std::optional<double> seconds;
    std::optional<std::size_t> iterations;
};

struct PlannerParams {
    ExtensionKind kind{ExtensionKind::Orca};
    double goal_bias{0.01};
    double gamma{0.0}; ///< 0 selects 2 * boundary diagonal * n_agents
    std::size_t max_parent_candidates{20};
    std::size_t max_rewire_candidates{20};
    bool goal_first{true}; ///< the first sample is the goal state
    bool stop_at_lower_bound{true}; ///< stop once the cost reaches the idealistic lower bound
    std::size_t audit_interval{0}; ///< run PlanTree::audit every k iterations (0 = never)
    SimParams orca;
    std::uint64_t seed{0};
    Budget budget;
};

struct Emission {
    double wall_time{0.0}; ///< seconds since plan start
    std::size_t iteration{0};
    Solution solution;
};

struct PlanResult {
    std::vector<Emission> emissions;
    std::size_t iterations{0};
    std::size_t tree_size{0};
    double wall_time{0.0};
    double ideal_cost{0.0};
    std::optional<std::string> diagnostic;

    const Solution* best() const { return emissions.empty() ? nullptr : &emissions.back().solution; }
};

class Planner {
  public:
    using ExtensionHook =
        std::function<void(const JointState& from, const JointState& to, const std::optional<std::vector<Trajectory>>&)>;

    Planner(ProblemInstance inst, PlannerParams params, std::shared_ptr<GraphCache> graphs = nullptr);

    /// Runs until the budget expires; calls `on_emit` for each improved solution.
    PlanResult run(const std::function<void(const Emission&)>& on_emit = {});
    /// One sample/steer/insert/rewire iteration. Returns false once no further iterations are useful.
    bool iterate();

    const PlanTree& tree() const { return tree_; }
    const ProblemInstance& instance() const { return inst_; }
    double gamma() const { return gamma_; }
    void set_extension_hook(ExtensionHook hook) { hook_ = std::move(hook); }

  private:
    using Clock = std::chrono::steady_clock;

    std::optional<std::vector<Trajectory>> steer(const JointState& from, const JointState& to,
                                                 std::optional<double> cost_bound = std::nullopt);
    bool deadline_passed() const;
    double lower_bound(const JointState& a, const JointState& b) const;
    void check_goal();

    ProblemInstance inst_;
    PlannerParams params_;
    std::shared_ptr<GraphCache> graphs_;
    PlanTree tree_;
    JointState goal_;
    std::mt19937_64 rng_;
    SamplerStats sampler_stats_;
    double gamma_{0.0};
    double ideal_cost_{0.0};
    double best_cost_{std::numeric_limits<double>::infinity()};
    std::vector<std::size_t> goal_vertices_;
    std::size_t iteration_{0};
    Clock::time_point start_;
    std::optional<Clock::time_point> deadline_;
    PlanResult result_;
    const std::function<void(const Emission&)>* on_emit_{nullptr};
    ExtensionHook hook_;
    bool finished_{false};
};

} // namespace mapf
