#pragma once
/**
 * @file orca.hpp
 * @brief Optimal reciprocal collision avoidance: half-plane constraints, the
 *        per-agent velocity LP and a synchronous multi-agent simulator.
 */

#include "mapf/geom.hpp"
#include "mapf/traj.hpp"
#include "mapf/visnav.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace mapf {

/// Permitted velocities v satisfy dot(v - point, normal) >= 0.
struct HalfPlane {
    Vec2 point;
    Vec2 normal;

    /// Boundary direction; the permitted side is to its left.
    Vec2 direction() const { return {normal.y, -normal.x}; }
    /// Positive amount by which v violates the constraint (<= 0 when satisfied).
    double violation(const Vec2& v) const { return dot(point - v, normal); }
    bool contains(const Vec2& v, double eps = 0.0) const { return violation(v) <= eps; }
};

struct SimParams {
    double dt{0.25};           ///< integration step (s)
    double tau_agent{10.0};    ///< agent-agent horizon (s)
    double tau_obstacle{5.0};  ///< obstacle horizon (s)
    double arrive_eps{1.0};    ///< goal snap distance (units)
    std::size_t max_steps{0};  ///< 0 selects ceil(step_factor * makespan / dt)
    double step_factor{10.0};  ///< multiple of the ideal makespan used for the automatic step bound
    double safety_margin{0.1}; ///< extra clearance used when building constraints (units)
    double pref_rotation{0.01}; ///< clockwise turn of the preferred velocity (rad); breaks exact head-on symmetry
    double stall_window{200.0};   ///< stop early when the summed remaining path length has not dropped for this long (s, 0 = off)
    double stall_distance{1.0};   ///< least decrease of the summed remaining path length that counts as progress (units)
    std::uint64_t seed{0};     ///< drives the LP constraint ordering
    std::optional<double> cost_bound; ///< callers that reject costs >= this may let the run stop early
};

/// StepLimit also covers runs stopped early because the agents stopped making progress.
/// Bounded: stopped once the summed arrival times provably reach SimParams::cost_bound.
enum class SimStatus { Reached, StepLimit, Bounded };

struct SimOutcome {
    std::vector<Trajectory> trajectories;
    SimStatus status{SimStatus::StepLimit};
    std::size_t steps{0};
};

/**
 * @brief Reciprocal half-plane for agent A induced by agent B.
 *
 * Builds the velocity obstacle truncated at `tau` (or at `dt` when the discs
 * already overlap), finds the smallest change u that takes the relative
 * velocity out of it, and lets A take half of u.
 */
HalfPlane agent_halfplane(const Point& pA, const Vec2& vA, double rA, const Point& pB, const Vec2& vB, double rB,
                          double tau, double dt);

/// One non-reciprocal half-plane per nearby obstacle edge or boundary side.
std::vector<HalfPlane> obstacle_halfplanes(const Point& p, double r, const Environment& env, double tau_obs, double vmax);

/**
 * @brief Velocity in |v| <= vmax closest to v_pref satisfying all constraints.
 *
 * `hard` constraints (obstacles) are never relaxed. If hard and soft together
 * are infeasible, returns the velocity minimising the largest soft violation
 * subject to the hard ones. Returns zero when the hard ones alone are
 * infeasible.
 */
Vec2 solve_velocity(std::span<const HalfPlane> hard, std::span<const HalfPlane> soft, const Vec2& v_pref, double vmax);

/// All constraints soft.
Vec2 solve_velocity(std::span<const HalfPlane> constraints, const Vec2& v_pref, double vmax);

/// The automatic step bound: ceil(step_factor * makespan / dt), makespan from single-agent shortest paths.
std::size_t default_max_steps(const ProblemInstance& inst, std::span<const Point> starts, std::span<const Point> goals,
                              const SimParams& params, GraphCache& graphs);

/**
 * @brief Synchronous ORCA simulation from `starts` to `goals`.
 *
 * Radii and speed limits come from `inst.agents`; starts/goals override the
 * instance endpoints. Every step is checked exactly before it is committed:
 * any agent whose motion would touch an obstacle or another agent is held in
 * place for that step, so the output is collision-free by construction.
 */
SimOutcome simulate(const ProblemInstance& inst, std::span<const Point> starts, std::span<const Point> goals,
                    const SimParams& params, GraphCache& graphs);

/// Convenience overload simulating the instance's own starts and goals.
SimOutcome simulate(const ProblemInstance& inst, const SimParams& params, GraphCache& graphs);

} // namespace mapf
