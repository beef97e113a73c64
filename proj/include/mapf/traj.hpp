#pragma once
/**
 * @file traj.hpp
 * @brief Piecewise-linear agent trajectories, the collision-free predicate and solution cost.
 */

#include "mapf/geom.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mapf {

/// Tolerance applied to per-piece speed limits.
inline constexpr double kSpeedEps = 1e-9;

struct Breakpoint {
    double t{0.0};
    Point p;
    bool operator==(const Breakpoint&) const = default;
};

/// One linear motion piece: position(t) = start + velocity * (t - t0) for t in [t0, t1].
struct Piece {
    double t0{0.0};
    double t1{0.0};
    Point start;
    Vec2 velocity;
};

/**
 * @brief Time-parameterised path pi(t) defined by breakpoints.
 *
 * The first breakpoint sits at t = 0; times strictly increase; the path is
 * linear between breakpoints and constant after the last one. Trailing
 * breakpoints that repeat the final position are dropped, so the last
 * breakpoint time is the arrival time (the earliest time after which the
 * agent stays put).
 */
class Trajectory {
  public:
    Trajectory() = default;

    static Trajectory stationary(const Point& p);
    /// Straight motion from a to b at constant speed, then rest at b.
    static Trajectory line(const Point& a, const Point& b, double speed);
    /// Validates and normalises; throws std::invalid_argument on malformed input.
    static Trajectory from_breakpoints(std::vector<Breakpoint> pts);

    Point eval(double t) const;
    Point start() const { return pts_.front().p; }
    Point final_point() const { return pts_.back().p; }
    double arrival_time() const { return pts_.back().t; }
    std::span<const Breakpoint> breakpoints() const { return pts_; }
    std::vector<Piece> pieces() const;
    /// Largest piece speed (0 for a stationary trajectory).
    double max_speed() const;

    /// Waits at the start for `delay` seconds, then follows this trajectory.
    Trajectory delayed(double delay) const;
    /// Appends `next` so that it starts at absolute time `at` (>= arrival_time()).
    /// The agent waits at the current final point until then. next.start() must equal final_point().
    void append(const Trajectory& next, double at);

    bool empty() const { return pts_.empty(); }
    bool operator==(const Trajectory&) const = default;

  private:
    explicit Trajectory(std::vector<Breakpoint> pts) : pts_(std::move(pts)) {}
    void trim_tail();

    std::vector<Breakpoint> pts_;
};

/**
 * @brief Incremental trajectory recorder for fixed-step simulations.
 *
 * Consecutive samples whose displacement rate matches the current piece
 * (componentwise within `merge_tol` units/s) extend that piece instead of
 * adding a breakpoint.
 */
class TrajectoryBuilder {
  public:
    explicit TrajectoryBuilder(const Point& start, double merge_tol = 1e-12);
    void add(double t, const Point& p);
    Point last_point() const { return pts_.back().p; }
    Trajectory build() const;

  private:
    std::vector<Breakpoint> pts_;
    double merge_tol_;
};

struct AgentSpec {
    Point start;
    Point goal;
    double radius{50.0};
    double max_speed{1.0};
    bool operator==(const AgentSpec&) const = default;
};

struct ProblemInstance {
    Environment env;
    std::vector<AgentSpec> agents;

    std::size_t size() const { return agents.size(); }
    std::vector<Point> starts() const;
    std::vector<Point> goals() const;
    double min_radius() const;
    bool operator==(const ProblemInstance&) const = default;
};

/// Lists every violated ProblemInstance invariant (empty when valid).
std::vector<std::string> validate_instance(const ProblemInstance& inst);

struct Solution {
    std::vector<Trajectory> trajectories;
    double cost{0.0};
};

/// Sum of arrival times.
double solution_cost(std::span<const Trajectory> trajs);

Solution make_solution(std::vector<Trajectory> trajs);

struct SeparationMin {
    double distance{0.0};
    double time{0.0};
};

/// Closest approach over t in [0, inf) together with a time at which it occurs.
SeparationMin closest_approach(const Trajectory& a, const Trajectory& b);

/// inf over t >= 0 of |a(t) - b(t)|, computed piecewise in closed form.
double min_separation(const Trajectory& a, const Trajectory& b);

struct CfViolation {
    enum class Kind { AgentCount, StartMismatch, GoalMismatch, SpeedLimit, Obstacle, AgentAgent };
    Kind kind{Kind::AgentCount};
    std::size_t agent_a{0};
    std::size_t agent_b{0};
    double time{0.0};
    double separation{0.0};
    std::string message;
};

struct CfReport {
    bool ok{true};
    std::optional<CfViolation> violation;
    explicit operator bool() const { return ok; }
};

/**
 * @brief Independent validator for a set of trajectories against an instance.
 *
 * Checks agent count, start/goal endpoints (within kGeomEps), per-piece speed
 * limits, every piece with swept_disc_free at radius + margin, and every pair
 * with min_separation > r_i + r_j + margin. Reports the first violation.
 */
CfReport check_cf_report(std::span<const Trajectory> trajs, const ProblemInstance& inst, double margin = 0.0);

/// Boolean form of check_cf_report.
bool check_cf(std::span<const Trajectory> trajs, const ProblemInstance& inst, double margin = 0.0);

/// Mutual collision test of a trajectory bundle only (pairwise, no obstacles, no endpoints).
bool mutually_separated(std::span<const Trajectory> trajs, std::span<const AgentSpec> agents, double margin = 0.0);

std::string to_string(CfViolation::Kind kind);

} // namespace mapf
