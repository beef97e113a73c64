#pragma once
/**
 * @file visnav.hpp
 * @brief Radius-aware visibility graphs and single-agent shortest paths.
 *
 * Obstacles are inflated by the agent radius so the disc agent reduces to a
 * point. Each convex obstacle corner contributes `arc_points` nodes lying on
 * a polygon circumscribed about the inflated corner arc; consecutive nodes
 * are joined by chords tangent to the arc, so following them keeps the
 * clearance strictly above the radius. Reflex corners contribute nothing.
 */

#include "mapf/geom.hpp"
#include "mapf/traj.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

namespace mapf {

/// Relative outward push applied to corner nodes so tangent chords clear the strict test.
inline constexpr double kInflationEps = 1e-6;

struct PathPolyline {
    std::vector<Point> waypoints;

    double length() const;
};

class VisibilityGraph {
  public:
    struct Edge {
        std::size_t to{0};
        double length{0.0};
    };

    static VisibilityGraph build(const Environment& env, double radius, int arc_points = 4);

    double radius() const { return radius_; }
    int arc_points() const { return arc_points_; }
    const Environment& env() const { return env_; }
    std::span<const Point> nodes() const { return nodes_; }
    std::span<const Edge> neighbors(std::size_t i) const { return adjacency_[i]; }
    std::size_t edge_count() const;

    /// Straight motion a -> b keeps the graph radius clear of every obstacle.
    bool visible(const Point& a, const Point& b) const { return swept_disc_free(a, b, radius_, env_); }

  private:
    Environment env_;
    double radius_{0.0};
    int arc_points_{4};
    std::vector<Point> nodes_;
    std::vector<std::vector<Edge>> adjacency_;
};

/// Corner nodes for one environment and radius, before visibility filtering (exposed for tests).
std::vector<Point> corner_nodes(const Environment& env, double radius, int arc_points);

/// Minimal-length polyline from s to d, or nullopt when no path exists.
std::optional<PathPolyline> shortest_path(const VisibilityGraph& g, const Point& s, const Point& d);

/// Constant-speed traversal of a polyline; rests at the last waypoint afterwards.
Trajectory to_trajectory(const PathPolyline& path, double speed);

/**
 * @brief Shortest-path distances from every graph node to a fixed goal.
 *
 * Answers "where should an agent at p head next" with one visibility query
 * per candidate node, testing candidates in increasing order of
 * |p - node| + dist(node, goal) and stopping at the first visible one.
 */
class GoalField {
  public:
    GoalField(std::shared_ptr<const VisibilityGraph> graph, const Point& goal);

    const Point& goal() const { return goal_; }
    /// Next waypoint on a shortest path from p (the goal itself if directly visible).
    std::optional<Point> next_waypoint(const Point& p) const;
    /// Shortest path length from p to the goal, +inf when unreachable.
    double distance_from(const Point& p) const;

    struct Choice {
        std::optional<Point> waypoint;
        double distance;
    };
    /// next_waypoint and distance_from in one query. Visibility from p is
    /// tested with the radius reduced by slack, so a steered agent that has
    /// drifted slightly off the corner arc still sees the next node.
    Choice best_choice(const Point& p, double slack = 0.0) const;

  private:

    std::shared_ptr<const VisibilityGraph> graph_;
    Point goal_;
    std::vector<double> dist_;
};

/**
 * @brief Per-environment cache of visibility graphs keyed by radius.
 *
 * Lookups are thread-safe; each radius is built at most once.
 */
class GraphCache {
  public:
    explicit GraphCache(Environment env, int arc_points = 4);

    const Environment& env() const { return env_; }
    std::shared_ptr<const VisibilityGraph> get(double radius);

  private:
    struct Entry {
        std::once_flag once;
        std::shared_ptr<const VisibilityGraph> graph;
    };

    Environment env_;
    int arc_points_;
    std::mutex mutex_;
    std::map<double, std::shared_ptr<Entry>> entries_;
};

} // namespace mapf
