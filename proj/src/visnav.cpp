#include "mapf/visnav.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <stdexcept>
#include <tuple>

namespace mapf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Outward normal of the CCW edge a -> b.
Vec2 outward_normal(const Point& a, const Point& b) { return normalized(Vec2{(b - a).y, -(b - a).x}); }

using QueueItem = std::pair<double, std::size_t>;
using MinQueue = std::priority_queue<QueueItem, std::vector<QueueItem>, std::greater<>>;

} // namespace

double PathPolyline::length() const
{
    double len = 0.0;
    for (std::size_t i = 0; i + 1 < waypoints.size(); ++i)
        len += distance(waypoints[i], waypoints[i + 1]);
    return len;
}

std::vector<Point> corner_nodes(const Environment& env, double radius, int arc_points)
{
    if (!(radius > 0.0))
        throw std::invalid_argument("visibility graph radius must be positive");
    if (arc_points < 1)
        throw std::invalid_argument("arc_points must be >= 1");
    const double inflated = radius * (1.0 + kInflationEps);
    std::vector<Point> out;
    for (const Polygon& poly : env.obstacles()) {
        const std::size_t n = poly.size();
        for (std::size_t i = 0; i < n; ++i) {
            if (!poly.is_convex_corner(i))
                continue;
            const Point& prev = poly.vertex(i + n - 1);
            const Point& cur = poly.vertex(i);
            const Point& next = poly.vertex(i + 1);
            const Vec2 n1 = outward_normal(prev, cur);
            const Vec2 n2 = outward_normal(cur, next);
            const double a1 = std::atan2(n1.y, n1.x);
            double turn = std::atan2(n2.y, n2.x) - a1;
            while (turn < 0.0)
                turn += 2.0 * std::numbers::pi;
            if (arc_points == 1) {
                const double mid = a1 + 0.5 * turn;
                const double rho = inflated / std::cos(0.5 * turn);
                out.push_back(cur + Vec2{std::cos(mid), std::sin(mid)} * rho);
                continue;
            }
            const double step = turn / static_cast<double>(arc_points - 1);
            const double rho = inflated / std::cos(0.5 * step);
            for (int j = 0; j < arc_points; ++j) {
                const double ang = a1 + step * static_cast<double>(j);
                out.push_back(cur + Vec2{std::cos(ang), std::sin(ang)} * rho);
            }
        }
    }
    return out;
}

VisibilityGraph VisibilityGraph::build(const Environment& env, double radius, int arc_points)
{
    VisibilityGraph g;
    g.env_ = env;
    g.radius_ = radius;
    g.arc_points_ = arc_points;
    for (const Point& p : corner_nodes(env, radius, arc_points)) {
        if (!disc_free(p, radius, env))
            continue;
        const bool duplicate = std::any_of(g.nodes_.begin(), g.nodes_.end(),
                                           [&](const Point& q) { return distance(p, q) <= kGeomEps; });
        if (!duplicate)
            g.nodes_.push_back(p);
    }
    const std::size_t n = g.nodes_.size();
    g.adjacency_.assign(n, {});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (!g.visible(g.nodes_[i], g.nodes_[j]))
                continue;
            const double len = distance(g.nodes_[i], g.nodes_[j]);
            g.adjacency_[i].push_back({j, len});
            g.adjacency_[j].push_back({i, len});
        }
    }
    return g;
}

std::size_t VisibilityGraph::edge_count() const
{
    std::size_t twice = 0;
    for (const auto& adj : adjacency_)
        twice += adj.size();
    return twice / 2;
}

std::optional<PathPolyline> shortest_path(const VisibilityGraph& g, const Point& s, const Point& d)
{
    if (s == d) {
        if (!disc_free(s, g.radius(), g.env()))
            return std::nullopt;
        return PathPolyline{{s}};
    }
    if (g.visible(s, d))
        return PathPolyline{{s, d}};

    const auto nodes = g.nodes();
    const std::size_t n = nodes.size();
    std::vector<double> to_target(n, kInf);
    bool any_target = false;
    for (std::size_t i = 0; i < n; ++i) {
        if (g.visible(nodes[i], d)) {
            to_target[i] = distance(nodes[i], d);
            any_target = true;
        }
    }
    if (!any_target)
        return std::nullopt;

    constexpr std::size_t kSource = std::numeric_limits<std::size_t>::max();
    std::vector<double> dist(n, kInf);
    std::vector<std::size_t> pred(n, kSource);
    MinQueue queue;
    for (std::size_t i = 0; i < n; ++i) {
        if (g.visible(s, nodes[i])) {
            dist[i] = distance(s, nodes[i]);
            queue.push({dist[i], i});
        }
    }

    double best = kInf;
    std::size_t best_last = kSource;
    std::vector<bool> done(n, false);
    while (!queue.empty()) {
        const auto [du, u] = queue.top();
        queue.pop();
        if (done[u] || du > dist[u])
            continue;
        if (du >= best)
            break;
        done[u] = true;
        if (du + to_target[u] < best) {
            best = du + to_target[u];
            best_last = u;
        }
        for (const VisibilityGraph::Edge& e : g.neighbors(u)) {
            const double alt = du + e.length;
            if (alt < dist[e.to] || (alt == dist[e.to] && u < pred[e.to] && !done[e.to])) {
                dist[e.to] = alt;
                pred[e.to] = u;
                queue.push({alt, e.to});
            }
        }
    }
    if (best_last == kSource)
        return std::nullopt;

    PathPolyline path;
    path.waypoints.push_back(d);
    for (std::size_t v = best_last; v != kSource; v = pred[v])
        path.waypoints.push_back(nodes[v]);
    path.waypoints.push_back(s);
    std::reverse(path.waypoints.begin(), path.waypoints.end());
    return path;
}

Trajectory to_trajectory(const PathPolyline& path, double speed)
{
    if (!(speed > 0.0))
        throw std::invalid_argument("trajectory speed must be positive");
    if (path.waypoints.empty())
        throw std::invalid_argument("empty path");
    std::vector<Breakpoint> pts;
    pts.reserve(path.waypoints.size());
    pts.push_back({0.0, path.waypoints.front()});
    double travelled = 0.0;
    for (std::size_t i = 1; i < path.waypoints.size(); ++i) {
        const double len = distance(path.waypoints[i - 1], path.waypoints[i]);
        if (len == 0.0)
            continue;
        travelled += len;
        pts.push_back({travelled / speed, path.waypoints[i]});
    }
    return Trajectory::from_breakpoints(std::move(pts));
}

GoalField::GoalField(std::shared_ptr<const VisibilityGraph> graph, const Point& goal)
    : graph_(std::move(graph)), goal_(goal)
{
    const auto nodes = graph_->nodes();
    const std::size_t n = nodes.size();
    dist_.assign(n, kInf);
    MinQueue queue;
    for (std::size_t i = 0; i < n; ++i) {
        if (graph_->visible(nodes[i], goal_)) {
            dist_[i] = distance(nodes[i], goal_);
            queue.push({dist_[i], i});
        }
    }
    while (!queue.empty()) {
        const auto [du, u] = queue.top();
        queue.pop();
        if (du > dist_[u])
            continue;
        for (const VisibilityGraph::Edge& e : graph_->neighbors(u)) {
            const double alt = du + e.length;
            if (alt < dist_[e.to]) {
                dist_[e.to] = alt;
                queue.push({alt, e.to});
            }
        }
    }
}

GoalField::Choice GoalField::best_choice(const Point& p, double slack) const
{
    if (p == goal_)
        return {goal_, 0.0};
    const double r = graph_->radius() - slack;
    const auto visible = [&](const Point& q) { return swept_disc_free(p, q, r, graph_->env()); };
    if (visible(goal_))
        return {goal_, distance(p, goal_)};
    const auto nodes = graph_->nodes();
    thread_local std::vector<QueueItem> keys;
    keys.clear();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (dist_[i] == kInf)
            continue;
        const double d = distance(p, nodes[i]);
        if (d <= kGeomEps)
            continue;
        keys.push_back({d + dist_[i], i});
    }
    std::make_heap(keys.begin(), keys.end(), std::greater<>{});
    while (!keys.empty()) {
        std::pop_heap(keys.begin(), keys.end(), std::greater<>{});
        const auto [key, i] = keys.back();
        keys.pop_back();
        if (visible(nodes[i]))
            return {nodes[i], key};
    }
    return {std::nullopt, kInf};
}

std::optional<Point> GoalField::next_waypoint(const Point& p) const { return best_choice(p).waypoint; }

double GoalField::distance_from(const Point& p) const { return best_choice(p).distance; }

GraphCache::GraphCache(Environment env, int arc_points) : env_(std::move(env)), arc_points_(arc_points) {}

std::shared_ptr<const VisibilityGraph> GraphCache::get(double radius)
{
    std::shared_ptr<Entry> entry;
    {
        std::lock_guard lock(mutex_);
        auto& slot = entries_[radius];
        if (!slot)
            slot = std::make_shared<Entry>();
        entry = slot;
    }
    std::call_once(entry->once, [&] {
        entry->graph = std::make_shared<const VisibilityGraph>(VisibilityGraph::build(env_, radius, arc_points_));
    });
    return entry->graph;
}

} // namespace mapf
