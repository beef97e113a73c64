#pragma once
/**
 * @file geom.hpp
 * @brief Planar primitives: vectors, segments, polygons and disc clearance tests.
 *
 * All collision predicates are strict: a disc of radius r is free only when
 * every obstacle point lies at distance > r from its centre. Tangential
 * contact counts as collision.
 */

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mapf {

/// Tolerance for degeneracy decisions (collinearity, on-segment tests).
inline constexpr double kGeomEps = 1e-9;

struct Vec2 {
    double x{0.0};
    double y{0.0};

    constexpr Vec2() = default;
    constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

    constexpr Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator-() const { return {-x, -y}; }
    constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
    constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
    constexpr Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    constexpr Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
    constexpr Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
    constexpr bool operator==(const Vec2&) const = default;
};

constexpr Vec2 operator*(double s, const Vec2& v) { return {s * v.x, s * v.y}; }

using Point = Vec2;

constexpr double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
/// z-component of the 3-d cross product; > 0 when b is counter-clockwise of a.
constexpr double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
constexpr double norm2(const Vec2& v) { return dot(v, v); }
inline double norm(const Vec2& v) { return std::sqrt(v.x * v.x + v.y * v.y); }
inline double distance(const Point& a, const Point& b) { return norm(b - a); }
/// Unit vector along v, or the zero vector when |v| <= eps.
inline Vec2 normalized(const Vec2& v, double eps = 0.0)
{
    const double n = norm(v);
    return n > eps ? v / n : Vec2{};
}
/// Counter-clockwise perpendicular.
constexpr Vec2 perp(const Vec2& v) { return {-v.y, v.x}; }

class GeometryError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

struct Rect {
    double xmin{0.0};
    double ymin{0.0};
    double xmax{0.0};
    double ymax{0.0};

    constexpr double width() const { return xmax - xmin; }
    constexpr double height() const { return ymax - ymin; }
    double diagonal() const { return std::hypot(width(), height()); }
    constexpr bool contains(const Point& p) const { return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax; }
    constexpr bool operator==(const Rect&) const = default;
};

/// Distance from p to an axis-aligned rectangle (0 inside).
double dist_point_rect(const Point& p, const Rect& r);

/**
 * @brief Simple polygon stored counter-clockwise.
 *
 * Construction validates the vertex list (>= 3 vertices, finite, non-zero
 * area, no self-intersection) and reverses clockwise input.
 */
class Polygon {
  public:
    explicit Polygon(std::vector<Point> vertices);

    std::span<const Point> vertices() const { return vertices_; }
    std::size_t size() const { return vertices_.size(); }
    const Point& vertex(std::size_t i) const { return vertices_[i % vertices_.size()]; }
    const Rect& bbox() const { return bbox_; }
    double area() const;

    /// True if the interior angle at vertex i is < 180 degrees.
    bool is_convex_corner(std::size_t i) const;

    bool operator==(const Polygon& o) const { return vertices_ == o.vertices_; }

  private:
    std::vector<Point> vertices_;
    Rect bbox_;
};

/// Twice the signed area (positive for counter-clockwise order).
double signed_area2(std::span<const Point> pts);

/**
 * @brief A rectangular world with polygonal obstacles.
 *
 * The boundary acts as an inward-facing obstacle: agents must stay strictly
 * inside it. Obstacles must lie inside the boundary and must not overlap.
 */
class Environment {
  public:
    Environment() = default;
    Environment(Rect boundary, std::vector<Polygon> obstacles);

    const Rect& boundary() const { return boundary_; }
    std::span<const Polygon> obstacles() const { return obstacles_; }
    bool operator==(const Environment& o) const { return boundary_ == o.boundary_ && obstacles_ == o.obstacles_; }

  private:
    Rect boundary_{0.0, 0.0, 1000.0, 1000.0};
    std::vector<Polygon> obstacles_;
};

/// Euclidean distance from p to the closed segment ab (a == b allowed).
double dist_point_segment(const Point& p, const Point& a, const Point& b);

/// Closest point to p on the closed segment ab.
Point closest_point_on_segment(const Point& p, const Point& a, const Point& b);

/// True if the closed segments ab and cd share a point (within kGeomEps).
bool segments_intersect(const Point& a, const Point& b, const Point& c, const Point& d);

/// Minimum distance between closed segments ab and cd.
double dist_segment_segment(const Point& a, const Point& b, const Point& c, const Point& d);

/// Closed containment test: points on the polygon boundary are inside.
bool point_in_polygon(const Point& p, const Polygon& poly);

/// Distance from p to the polygon's boundary (0 on the boundary).
double dist_point_polygon_boundary(const Point& p, const Polygon& poly);

/// True iff the closed disc D(p, r) misses every obstacle and stays strictly inside the boundary.
bool disc_free(const Point& p, double r, const Environment& env);

/**
 * @brief Exact swept-disc test for the linear motion a -> b.
 *
 * True iff every obstacle edge is at distance > r from segment ab, the
 * segment stays at distance > r inside the boundary, and no obstacle
 * contains a or b.
 */
bool swept_disc_free(const Point& a, const Point& b, double r, const Environment& env);

/// Smallest distance from p to any obstacle edge or boundary side.
double clearance(const Point& p, const Environment& env);

/// Visits every obstacle edge and the four boundary sides as (a, b) pairs.
template <typename F> void for_each_edge(const Environment& env, F&& f)
{
    const Rect& b = env.boundary();
    f(Point{b.xmin, b.ymin}, Point{b.xmax, b.ymin});
    f(Point{b.xmax, b.ymin}, Point{b.xmax, b.ymax});
    f(Point{b.xmax, b.ymax}, Point{b.xmin, b.ymax});
    f(Point{b.xmin, b.ymax}, Point{b.xmin, b.ymin});
    for (const Polygon& poly : env.obstacles()) {
        const std::size_t n = poly.size();
        for (std::size_t i = 0; i < n; ++i)
            f(poly.vertex(i), poly.vertex(i + 1));
    }
}

} // namespace mapf
