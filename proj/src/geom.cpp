#include "mapf/geom.hpp"

#include <algorithm>
#include <limits>

namespace mapf {

namespace {

int orientation(const Point& a, const Point& b, const Point& c)
{
    const double v = cross(b - a, c - a);
    const double scale = std::max({1.0, norm(b - a), norm(c - a)});
    if (v > kGeomEps * scale)
        return 1;
    if (v < -kGeomEps * scale)
        return -1;
    return 0;
}

bool on_segment(const Point& p, const Point& a, const Point& b)
{
    return p.x >= std::min(a.x, b.x) - kGeomEps && p.x <= std::max(a.x, b.x) + kGeomEps &&
           p.y >= std::min(a.y, b.y) - kGeomEps && p.y <= std::max(a.y, b.y) + kGeomEps;
}

bool strictly_inside_inset(const Point& p, double r, const Rect& b)
{
    return p.x - r > b.xmin && p.x + r < b.xmax && p.y - r > b.ymin && p.y + r < b.ymax;
}

Rect segment_bbox(const Point& a, const Point& b, double pad)
{
    return {std::min(a.x, b.x) - pad, std::min(a.y, b.y) - pad, std::max(a.x, b.x) + pad, std::max(a.y, b.y) + pad};
}

bool rects_overlap(const Rect& a, const Rect& b)
{
    return a.xmin <= b.xmax && b.xmin <= a.xmax && a.ymin <= b.ymax && b.ymin <= a.ymax;
}

double dist2_point_segment(const Point& p, const Point& a, const Point& b)
{
    return norm2(p - closest_point_on_segment(p, a, b));
}

/// Some endpoint of either segment lies within sqrt(r2) of the other segment.
bool segments_within(const Point& a, const Point& b, const Point& c, const Point& d, double r2)
{
    return dist2_point_segment(a, c, d) <= r2 || dist2_point_segment(b, c, d) <= r2 ||
           dist2_point_segment(c, a, b) <= r2 || dist2_point_segment(d, a, b) <= r2;
}

} // namespace

double dist_point_rect(const Point& p, const Rect& r)
{
    const double dx = std::max({r.xmin - p.x, 0.0, p.x - r.xmax});
    const double dy = std::max({r.ymin - p.y, 0.0, p.y - r.ymax});
    return std::sqrt(dx * dx + dy * dy);
}

double signed_area2(std::span<const Point> pts)
{
    double s = 0.0;
    const std::size_t n = pts.size();
    for (std::size_t i = 0; i < n; ++i)
        s += cross(pts[i], pts[(i + 1) % n]);
    return s;
}

Polygon::Polygon(std::vector<Point> vertices) : vertices_(std::move(vertices))
{
    if (vertices_.size() < 3)
        throw GeometryError("polygon needs at least 3 vertices");
    for (const Point& p : vertices_)
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw GeometryError("polygon vertex is not finite");
    const double a2 = signed_area2(vertices_);
    if (std::abs(a2) <= kGeomEps)
        throw GeometryError("polygon has zero area");
    if (a2 < 0.0)
        std::reverse(vertices_.begin(), vertices_.end());

    const std::size_t n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if (adjacent)
                continue;
            if (segments_intersect(vertex(i), vertex(i + 1), vertex(j), vertex(j + 1)))
                throw GeometryError("polygon is not simple");
        }
    }

    bbox_ = {vertices_[0].x, vertices_[0].y, vertices_[0].x, vertices_[0].y};
    for (const Point& p : vertices_) {
        bbox_.xmin = std::min(bbox_.xmin, p.x);
        bbox_.ymin = std::min(bbox_.ymin, p.y);
        bbox_.xmax = std::max(bbox_.xmax, p.x);
        bbox_.ymax = std::max(bbox_.ymax, p.y);
    }
}

double Polygon::area() const { return 0.5 * signed_area2(vertices_); }

bool Polygon::is_convex_corner(std::size_t i) const
{
    const std::size_t n = vertices_.size();
    const Point& prev = vertex(i + n - 1);
    const Point& cur = vertex(i);
    const Point& next = vertex(i + 1);
    return cross(cur - prev, next - cur) > 0.0;
}

Environment::Environment(Rect boundary, std::vector<Polygon> obstacles)
    : boundary_(boundary), obstacles_(std::move(obstacles))
{
    if (!(boundary_.width() > 0.0 && boundary_.height() > 0.0))
        throw GeometryError("boundary rectangle must have positive size");
    for (const Polygon& poly : obstacles_)
        for (const Point& p : poly.vertices())
            if (!boundary_.contains(p))
                throw GeometryError("obstacle vertex outside boundary");
    for (std::size_t i = 0; i < obstacles_.size(); ++i) {
        for (std::size_t j = i + 1; j < obstacles_.size(); ++j) {
            const Polygon& a = obstacles_[i];
            const Polygon& b = obstacles_[j];
            if (!rects_overlap(a.bbox(), b.bbox()))
                continue;
            // Shared boundary points are tolerated; interior overlap is not.
            bool overlap = false;
            for (std::size_t u = 0; u < a.size() && !overlap; ++u) {
                for (std::size_t v = 0; v < b.size() && !overlap; ++v) {
                    const Point& p = a.vertex(u);
                    const Point& q = a.vertex(u + 1);
                    const Point& r = b.vertex(v);
                    const Point& s = b.vertex(v + 1);
                    if (orientation(p, q, r) * orientation(p, q, s) < 0 &&
                        orientation(r, s, p) * orientation(r, s, q) < 0)
                        overlap = true;
                }
            }
            if (!overlap) {
                const auto strictly_inside = [](const Point& p, const Polygon& poly) {
                    return point_in_polygon(p, poly) && dist_point_polygon_boundary(p, poly) > kGeomEps;
                };
                overlap = strictly_inside(a.vertex(0), b) || strictly_inside(b.vertex(0), a);
            }
            if (overlap)
                throw GeometryError("obstacles " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
        }
    }
}

Point closest_point_on_segment(const Point& p, const Point& a, const Point& b)
{
    const Vec2 ab = b - a;
    const double len2 = norm2(ab);
    if (len2 == 0.0)
        return a;
    const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
    return a + ab * t;
}

double dist_point_segment(const Point& p, const Point& a, const Point& b)
{
    return distance(p, closest_point_on_segment(p, a, b));
}

bool segments_intersect(const Point& a, const Point& b, const Point& c, const Point& d)
{
    const int o1 = orientation(a, b, c);
    const int o2 = orientation(a, b, d);
    const int o3 = orientation(c, d, a);
    const int o4 = orientation(c, d, b);
    if (o1 * o2 < 0 && o3 * o4 < 0)
        return true;
    if (o1 == 0 && on_segment(c, a, b))
        return true;
    if (o2 == 0 && on_segment(d, a, b))
        return true;
    if (o3 == 0 && on_segment(a, c, d))
        return true;
    if (o4 == 0 && on_segment(b, c, d))
        return true;
    return false;
}

double dist_segment_segment(const Point& a, const Point& b, const Point& c, const Point& d)
{
    if (segments_intersect(a, b, c, d))
        return 0.0;
    return std::min({dist_point_segment(a, c, d), dist_point_segment(b, c, d), dist_point_segment(c, a, b),
                     dist_point_segment(d, a, b)});
}

bool point_in_polygon(const Point& p, const Polygon& poly)
{
    const Rect& bb = poly.bbox();
    if (p.x < bb.xmin - kGeomEps || p.x > bb.xmax + kGeomEps || p.y < bb.ymin - kGeomEps || p.y > bb.ymax + kGeomEps)
        return false;
    const std::size_t n = poly.size();
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point& a = poly.vertex(i);
        const Point& b = poly.vertex(j);
        if (dist_point_segment(p, a, b) <= kGeomEps)
            return true;
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < x_cross)
                inside = !inside;
        }
    }
    return inside;
}

double dist_point_polygon_boundary(const Point& p, const Polygon& poly)
{
    double best = std::numeric_limits<double>::infinity();
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i)
        best = std::min(best, dist_point_segment(p, poly.vertex(i), poly.vertex(i + 1)));
    return best;
}

bool disc_free(const Point& p, double r, const Environment& env)
{
    if (!strictly_inside_inset(p, r, env.boundary()))
        return false;
    for (const Polygon& poly : env.obstacles()) {
        if (dist_point_rect(p, poly.bbox()) > r)
            continue;
        if (point_in_polygon(p, poly))
            return false;
        if (dist_point_polygon_boundary(p, poly) <= r)
            return false;
    }
    return true;
}

bool swept_disc_free(const Point& a, const Point& b, double r, const Environment& env)
{
    // The boundary is convex, so clearing it at both endpoints clears the whole segment.
    if (!strictly_inside_inset(a, r, env.boundary()) || !strictly_inside_inset(b, r, env.boundary()))
        return false;
    const Rect sweep = segment_bbox(a, b, r + kGeomEps);
    const double r2 = r * r;
    for (const Polygon& poly : env.obstacles()) {
        if (!rects_overlap(sweep, poly.bbox()))
            continue;
        if (point_in_polygon(a, poly) || point_in_polygon(b, poly))
            return false;
        const std::size_t n = poly.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Point& c = poly.vertex(i);
            const Point& d = poly.vertex(i + 1);
            if (!rects_overlap(sweep, segment_bbox(c, d, 0.0)))
                continue;
            if (segments_within(a, b, c, d, r2) || segments_intersect(a, b, c, d))
                return false;
        }
    }
    return true;
}

double clearance(const Point& p, const Environment& env)
{
    double best = std::numeric_limits<double>::infinity();
    for_each_edge(env, [&](const Point& a, const Point& b) { best = std::min(best, dist_point_segment(p, a, b)); });
    return best;
}

} // namespace mapf
