#include "mapf/orca.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace mapf {

namespace {

constexpr double kLpEps = 1e-9;

// Line form used by the LP: permitted side is to the left of `dir`.
struct Line {
    Point point;
    Vec2 dir;
};

Line to_line(const HalfPlane& h) { return {h.point, h.direction()}; }

bool lp1(std::span<const Line> lines, std::size_t line_no, double radius, const Vec2& opt, bool direction_opt,
         Vec2& result)
{
    const Line& line = lines[line_no];
    const double dp = dot(line.point, line.dir);
    const double discriminant = dp * dp + radius * radius - norm2(line.point);
    if (discriminant < 0.0)
        return false;
    const double sqrt_disc = std::sqrt(discriminant);
    double t_left = -dp - sqrt_disc;
    double t_right = -dp + sqrt_disc;

    for (std::size_t i = 0; i < line_no; ++i) {
        const double denominator = cross(line.dir, lines[i].dir);
        const double numerator = cross(lines[i].dir, line.point - lines[i].point);
        if (std::abs(denominator) <= kLpEps) {
            if (numerator < 0.0)
                return false;
            continue;
        }
        const double t = numerator / denominator;
        if (denominator >= 0.0)
            t_right = std::min(t_right, t);
        else
            t_left = std::max(t_left, t);
        if (t_left > t_right)
            return false;
    }

    if (direction_opt) {
        result = dot(opt, line.dir) > 0.0 ? line.point + line.dir * t_right : line.point + line.dir * t_left;
    } else {
        const double t = dot(line.dir, opt - line.point);
        result = line.point + line.dir * std::clamp(t, t_left, t_right);
    }
    return true;
}

/// Returns the index of the first line that could not be satisfied, or lines.size().
std::size_t lp2(std::span<const Line> lines, double radius, const Vec2& opt, bool direction_opt, Vec2& result)
{
    if (direction_opt)
        result = opt * radius;
    else if (norm2(opt) > radius * radius)
        result = normalized(opt) * radius;
    else
        result = opt;

    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (cross(lines[i].dir, lines[i].point - result) > 0.0) {
            const Vec2 previous = result;
            if (!lp1(lines, i, radius, opt, direction_opt, result)) {
                result = previous;
                return i;
            }
        }
    }
    return lines.size();
}

void lp3(std::span<const Line> lines, std::size_t num_hard, std::size_t begin, double radius, Vec2& result)
{
    double worst = 0.0;
    for (std::size_t i = begin; i < lines.size(); ++i) {
        if (cross(lines[i].dir, lines[i].point - result) <= worst)
            continue;
        std::vector<Line> projected(lines.begin(), lines.begin() + static_cast<std::ptrdiff_t>(num_hard));
        for (std::size_t j = num_hard; j < i; ++j) {
            Line line;
            const double determinant = cross(lines[i].dir, lines[j].dir);
            if (std::abs(determinant) <= kLpEps) {
                if (dot(lines[i].dir, lines[j].dir) > 0.0)
                    continue;
                line.point = (lines[i].point + lines[j].point) * 0.5;
            } else {
                line.point = lines[i].point +
                             lines[i].dir * (cross(lines[j].dir, lines[i].point - lines[j].point) / determinant);
            }
            line.dir = normalized(lines[j].dir - lines[i].dir);
            projected.push_back(line);
        }
        const Vec2 previous = result;
        if (lp2(projected, radius, Vec2{-lines[i].dir.y, lines[i].dir.x}, true, result) < projected.size())
            result = previous;
        worst = cross(lines[i].dir, lines[i].point - result);
    }
}

struct StepMotion {
    Point from;
    Point to;
    double duration{0.0}; ///< motion completes after this long, then rests at `to`
};

Point motion_at(const StepMotion& m, double s)
{
    if (m.duration <= 0.0 || s >= m.duration)
        return m.to;
    return m.from + (m.to - m.from) * (s / m.duration);
}

/// Closest approach of two step motions over [0, dt] (the end state persists afterwards).
double step_min_distance(const StepMotion& a, const StepMotion& b, double dt)
{
    double cuts[4] = {0.0, std::min(a.duration, dt), std::min(b.duration, dt), dt};
    std::sort(std::begin(cuts), std::end(cuts));
    Vec2 d_prev = motion_at(b, 0.0) - motion_at(a, 0.0);
    double best = norm(d_prev);
    for (int k = 1; k < 4; ++k) {
        if (cuts[k] <= cuts[k - 1])
            continue;
        const Vec2 d_next = motion_at(b, cuts[k]) - motion_at(a, cuts[k]);
        const Vec2 w = d_next - d_prev;
        const double ww = norm2(w);
        const double s = ww > 0.0 ? std::clamp(-dot(d_prev, w) / ww, 0.0, 1.0) : 0.0;
        best = std::min(best, norm(d_prev + w * s));
        d_prev = d_next;
    }
    return best;
}

} // namespace

HalfPlane agent_halfplane(const Point& pA, const Vec2& vA, double rA, const Point& pB, const Vec2& vB, double rB,
                          double tau, double dt)
{
    const Vec2 rel_pos = pB - pA;
    if (norm2(rel_pos) == 0.0)
        throw std::invalid_argument("agent_halfplane: coincident agent positions");
    if (!(tau > 0.0) || !(dt > 0.0))
        throw std::invalid_argument("agent_halfplane: horizons must be positive");
    const Vec2 rel_vel = vA - vB;
    const double dist_sq = norm2(rel_pos);
    const double combined = rA + rB;
    const double combined_sq = combined * combined;

    Vec2 dir;
    Vec2 u;
    if (dist_sq > combined_sq) {
        const double inv_tau = 1.0 / tau;
        const Vec2 w = rel_vel - rel_pos * inv_tau;
        const double w_len_sq = norm2(w);
        const double dot1 = dot(w, rel_pos);
        if (dot1 < 0.0 && dot1 * dot1 > combined_sq * w_len_sq) {
            // Closest boundary point lies on the cut-off circle.
            const double w_len = std::sqrt(w_len_sq);
            const Vec2 unit_w = w / w_len;
            dir = {unit_w.y, -unit_w.x};
            u = unit_w * (combined * inv_tau - w_len);
        } else {
            // Closest boundary point lies on one of the cone legs.
            const double leg = std::sqrt(dist_sq - combined_sq);
            if (cross(rel_pos, w) > 0.0) {
                dir = Vec2{rel_pos.x * leg - rel_pos.y * combined, rel_pos.x * combined + rel_pos.y * leg} / dist_sq;
            } else {
                dir = -Vec2{rel_pos.x * leg + rel_pos.y * combined, -rel_pos.x * combined + rel_pos.y * leg} / dist_sq;
            }
            u = dir * dot(rel_vel, dir) - rel_vel;
        }
    } else {
        // Already overlapping: resolve within one step.
        const double inv_dt = 1.0 / dt;
        const Vec2 w = rel_vel - rel_pos * inv_dt;
        const double w_len = norm(w);
        const Vec2 unit_w = w_len > 0.0 ? w / w_len : normalized(-rel_pos);
        dir = {unit_w.y, -unit_w.x};
        u = unit_w * (combined * inv_dt - w_len);
    }
    HalfPlane h;
    h.point = vA + u * 0.5;
    h.normal = perp(dir);
    return h;
}

std::vector<HalfPlane> obstacle_halfplanes(const Point& p, double r, const Environment& env, double tau_obs, double vmax)
{
    if (!(tau_obs > 0.0))
        throw std::invalid_argument("obstacle horizon must be positive");
    std::vector<HalfPlane> out;
    const double range = r + vmax * tau_obs;
    const auto visit = [&](const Point& a, const Point& b) {
        const Point q = closest_point_on_segment(p, a, b);
        const double d = distance(p, q);
        if (d > range || d == 0.0)
            return;
        const Vec2 n = (p - q) / d;
        const double clearance = d - r;
        out.push_back({n * (-clearance / tau_obs), n});
    };
    const Rect& bnd = env.boundary();
    visit({bnd.xmin, bnd.ymin}, {bnd.xmax, bnd.ymin});
    visit({bnd.xmax, bnd.ymin}, {bnd.xmax, bnd.ymax});
    visit({bnd.xmax, bnd.ymax}, {bnd.xmin, bnd.ymax});
    visit({bnd.xmin, bnd.ymax}, {bnd.xmin, bnd.ymin});
    for (const Polygon& poly : env.obstacles()) {
        if (dist_point_rect(p, poly.bbox()) > range)
            continue;
        const std::size_t n = poly.size();
        for (std::size_t i = 0; i < n; ++i)
            visit(poly.vertex(i), poly.vertex(i + 1));
    }
    return out;
}

Vec2 solve_velocity(std::span<const HalfPlane> hard, std::span<const HalfPlane> soft, const Vec2& v_pref, double vmax)
{
    if (!(vmax > 0.0))
        throw std::invalid_argument("solve_velocity: vmax must be positive");
    thread_local std::vector<Line> lines;
    lines.clear();
    for (const HalfPlane& h : hard)
        lines.push_back(to_line(h));
    Vec2 result;
    if (!hard.empty() && lp2(lines, vmax, v_pref, false, result) < lines.size())
        return {};
    for (const HalfPlane& h : soft)
        lines.push_back(to_line(h));
    const std::size_t failed = lp2(lines, vmax, v_pref, false, result);
    if (failed < lines.size())
        lp3(lines, hard.size(), failed, vmax, result);
    return result;
}

Vec2 solve_velocity(std::span<const HalfPlane> constraints, const Vec2& v_pref, double vmax)
{
    return solve_velocity({}, constraints, v_pref, vmax);
}

std::size_t default_max_steps(const ProblemInstance& inst, std::span<const Point> starts, std::span<const Point> goals,
                              const SimParams& params, GraphCache& graphs)
{
    double makespan = 0.0;
    for (std::size_t i = 0; i < inst.agents.size(); ++i) {
        const AgentSpec& ag = inst.agents[i];
        const auto path = shortest_path(*graphs.get(ag.radius), starts[i], goals[i]);
        if (!path)
            return 0;
        makespan = std::max(makespan, path->length() / ag.max_speed);
    }
    return static_cast<std::size_t>(std::ceil(params.step_factor * makespan / params.dt));
}

SimOutcome simulate(const ProblemInstance& inst, std::span<const Point> starts, std::span<const Point> goals,
                    const SimParams& params, GraphCache& graphs)
{
    const std::size_t n = inst.agents.size();
    if (starts.size() != n || goals.size() != n)
        throw std::invalid_argument("simulate: joint state size does not match the instance");
    if (!(params.dt > 0.0) || !(params.tau_agent > 0.0) || !(params.tau_obstacle > 0.0) || !(params.arrive_eps > 0.0))
        throw std::invalid_argument("simulate: parameters must be positive");

    const Environment& env = inst.env;
    const double dt = params.dt;
    std::vector<GoalField> fields;
    fields.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        fields.emplace_back(graphs.get(inst.agents[i].radius), goals[i]);

    const std::size_t max_steps =
        params.max_steps > 0 ? params.max_steps : default_max_steps(inst, starts, goals, params, graphs);

    std::vector<Point> pos(starts.begin(), starts.end());
    std::vector<Vec2> vel(n);
    std::vector<TrajectoryBuilder> builders;
    builders.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        builders.emplace_back(pos[i]);

    std::mt19937_64 rng(params.seed);
    std::vector<HalfPlane> soft;
    std::vector<Vec2> new_vel(n);
    std::vector<StepMotion> motion(n);
    const double half_margin = 0.5 * params.safety_margin;
    const double rot_cos = std::cos(params.pref_rotation);
    const double rot_sin = std::sin(params.pref_rotation);

    const auto all_home = [&] {
        for (std::size_t i = 0; i < n; ++i)
            if (pos[i] != goals[i])
                return false;
        return true;
    };

    // Deadlocked or oscillating agents stop making progress; report them without running out the step bound.
    const std::size_t stall_steps =
        params.stall_window > 0.0 ? static_cast<std::size_t>(std::ceil(params.stall_window / dt)) : 0;
    double best_remaining = std::numeric_limits<double>::infinity();
    std::size_t last_progress = 0;
    // Latest time each agent came to rest on its goal; a lower bound on its final arrival time.
    std::vector<double> settled(n, 0.0);
    // Shortest-path lengths carry the tiny corner inflation; shrink them so the bound stays below the truth.
    constexpr double kPathSlack = 1.0 - 1e-5;
    // Agents steer along the graph rather than trace it; see GoalField::best_choice.
    constexpr double kSteerSlack = 0.05;
    bool bounded = false;

    SimOutcome out;
    std::size_t step = 0;
    bool reached = all_home();
    for (; step < max_steps && !reached; ++step) {
        double remaining = 0.0;
        double cost_lb = 0.0;
        const double t0 = static_cast<double>(step) * dt;
        const double t1 = static_cast<double>(step + 1) * dt;

        for (std::size_t i = 0; i < n; ++i) {
            const AgentSpec& ag = inst.agents[i];
            Vec2 pref;
            if (pos[i] != goals[i]) {
                const GoalField::Choice choice = fields[i].best_choice(pos[i], kSteerSlack * ag.radius);
                remaining += choice.distance;
                cost_lb += t0 + (std::isfinite(choice.distance) ? kPathSlack * choice.distance / ag.max_speed : 0.0);
                const Point target = choice.waypoint.value_or(goals[i]);
                const Vec2 to_target = target - pos[i];
                const double len = norm(to_target);
                if (len > 0.0) {
                    const double speed = target == goals[i] ? std::min(ag.max_speed, len / dt) : ag.max_speed;
                    pref = to_target * (speed / len);
                    pref = {pref.x * rot_cos + pref.y * rot_sin, pref.y * rot_cos - pref.x * rot_sin};
                }
            } else {
                cost_lb += settled[i];
            }
            const std::vector<HalfPlane> hard =
                obstacle_halfplanes(pos[i], ag.radius + params.safety_margin, env, params.tau_obstacle, ag.max_speed);
            soft.clear();
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i)
                    continue;
                soft.push_back(agent_halfplane(pos[i], vel[i], ag.radius + half_margin, pos[j], vel[j],
                                               inst.agents[j].radius + half_margin, params.tau_agent, dt));
            }
            std::shuffle(soft.begin(), soft.end(), rng);
            new_vel[i] = solve_velocity(hard, soft, pref, ag.max_speed);
        }
        if (params.cost_bound && cost_lb >= *params.cost_bound) {
            bounded = true;
            break;
        }
        if (remaining < best_remaining - params.stall_distance) {
            best_remaining = remaining;
            last_progress = step;
        } else if (stall_steps > 0 && step - last_progress >= stall_steps) {
            break;
        }

        for (std::size_t i = 0; i < n; ++i) {
            const AgentSpec& ag = inst.agents[i];
            StepMotion m{pos[i], pos[i] + new_vel[i] * dt, dt};
            const double to_goal = distance(pos[i], goals[i]);
            if (pos[i] != goals[i] && to_goal <= ag.max_speed * dt && distance(m.to, goals[i]) <= params.arrive_eps) {
                m.to = goals[i];
                m.duration = std::min(dt, to_goal / ag.max_speed);
            }
            if (m.to == m.from)
                m.duration = 0.0;
            motion[i] = m;
        }

        // Hold back any agent whose committed motion would not be collision-free.
        bool changed = true;
        while (changed) {
            changed = false;
            for (std::size_t i = 0; i < n; ++i) {
                StepMotion& m = motion[i];
                if (m.to != m.from && !swept_disc_free(m.from, m.to, inst.agents[i].radius, env)) {
                    m = {m.from, m.from, 0.0};
                    changed = true;
                }
            }
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = i + 1; j < n; ++j) {
                    StepMotion& a = motion[i];
                    StepMotion& b = motion[j];
                    if (a.to == a.from && b.to == b.from)
                        continue;
                    if (step_min_distance(a, b, dt) > inst.agents[i].radius + inst.agents[j].radius)
                        continue;
                    a = {a.from, a.from, 0.0};
                    b = {b.from, b.from, 0.0};
                    changed = true;
                }
            }
        }

        for (std::size_t i = 0; i < n; ++i) {
            const StepMotion& m = motion[i];
            double t_mid = t0 + m.duration;
            // Rounding t0 + duration must not shorten the snap piece beyond the speed limit.
            while (t_mid < t1 && distance(m.from, m.to) > inst.agents[i].max_speed * (t_mid - t0))
                t_mid = std::nextafter(t_mid, t1);
            if (m.duration > 0.0 && m.duration < dt && t_mid > t0 && t_mid < t1)
                builders[i].add(t_mid, m.to);
            builders[i].add(t1, m.to);
            if (m.to != m.from && m.to == goals[i])
                settled[i] = t0 + m.duration;
            vel[i] = (m.to - m.from) / dt;
            pos[i] = m.to;
        }
        reached = all_home();
    }

    out.steps = step;
    out.status = reached ? SimStatus::Reached : bounded ? SimStatus::Bounded : SimStatus::StepLimit;
    out.trajectories.reserve(n);
    for (const TrajectoryBuilder& b : builders)
        out.trajectories.push_back(b.build());

#ifdef MAPF_AUDIT
    {
        ProblemInstance audit{inst.env, inst.agents};
        for (std::size_t i = 0; i < n; ++i) {
            audit.agents[i].start = starts[i];
            audit.agents[i].goal = out.trajectories[i].final_point();
        }
        const CfReport report = check_cf_report(out.trajectories, audit);
        if (!report.ok)
            throw std::logic_error("ORCA simulation produced a colliding trajectory: " + report.violation->message);
    }
#endif
    return out;
}

SimOutcome simulate(const ProblemInstance& inst, const SimParams& params, GraphCache& graphs)
{
    const std::vector<Point> s = inst.starts();
    const std::vector<Point> g = inst.goals();
    return simulate(inst, s, g, params, graphs);
}

} // namespace mapf
