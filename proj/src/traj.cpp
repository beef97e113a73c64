#include "mapf/traj.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mapf {

namespace {

/// Evaluates a trajectory at non-decreasing query times in amortised O(1).
class Cursor {
  public:
    explicit Cursor(std::span<const Breakpoint> pts) : pts_(pts) {}

    Point at(double t)
    {
        while (idx_ + 1 < pts_.size() && pts_[idx_ + 1].t <= t)
            ++idx_;
        if (idx_ + 1 >= pts_.size())
            return pts_.back().p;
        const Breakpoint& a = pts_[idx_];
        const Breakpoint& b = pts_[idx_ + 1];
        if (t <= a.t)
            return a.p;
        const double s = (t - a.t) / (b.t - a.t);
        return a.p + (b.p - a.p) * s;
    }

  private:
    std::span<const Breakpoint> pts_;
    std::size_t idx_{0};
};

/// Minimum of |d0 + (d1 - d0) s| over s in [0, 1]; returns (distance, s).
std::pair<double, double> segment_min(const Vec2& d0, const Vec2& d1)
{
    const Vec2 w = d1 - d0;
    const double ww = norm2(w);
    double s = 0.0;
    if (ww > 0.0)
        s = std::clamp(-dot(d0, w) / ww, 0.0, 1.0);
    return {norm(d0 + w * s), s};
}

} // namespace

Trajectory Trajectory::stationary(const Point& p) { return Trajectory({Breakpoint{0.0, p}}); }

Trajectory Trajectory::line(const Point& a, const Point& b, double speed)
{
    if (!(speed > 0.0))
        throw std::invalid_argument("line trajectory needs positive speed");
    if (a == b)
        return stationary(a);
    return Trajectory({Breakpoint{0.0, a}, Breakpoint{distance(a, b) / speed, b}});
}

Trajectory Trajectory::from_breakpoints(std::vector<Breakpoint> pts)
{
    if (pts.empty())
        throw std::invalid_argument("trajectory has no breakpoints");
    if (pts.front().t != 0.0)
        throw std::invalid_argument("trajectory must start at t = 0");
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Breakpoint& b = pts[i];
        if (!std::isfinite(b.t) || !std::isfinite(b.p.x) || !std::isfinite(b.p.y))
            throw std::invalid_argument("trajectory breakpoint is not finite");
        if (i > 0 && !(b.t > pts[i - 1].t))
            throw std::invalid_argument("trajectory breakpoint times must strictly increase");
    }
    Trajectory tr(std::move(pts));
    tr.trim_tail();
    return tr;
}

void Trajectory::trim_tail()
{
    while (pts_.size() >= 2 && pts_[pts_.size() - 2].p == pts_.back().p)
        pts_.pop_back();
}

Point Trajectory::eval(double t) const
{
    if (t <= 0.0)
        return pts_.front().p;
    if (t >= pts_.back().t)
        return pts_.back().p;
    const auto it = std::upper_bound(pts_.begin(), pts_.end(), t,
                                     [](double value, const Breakpoint& b) { return value < b.t; });
    const Breakpoint& b = *it;
    const Breakpoint& a = *(it - 1);
    const double s = (t - a.t) / (b.t - a.t);
    return a.p + (b.p - a.p) * s;
}

std::vector<Piece> Trajectory::pieces() const
{
    std::vector<Piece> out;
    out.reserve(pts_.size());
    for (std::size_t i = 0; i + 1 < pts_.size(); ++i) {
        const Breakpoint& a = pts_[i];
        const Breakpoint& b = pts_[i + 1];
        out.push_back({a.t, b.t, a.p, (b.p - a.p) / (b.t - a.t)});
    }
    return out;
}

double Trajectory::max_speed() const
{
    double best = 0.0;
    for (std::size_t i = 0; i + 1 < pts_.size(); ++i)
        best = std::max(best, distance(pts_[i].p, pts_[i + 1].p) / (pts_[i + 1].t - pts_[i].t));
    return best;
}

Trajectory Trajectory::delayed(double delay) const
{
    Trajectory out = stationary(start());
    out.append(*this, delay);
    return out;
}

void Trajectory::append(const Trajectory& next, double at)
{
    if (pts_.empty()) {
        pts_ = next.pts_;
        for (Breakpoint& b : pts_)
            b.t += at;
        if (at > 0.0)
            pts_.insert(pts_.begin(), Breakpoint{0.0, next.start()});
        trim_tail();
        return;
    }
    if (at < arrival_time())
        throw std::invalid_argument("append time precedes arrival");
    if (distance(next.start(), final_point()) > kGeomEps)
        throw std::invalid_argument("appended trajectory does not start at the final point");
    if (next.pts_.size() == 1)
        return;
    if (at > pts_.back().t)
        pts_.push_back({at, pts_.back().p});
    for (std::size_t i = 1; i < next.pts_.size(); ++i) {
        double t = next.pts_[i].t + at;
        if (!(t > pts_.back().t))
            t = std::nextafter(pts_.back().t, std::numeric_limits<double>::infinity());
        pts_.push_back({t, next.pts_[i].p});
    }
    trim_tail();
}

TrajectoryBuilder::TrajectoryBuilder(const Point& start, double merge_tol) : merge_tol_(merge_tol)
{
    pts_.push_back({0.0, start});
}

void TrajectoryBuilder::add(double t, const Point& p)
{
    const Breakpoint& last = pts_.back();
    if (!(t > last.t))
        throw std::invalid_argument("trajectory builder times must strictly increase");
    if (pts_.size() >= 2) {
        const Breakpoint& prev = pts_[pts_.size() - 2];
        const Vec2 v_cur = (last.p - prev.p) / (last.t - prev.t);
        const Vec2 v_new = (p - last.p) / (t - last.t);
        if (std::abs(v_cur.x - v_new.x) <= merge_tol_ && std::abs(v_cur.y - v_new.y) <= merge_tol_) {
            pts_.back() = {t, p};
            return;
        }
    }
    pts_.push_back({t, p});
}

Trajectory TrajectoryBuilder::build() const { return Trajectory::from_breakpoints(pts_); }

std::vector<Point> ProblemInstance::starts() const
{
    std::vector<Point> out;
    out.reserve(agents.size());
    for (const AgentSpec& a : agents)
        out.push_back(a.start);
    return out;
}

std::vector<Point> ProblemInstance::goals() const
{
    std::vector<Point> out;
    out.reserve(agents.size());
    for (const AgentSpec& a : agents)
        out.push_back(a.goal);
    return out;
}

double ProblemInstance::min_radius() const
{
    double r = std::numeric_limits<double>::infinity();
    for (const AgentSpec& a : agents)
        r = std::min(r, a.radius);
    return r;
}

std::vector<std::string> validate_instance(const ProblemInstance& inst)
{
    std::vector<std::string> errors;
    const auto fmt = [](const char* what, std::size_t i) { return std::string(what) + " (agent " + std::to_string(i) + ")"; };
    for (std::size_t i = 0; i < inst.agents.size(); ++i) {
        const AgentSpec& a = inst.agents[i];
        if (!(a.radius > 0.0) || !std::isfinite(a.radius))
            errors.push_back(fmt("radius must be positive", i));
        if (!(a.max_speed > 0.0) || !std::isfinite(a.max_speed))
            errors.push_back(fmt("max_speed must be positive", i));
        if (!std::isfinite(a.start.x) || !std::isfinite(a.start.y) || !std::isfinite(a.goal.x) || !std::isfinite(a.goal.y)) {
            errors.push_back(fmt("start/goal not finite", i));
            continue;
        }
        if (a.radius > 0.0) {
            if (!disc_free(a.start, a.radius, inst.env))
                errors.push_back(fmt("start is not disc-free", i));
            if (!disc_free(a.goal, a.radius, inst.env))
                errors.push_back(fmt("goal is not disc-free", i));
        }
    }
    for (std::size_t i = 0; i < inst.agents.size(); ++i) {
        for (std::size_t j = i + 1; j < inst.agents.size(); ++j) {
            const AgentSpec& a = inst.agents[i];
            const AgentSpec& b = inst.agents[j];
            const double rr = a.radius + b.radius;
            if (!(distance(a.start, b.start) > rr))
                errors.push_back("starts of agents " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
            if (!(distance(a.goal, b.goal) > rr))
                errors.push_back("goals of agents " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
        }
    }
    return errors;
}

double solution_cost(std::span<const Trajectory> trajs)
{
    double c = 0.0;
    for (const Trajectory& t : trajs)
        c += t.arrival_time();
    return c;
}

Solution make_solution(std::vector<Trajectory> trajs)
{
    Solution s;
    s.cost = solution_cost(trajs);
    s.trajectories = std::move(trajs);
    return s;
}

SeparationMin closest_approach(const Trajectory& a, const Trajectory& b)
{
    const auto pa = a.breakpoints();
    const auto pb = b.breakpoints();
    std::vector<double> times;
    times.reserve(pa.size() + pb.size());
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < pa.size() || j < pb.size()) {
        double t;
        if (j >= pb.size() || (i < pa.size() && pa[i].t < pb[j].t))
            t = pa[i++].t;
        else if (i >= pa.size() || pb[j].t < pa[i].t)
            t = pb[j++].t;
        else {
            t = pa[i].t;
            ++i;
            ++j;
        }
        if (times.empty() || t > times.back())
            times.push_back(t);
    }

    Cursor ca(pa);
    Cursor cb(pb);
    Vec2 d_prev = cb.at(times.front()) - ca.at(times.front());
    SeparationMin best{norm(d_prev), times.front()};
    for (std::size_t k = 1; k < times.size(); ++k) {
        const Vec2 d_next = cb.at(times[k]) - ca.at(times[k]);
        const auto [dist, s] = segment_min(d_prev, d_next);
        if (dist < best.distance)
            best = {dist, times[k - 1] + s * (times[k] - times[k - 1])};
        d_prev = d_next;
    }
    return best;
}

double min_separation(const Trajectory& a, const Trajectory& b) { return closest_approach(a, b).distance; }

bool mutually_separated(std::span<const Trajectory> trajs, std::span<const AgentSpec> agents, double margin)
{
    for (std::size_t i = 0; i < trajs.size(); ++i)
        for (std::size_t j = i + 1; j < trajs.size(); ++j)
            if (!(min_separation(trajs[i], trajs[j]) > agents[i].radius + agents[j].radius + margin))
                return false;
    return true;
}

std::string to_string(CfViolation::Kind kind)
{
    switch (kind) {
    case CfViolation::Kind::AgentCount: return "agent-count";
    case CfViolation::Kind::StartMismatch: return "start-mismatch";
    case CfViolation::Kind::GoalMismatch: return "goal-mismatch";
    case CfViolation::Kind::SpeedLimit: return "speed-limit";
    case CfViolation::Kind::Obstacle: return "obstacle";
    case CfViolation::Kind::AgentAgent: return "agent-agent";
    }
    return "unknown";
}

CfReport check_cf_report(std::span<const Trajectory> trajs, const ProblemInstance& inst, double margin)
{
    const auto fail = [](CfViolation v) {
        CfReport r;
        r.ok = false;
        r.violation = std::move(v);
        return r;
    };
    if (trajs.size() != inst.agents.size()) {
        std::ostringstream msg;
        msg << "expected " << inst.agents.size() << " trajectories, got " << trajs.size();
        return fail({CfViolation::Kind::AgentCount, 0, 0, 0.0, 0.0, msg.str()});
    }
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        const Trajectory& tr = trajs[i];
        const AgentSpec& ag = inst.agents[i];
        if (tr.empty())
            return fail({CfViolation::Kind::StartMismatch, i, i, 0.0, 0.0, "empty trajectory"});
        if (distance(tr.start(), ag.start) > kGeomEps)
            return fail({CfViolation::Kind::StartMismatch, i, i, 0.0, 0.0,
                         "agent " + std::to_string(i) + " does not start at its start position"});
        if (distance(tr.final_point(), ag.goal) > kGeomEps)
            return fail({CfViolation::Kind::GoalMismatch, i, i, tr.arrival_time(), 0.0,
                         "agent " + std::to_string(i) + " does not end at its goal"});
        const auto pts = tr.breakpoints();
        const double r = ag.radius + margin;
        if (pts.size() == 1 && !disc_free(pts[0].p, r, inst.env))
            return fail({CfViolation::Kind::Obstacle, i, i, 0.0, 0.0,
                         "agent " + std::to_string(i) + " overlaps an obstacle at t=0"});
        for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
            const double speed = distance(pts[k].p, pts[k + 1].p) / (pts[k + 1].t - pts[k].t);
            if (speed > ag.max_speed + kSpeedEps) {
                std::ostringstream msg;
                msg.precision(12);
                msg << "agent " << i << " exceeds its speed limit (" << speed << " > " << ag.max_speed << ") at t=" << pts[k].t;
                return fail({CfViolation::Kind::SpeedLimit, i, i, pts[k].t, speed, msg.str()});
            }
            if (!swept_disc_free(pts[k].p, pts[k + 1].p, r, inst.env)) {
                std::ostringstream msg;
                msg << "agent " << i << " hits an obstacle during [" << pts[k].t << ", " << pts[k + 1].t << "]";
                return fail({CfViolation::Kind::Obstacle, i, i, pts[k].t, 0.0, msg.str()});
            }
        }
    }
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        for (std::size_t j = i + 1; j < trajs.size(); ++j) {
            const SeparationMin m = closest_approach(trajs[i], trajs[j]);
            const double need = inst.agents[i].radius + inst.agents[j].radius + margin;
            if (!(m.distance > need)) {
                std::ostringstream msg;
                msg << "agents " << i << " and " << j << " collide at t=" << m.time << " (separation " << m.distance
                    << " <= " << need << ")";
                return fail({CfViolation::Kind::AgentAgent, i, j, m.time, m.distance, msg.str()});
            }
        }
    }
    return {};
}

bool check_cf(std::span<const Trajectory> trajs, const ProblemInstance& inst, double margin)
{
    return check_cf_report(trajs, inst, margin).ok;
}

} // namespace mapf
