#include "mapf/planner.hpp"

#include "mapf/bench.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mapf {

namespace {

constexpr std::size_t kRejectionsPerDraw = 10'000;
constexpr std::size_t kRejectionLimit = 1'000'000;

ProblemInstance with_endpoints(const ProblemInstance& inst, const JointState& x, const JointState& y)
{
    ProblemInstance out{inst.env, inst.agents};
    for (std::size_t i = 0; i < out.agents.size(); ++i) {
        out.agents[i].start = x[i];
        out.agents[i].goal = y[i];
    }
    return out;
}

} // namespace

std::string to_string(ExtensionKind kind)
{
    switch (kind) {
    case ExtensionKind::Line: return "line";
    case ExtensionKind::VisibilityGraph: return "vg";
    case ExtensionKind::Orca: return "orca";
    }
    return "unknown";
}

double joint_dist(const JointState& a, const JointState& b)
{
    if (a.size() != b.size())
        throw std::invalid_argument("joint_dist: agent count mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        d += distance(a[i], b[i]);
    return d;
}

bool valid_joint_state(const JointState& s, const ProblemInstance& inst)
{
    if (s.size() != inst.agents.size())
        return false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!disc_free(s[i], inst.agents[i].radius, inst.env))
            return false;
        for (std::size_t j = 0; j < i; ++j)
            if (!(distance(s[i], s[j]) > inst.agents[i].radius + inst.agents[j].radius))
                return false;
    }
    return true;
}

JointState sample(const ProblemInstance& inst, std::mt19937_64& rng, double goal_bias, SamplerStats& stats)
{
    if (!(goal_bias >= 0.0 && goal_bias < 1.0))
        throw std::invalid_argument("goal_bias must lie in [0, 1)");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (goal_bias > 0.0 && unit(rng) < goal_bias)
        return inst.goals();

    const Rect& b = inst.env.boundary();
    const std::size_t n = inst.agents.size();
    JointState s(n);
    for (;;) {
        std::size_t draw_rejections = 0;
        bool restart = false;
        for (std::size_t i = 0; i < n && !restart; ++i) {
            const double r = inst.agents[i].radius;
            std::uniform_real_distribution<double> ux(b.xmin + r, b.xmax - r);
            std::uniform_real_distribution<double> uy(b.ymin + r, b.ymax - r);
            for (;;) {
                const Point p{ux(rng), uy(rng)};
                bool ok = disc_free(p, r, inst.env);
                for (std::size_t j = 0; j < i && ok; ++j)
                    ok = distance(p, s[j]) > r + inst.agents[j].radius;
                if (ok) {
                    s[i] = p;
                    break;
                }
                ++stats.rejections;
                if (stats.rejections >= kRejectionLimit)
                    throw SamplingStarvation("joint-state sampler starved after " + std::to_string(stats.rejections) +
                                             " rejections");
                if (++draw_rejections >= kRejectionsPerDraw) {
                    restart = true;
                    break;
                }
            }
        }
        if (!restart)
            return s;
    }
}

double edge_cost(std::span<const Trajectory> bundle) { return solution_cost(bundle); }

PlanTree::PlanTree(JointState root)
{
    Vertex v;
    v.state = std::move(root);
    vertices_.push_back(std::move(v));
}

std::size_t PlanTree::add(JointState state, std::size_t parent, std::vector<Trajectory> edge)
{
    Vertex v;
    v.state = std::move(state);
    v.parent = parent;
    v.edge_cost = edge_cost(edge);
    v.cost = vertices_[parent].cost + v.edge_cost;
    v.edge = std::move(edge);
    vertices_.push_back(std::move(v));
    const std::size_t id = vertices_.size() - 1;
    vertices_[parent].children.push_back(id);
    return id;
}

void PlanTree::reparent(std::size_t v, std::size_t new_parent, std::vector<Trajectory> edge)
{
    Vertex& vert = vertices_[v];
    if (!vert.parent)
        throw std::logic_error("cannot reparent the root");
    auto& siblings = vertices_[*vert.parent].children;
    siblings.erase(std::remove(siblings.begin(), siblings.end(), v), siblings.end());
    vert.parent = new_parent;
    vert.edge_cost = edge_cost(edge);
    vert.edge = std::move(edge);
    vertices_[new_parent].children.push_back(v);

    std::vector<std::size_t> stack{v};
    while (!stack.empty()) {
        const std::size_t u = stack.back();
        stack.pop_back();
        Vertex& vu = vertices_[u];
        vu.cost = vertices_[*vu.parent].cost + vu.edge_cost;
        for (std::size_t c : vu.children)
            stack.push_back(c);
    }
}

std::vector<std::size_t> PlanTree::path_to(std::size_t v) const
{
    std::vector<std::size_t> path;
    for (std::optional<std::size_t> u = v; u; u = vertices_[*u].parent)
        path.push_back(*u);
    std::reverse(path.begin(), path.end());
    return path;
}

Solution PlanTree::compose(std::size_t v) const
{
    const std::vector<std::size_t> path = path_to(v);
    const std::size_t n = vertices_.front().state.size();
    std::vector<Trajectory> trajs;
    trajs.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        trajs.push_back(Trajectory::stationary(vertices_.front().state[i]));
    double t = 0.0;
    for (std::size_t k = 1; k < path.size(); ++k) {
        const Vertex& vk = vertices_[path[k]];
        double duration = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            trajs[i].append(vk.edge[i], t);
            duration = std::max(duration, vk.edge[i].arrival_time());
        }
        t += duration;
    }
    return make_solution(std::move(trajs));
}

double PlanTree::composed_cost(std::size_t v) const
{
    const std::vector<std::size_t> path = path_to(v);
    const std::size_t n = vertices_.front().state.size();
    std::vector<double> arrival(n, 0.0);
    double t = 0.0;
    for (std::size_t k = 1; k < path.size(); ++k) {
        const Vertex& vk = vertices_[path[k]];
        double duration = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double a = vk.edge[i].arrival_time();
            if (a > 0.0)
                arrival[i] = t + a;
            duration = std::max(duration, a);
        }
        t += duration;
    }
    return std::accumulate(arrival.begin(), arrival.end(), 0.0);
}

void PlanTree::audit() const
{
    for (std::size_t i = 1; i < vertices_.size(); ++i) {
        const Vertex& v = vertices_[i];
        if (!v.parent)
            throw std::logic_error("non-root vertex without parent");
        const double expected = vertices_[*v.parent].cost + v.edge_cost;
        if (std::abs(v.cost - expected) > 1e-9 * std::max(1.0, expected))
            throw std::logic_error("tree cost inconsistent at vertex " + std::to_string(i));
        if (std::abs(v.edge_cost - edge_cost(v.edge)) > 1e-12 * std::max(1.0, v.edge_cost))
            throw std::logic_error("edge cost inconsistent at vertex " + std::to_string(i));
    }
}

std::size_t nearest(const PlanTree& tree, const JointState& s)
{
    std::size_t best = 0;
    double best_d = joint_dist(tree[0].state, s);
    for (std::size_t i = 1; i < tree.size(); ++i) {
        const double d = joint_dist(tree[i].state, s);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

double near_radius(double gamma, std::size_t n_vertices, std::size_t n_agents)
{
    if (n_vertices <= 1)
        return 0.0;
    const double nv = static_cast<double>(n_vertices);
    return gamma * std::pow(std::log(nv) / nv, 1.0 / (2.0 * static_cast<double>(n_agents)));
}

std::vector<std::size_t> near(const PlanTree& tree, const JointState& s, double gamma, std::size_t n_agents)
{
    const double r = near_radius(gamma, tree.size(), n_agents);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < tree.size(); ++i)
        if (joint_dist(tree[i].state, s) < r)
            out.push_back(i);
    return out;
}

std::optional<std::vector<Trajectory>> extend(ExtensionKind kind, const JointState& x, const JointState& y,
                                              const ProblemInstance& inst, const SimParams& orca, GraphCache& graphs,
                                              std::optional<double> cost_bound)
{
    const std::size_t n = inst.agents.size();
    if (x.size() != n || y.size() != n)
        throw std::invalid_argument("extend: joint state size mismatch");
    std::vector<Trajectory> bundle;
    bundle.reserve(n);
    switch (kind) {
    case ExtensionKind::Line:
        for (std::size_t i = 0; i < n; ++i) {
            const AgentSpec& ag = inst.agents[i];
            if (!swept_disc_free(x[i], y[i], ag.radius, inst.env))
                return std::nullopt;
            bundle.push_back(Trajectory::line(x[i], y[i], ag.max_speed));
        }
        break;
    case ExtensionKind::VisibilityGraph:
        for (std::size_t i = 0; i < n; ++i) {
            const AgentSpec& ag = inst.agents[i];
            const auto path = shortest_path(*graphs.get(ag.radius), x[i], y[i]);
            if (!path)
                return std::nullopt;
            bundle.push_back(to_trajectory(*path, ag.max_speed));
        }
        break;
    case ExtensionKind::Orca: {
        SimParams params = orca;
        if (cost_bound)
            params.cost_bound = params.cost_bound ? std::min(*params.cost_bound, *cost_bound) : *cost_bound;
        SimOutcome sim = simulate(inst, x, y, params, graphs);
        if (sim.status != SimStatus::Reached)
            return std::nullopt;
        bundle = std::move(sim.trajectories);
        break;
    }
    }
    if (!mutually_separated(bundle, inst.agents))
        return std::nullopt;
    if (!check_cf(bundle, with_endpoints(inst, x, y)))
        return std::nullopt;
    return bundle;
}

Planner::Planner(ProblemInstance inst, PlannerParams params, std::shared_ptr<GraphCache> graphs)
    : inst_(std::move(inst)), params_(std::move(params)), graphs_(std::move(graphs)), tree_(inst_.starts()),
      goal_(inst_.goals()), rng_(params_.seed)
{
    if (!graphs_)
        graphs_ = std::make_shared<GraphCache>(inst_.env);
    if (inst_.agents.empty())
        throw std::invalid_argument("planner needs at least one agent");
    if (!(params_.goal_bias >= 0.0 && params_.goal_bias < 1.0))
        throw std::invalid_argument("goal_bias must lie in [0, 1)");
    const auto errors = validate_instance(inst_);
    if (!errors.empty())
        throw std::invalid_argument("invalid instance: " + errors.front());
    gamma_ = params_.gamma > 0.0 ? params_.gamma
                                 : 2.0 * inst_.env.boundary().diagonal() * static_cast<double>(inst_.agents.size());
    ideal_cost_ = idealistic_cost(inst_, *graphs_);
    result_.ideal_cost = ideal_cost_;
    if (tree_[0].state == goal_)
        goal_vertices_.push_back(0);
}

bool Planner::deadline_passed() const { return deadline_ && Clock::now() >= *deadline_; }

double Planner::lower_bound(const JointState& a, const JointState& b) const
{
    double lb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        lb += distance(a[i], b[i]) / inst_.agents[i].max_speed;
    return lb;
}

std::optional<std::vector<Trajectory>> Planner::steer(const JointState& from, const JointState& to,
                                                      std::optional<double> cost_bound)
{
    auto result = extend(params_.kind, from, to, inst_, params_.orca, *graphs_, cost_bound);
    if (hook_)
        hook_(from, to, result);
    return result;
}

void Planner::check_goal()
{
    std::optional<std::size_t> best_v;
    double best = best_cost_;
    for (std::size_t v : goal_vertices_) {
        const double c = tree_.composed_cost(v);
        if (c < best) {
            best = c;
            best_v = v;
        }
    }
    if (!best_v)
        return;
    Solution sol = tree_.compose(*best_v);
    const CfReport report = check_cf_report(sol.trajectories, inst_);
    if (!report.ok) {
        result_.diagnostic = "composed solution failed validation: " + report.violation->message;
        return;
    }
    if (!(sol.cost < best_cost_))
        return;
    best_cost_ = sol.cost;
    Emission e;
    e.wall_time = std::chrono::duration<double>(Clock::now() - start_).count();
    e.iteration = iteration_;
    e.solution = std::move(sol);
    if (on_emit_ && *on_emit_)
        (*on_emit_)(e);
    result_.emissions.push_back(std::move(e));
    if (params_.stop_at_lower_bound && best_cost_ <= ideal_cost_ * (1.0 + 1e-9))
        finished_ = true;
}

bool Planner::iterate()
{
    if (finished_)
        return false;
    ++iteration_;
    const std::size_t n = inst_.agents.size();

    JointState s;
    try {
        s = (iteration_ == 1 && params_.goal_first) ? goal_ : sample(inst_, rng_, params_.goal_bias, sampler_stats_);
    } catch (const SamplingStarvation& e) {
        result_.diagnostic = e.what();
        finished_ = true;
        return false;
    }

    const std::size_t x = nearest(tree_, s);
    if (joint_dist(tree_[x].state, s) == 0.0)
        return true;
    auto first_edge = steer(tree_[x].state, s);
    if (!first_edge)
        return true;

    // Candidate parents ordered by an optimistic cost bound.
    const std::vector<std::size_t> near_set = near(tree_, s, gamma_, n);
    std::size_t best_parent = x;
    std::vector<Trajectory> best_edge = std::move(*first_edge);
    double best_cost = tree_[x].cost + edge_cost(best_edge);

    std::vector<std::pair<double, std::size_t>> candidates;
    for (std::size_t v : near_set)
        if (v != x)
            candidates.push_back({tree_[v].cost + lower_bound(tree_[v].state, s), v});
    std::sort(candidates.begin(), candidates.end());
    std::size_t evaluated = 0;
    for (const auto& [bound, v] : candidates) {
        if (bound >= best_cost || evaluated >= params_.max_parent_candidates || deadline_passed())
            break;
        ++evaluated;
        auto e = steer(tree_[v].state, s, best_cost - tree_[v].cost);
        if (!e)
            continue;
        const double c = tree_[v].cost + edge_cost(*e);
        if (c < best_cost) {
            best_cost = c;
            best_parent = v;
            best_edge = std::move(*e);
        }
    }

    const std::size_t fresh = tree_.add(s, best_parent, std::move(best_edge));
    if (s == goal_)
        goal_vertices_.push_back(fresh);

    // Rewire nearby vertices through the new one.
    std::vector<std::pair<double, std::size_t>> rewire;
    for (std::size_t v : near_set) {
        if (v == best_parent || v == 0)
            continue;
        const double slack = tree_[v].cost - (tree_[fresh].cost + lower_bound(s, tree_[v].state));
        if (slack > 0.0)
            rewire.push_back({-slack, v});
    }
    std::sort(rewire.begin(), rewire.end());
    evaluated = 0;
    for (const auto& [neg_slack, v] : rewire) {
        if (evaluated >= params_.max_rewire_candidates || deadline_passed())
            break;
        if (tree_[fresh].cost + lower_bound(s, tree_[v].state) >= tree_[v].cost)
            continue;
        ++evaluated;
        auto e = steer(s, tree_[v].state, tree_[v].cost - tree_[fresh].cost);
        if (!e)
            continue;
        if (tree_[fresh].cost + edge_cost(*e) < tree_[v].cost)
            tree_.reparent(v, fresh, std::move(*e));
    }

    if (params_.audit_interval > 0 && iteration_ % params_.audit_interval == 0)
        tree_.audit();
    check_goal();
    return !finished_;
}

PlanResult Planner::run(const std::function<void(const Emission&)>& on_emit)
{
    if (!params_.budget.seconds && !params_.budget.iterations)
        throw std::invalid_argument("planner budget needs seconds or iterations");
    start_ = Clock::now();
    if (params_.budget.seconds)
        deadline_ = start_ + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(*params_.budget.seconds));
    on_emit_ = &on_emit;
    check_goal();
    while (!finished_) {
        if (params_.budget.iterations && iteration_ >= *params_.budget.iterations)
            break;
        if (deadline_passed())
            break;
        iterate();
    }
    on_emit_ = nullptr;
    result_.iterations = iteration_;
    result_.tree_size = tree_.size();
    result_.wall_time = std::chrono::duration<double>(Clock::now() - start_).count();
    return result_;
}

} // namespace mapf
