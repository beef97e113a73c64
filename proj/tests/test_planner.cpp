#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mapf/bench.hpp"
#include "mapf/io.hpp"
#include "mapf/planner.hpp"
#include "oracles.hpp"

#include <random>

using namespace mapf;

namespace {

ProblemInstance fixture(const char* name)
{
    return instance_from_json(read_json(std::string(MAPF_DATA_DIR) + "/fixtures/" + name)).instance;
}

ProblemInstance swap_pair()
{
    ProblemInstance inst;
    inst.agents = {{{200, 500}, {800, 500}, 50, 1.0}, {{800, 500}, {200, 500}, 50, 1.0}};
    return inst;
}

ProblemInstance crossing_pair()
{
    ProblemInstance inst;
    inst.env = builtin_environment("cross").env;
    inst.agents = {{{60, 450}, {940, 550}, 50, 1.0}, {{550, 60}, {450, 940}, 50, 1.0}};
    return inst;
}

PlanTree random_tree(std::mt19937_64& rng, std::size_t agents, std::size_t size)
{
    std::uniform_real_distribution<double> u(0, 1000);
    const auto state = [&] {
        JointState s(agents);
        for (Point& p : s)
            p = {u(rng), u(rng)};
        return s;
    };
    PlanTree tree(state());
    for (std::size_t k = 1; k < size; ++k) {
        const std::size_t parent = std::uniform_int_distribution<std::size_t>(0, k - 1)(rng);
        JointState s = state();
        std::vector<Trajectory> edge;
        for (std::size_t i = 0; i < agents; ++i)
            edge.push_back(Trajectory::line(tree[parent].state[i], s[i], 1.0));
        tree.add(std::move(s), parent, std::move(edge));
    }
    return tree;
}

PlannerParams params_for(ExtensionKind kind, std::uint64_t seed, std::size_t iterations)
{
    PlannerParams p;
    p.kind = kind;
    p.seed = seed;
    p.budget.iterations = iterations;
    p.audit_interval = 100;
    return p;
}

} // namespace

TEST_CASE("joint_dist")
{
    const JointState a{{0, 0}, {5, 5}};
    CHECK(joint_dist(a, a) == 0.0);
    CHECK(joint_dist(a, {{3, 4}, {5, 5}}) == doctest::Approx(5.0));
    CHECK(joint_dist({{0, 0}, {10, 0}}, {{10, 0}, {0, 0}}) == doctest::Approx(20.0));
}

TEST_CASE("sampler")
{
    ProblemInstance one;
    one.agents = {{{100, 100}, {900, 900}, 50, 1.0}};
    std::mt19937_64 rng(61);
    SamplerStats stats;

    int goals = 0;
    for (int k = 0; k < 2000; ++k)
        goals += sample(one, rng, 0.999, stats) == one.goals() ? 1 : 0;
    CHECK(goals > 1980);

    double mx = 0, my = 0, lo = 1e9, hi = -1e9;
    const int n = 100000;
    for (int k = 0; k < n; ++k) {
        const JointState s = sample(one, rng, 0.0, stats);
        mx += s[0].x;
        my += s[0].y;
        lo = std::min({lo, s[0].x, s[0].y});
        hi = std::max({hi, s[0].x, s[0].y});
    }
    CHECK(std::abs(mx / n - 500) < 5);
    CHECK(std::abs(my / n - 500) < 5);
    CHECK(lo >= 50);
    CHECK(hi <= 950);

    const ProblemInstance maze = [] {
        ProblemInstance inst;
        inst.env = builtin_environment("maze").env;
        inst.agents = {{{100, 100}, {900, 900}, 60, 1.0}, {{900, 100}, {100, 900}, 60, 1.0}, {{500, 380}, {500, 620}, 60, 1.0}};
        return inst;
    }();
    for (int k = 0; k < 2000; ++k) {
        const JointState s = sample(maze, rng, 0.0, stats);
        CHECK(valid_joint_state(s, maze));
        for (std::size_t i = 0; i < s.size(); ++i) {
            CHECK(oracle::signed_clearance(s[i], maze.env) > 60);
            for (std::size_t j = i + 1; j < s.size(); ++j)
                CHECK(distance(s[i], s[j]) > 120);
        }
    }
}

TEST_CASE("sampler starves on an impossible instance")
{
    ProblemInstance tight;
    tight.env = Environment(Rect{0, 0, 300, 300}, {});
    tight.agents = {{{75, 75}, {225, 225}, 74, 1.0}, {{225, 225}, {75, 75}, 74, 1.0},
                    {{75, 225}, {225, 75}, 74, 1.0}, {{225, 75}, {75, 225}, 74, 1.0}};
    std::mt19937_64 rng(67);
    SamplerStats stats;
    CHECK_THROWS_AS(
        [&] {
            for (;;)
                sample(tight, rng, 0.0, stats);
        }(),
        SamplingStarvation);
}

TEST_CASE("near radius")
{
    CHECK(near_radius(1000, 1, 2) == 0.0);
    CHECK(near_radius(1000, 100, 2) == doctest::Approx(1000 * std::pow(std::log(100.0) / 100.0, 0.25)));
    CHECK(near_radius(1000, 100, 2) == doctest::Approx(463.3).epsilon(1e-3));
}

TEST_CASE("nearest and near match linear scans")
{
    std::mt19937_64 rng(71);
    for (std::size_t agents : {1, 2, 4}) {
        const PlanTree tree = random_tree(rng, agents, 1000);
        CHECK(nearest(PlanTree(tree[0].state), tree[5].state) == 0);
        CHECK(nearest(tree, tree[417].state) == 417);
        const double gamma = 2 * std::sqrt(2.0) * 1000 * static_cast<double>(agents);
        for (int q = 0; q < 100; ++q) {
            const JointState s = random_tree(rng, agents, 1)[0].state;
            CHECK(nearest(tree, s) == oracle::nearest_scan(tree, s));
            CHECK(near(tree, s, gamma, agents) == oracle::near_scan(tree, s, near_radius(gamma, tree.size(), agents)));
        }
    }
    CHECK(near(PlanTree({{1, 1}}), {{1, 1}}, 1e6, 1).empty());
}

TEST_CASE("tree costs propagate through reparenting")
{
    PlanTree tree({{0, 0}});
    const auto edge = [](Point a, Point b) { return std::vector{Trajectory::line(a, b, 1.0)}; };
    const std::size_t a = tree.add({{100, 0}}, 0, edge({0, 0}, {100, 0}));
    const std::size_t b = tree.add({{100, 100}}, a, edge({100, 0}, {100, 100}));
    const std::size_t c = tree.add({{200, 100}}, b, edge({100, 100}, {200, 100}));
    CHECK(tree[c].cost == doctest::Approx(300));
    CHECK(tree.path_to(c) == std::vector<std::size_t>{0, a, b, c});
    tree.reparent(b, 0, edge({0, 0}, {100, 100}));
    CHECK(tree[b].cost == doctest::Approx(std::sqrt(2.0) * 100));
    CHECK(tree[c].cost == doctest::Approx(std::sqrt(2.0) * 100 + 100));
    CHECK_NOTHROW(tree.audit());
    const Solution sol = tree.compose(c);
    CHECK(sol.cost == doctest::Approx(tree[c].cost));
    CHECK(tree.composed_cost(c) == doctest::Approx(sol.cost));
    CHECK(sol.trajectories[0].final_point() == Point{200, 100});
}

TEST_CASE("composition waits for the slowest agent of each edge")
{
    PlanTree tree({{0, 0}, {500, 500}});
    std::vector<Trajectory> e1{Trajectory::line({0, 0}, {100, 0}, 1.0), Trajectory::line({500, 500}, {510, 500}, 1.0)};
    const std::size_t a = tree.add({{100, 0}, {510, 500}}, 0, e1);
    std::vector<Trajectory> e2{Trajectory::stationary({100, 0}), Trajectory::line({510, 500}, {520, 500}, 1.0)};
    const std::size_t b = tree.add({{100, 0}, {520, 500}}, a, e2);
    const Solution sol = tree.compose(b);
    CHECK(sol.trajectories[0].arrival_time() == doctest::Approx(100));
    CHECK(sol.trajectories[1].arrival_time() == doctest::Approx(110));
    CHECK(sol.trajectories[1].eval(50) == Point{510, 500});
    CHECK(sol.cost == doctest::Approx(210));
    CHECK(tree.composed_cost(b) == doctest::Approx(210));
}

TEST_CASE("extend")
{
    ProblemInstance inst;
    inst.agents = {{{100, 100}, {100, 900}, 50, 1.0}, {{900, 100}, {900, 900}, 50, 1.0}};
    GraphCache graphs(inst.env);
    const SimParams orca;
    for (ExtensionKind kind : {ExtensionKind::Line, ExtensionKind::VisibilityGraph, ExtensionKind::Orca}) {
        const auto e = extend(kind, inst.starts(), inst.goals(), inst, orca, graphs);
        REQUIRE(e);
        CHECK(edge_cost(*e) == doctest::Approx(1600).epsilon(kind == ExtensionKind::Orca ? 1e-2 : 1e-9));
    }

    const ProblemInstance sw = swap_pair();
    GraphCache g2(sw.env);
    CHECK_FALSE(extend(ExtensionKind::Line, sw.starts(), sw.goals(), sw, orca, g2));
    CHECK_FALSE(extend(ExtensionKind::VisibilityGraph, sw.starts(), sw.goals(), sw, orca, g2));

    const ProblemInstance corridor = fixture("fig1a.json");
    GraphCache g3(corridor.env);
    CHECK_FALSE(extend(ExtensionKind::Orca, corridor.starts(), corridor.goals(), corridor, orca, g3));
    // Straight lines through the corridor wall are rejected.
    ProblemInstance single = corridor;
    single.agents.resize(1);
    single.agents[0].goal = {800, 800};
    CHECK_FALSE(extend(ExtensionKind::Line, single.starts(), single.goals(), single, orca, g3));
    CHECK(extend(ExtensionKind::VisibilityGraph, single.starts(), single.goals(), single, orca, g3));
}

TEST_CASE("single agent is solved optimally by every kind")
{
    ProblemInstance inst;
    inst.agents = {{{150, 200}, {800, 650}, 50, 1.0}};
    for (ExtensionKind kind : {ExtensionKind::Line, ExtensionKind::VisibilityGraph, ExtensionKind::Orca}) {
        Planner planner(inst, params_for(kind, 1, 50));
        const PlanResult res = planner.run();
        REQUIRE(res.best());
        CHECK(res.best()->cost / res.ideal_cost == doctest::Approx(1.0).epsilon(kind == ExtensionKind::Orca ? 2e-3 : 1e-6));
    }
    ProblemInstance maze;
    maze.env = builtin_environment("maze").env;
    maze.agents = {{{100, 100}, {900, 900}, 50, 1.0}};
    Planner vg(maze, params_for(ExtensionKind::VisibilityGraph, 1, 50));
    const PlanResult res = vg.run();
    REQUIRE(res.best());
    CHECK(res.best()->cost / res.ideal_cost == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("first ORCA extension equals a standalone simulation")
{
    const ProblemInstance inst = crossing_pair();
    GraphCache graphs(inst.env);
    PlannerParams p = params_for(ExtensionKind::Orca, 5, 1);
    const SimOutcome sim = simulate(inst, p.orca, graphs);
    REQUIRE(sim.status == SimStatus::Reached);

    Planner planner(inst, p);
    std::optional<std::optional<std::vector<Trajectory>>> first;
    JointState first_to;
    planner.set_extension_hook([&](const JointState&, const JointState& to, const auto& result) {
        if (!first) {
            first = result;
            first_to = to;
        }
    });
    planner.run();
    REQUIRE(first);
    CHECK(first_to == inst.goals());
    REQUIRE(first->has_value());
    CHECK(**first == sim.trajectories);
}

TEST_CASE("anytime runs: validity, monotone emissions, tree consistency, determinism")
{
    const ProblemInstance inst = fixture("fig1a.json");
    for (ExtensionKind kind : {ExtensionKind::Line, ExtensionKind::VisibilityGraph, ExtensionKind::Orca}) {
        CAPTURE(to_string(kind));
        const std::size_t iters = kind == ExtensionKind::Orca ? 150 : 600;
        Planner planner(inst, params_for(kind, 9, iters));
        const PlanResult res = planner.run();
        CHECK_NOTHROW(planner.tree().audit());
        for (std::size_t k = 0; k < res.emissions.size(); ++k) {
            const Solution& sol = res.emissions[k].solution;
            CHECK(check_cf(sol.trajectories, inst));
            CHECK(sol.cost == doctest::Approx(solution_cost(sol.trajectories)));
            CHECK(sol.cost >= res.ideal_cost * (1 - 1e-9));
            if (k > 0)
                CHECK(sol.cost < res.emissions[k - 1].solution.cost);
        }
        // Stored edges re-validate between their endpoint states.
        const PlanTree& tree = planner.tree();
        for (std::size_t v = 1; v < tree.size(); ++v) {
            ProblemInstance leg = inst;
            for (std::size_t i = 0; i < leg.size(); ++i) {
                leg.agents[i].start = tree[*tree[v].parent].state[i];
                leg.agents[i].goal = tree[v].state[i];
            }
            CHECK(check_cf(tree[v].edge, leg));
        }

        Planner again(inst, params_for(kind, 9, iters));
        const PlanResult res2 = again.run();
        REQUIRE(res2.emissions.size() == res.emissions.size());
        for (std::size_t k = 0; k < res.emissions.size(); ++k)
            CHECK(res2.emissions[k].solution.trajectories == res.emissions[k].solution.trajectories);
        CHECK(again.tree().size() == planner.tree().size());
    }
}

TEST_CASE("planner solves the corridor swap that ORCA alone cannot")
{
    const ProblemInstance inst = fixture("fig1a.json");
    Planner planner(inst, params_for(ExtensionKind::Orca, 4, 800));
    const PlanResult res = planner.run();
    REQUIRE(res.best());
    CHECK(check_cf(res.best()->trajectories, inst));
}

TEST_CASE("planner rejects invalid instances and budgets")
{
    ProblemInstance bad = swap_pair();
    bad.agents[1].start = bad.agents[0].start;
    CHECK_THROWS(Planner(bad, params_for(ExtensionKind::Line, 1, 10)));
    PlannerParams noBudget;
    CHECK_THROWS(Planner(swap_pair(), noBudget).run());
}
