// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--only 1,3,9] [--out DIR] [--workers N]
//
// Criteria 1, 2, 5, 6 and 7 share one desk-scale benchmark run. With --out the
// batch writes its CSV files there and resumes earlier runs; the runtime check
// then only counts the runs executed in this invocation.

#include "mapf/bench.hpp"
#include "mapf/io.hpp"
#include "oracles.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <thread>
#include <string>

using namespace mapf;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

const fs::path kData = MAPF_DATA_DIR;

struct Verdict {
    bool pass{true};
    std::ostringstream detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            detail << " [" << what << "]";
        }
    }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

ProblemInstance fixture(const char* name) { return instance_from_json(read_json(kData / "fixtures" / name)).instance; }

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// ---------------------------------------------------------------------------
// Desk benchmark (criteria 1, 2, 5, 6, 7a)

struct DeskRun {
    BatchResult batch;
    double wall_seconds{0.0};
    std::size_t workers{1};
};

DeskRun run_desk(const std::optional<fs::path>& out, std::size_t workers)
{
    BenchmarkConfig cfg = desk_config();
    cfg.workers = workers;
    DeskRun run;
    run.workers = workers ? workers : std::max(1u, std::thread::hardware_concurrency());
    std::size_t done = 0;
    const std::size_t total = run_count(cfg);
    const auto t0 = Clock::now();
    run.batch = run_batch(cfg, out, [&](const RunRecord& rec) {
        ++done;
        if (done % 50 == 0 || done == total)
            std::fprintf(stderr, "  desk benchmark: %zu/%zu runs (%s), %.0f s\n", done, total, rec.instance_id.c_str(),
                         seconds_since(t0));
    });
    run.wall_seconds = seconds_since(t0);
    return run;
}

Verdict criterion_safety(const DeskRun& desk)
{
    Verdict v;
    const BenchmarkConfig cfg = desk_config();
    std::size_t solutions = 0, invalid = 0;
    for (const RunRecord& r : desk.batch.records) {
        if (!r.solved())
            continue;
        ++solutions;
        if (!r.validated)
            ++invalid;
    }
    const std::size_t expected = run_count(cfg) - desk.batch.ungeneratable.size() * runs_per_scenario(cfg);
    v.detail << "runs=" << desk.batch.records.size() << " solutions=" << solutions << " violations=" << invalid
             << " ungeneratable_cells=" << desk.batch.ungeneratable.size() << " wall=" << desk.wall_seconds / 60.0
             << " min on " << desk.workers << " worker(s)";
    if (desk.batch.resumed > 0)
        v.detail << " (resumed " << desk.batch.resumed << " runs)";
    v.require(invalid == 0, "solutions failing check_cf");
    v.require(desk.batch.records.size() == expected, "missing runs");
    v.require(desk.wall_seconds <= 30 * 60, "runtime above 30 min");
    return v;
}

Verdict criterion_lower_bound(const DeskRun& desk)
{
    Verdict v;
    double worst = std::numeric_limits<double>::infinity();
    std::size_t count = 0;
    for (const RunRecord& r : desk.batch.records) {
        if (!r.suboptimality)
            continue;
        ++count;
        worst = std::min(worst, *r.suboptimality);
    }
    v.detail << "suboptimalities=" << count << " min=" << worst;
    v.require(count > 0, "no solved runs");
    v.require(count == 0 || worst >= 1 - 1e-9, "suboptimality below 1");
    return v;
}

struct Rate {
    std::size_t runs{0}, successes{0};
    double value() const { return runs ? static_cast<double>(successes) / static_cast<double>(runs) : 0.0; }
};

Rate rate_of(const DeskRun& desk, std::string_view env, std::size_t n, double r, Algorithm a)
{
    Rate rate;
    for (const RunRecord& rec : desk.batch.records) {
        if (rec.env != env || rec.n_agents != n || rec.radius != r || rec.algorithm != a)
            continue;
        ++rate.runs;
        rate.successes += success(rec, std::nullopt) ? 1 : 0;
    }
    return rate;
}

std::string describe(const Rate& r) { return std::to_string(r.successes) + "/" + std::to_string(r.runs); }

Verdict criterion_scaling(const DeskRun& desk)
{
    Verdict v;
    for (Algorithm a : {Algorithm::LineRrt, Algorithm::VgRrt}) {
        const Rate small = rate_of(desk, "empty", 2, 50, a), large = rate_of(desk, "empty", 7, 50, a);
        v.detail << to_string(a) << " n2=" << describe(small) << " n7=" << describe(large) << "; ";
        v.require(large.runs > 0 && small.runs > 0 && large.value() < small.value(),
                  to_string(a) + " does not drop from n=2 to n=7");
    }
    for (Algorithm a : {Algorithm::OrcaOnly, Algorithm::OrcaRrt}) {
        const Rate large = rate_of(desk, "empty", 7, 50, a);
        v.detail << to_string(a) << " n7=" << describe(large) << "; ";
        v.require(large.runs > 0 && large.value() >= 0.8, to_string(a) + " below 80% at n=7");
    }
    return v;
}

Verdict criterion_radius(const DeskRun& desk)
{
    Verdict v;
    const Rate orca50 = rate_of(desk, "door", 4, 50, Algorithm::OrcaOnly);
    const Rate orca100 = rate_of(desk, "door", 4, 100, Algorithm::OrcaOnly);
    const Rate hybrid100 = rate_of(desk, "door", 4, 100, Algorithm::OrcaRrt);
    v.detail << "orca r50=" << describe(orca50) << " r100=" << describe(orca100)
             << " orca-rrt r100=" << describe(hybrid100);
    v.require(orca50.runs > 0 && orca100.runs > 0 && hybrid100.runs > 0, "empty cells");
    v.require(orca100.successes <= orca50.successes, "ORCA succeeds more often at r=100");
    v.require(hybrid100.value() >= orca100.value(), "ORCA-RRT* below ORCA at r=100");
    return v;
}

Verdict criterion_anytime(const DeskRun& desk)
{
    Verdict v;
    std::size_t multi = 0, bad = 0;
    for (const RunRecord& r : desk.batch.records) {
        if (r.algorithm == Algorithm::OrcaOnly || r.emissions.size() < 2)
            continue;
        ++multi;
        for (std::size_t k = 1; k < r.emissions.size(); ++k)
            if (!(r.emissions[k].cost < r.emissions[k - 1].cost)) {
                ++bad;
                break;
            }
    }
    v.detail << "benchmark runs with >=2 emissions=" << multi << " non-decreasing=" << bad << "; ";
    v.require(bad == 0, "emission costs not strictly decreasing");

    // Fixed cross-env instance, 20 seeds at 5 s.
    const Environment env = builtin_environment("cross").env;
    auto graphs = std::make_shared<GraphCache>(env);
    std::mt19937_64 rng(instance_seed(1, "cross", 4, 50, 0));
    const ProblemInstance inst = generate_instance(env, 4, 50, rng, *graphs);
    Budget budget;
    budget.seconds = 5.0;
    std::vector<double> first, last;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const RunRecord rec = run_single(inst, Algorithm::OrcaRrt, seed, budget, SimParams{}, graphs);
        if (rec.emissions.empty())
            continue;
        first.push_back(rec.emissions.front().cost);
        last.push_back(rec.emissions.back().cost);
    }
    v.detail << "cross runs solved=" << first.size() << "/20";
    v.require(!first.empty(), "no cross run solved");
    if (!first.empty()) {
        const double mf = median(first), ml = median(last);
        v.detail << " median first=" << mf << " median final=" << ml;
        v.require(ml <= mf, "median final cost above median first cost");
    }
    return v;
}

// ---------------------------------------------------------------------------
// Corridor fixtures (criteria 3, 4)

Verdict corridor_check(const char* name, double seconds, std::size_t needed)
{
    Verdict v;
    const ProblemInstance inst = fixture(name);
    auto graphs = std::make_shared<GraphCache>(inst.env);
    const SimOutcome orca = simulate(inst, SimParams{}, *graphs);
    v.detail << "orca=" << (orca.status == SimStatus::Reached ? "Reached"
                            : orca.status == SimStatus::StepLimit ? "StepLimit"
                                                                  : "Bounded");
    Budget budget;
    budget.seconds = seconds;
    std::size_t solved = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const RunRecord rec = run_single(inst, Algorithm::OrcaRrt, seed, budget, SimParams{}, graphs);
        if (rec.solved() && rec.validated)
            ++solved;
    }
    v.detail << " orca-rrt solved=" << solved << "/5 at " << seconds << " s";
    v.require(orca.status != SimStatus::Reached, "ORCA reached the goals");
    v.require(solved >= needed, "too few seeds solved");
    return v;
}

Verdict criterion_fig1a()
{
    Verdict v = corridor_check("fig1a.json", 5.0, 4);
    const ProblemInstance inst = fixture("fig1a.json");
    GraphCache graphs(inst.env);
    v.require(simulate(inst, SimParams{}, graphs).status == SimStatus::StepLimit, "ORCA status is not StepLimit");
    return v;
}

Verdict criterion_fig1b() { return corridor_check("fig1b.json", 10.0, 3); }

// ---------------------------------------------------------------------------
// First-extension equivalence (criterion 8)

Verdict criterion_first_extension()
{
    Verdict v;
    std::vector<ProblemInstance> cases;
    {
        ProblemInstance inst;
        inst.env = builtin_environment("cross").env;
        inst.agents = {{{60, 450}, {940, 550}, 50, 1.0}, {{550, 60}, {450, 940}, 50, 1.0}};
        cases.push_back(inst);
    }
    cases.push_back(fixture("fig1a.json"));
    for (std::string_view name : builtin_environment_names()) {
        const Environment env = builtin_environment(name).env;
        GraphCache graphs(env);
        std::mt19937_64 rng(instance_seed(3, name, 3, 60, 0));
        cases.push_back(generate_instance(env, 3, 60, rng, graphs));
    }

    std::size_t identical = 0, reached = 0;
    for (const ProblemInstance& inst : cases) {
        PlannerParams p;
        p.kind = ExtensionKind::Orca;
        p.seed = 11;
        p.budget.iterations = 1;
        GraphCache graphs(inst.env);
        const SimOutcome sim = simulate(inst, p.orca, graphs);
        Planner planner(inst, p);
        std::optional<std::optional<std::vector<Trajectory>>> first;
        JointState to;
        planner.set_extension_hook([&](const JointState&, const JointState& y, const auto& result) {
            if (!first) {
                first = result;
                to = y;
            }
        });
        planner.run();
        bool same = first.has_value() && to == inst.goals();
        if (same && sim.status == SimStatus::Reached) {
            ++reached;
            same = first->has_value() && **first == sim.trajectories;
        } else if (same) {
            same = !first->has_value();
        }
        identical += same ? 1 : 0;
    }
    v.detail << "identical=" << identical << "/" << cases.size() << " (ORCA reached in " << reached << ")";
    v.require(identical == cases.size(), "first extension differs from the standalone simulation");
    v.require(reached > 0, "no case exercises a successful extension");
    return v;
}

// ---------------------------------------------------------------------------
// Oracle suites (criterion 9)

Trajectory random_trajectory(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> pos(0, 100), dt(0.5, 20), coin(0, 1);
    std::uniform_int_distribution<int> pieces(0, 5);
    std::vector<Breakpoint> pts{{0.0, {pos(rng), pos(rng)}}};
    const int k = pieces(rng);
    for (int i = 0; i < k; ++i) {
        const double t = pts.back().t + dt(rng);
        const Point p = coin(rng) < 0.2 ? pts.back().p : Point{pos(rng), pos(rng)};
        pts.push_back({t, p});
    }
    return Trajectory::from_breakpoints(std::move(pts));
}

Point free_point(const Environment& env, double r, std::mt19937_64& rng)
{
    const Rect& b = env.boundary();
    std::uniform_real_distribution<double> ux(b.xmin, b.xmax), uy(b.ymin, b.ymax);
    for (;;) {
        const Point p{ux(rng), uy(rng)};
        if (oracle::signed_clearance(p, env) > r + 8)
            return p;
    }
}

double max_violation(const std::vector<HalfPlane>& hs, Vec2 v)
{
    double w = -std::numeric_limits<double>::infinity();
    for (const HalfPlane& h : hs)
        w = std::max(w, h.violation(v));
    return w;
}

Verdict criterion_oracles()
{
    Verdict v;

    // (a) analytic separation vs dense sampling
    {
        std::mt19937_64 rng(101);
        std::size_t below = 0;
        for (int k = 0; k < 1000; ++k) {
            const Trajectory a = random_trajectory(rng), b = random_trajectory(rng);
            const double horizon = std::max(a.arrival_time(), b.arrival_time()) + 1;
            if (oracle::sampled_separation(a, b, horizon, 20000) < min_separation(a, b) - 1e-6)
                ++below;
        }
        v.detail << "(a) pairs=1000 below=" << below << "; ";
        v.require(below == 0, "sampled separation below analytic");
    }

    // (b) visibility-graph shortest paths vs grid search
    {
        std::mt19937_64 rng(103);
        std::size_t queries = 0, off = 0, mismatch = 0;
        double worst = 0.0;
        for (std::string_view name : builtin_environment_names()) {
            const Environment env = builtin_environment(name).env;
            const oracle::GridPlanner grid(env, 2.0);
            const VisibilityGraph g = VisibilityGraph::build(env, 50);
            for (int q = 0; q < 50; ++q) {
                const Point s = free_point(env, 50, rng), d = free_point(env, 50, rng);
                const auto path = shortest_path(g, s, d);
                const double ref = grid.shortest(s, d, 50);
                ++queries;
                if (path.has_value() != std::isfinite(ref)) {
                    ++mismatch;
                    continue;
                }
                if (!path)
                    continue;
                const double gap = std::abs(path->length() - ref) / ref;
                worst = std::max(worst, gap);
                if (gap > 0.02)
                    ++off;
            }
        }
        v.detail << "(b) queries=" << queries << " reachability_mismatch=" << mismatch << " beyond_2%=" << off
                 << " worst=" << worst * 100 << "%; ";
        v.require(mismatch == 0 && off == 0, "visibility paths disagree with the grid");
    }

    // (c) velocity LP vs brute force
    {
        std::mt19937_64 rng(107);
        std::uniform_int_distribution<int> count(1, 6);
        std::uniform_real_distribution<double> u(-1.5, 1.5), ang(0, 2 * M_PI);
        std::size_t disagree = 0, gap = 0, feasible = 0;
        for (int k = 0; k < 1000; ++k) {
            std::vector<HalfPlane> hs;
            const int m = count(rng);
            for (int i = 0; i < m; ++i) {
                const double a = ang(rng);
                hs.push_back({{u(rng), u(rng)}, {std::cos(a), std::sin(a)}});
            }
            const Vec2 pref{u(rng), u(rng)};
            const Vec2 vel = solve_velocity(hs, pref, 1.0);
            const oracle::LpAnswer ref = oracle::lp_brute_force(hs, pref, 1.0);
            const bool ours = norm(vel) <= 1.0 + 1e-9 && max_violation(hs, vel) <= 1e-6;
            if (ours != ref.feasible) {
                ++disagree;
                continue;
            }
            if (ours) {
                ++feasible;
                if (std::abs(distance(vel, pref) - ref.distance) > 1e-3)
                    ++gap;
            } else if (max_violation(hs, vel) > oracle::sampled_min_max_violation(hs, 1.0) + 1e-6) {
                ++gap;
            }
        }
        v.detail << "(c) sets=1000 feasible=" << feasible << " feasibility_disagreements=" << disagree
                 << " gaps>1e-3=" << gap << "; ";
        v.require(disagree == 0 && gap == 0, "LP disagrees with brute force");
    }

    // (d) nearest / near vs linear scans
    {
        std::mt19937_64 rng(109);
        std::uniform_real_distribution<double> u(0, 1000);
        std::size_t queries = 0, wrong = 0;
        for (std::size_t agents : {1, 2, 4, 7}) {
            const auto state = [&] {
                JointState s(agents);
                for (Point& p : s)
                    p = {u(rng), u(rng)};
                return s;
            };
            PlanTree tree(state());
            for (std::size_t k = 1; k < 1000; ++k) {
                const std::size_t parent = std::uniform_int_distribution<std::size_t>(0, k - 1)(rng);
                JointState s = state();
                std::vector<Trajectory> edge;
                for (std::size_t i = 0; i < agents; ++i)
                    edge.push_back(Trajectory::line(tree[parent].state[i], s[i], 1.0));
                tree.add(std::move(s), parent, std::move(edge));
            }
            const double gamma = 2 * std::sqrt(2.0) * 1000 * static_cast<double>(agents);
            for (int q = 0; q < 200; ++q) {
                const JointState s = state();
                ++queries;
                const bool ok = nearest(tree, s) == oracle::nearest_scan(tree, s) &&
                                near(tree, s, gamma, agents) ==
                                    oracle::near_scan(tree, s, near_radius(gamma, tree.size(), agents));
                wrong += ok ? 0 : 1;
            }
        }
        v.detail << "(d) queries=" << queries << " mismatches=" << wrong;
        v.require(wrong == 0, "tree queries disagree with linear scans");
    }
    return v;
}

// ---------------------------------------------------------------------------
// Rank protocol (criterion 10)

std::vector<RunRecord> four(const std::vector<std::optional<double>>& s)
{
    std::vector<RunRecord> recs;
    for (std::size_t i = 0; i < 4; ++i) {
        RunRecord r;
        r.instance_id = "synthetic";
        r.algorithm = all_algorithms()[i];
        r.ideal_cost = 100;
        if (s[i]) {
            r.best_cost = *s[i] * 100;
            r.suboptimality = s[i];
        }
        recs.push_back(r);
    }
    return recs;
}

Verdict criterion_ranks()
{
    Verdict v;
    std::mt19937_64 rng(113);

    // Exact rules on random sets with a few distinct values (ties frequent).
    std::uniform_int_distribution<int> pick(0, 3);
    std::size_t sets = 0, broken = 0;
    for (int k = 0; k < 10000; ++k) {
        std::vector<std::optional<double>> s(4);
        for (auto& x : s)
            if (const int p = pick(rng); p > 0)
                x = 1.0 + 0.25 * p;
        const auto recs = four(s);
        const auto r = rank_table(recs, rng);
        ++sets;
        bool ok = r.size() == 4;
        std::vector<int> solved;
        for (std::size_t i = 0; i < 4 && ok; ++i) {
            const int ri = r.at(recs[i].algorithm);
            if (!s[i]) {
                ok = ri == 4;
                continue;
            }
            solved.push_back(ri);
            for (std::size_t j = 0; j < 4; ++j)
                if (s[j] && *s[j] < *s[i] && !(r.at(recs[j].algorithm) < ri))
                    ok = false;
        }
        std::sort(solved.begin(), solved.end());
        for (std::size_t i = 0; i < solved.size() && ok; ++i)
            ok = solved[i] == static_cast<int>(i) + 1;
        broken += ok ? 0 : 1;
    }
    v.detail << "sets=" << sets << " rule_violations=" << broken;
    v.require(broken == 0, "rank rules violated");

    // Tie uniformity: four-way tie gives 24 equally likely orders; two-way tie among solved two.
    const int draws = 10000;
    std::map<std::vector<int>, int> counts;
    for (int k = 0; k < draws; ++k) {
        const auto r = rank_table(four({1.4, 1.4, 1.4, 1.4}), rng);
        std::vector<int> order;
        for (Algorithm a : all_algorithms())
            order.push_back(r.at(a));
        counts[order]++;
    }
    double x2 = 0;
    const double e = draws / 24.0;
    for (const auto& [perm, c] : counts)
        x2 += (c - e) * (c - e) / e;
    x2 += static_cast<double>(24 - counts.size()) * e;
    const double p4 = oracle::chi_square_sf(x2, 23);

    int top = 0;
    for (int k = 0; k < draws; ++k)
        top += rank_table(four({std::nullopt, 2.0, 2.0, std::nullopt}), rng).at(Algorithm::LineRrt) == 1 ? 1 : 0;
    const double e2 = draws / 2.0;
    const double p2 = oracle::chi_square_sf((top - e2) * (top - e2) / e2 * 2, 1);
    v.detail << " four-way tie p=" << p4 << " two-way tie p=" << p2;
    v.require(counts.size() == 24 && p4 > 0.01, "four-way tie not uniform");
    v.require(p2 > 0.01, "two-way tie not uniform");
    return v;
}

// ---------------------------------------------------------------------------
// Generator contract (criterion 11)

Verdict criterion_generator()
{
    Verdict v;
    for (std::string_view name : builtin_environment_names()) {
        const Environment env = builtin_environment(name).env;
        GraphCache graphs(env);
        std::size_t good = 0, generated = 0;
        for (std::size_t k = 0; k < 100; ++k) {
            std::mt19937_64 rng(instance_seed(7, name, 4, 50, k));
            ProblemInstance inst;
            try {
                inst = generate_instance(env, 4, 50, rng, graphs);
            } catch (const GenerationTimeout&) {
                continue;
            }
            ++generated;
            bool ok = inst.size() == 4 && validate_instance(inst).empty();
            const auto ideal = ideal_trajectories(inst, graphs);
            for (std::size_t i = 1; i < inst.size() && ok; ++i) {
                bool linked = false;
                for (std::size_t j = 0; j < i; ++j)
                    linked = linked ||
                             min_separation(ideal[i], ideal[j]) <= inst.agents[i].radius + inst.agents[j].radius;
                ok = linked;
            }
            good += ok ? 1 : 0;
        }
        v.detail << name << "=" << good << "/" << generated << " ";
        v.require(generated == 100 && good == 100, std::string(name) + " instances break the contract");
    }
    return v;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Acceptance suite"};
    std::vector<int> only;
    std::optional<fs::path> out;
    std::size_t workers = 0;
    app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
    app.add_option("--out", out, "directory for the desk benchmark outputs (enables resume)");
    app.add_option("--workers", workers, "benchmark worker threads (0 = all cores)");
    CLI11_PARSE(app, argc, argv);

    const std::set<int> selected(only.begin(), only.end());
    const auto wanted = [&](int c) { return selected.empty() || selected.contains(c); };

    std::optional<DeskRun> desk;
    const auto need_desk = [&]() -> const DeskRun& {
        if (!desk)
            desk = run_desk(out, workers);
        return *desk;
    };

    const std::vector<std::pair<int, std::function<Verdict()>>> criteria{
        {1, [&] { return criterion_safety(need_desk()); }},
        {2, [&] { return criterion_lower_bound(need_desk()); }},
        {3, criterion_fig1a},
        {4, criterion_fig1b},
        {5, [&] { return criterion_scaling(need_desk()); }},
        {6, [&] { return criterion_radius(need_desk()); }},
        {7, [&] { return criterion_anytime(need_desk()); }},
        {8, criterion_first_extension},
        {9, criterion_oracles},
        {10, criterion_ranks},
        {11, criterion_generator},
    };

    int failures = 0;
    for (const auto& [id, check] : criteria) {
        if (!wanted(id))
            continue;
        const auto t0 = Clock::now();
        Verdict v;
        try {
            v = check();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail << "exception: " << e.what();
        }
        failures += v.pass ? 0 : 1;
        std::printf("criterion %2d: %s  %s (%.1f s)\n", id, v.pass ? "PASS" : "FAIL", v.detail.str().c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
