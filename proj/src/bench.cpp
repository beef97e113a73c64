#include "mapf/bench.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

namespace mapf {

namespace {

using nlohmann::json;

constexpr std::array kAlgorithms{Algorithm::OrcaOnly, Algorithm::LineRrt, Algorithm::VgRrt, Algorithm::OrcaRrt};
constexpr std::array<std::string_view, 4> kEnvNames{"empty", "door", "cross", "maze"};

Polygon box(double x0, double y0, double x1, double y1) { return Polygon({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}); }

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string format_double(double v)
{
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

double parse_double(std::string_view s)
{
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::invalid_argument("malformed number '" + std::string(s) + "'");
    return v;
}

template <class T> T parse_uint(std::string_view s)
{
    T v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::invalid_argument("malformed integer '" + std::string(s) + "'");
    return v;
}

std::string csv_quote(std::string_view s)
{
    if (s.find_first_of(",\"\n") == std::string_view::npos)
        return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + '"';
}

std::vector<std::string> csv_split(std::string_view line)
{
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    fields.back() += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else {
            fields.back() += c;
        }
    }
    if (quoted)
        throw std::invalid_argument("unterminated quote in CSV row");
    return fields;
}

std::string threshold_label(const std::optional<double>& t) { return t ? format_double(*t) : "none"; }

using RunKey = std::tuple<std::string, Algorithm, std::uint64_t>;

RunKey key_of(const RunRecord& r) { return {r.instance_id, r.algorithm, r.seed}; }

struct Job {
    std::size_t instance;
    Algorithm algorithm;
    std::uint64_t seed_index;
};

struct GeneratedInstance {
    std::string id;
    std::string env;
    std::size_t n;
    double radius;
    std::uint64_t seed;
    ProblemInstance inst;
    std::shared_ptr<GraphCache> graphs;
};

void write_file(const std::filesystem::path& path, const std::string& content)
{
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot write " + tmp.string());
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

} // namespace

std::string to_string(Algorithm a)
{
    switch (a) {
    case Algorithm::OrcaOnly: return "orca";
    case Algorithm::LineRrt: return "line-rrt";
    case Algorithm::VgRrt: return "vg-rrt";
    case Algorithm::OrcaRrt: return "orca-rrt";
    }
    return "unknown";
}

std::optional<Algorithm> parse_algorithm(std::string_view name)
{
    for (Algorithm a : kAlgorithms)
        if (to_string(a) == name)
            return a;
    return std::nullopt;
}

std::span<const Algorithm> all_algorithms() { return kAlgorithms; }

bool is_stochastic(Algorithm a) { return a != Algorithm::OrcaOnly; }

std::span<const std::string_view> builtin_environment_names() { return kEnvNames; }

EnvironmentSpec builtin_environment(std::string_view name)
{
    const Rect world{0.0, 0.0, 1000.0, 1000.0};
    std::vector<Polygon> obs;
    if (name == "empty") {
    } else if (name == "door") {
        // One wall across the world with a single 260-wide gap.
        obs.push_back(box(480, 0, 520, 370));
        obs.push_back(box(480, 630, 520, 1000));
    } else if (name == "cross") {
        // Four blocks leaving a plus-shaped corridor and an outer ring.
        obs.push_back(box(120, 120, 370, 370));
        obs.push_back(box(630, 120, 880, 370));
        obs.push_back(box(120, 630, 370, 880));
        obs.push_back(box(630, 630, 880, 880));
    } else if (name == "maze") {
        // Serpentine: walls alternately attached to the left and right sides.
        obs.push_back(box(0, 240, 750, 260));
        obs.push_back(box(250, 490, 1000, 510));
        obs.push_back(box(0, 740, 750, 760));
    } else {
        throw std::invalid_argument("unknown environment '" + std::string(name) + "'");
    }
    return {std::string(name), Environment(world, std::move(obs))};
}

std::vector<Trajectory> ideal_trajectories(const ProblemInstance& inst, GraphCache& graphs)
{
    std::vector<Trajectory> out;
    out.reserve(inst.agents.size());
    for (std::size_t i = 0; i < inst.agents.size(); ++i) {
        const AgentSpec& a = inst.agents[i];
        const auto path = shortest_path(*graphs.get(a.radius), a.start, a.goal);
        if (!path)
            throw std::invalid_argument("no single-agent path for agent " + std::to_string(i));
        out.push_back(to_trajectory(*path, a.max_speed));
    }
    return out;
}

double idealistic_cost(const ProblemInstance& inst, GraphCache& graphs)
{
    return solution_cost(ideal_trajectories(inst, graphs));
}

ProblemInstance generate_instance(const Environment& env, std::size_t n, double radius, std::mt19937_64& rng,
                                  GraphCache& graphs, std::size_t max_attempts)
{
    if (n < 1)
        throw std::invalid_argument("generate_instance: n must be positive");
    if (!(radius > 0.0))
        throw std::invalid_argument("generate_instance: radius must be positive");
    const Rect& b = env.boundary();
    if (!(b.width() > 2.0 * radius && b.height() > 2.0 * radius))
        throw GenerationTimeout("agent radius does not fit the boundary");
    std::uniform_real_distribution<double> ux(b.xmin + radius, b.xmax - radius);
    std::uniform_real_distribution<double> uy(b.ymin + radius, b.ymax - radius);
    const auto graph = graphs.get(radius);

    ProblemInstance inst{env, {}};
    std::vector<Trajectory> accepted;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t attempts = 0;
        const auto give_up = [&] {
            throw GenerationTimeout("no admissible agent " + std::to_string(i) + " after " + std::to_string(attempts) +
                                    " attempts");
        };
        const auto draw = [&](auto other) {
            for (;;) {
                if (++attempts > max_attempts)
                    give_up();
                const Point p{ux(rng), uy(rng)};
                if (!disc_free(p, radius, env))
                    continue;
                const bool clear = std::all_of(inst.agents.begin(), inst.agents.end(), [&](const AgentSpec& a) {
                    return distance(p, other(a)) > 2.0 * radius;
                });
                if (clear)
                    return p;
            }
        };
        for (;;) {
            const Point s = draw([](const AgentSpec& a) { return a.start; });
            const Point g = draw([](const AgentSpec& a) { return a.goal; });
            const auto path = shortest_path(*graph, s, g);
            if (!path)
                continue;
            Trajectory traj = to_trajectory(*path, 1.0);
            const bool colliding = accepted.empty() || std::any_of(accepted.begin(), accepted.end(), [&](const Trajectory& o) {
                                       return min_separation(traj, o) <= 2.0 * radius;
                                   });
            if (!colliding)
                continue;
            inst.agents.push_back(AgentSpec{s, g, radius, 1.0});
            accepted.push_back(std::move(traj));
            break;
        }
    }
    return inst;
}

bool success(const RunRecord& rec, std::optional<double> threshold)
{
    if (!rec.best_cost || !rec.suboptimality || !rec.validated)
        return false;
    return !threshold || *rec.suboptimality < *threshold;
}

std::map<Algorithm, int> rank_table(std::span<const RunRecord> records, std::mt19937_64& rng)
{
    if (records.size() != kAlgorithms.size())
        throw std::invalid_argument("rank_table needs exactly one record per algorithm");
    std::set<Algorithm> seen;
    for (const RunRecord& r : records)
        if (!seen.insert(r.algorithm).second)
            throw std::invalid_argument("rank_table: duplicate algorithm");

    std::map<Algorithm, int> ranks;
    std::vector<std::pair<double, Algorithm>> solved;
    for (const RunRecord& r : records) {
        if (success(r, std::nullopt))
            solved.push_back({*r.suboptimality, r.algorithm});
        else
            ranks[r.algorithm] = static_cast<int>(kAlgorithms.size());
    }
    std::sort(solved.begin(), solved.end(),
              [](const auto& a, const auto& b) { return a.first < b.first || (a.first == b.first && a.second < b.second); });
    for (std::size_t i = 0; i < solved.size();) {
        std::size_t j = i + 1;
        while (j < solved.size() && solved[j].first == solved[i].first)
            ++j;
        std::shuffle(solved.begin() + static_cast<std::ptrdiff_t>(i), solved.begin() + static_cast<std::ptrdiff_t>(j), rng);
        i = j;
    }
    for (std::size_t i = 0; i < solved.size(); ++i)
        ranks[solved[i].second] = static_cast<int>(i + 1);
    return ranks;
}

void validate_config(const BenchmarkConfig& cfg)
{
    const auto fail = [](const std::string& m) { throw std::invalid_argument("benchmark config: " + m); };
    if (cfg.environments.empty())
        fail("no environments");
    for (const std::string& e : cfg.environments)
        if (std::find(kEnvNames.begin(), kEnvNames.end(), e) == kEnvNames.end())
            fail("unknown environment '" + e + "'");
    if (cfg.agent_counts.empty())
        fail("no agent counts");
    for (std::size_t n : cfg.agent_counts)
        if (n < 2)
            fail("agent counts must be >= 2");
    if (cfg.radii.empty())
        fail("no radii");
    for (double r : cfg.radii)
        if (!(r > 0.0) || !std::isfinite(r))
            fail("radii must be positive");
    if (cfg.instances_per_cell == 0)
        fail("instances_per_cell must be positive");
    if (cfg.seeds_per_instance == 0)
        fail("seeds_per_instance must be positive");
    if (!cfg.budget.seconds && !cfg.budget.iterations)
        fail("budget needs seconds or iterations");
    if (cfg.budget.seconds && !(*cfg.budget.seconds > 0.0))
        fail("budget seconds must be positive");
    if (cfg.budget.iterations && *cfg.budget.iterations == 0)
        fail("budget iterations must be positive");
    for (double t : cfg.thresholds)
        if (!(t >= 1.0))
            fail("thresholds must be >= 1");
    if (cfg.algorithms.empty())
        fail("no algorithms");
    if (cfg.max_generation_attempts == 0)
        fail("max_generation_attempts must be positive");
}

std::size_t scenario_count(const BenchmarkConfig& cfg)
{
    return cfg.environments.size() * cfg.agent_counts.size() * cfg.radii.size() * cfg.instances_per_cell;
}

std::size_t runs_per_scenario(const BenchmarkConfig& cfg)
{
    std::size_t runs = 0;
    for (Algorithm a : cfg.algorithms)
        runs += is_stochastic(a) ? cfg.seeds_per_instance : 1;
    return runs;
}

std::size_t run_count(const BenchmarkConfig& cfg) { return scenario_count(cfg) * runs_per_scenario(cfg); }

BenchmarkConfig paper_config()
{
    BenchmarkConfig cfg;
    cfg.environments.assign(kEnvNames.begin(), kEnvNames.end());
    for (std::size_t n = 2; n <= 10; ++n)
        cfg.agent_counts.push_back(n);
    cfg.radii = {50, 60, 70, 80, 90, 100};
    cfg.instances_per_cell = 10;
    cfg.seeds_per_instance = 5;
    cfg.budget.seconds = 5.0;
    cfg.thresholds = {5.0, 2.5};
    return cfg;
}

BenchmarkConfig desk_config()
{
    BenchmarkConfig cfg;
    cfg.environments.assign(kEnvNames.begin(), kEnvNames.end());
    cfg.agent_counts = {2, 4, 7};
    cfg.radii = {50, 100};
    cfg.instances_per_cell = 3;
    cfg.seeds_per_instance = 3;
    cfg.budget.seconds = 5.0;
    cfg.thresholds = {5.0, 2.5};
    return cfg;
}

std::string instance_id(std::string_view env, std::size_t n, double radius, std::size_t index)
{
    return std::string(env) + "_n" + std::to_string(n) + "_r" + format_double(radius) + "_i" + std::to_string(index);
}

std::uint64_t instance_seed(std::uint64_t config_seed, std::string_view env, std::size_t n, double radius,
                            std::size_t index)
{
    return splitmix64(config_seed ^ fnv1a(instance_id(env, n, radius, index)));
}

RunRecord run_single(const ProblemInstance& inst, Algorithm algorithm, std::uint64_t seed, const Budget& budget,
                     const SimParams& orca, std::shared_ptr<GraphCache> graphs, std::optional<Solution>* best,
                     std::vector<Emission>* emissions)
{
    using Clock = std::chrono::steady_clock;
    RunRecord rec;
    rec.n_agents = inst.size();
    rec.radius = inst.agents.empty() ? 0.0 : inst.agents.front().radius;
    rec.algorithm = algorithm;
    rec.seed = seed;
    rec.ideal_cost = idealistic_cost(inst, *graphs);

    std::optional<Solution> found;
    const auto t0 = Clock::now();
    if (algorithm == Algorithm::OrcaOnly) {
        SimOutcome sim = simulate(inst, orca, *graphs);
        rec.iterations = sim.steps;
        const double elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
        if (sim.status == SimStatus::Reached) {
            found = make_solution(std::move(sim.trajectories));
            rec.emissions.push_back({elapsed, found->cost});
            if (emissions)
                emissions->push_back({elapsed, 0, *found});
        }
    } else {
        PlannerParams params;
        params.kind = algorithm == Algorithm::LineRrt  ? ExtensionKind::Line
                      : algorithm == Algorithm::VgRrt ? ExtensionKind::VisibilityGraph
                                                      : ExtensionKind::Orca;
        params.seed = seed;
        params.budget = budget;
        params.orca = orca;
        Planner planner(inst, params, graphs);
        PlanResult res = planner.run();
        rec.iterations = res.iterations;
        for (const Emission& e : res.emissions)
            rec.emissions.push_back({e.wall_time, e.solution.cost});
        if (const Solution* s = res.best())
            found = *s;
        if (emissions)
            *emissions = std::move(res.emissions);
    }
    rec.wall_ms = 1000.0 * std::chrono::duration<double>(Clock::now() - t0).count();

    if (found) {
        rec.best_cost = found->cost;
        rec.suboptimality = rec.ideal_cost > 0.0 ? found->cost / rec.ideal_cost : 1.0;
        rec.validated = check_cf(found->trajectories, inst);
    }
    if (best)
        *best = std::move(found);
    return rec;
}

std::string to_csv_row(const RunRecord& rec)
{
    json em = json::array();
    for (const EmissionPoint& e : rec.emissions)
        em.push_back({e.time, e.cost});
    const auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    std::string row;
    row += csv_quote(rec.instance_id) + ',';
    row += csv_quote(rec.env) + ',';
    row += std::to_string(rec.n_agents) + ',';
    row += format_double(rec.radius) + ',';
    row += to_string(rec.algorithm) + ',';
    row += std::to_string(rec.seed) + ',';
    row += std::string(rec.solved() ? "1" : "0") + ',';
    row += opt(rec.best_cost) + ',';
    row += format_double(rec.ideal_cost) + ',';
    row += opt(rec.suboptimality) + ',';
    row += format_double(rec.wall_ms) + ',';
    row += std::to_string(rec.iterations) + ',';
    row += csv_quote(em.dump()) + ',';
    row += rec.validated ? "1" : "0";
    return row;
}

RunRecord from_csv_row(std::string_view line)
{
    const std::vector<std::string> f = csv_split(line);
    if (f.size() != 14)
        throw std::invalid_argument("results row has " + std::to_string(f.size()) + " fields, expected 14");
    RunRecord rec;
    rec.instance_id = f[0];
    rec.env = f[1];
    rec.n_agents = parse_uint<std::size_t>(f[2]);
    rec.radius = parse_double(f[3]);
    const auto alg = parse_algorithm(f[4]);
    if (!alg)
        throw std::invalid_argument("unknown algorithm '" + f[4] + "'");
    rec.algorithm = *alg;
    rec.seed = parse_uint<std::uint64_t>(f[5]);
    const bool solved = f[6] == "1";
    if (!solved && f[6] != "0")
        throw std::invalid_argument("solved must be 0 or 1");
    if (solved != !f[7].empty())
        throw std::invalid_argument("solved flag disagrees with best_cost");
    if (solved) {
        rec.best_cost = parse_double(f[7]);
        rec.suboptimality = parse_double(f[9]);
    }
    rec.ideal_cost = parse_double(f[8]);
    rec.wall_ms = parse_double(f[10]);
    rec.iterations = parse_uint<std::size_t>(f[11]);
    const json em = json::parse(f[12]);
    for (const json& e : em)
        rec.emissions.push_back({e.at(0).get<double>(), e.at(1).get<double>()});
    if (f[13] != "0" && f[13] != "1")
        throw std::invalid_argument("validated must be 0 or 1");
    rec.validated = f[13] == "1";
    return rec;
}

std::vector<SuccessRateRow> success_rates(std::span<const RunRecord> records, std::span<const double> thresholds)
{
    std::vector<std::optional<double>> levels{std::nullopt};
    levels.insert(levels.end(), thresholds.begin(), thresholds.end());
    std::map<std::tuple<std::string, std::size_t, double, Algorithm>, std::vector<const RunRecord*>> groups;
    std::vector<std::tuple<std::string, std::size_t, double, Algorithm>> order;
    for (const RunRecord& r : records) {
        auto key = std::make_tuple(r.env, r.n_agents, r.radius, r.algorithm);
        auto [it, fresh] = groups.try_emplace(key);
        if (fresh)
            order.push_back(key);
        it->second.push_back(&r);
    }
    std::vector<SuccessRateRow> rows;
    for (const auto& key : order) {
        const auto& group = groups[key];
        for (const auto& level : levels) {
            SuccessRateRow row{std::get<0>(key), std::get<1>(key), std::get<2>(key), std::get<3>(key), level, group.size(), 0};
            for (const RunRecord* r : group)
                row.successes += success(*r, level) ? 1 : 0;
            rows.push_back(row);
        }
    }
    return rows;
}

std::vector<RankHistogramRow> rank_histogram(std::span<const RunRecord> records, std::uint64_t seed)
{
    std::vector<std::string> env_order;
    std::map<std::string, std::map<std::pair<Algorithm, int>, std::size_t>> counts;
    std::map<std::string, std::vector<const RunRecord*>> by_instance;
    std::vector<std::string> instance_order;
    for (const RunRecord& r : records) {
        if (std::find(env_order.begin(), env_order.end(), r.env) == env_order.end())
            env_order.push_back(r.env);
        auto [it, fresh] = by_instance.try_emplace(r.instance_id);
        if (fresh)
            instance_order.push_back(r.instance_id);
        it->second.push_back(&r);
    }
    for (const std::string& id : instance_order) {
        const auto& recs = by_instance[id];
        const RunRecord* orca = nullptr;
        std::map<std::uint64_t, std::map<Algorithm, const RunRecord*>> per_seed;
        for (const RunRecord* r : recs) {
            if (r->algorithm == Algorithm::OrcaOnly)
                orca = r;
            else
                per_seed[r->seed][r->algorithm] = r;
        }
        if (!orca)
            continue;
        for (const auto& [s, algs] : per_seed) {
            if (algs.size() != 3)
                continue;
            std::vector<RunRecord> four{*orca};
            for (const auto& [a, r] : algs)
                four.push_back(*r);
            std::mt19937_64 rng(splitmix64(seed ^ fnv1a(id) ^ splitmix64(s)));
            for (const auto& [a, rank] : rank_table(four, rng))
                ++counts[orca->env][{a, rank}];
        }
    }
    std::vector<RankHistogramRow> rows;
    for (const std::string& env : env_order)
        for (Algorithm a : kAlgorithms)
            for (int rank = 1; rank <= 4; ++rank) {
                const auto& c = counts[env];
                const auto it = c.find({a, rank});
                rows.push_back({env, a, rank, it == c.end() ? 0 : it->second});
            }
    return rows;
}

BatchResult run_batch(const BenchmarkConfig& cfg, const std::optional<std::filesystem::path>& out_dir,
                      const std::function<void(const RunRecord&)>& on_record)
{
    validate_config(cfg);
    BatchResult result;

    std::vector<GeneratedInstance> instances;
    for (const std::string& env_name : cfg.environments) {
        const EnvironmentSpec spec = builtin_environment(env_name);
        auto graphs = std::make_shared<GraphCache>(spec.env);
        for (std::size_t n : cfg.agent_counts)
            for (double r : cfg.radii)
                for (std::size_t k = 0; k < cfg.instances_per_cell; ++k) {
                    const std::uint64_t seed = instance_seed(cfg.seed, env_name, n, r, k);
                    std::mt19937_64 rng(seed);
                    try {
                        ProblemInstance inst = generate_instance(spec.env, n, r, rng, *graphs, cfg.max_generation_attempts);
                        instances.push_back({instance_id(env_name, n, r, k), env_name, n, r, seed, std::move(inst), graphs});
                    } catch (const GenerationTimeout& e) {
                        result.ungeneratable.push_back({env_name, n, r, k, e.what()});
                    }
                }
    }

    std::vector<Job> jobs;
    for (std::size_t i = 0; i < instances.size(); ++i)
        for (Algorithm a : cfg.algorithms) {
            const std::uint64_t seeds = is_stochastic(a) ? cfg.seeds_per_instance : 1;
            for (std::uint64_t s = 0; s < seeds; ++s)
                jobs.push_back({i, a, s});
        }

    std::map<RunKey, RunRecord> done;
    std::ofstream append;
    std::filesystem::path results_path;
    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        results_path = *out_dir / "results.csv";
        if (std::filesystem::exists(results_path)) {
            std::ifstream in(results_path);
            std::string line;
            if (std::getline(in, line) && line == kResultsHeader) {
                while (std::getline(in, line)) {
                    try {
                        RunRecord r = from_csv_row(line);
                        done.insert_or_assign(key_of(r), std::move(r));
                    } catch (const std::exception&) {
                        // A partly written last row from an interrupted batch.
                    }
                }
            }
        }
        // Start a fresh append log holding only the rows being reused.
        std::string head = std::string(kResultsHeader) + '\n';
        for (const Job& j : jobs) {
            const auto it = done.find({instances[j.instance].id, j.algorithm, j.seed_index});
            if (it != done.end())
                head += to_csv_row(it->second) + '\n';
        }
        write_file(results_path, head);
        append.open(results_path, std::ios::binary | std::ios::app);
    }

    std::vector<std::optional<RunRecord>> slots(jobs.size());
    std::vector<std::size_t> pending;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        const auto it = done.find({instances[jobs[j].instance].id, jobs[j].algorithm, jobs[j].seed_index});
        if (it != done.end()) {
            slots[j] = it->second;
            ++result.resumed;
        } else {
            pending.push_back(j);
        }
    }

    std::mutex mutex;
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (;;) {
            const std::size_t p = next.fetch_add(1);
            if (p >= pending.size())
                return;
            const Job& job = jobs[pending[p]];
            const GeneratedInstance& gi = instances[job.instance];
            const std::uint64_t planner_seed = splitmix64(gi.seed ^ splitmix64(job.seed_index + 1));
            RunRecord rec;
            try {
                rec = run_single(gi.inst, job.algorithm, planner_seed, cfg.budget, cfg.orca, gi.graphs);
            } catch (const std::exception&) {
                rec = RunRecord{};
                rec.algorithm = job.algorithm;
                rec.n_agents = gi.n;
                rec.radius = gi.radius;
                try {
                    rec.ideal_cost = idealistic_cost(gi.inst, *gi.graphs);
                } catch (const std::exception&) {
                }
            }
            rec.instance_id = gi.id;
            rec.env = gi.env;
            rec.n_agents = gi.n;
            rec.radius = gi.radius;
            rec.seed = job.seed_index;
            if (!cfg.record_timing) {
                rec.wall_ms = 0.0;
                for (EmissionPoint& e : rec.emissions)
                    e.time = 0.0;
            }
            std::lock_guard lock(mutex);
            if (append.is_open()) {
                append << to_csv_row(rec) << '\n';
                append.flush();
            }
            if (on_record)
                on_record(rec);
            slots[pending[p]] = std::move(rec);
        }
    };
    const std::size_t n_workers =
        std::max<std::size_t>(1, std::min(pending.size(), cfg.workers ? cfg.workers : std::thread::hardware_concurrency()));
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < n_workers; ++i)
            pool.emplace_back(worker);
        for (std::thread& t : pool)
            t.join();
    }

    for (auto& s : slots)
        result.records.push_back(std::move(*s));
    result.success_rates = success_rates(result.records, cfg.thresholds);
    result.rank_histogram = rank_histogram(result.records, cfg.seed);

    if (out_dir) {
        append.close();
        std::string csv = std::string(kResultsHeader) + '\n';
        for (const RunRecord& r : result.records)
            csv += to_csv_row(r) + '\n';
        write_file(results_path, csv);

        std::string sr = "env,n_agents,radius,algorithm,threshold,runs,successes,rate\n";
        for (const SuccessRateRow& r : result.success_rates)
            sr += r.env + ',' + std::to_string(r.n_agents) + ',' + format_double(r.radius) + ',' + to_string(r.algorithm) +
                  ',' + threshold_label(r.threshold) + ',' + std::to_string(r.runs) + ',' + std::to_string(r.successes) +
                  ',' + format_double(r.rate()) + '\n';
        write_file(*out_dir / "success_rates.csv", sr);

        std::string rh = "env,algorithm,rank,count\n";
        for (const RankHistogramRow& r : result.rank_histogram)
            rh += r.env + ',' + to_string(r.algorithm) + ',' + std::to_string(r.rank) + ',' + std::to_string(r.count) + '\n';
        write_file(*out_dir / "rank_histogram.csv", rh);

        std::string ug = "env,n_agents,radius,instance,message\n";
        for (const UngeneratableCell& c : result.ungeneratable)
            ug += c.env + ',' + std::to_string(c.n_agents) + ',' + format_double(c.radius) + ',' + std::to_string(c.index) +
                  ',' + csv_quote(c.message) + '\n';
        write_file(*out_dir / "ungeneratable.csv", ug);

        json acc;
        acc["scenarios"] = scenario_count(cfg);
        acc["runs_per_scenario"] = runs_per_scenario(cfg);
        acc["planned_runs"] = run_count(cfg);
        acc["generated_instances"] = instances.size();
        acc["ungeneratable_instances"] = result.ungeneratable.size();
        acc["runs_written"] = result.records.size();
        acc["runs_resumed"] = result.resumed;
        acc["seed_policy"] = "orca runs once per instance; each rrt* variant runs seeds_per_instance times";
        write_file(*out_dir / "accounting.json", acc.dump(2) + '\n');
    }
    return result;
}

} // namespace mapf
