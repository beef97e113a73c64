// Command-line front end: gen, solve, bench, validate, render, env.
//
// Exit codes: 0 success, 2 unsolved / invalid solution / ungeneratable,
// 3 invalid input, 4 internal error.

#include "mapf/bench.hpp"
#include "mapf/io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

namespace fs = std::filesystem;
using namespace mapf;

namespace {

constexpr int kOk = 0;
constexpr int kUnsolved = 2;
constexpr int kInvalidInput = 3;
constexpr int kInternal = 4;

struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OrcaFlags {
    SimParams params;
    std::string file;

    void attach(CLI::App* app)
    {
        app->add_option("--dt", params.dt, "ORCA integration step (s)")->check(CLI::PositiveNumber);
        app->add_option("--tau-agent", params.tau_agent, "agent-agent horizon (s)")->check(CLI::PositiveNumber);
        app->add_option("--tau-obstacle", params.tau_obstacle, "obstacle horizon (s)")->check(CLI::PositiveNumber);
        app->add_option("--arrive-eps", params.arrive_eps, "goal snap distance")->check(CLI::PositiveNumber);
        app->add_option("--max-steps", params.max_steps, "ORCA step bound (0 = automatic)");
        app->add_option("--step-factor", params.step_factor, "automatic step bound as a multiple of the ideal makespan");
        app->add_option("--stall-window", params.stall_window, "no-progress window in seconds (0 = off)");
        app->add_option("--sim-seed", params.seed, "seed of the LP constraint ordering");
        app->add_option("--orca-params", file, "JSON file with ORCA parameters (flags override it)")
            ->check(CLI::ExistingFile);
    }

    SimParams resolve(const CLI::App* app) const
    {
        if (file.empty())
            return params;
        SimParams p = sim_params_from_json(read_json(file));
        const auto given = [&](const char* flag) { return app->count(flag) > 0; };
        if (given("--dt"))
            p.dt = params.dt;
        if (given("--tau-agent"))
            p.tau_agent = params.tau_agent;
        if (given("--tau-obstacle"))
            p.tau_obstacle = params.tau_obstacle;
        if (given("--arrive-eps"))
            p.arrive_eps = params.arrive_eps;
        if (given("--max-steps"))
            p.max_steps = params.max_steps;
        if (given("--step-factor"))
            p.step_factor = params.step_factor;
        if (given("--stall-window"))
            p.stall_window = params.stall_window;
        if (given("--sim-seed"))
            p.seed = params.seed;
        return p;
    }
};

InstanceFile load_instance(const fs::path& path)
{
    try {
        return instance_from_json(read_json(path));
    } catch (const FormatError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

SolutionFile load_solution(const fs::path& path)
{
    try {
        return solution_from_json(read_json(path));
    } catch (const FormatError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::string number_label(double v)
{
    std::string s = std::to_string(v);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.')
        s.pop_back();
    return s;
}

int cmd_gen(const std::string& env_name, std::size_t n, double radius, std::size_t count, std::uint64_t seed,
            const fs::path& out_dir, std::size_t max_attempts)
{
    EnvironmentSpec spec;
    try {
        spec = builtin_environment(env_name);
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }
    if (n < 1 || !(radius > 0.0))
        throw InputError("agents must be >= 1 and radius > 0");
    GraphCache graphs(spec.env);
    fs::create_directories(out_dir);
    for (std::size_t k = 0; k < count; ++k) {
        const std::uint64_t s = instance_seed(seed, env_name, n, radius, k);
        std::mt19937_64 rng(s);
        InstanceFile f;
        f.env_name = env_name;
        f.generator_seed = s;
        try {
            f.instance = generate_instance(spec.env, n, radius, rng, graphs, max_attempts);
        } catch (const GenerationTimeout& e) {
            std::cerr << "ungeneratable: " << env_name << " n=" << n << " r=" << number_label(radius) << ": " << e.what()
                      << '\n';
            return kUnsolved;
        }
        const fs::path path = out_dir / (env_name + "_n" + std::to_string(n) + "_r" + number_label(radius) + "_s" +
                                         std::to_string(seed) + "_" + std::to_string(k) + ".json");
        write_json(path, instance_to_json(f));
        std::cout << path.string() << '\n';
    }
    return kOk;
}

int cmd_solve(const fs::path& instance_path, const std::string& algorithm, std::optional<double> budget,
              std::optional<std::size_t> iterations, std::uint64_t seed, const fs::path& out, const SimParams& orca)
{
    const InstanceFile f = load_instance(instance_path);
    const auto alg = parse_algorithm(algorithm);
    if (!alg)
        throw InputError("unknown algorithm '" + algorithm + "'");
    auto graphs = std::make_shared<GraphCache>(f.instance.env);
    try {
        idealistic_cost(f.instance, *graphs);
    } catch (const std::invalid_argument& e) {
        throw InputError(instance_path.string() + ": " + e.what());
    }
    Budget b;
    b.seconds = budget;
    b.iterations = iterations;
    if (!b.seconds && !b.iterations)
        b.seconds = 5.0;

    std::optional<Solution> best;
    const RunRecord rec = run_single(f.instance, *alg, seed, b, orca, graphs, &best);
    std::cout << "algorithm=" << to_string(*alg) << " seed=" << seed << " iterations=" << rec.iterations
              << " ideal_cost=" << rec.ideal_cost;
    if (!best) {
        std::cout << " solved=0\n";
        return kUnsolved;
    }
    std::cout << " solved=1 cost=" << *rec.best_cost << " suboptimality=" << *rec.suboptimality
              << " emissions=" << rec.emissions.size() << '\n';
    if (!rec.validated) {
        std::cerr << "internal error: solution failed validation\n";
        return kInternal;
    }
    if (!out.empty()) {
        SolutionFile sf;
        sf.instance_ref = instance_path.filename().string();
        sf.env_hash = environment_hash(f.instance.env);
        sf.algorithm = to_string(*alg);
        sf.seed = seed;
        sf.cost = best->cost;
        sf.trajectories = best->trajectories;
        sf.emissions = rec.emissions;
        if (out.has_parent_path())
            fs::create_directories(out.parent_path());
        write_json(out, solution_to_json(sf));
    }
    return kOk;
}

int cmd_bench(const fs::path& config_path, const fs::path& out_dir, std::optional<std::size_t> workers)
{
    BenchmarkConfig cfg;
    try {
        cfg = config_from_json(read_json(config_path));
    } catch (const FormatError& e) {
        throw InputError(config_path.string() + ": " + e.what());
    }
    if (workers)
        cfg.workers = *workers;
    std::cerr << "scenarios=" << scenario_count(cfg) << " planned_runs=" << run_count(cfg) << '\n';
    std::size_t finished = 0;
    const BatchResult res = run_batch(cfg, out_dir, [&](const RunRecord& r) {
        ++finished;
        std::cerr << '[' << finished << "] " << r.instance_id << ' ' << to_string(r.algorithm) << " seed=" << r.seed
                  << (r.solved() ? " solved" : " unsolved") << '\n';
    });
    std::size_t invalid = 0;
    for (const RunRecord& r : res.records)
        invalid += (r.solved() && !r.validated) ? 1 : 0;
    std::cout << "runs=" << res.records.size() << " resumed=" << res.resumed << " ungeneratable=" << res.ungeneratable.size()
              << " invalid_solutions=" << invalid << '\n';
    return invalid == 0 ? kOk : kInternal;
}

int cmd_validate(const fs::path& instance_path, const fs::path& solution_path)
{
    const InstanceFile f = load_instance(instance_path);
    const SolutionFile s = load_solution(solution_path);
    if (!s.env_hash.empty() && s.env_hash != environment_hash(f.instance.env)) {
        std::cout << "invalid: solution was produced for a different environment\n";
        return kUnsolved;
    }
    const CfReport report = check_cf_report(s.trajectories, f.instance);
    if (!report.ok) {
        const CfViolation& v = *report.violation;
        std::cout << "invalid: " << to_string(v.kind) << " agents=" << v.agent_a << ',' << v.agent_b << " t=" << v.time
                  << " separation=" << v.separation << " (" << v.message << ")\n";
        return kUnsolved;
    }
    const double cost = solution_cost(s.trajectories);
    std::cout << "valid: cost=" << cost << '\n';
    return kOk;
}

int cmd_render(const fs::path& instance_path, const std::string& solution_path, const fs::path& out)
{
    const InstanceFile f = load_instance(instance_path);
    std::optional<SolutionFile> s;
    if (!solution_path.empty())
        s = load_solution(solution_path);
    write_text(out, render_svg(f.instance, s ? &s->trajectories : nullptr));
    return kOk;
}

int cmd_env_export(const std::vector<std::string>& names, const fs::path& out_dir)
{
    fs::create_directories(out_dir);
    for (const std::string& name : names) {
        EnvironmentSpec spec;
        try {
            spec = builtin_environment(name);
        } catch (const std::invalid_argument& e) {
            throw InputError(e.what());
        }
        nlohmann::json j = environment_to_json(spec.env, spec.name);
        j["hash"] = environment_hash(spec.env);
        write_json(out_dir / (name + ".json"), j);
    }
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multi-agent path finding with RRT* and ORCA"};
    app.set_config("--config", "", "INI/TOML file with option values");
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen", "generate random benchmark instances");
    std::string gen_env;
    std::size_t gen_n = 2, gen_count = 1, gen_attempts = 100'000;
    double gen_r = 50.0;
    std::uint64_t gen_seed = 0;
    std::string gen_out = ".";
    gen->add_option("env", gen_env, "empty, door, cross or maze")->required();
    gen->add_option("agents", gen_n, "number of agents")->required();
    gen->add_option("radius", gen_r, "agent radius")->required();
    gen->add_option("--count", gen_count, "number of instances");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--out", gen_out, "output directory");
    gen->add_option("--max-attempts", gen_attempts, "candidate start/goal pairs per agent before giving up");

    auto* solve = app.add_subcommand("solve", "solve one instance");
    std::string solve_in, solve_alg = "orca-rrt", solve_out;
    std::optional<double> solve_budget;
    std::optional<std::size_t> solve_iters;
    std::uint64_t solve_seed = 0;
    OrcaFlags solve_orca;
    solve->add_option("instance", solve_in, "instance file")->required();
    solve->add_option("--algorithm,-a", solve_alg, "orca, line-rrt, vg-rrt or orca-rrt");
    auto* budget_opt = solve->add_option("--budget", solve_budget, "wall-clock budget in seconds (default 5)");
    solve->add_option("--iterations", solve_iters, "iteration budget instead of wall clock")->excludes(budget_opt);
    solve->add_option("--seed", solve_seed, "planner seed");
    solve->add_option("--out,-o", solve_out, "solution file to write");
    solve_orca.attach(solve);

    auto* bench = app.add_subcommand("bench", "run a benchmark configuration");
    std::string bench_cfg, bench_out = "bench_out";
    std::optional<std::size_t> bench_workers;
    bench->add_option("config", bench_cfg, "benchmark config JSON")->required();
    bench->add_option("--out", bench_out, "output directory (resumes if results.csv exists)");
    bench->add_option("--workers", bench_workers, "worker threads (0 = all cores)");

    auto* validate = app.add_subcommand("validate", "check a solution against an instance");
    std::string val_in, val_sol;
    validate->add_option("instance", val_in, "instance file")->required();
    validate->add_option("solution", val_sol, "solution file")->required();

    auto* render = app.add_subcommand("render", "draw an instance and optional solution as SVG");
    std::string ren_in, ren_sol, ren_out = "out.svg";
    render->add_option("instance", ren_in, "instance file")->required();
    render->add_option("--solution", ren_sol, "solution file");
    render->add_option("--out,-o", ren_out, "SVG file to write");

    auto* env = app.add_subcommand("env", "builtin environments");
    env->require_subcommand(1);
    auto* env_export = env->add_subcommand("export", "write builtin environments as JSON");
    std::vector<std::string> export_names;
    std::string export_out = ".";
    env_export->add_option("names", export_names, "environment names (default: all)");
    env_export->add_option("--out", export_out, "output directory");
    auto* env_list = env->add_subcommand("list", "print builtin environment names and hashes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInvalidInput;
    }

    try {
        if (*gen)
            return cmd_gen(gen_env, gen_n, gen_r, gen_count, gen_seed, gen_out, gen_attempts);
        if (*solve)
            return cmd_solve(solve_in, solve_alg, solve_budget, solve_iters, solve_seed, solve_out,
                             solve_orca.resolve(solve));
        if (*bench)
            return cmd_bench(bench_cfg, bench_out, bench_workers);
        if (*validate)
            return cmd_validate(val_in, val_sol);
        if (*render)
            return cmd_render(ren_in, ren_sol, ren_out);
        if (*env_export) {
            if (export_names.empty())
                for (std::string_view n : builtin_environment_names())
                    export_names.emplace_back(n);
            return cmd_env_export(export_names, export_out);
        }
        if (*env_list) {
            for (std::string_view n : builtin_environment_names())
                std::cout << n << ' ' << environment_hash(builtin_environment(n).env) << '\n';
            return kOk;
        }
    } catch (const InputError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kInvalidInput;
    } catch (const FormatError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kInvalidInput;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kInternal;
    }
    return kInternal;
}
