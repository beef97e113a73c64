#include "mapf/io.hpp"

#include <array>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mapf {

using nlohmann::json;

namespace {

json point_json(const Point& p) { return json::array({p.x, p.y}); }

Point point_from(const json& j)
{
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw FormatError("expected a point [x, y]");
    return {j[0].get<double>(), j[1].get<double>()};
}

void check_schema(const json& j, const char* expected)
{
    if (!j.is_object())
        throw FormatError("expected a JSON object");
    const auto it = j.find("schema");
    if (it == j.end() || !it->is_string() || it->get<std::string>() != expected)
        throw FormatError(std::string("missing or unsupported schema; expected \"") + expected + "\"");
}

template <class T> T get_or(const json& j, const char* key, T fallback)
{
    const auto it = j.find(key);
    if (it == j.end() || it->is_null())
        return fallback;
    return it->get<T>();
}

json geometry_json(const Environment& env)
{
    const Rect& b = env.boundary();
    json obstacles = json::array();
    for (const Polygon& poly : env.obstacles()) {
        json verts = json::array();
        for (const Point& p : poly.vertices())
            verts.push_back(point_json(p));
        obstacles.push_back(std::move(verts));
    }
    return {{"boundary", {b.xmin, b.ymin, b.xmax, b.ymax}}, {"obstacles", std::move(obstacles)}};
}

} // namespace

json sim_params_to_json(const SimParams& p)
{
    return {{"dt", p.dt},
            {"tau_agent", p.tau_agent},
            {"tau_obstacle", p.tau_obstacle},
            {"arrive_eps", p.arrive_eps},
            {"max_steps", p.max_steps},
            {"step_factor", p.step_factor},
            {"safety_margin", p.safety_margin},
            {"pref_rotation", p.pref_rotation},
            {"stall_window", p.stall_window},
            {"stall_distance", p.stall_distance},
            {"seed", p.seed}};
}

SimParams sim_params_from_json(const json& j)
{
    SimParams p;
    p.dt = get_or(j, "dt", p.dt);
    p.tau_agent = get_or(j, "tau_agent", p.tau_agent);
    p.tau_obstacle = get_or(j, "tau_obstacle", p.tau_obstacle);
    p.arrive_eps = get_or(j, "arrive_eps", p.arrive_eps);
    p.max_steps = get_or(j, "max_steps", p.max_steps);
    p.step_factor = get_or(j, "step_factor", p.step_factor);
    p.safety_margin = get_or(j, "safety_margin", p.safety_margin);
    p.pref_rotation = get_or(j, "pref_rotation", p.pref_rotation);
    p.stall_window = get_or(j, "stall_window", p.stall_window);
    p.stall_distance = get_or(j, "stall_distance", p.stall_distance);
    p.seed = get_or(j, "seed", p.seed);
    return p;
}

namespace {

std::string num(double v)
{
    std::array<char, 48> buf{};
    std::snprintf(buf.data(), buf.size(), "%.3f", v);
    std::string s(buf.data());
    if (s == "-0.000")
        s = "0.000";
    return s;
}

} // namespace

json environment_to_json(const Environment& env, const std::string& name)
{
    json j = geometry_json(env);
    j["name"] = name;
    return j;
}

Environment environment_from_json(const json& j)
{
    try {
        if (j.is_string())
            return builtin_environment(j.get<std::string>()).env;
        if (!j.is_object())
            throw FormatError("environment must be a name or an object");
        const json& b = j.at("boundary");
        if (!b.is_array() || b.size() != 4)
            throw FormatError("boundary must be [xmin, ymin, xmax, ymax]");
        const Rect rect{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
        std::vector<Polygon> polys;
        for (const json& poly : j.value("obstacles", json::array())) {
            std::vector<Point> verts;
            for (const json& p : poly)
                verts.push_back(point_from(p));
            polys.emplace_back(std::move(verts));
        }
        return Environment(rect, std::move(polys));
    } catch (const FormatError&) {
        throw;
    } catch (const std::exception& e) {
        throw FormatError(std::string("invalid environment: ") + e.what());
    }
}

std::string environment_hash(const Environment& env)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : geometry_json(env).dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::array<char, 17> buf{};
    std::snprintf(buf.data(), buf.size(), "%016" PRIx64, h);
    return buf.data();
}

json instance_to_json(const InstanceFile& f)
{
    json agents = json::array();
    for (const AgentSpec& a : f.instance.agents)
        agents.push_back({{"start", point_json(a.start)},
                          {"goal", point_json(a.goal)},
                          {"radius", a.radius},
                          {"max_speed", a.max_speed}});
    json meta = {{"env_hash", environment_hash(f.instance.env)}};
    meta["generator_seed"] = f.generator_seed ? json(*f.generator_seed) : json(nullptr);
    return {{"schema", kInstanceSchema},
            {"environment", environment_to_json(f.instance.env, f.env_name)},
            {"agents", std::move(agents)},
            {"metadata", std::move(meta)}};
}

InstanceFile instance_from_json(const json& j)
{
    check_schema(j, kInstanceSchema);
    InstanceFile f;
    try {
        const json& env = j.at("environment");
        f.env_name = env.is_string() ? env.get<std::string>() : env.value("name", std::string("custom"));
        f.instance.env = environment_from_json(env);
        for (const json& a : j.at("agents")) {
            AgentSpec spec;
            spec.start = point_from(a.at("start"));
            spec.goal = point_from(a.at("goal"));
            spec.radius = a.at("radius").get<double>();
            spec.max_speed = get_or(a, "max_speed", 1.0);
            f.instance.agents.push_back(spec);
        }
        if (const auto meta = j.find("metadata"); meta != j.end() && meta->is_object()) {
            if (const auto s = meta->find("generator_seed"); s != meta->end() && !s->is_null())
                f.generator_seed = s->get<std::uint64_t>();
            if (const auto h = meta->find("env_hash"); h != meta->end() && !h->is_null())
                if (h->get<std::string>() != environment_hash(f.instance.env))
                    throw FormatError("env_hash does not match the environment geometry");
        }
    } catch (const FormatError&) {
        throw;
    } catch (const std::exception& e) {
        throw FormatError(std::string("invalid instance: ") + e.what());
    }
    if (f.instance.agents.empty())
        throw FormatError("instance has no agents");
    const auto errors = validate_instance(f.instance);
    if (!errors.empty())
        throw FormatError("invalid instance: " + errors.front());
    return f;
}

json solution_to_json(const SolutionFile& f)
{
    json trajs = json::array();
    for (const Trajectory& t : f.trajectories) {
        json pts = json::array();
        for (const Breakpoint& b : t.breakpoints())
            pts.push_back({b.t, b.p.x, b.p.y});
        trajs.push_back(std::move(pts));
    }
    json em = json::array();
    for (const EmissionPoint& e : f.emissions)
        em.push_back({e.time, e.cost});
    return {{"schema", kSolutionSchema}, {"instance", f.instance_ref}, {"env_hash", f.env_hash},
            {"algorithm", f.algorithm},  {"seed", f.seed},             {"cost", f.cost},
            {"trajectories", std::move(trajs)}, {"emissions", std::move(em)}};
}

SolutionFile solution_from_json(const json& j)
{
    check_schema(j, kSolutionSchema);
    SolutionFile f;
    try {
        f.instance_ref = j.value("instance", std::string());
        f.env_hash = j.value("env_hash", std::string());
        f.algorithm = j.at("algorithm").get<std::string>();
        f.seed = j.value("seed", std::uint64_t{0});
        f.cost = j.at("cost").get<double>();
        for (const json& t : j.at("trajectories")) {
            std::vector<Breakpoint> pts;
            for (const json& b : t) {
                if (!b.is_array() || b.size() != 3)
                    throw FormatError("breakpoint must be [t, x, y]");
                pts.push_back({b[0].get<double>(), {b[1].get<double>(), b[2].get<double>()}});
            }
            f.trajectories.push_back(Trajectory::from_breakpoints(std::move(pts)));
        }
        for (const json& e : j.value("emissions", json::array()))
            f.emissions.push_back({e.at(0).get<double>(), e.at(1).get<double>()});
    } catch (const FormatError&) {
        throw;
    } catch (const std::exception& e) {
        throw FormatError(std::string("invalid solution: ") + e.what());
    }
    return f;
}

json config_to_json(const BenchmarkConfig& cfg)
{
    json algs = json::array();
    for (Algorithm a : cfg.algorithms)
        algs.push_back(to_string(a));
    json budget = json::object();
    if (cfg.budget.seconds)
        budget["seconds"] = *cfg.budget.seconds;
    if (cfg.budget.iterations)
        budget["iterations"] = *cfg.budget.iterations;
    return {{"schema", kBenchConfigSchema},
            {"environments", cfg.environments},
            {"agent_counts", cfg.agent_counts},
            {"radii", cfg.radii},
            {"instances_per_cell", cfg.instances_per_cell},
            {"seeds_per_instance", cfg.seeds_per_instance},
            {"budget", std::move(budget)},
            {"thresholds", cfg.thresholds},
            {"algorithms", std::move(algs)},
            {"seed", cfg.seed},
            {"workers", cfg.workers},
            {"max_generation_attempts", cfg.max_generation_attempts},
            {"record_timing", cfg.record_timing},
            {"orca", sim_params_to_json(cfg.orca)}};
}

BenchmarkConfig config_from_json(const json& j)
{
    check_schema(j, kBenchConfigSchema);
    BenchmarkConfig cfg;
    try {
        cfg.environments = j.at("environments").get<std::vector<std::string>>();
        cfg.agent_counts = j.at("agent_counts").get<std::vector<std::size_t>>();
        cfg.radii = j.at("radii").get<std::vector<double>>();
        cfg.instances_per_cell = get_or(j, "instances_per_cell", cfg.instances_per_cell);
        cfg.seeds_per_instance = get_or(j, "seeds_per_instance", cfg.seeds_per_instance);
        const json& budget = j.at("budget");
        if (budget.contains("seconds"))
            cfg.budget.seconds = budget.at("seconds").get<double>();
        if (budget.contains("iterations"))
            cfg.budget.iterations = budget.at("iterations").get<std::size_t>();
        cfg.thresholds = get_or(j, "thresholds", cfg.thresholds);
        if (j.contains("algorithms")) {
            cfg.algorithms.clear();
            for (const json& a : j.at("algorithms")) {
                const auto alg = parse_algorithm(a.get<std::string>());
                if (!alg)
                    throw FormatError("unknown algorithm '" + a.get<std::string>() + "'");
                cfg.algorithms.push_back(*alg);
            }
        }
        cfg.seed = get_or(j, "seed", cfg.seed);
        cfg.workers = get_or(j, "workers", cfg.workers);
        cfg.max_generation_attempts = get_or(j, "max_generation_attempts", cfg.max_generation_attempts);
        cfg.record_timing = get_or(j, "record_timing", cfg.record_timing);
        if (j.contains("orca"))
            cfg.orca = sim_params_from_json(j.at("orca"));
    } catch (const FormatError&) {
        throw;
    } catch (const std::exception& e) {
        throw FormatError(std::string("invalid benchmark config: ") + e.what());
    }
    try {
        validate_config(cfg);
    } catch (const std::invalid_argument& e) {
        throw FormatError(e.what());
    }
    return cfg;
}

json read_json(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const json& j)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out)
        throw std::runtime_error("write failed for " + path.string());
}

std::string render_svg(const ProblemInstance& inst, const std::vector<Trajectory>* trajectories)
{
    static constexpr std::array<const char*, 10> kPalette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    const Rect& b = inst.env.boundary();
    const auto X = [&](double x) { return num(x - b.xmin); };
    const auto Y = [&](double y) { return num(b.ymax - y); };

    std::ostringstream s;
    s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << num(b.width()) << "\" height=\""
      << num(b.height()) << "\" viewBox=\"0 0 " << num(b.width()) << ' ' << num(b.height()) << "\">\n";
    s << "  <rect x=\"0\" y=\"0\" width=\"" << num(b.width()) << "\" height=\"" << num(b.height())
      << "\" fill=\"white\" stroke=\"black\" stroke-width=\"2\"/>\n";
    s << "  <g id=\"obstacles\" fill=\"#555555\" stroke=\"none\">\n";
    for (const Polygon& poly : inst.env.obstacles()) {
        s << "    <polygon points=\"";
        for (std::size_t i = 0; i < poly.size(); ++i)
            s << (i ? " " : "") << X(poly.vertex(i).x) << ',' << Y(poly.vertex(i).y);
        s << "\"/>\n";
    }
    s << "  </g>\n";
    s << "  <g id=\"agents\">\n";
    for (std::size_t i = 0; i < inst.agents.size(); ++i) {
        const AgentSpec& a = inst.agents[i];
        const char* c = kPalette[i % kPalette.size()];
        s << "    <circle cx=\"" << X(a.start.x) << "\" cy=\"" << Y(a.start.y) << "\" r=\"" << num(a.radius) << "\" fill=\""
          << c << "\" fill-opacity=\"0.35\" stroke=\"" << c << "\"/>\n";
        s << "    <circle cx=\"" << X(a.goal.x) << "\" cy=\"" << Y(a.goal.y) << "\" r=\"" << num(a.radius)
          << "\" fill=\"none\" stroke=\"" << c << "\" stroke-dasharray=\"8 6\"/>\n";
    }
    s << "  </g>\n";
    if (trajectories) {
        s << "  <g id=\"trajectories\" fill=\"none\" stroke-width=\"3\">\n";
        for (std::size_t i = 0; i < trajectories->size(); ++i) {
            const char* c = kPalette[i % kPalette.size()];
            s << "    <path stroke=\"" << c << "\" d=\"";
            const auto pts = (*trajectories)[i].breakpoints();
            for (std::size_t k = 0; k < pts.size(); ++k)
                s << (k ? " L " : "M ") << X(pts[k].p.x) << ' ' << Y(pts[k].p.y);
            s << "\"/>\n";
        }
        s << "  </g>\n";
    }
    s << "</svg>\n";
    return s.str();
}

} // namespace mapf
