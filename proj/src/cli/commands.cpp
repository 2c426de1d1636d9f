#include "lima/cli.hpp"

#include "lima/envelope.hpp"
#include "lima/error.hpp"
#include "lima/estimate.hpp"
#include "lima/io.hpp"
#include "lima/simulate.hpp"

#include "CLI11.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iostream>
#include <optional>
#include <sstream>

namespace lima::cli {

namespace {

using Json = nlohmann::ordered_json;

struct InputOptions {
    std::string pattern;
    std::string window;
    std::string nodes;
    std::string edges;
};

struct EstimateOptions {
    std::string testfn = "stoyan";
    std::string kernel = "epanechnikov";
    double bandwidth = 0.0;  // 0: 0.15 / sqrt(intensity)
    double rmax = 0.0;       // 0: quarter of the shorter side
    std::size_t rsteps = 512;
    bool functional = false;
};

struct ScenarioOptions {
    std::string scenario = "I";
    std::uint64_t seed = 1;
    double lambda = 500.0;
    double disc_radius = 0.075;
    double band_halfwidth = kDefaultBandHalfwidth;
    bool variance = false;
};

struct Options {
    InputOptions in;
    EstimateOptions est;
    ScenarioOptions sc;
    std::string local = "global";
    bool pointwise = false;
    std::size_t permutations = 499;
    double alpha = 0.05;
    std::string scope = "global";
    bool independent = false;
    bool keep_envelopes = false;
    std::size_t replicate = 0;
    bool study = false;
    std::string config;
    std::size_t replicates = 100;
    bool smoke = false;
    bool no_local = false;
};

// --- argument serialisation ---------------------------------------------------

Json input_json(const InputOptions& in) {
    return Json{{"pattern", in.pattern}, {"window", in.window}, {"nodes", in.nodes}, {"edges", in.edges}};
}

Json estimate_json(const EstimateOptions& e) {
    return Json{{"testfn", e.testfn}, {"kernel", e.kernel},   {"bandwidth", e.bandwidth},
                {"rmax", e.rmax},     {"rsteps", e.rsteps}, {"functional", e.functional}};
}

Json scenario_json(const ScenarioOptions& s) {
    return Json{{"scenario", s.scenario},         {"seed", s.seed},
                {"lambda", s.lambda},             {"disc_radius", s.disc_radius},
                {"band_halfwidth", s.band_halfwidth}, {"sd_is_variance", s.variance}};
}

template <class T>
T get(const Json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("manifest argument '") + key + "': " + e.what());
    }
}

InputOptions input_from(const Json& j) {
    return {get<std::string>(j, "pattern"), get<std::string>(j, "window"), get<std::string>(j, "nodes"),
            get<std::string>(j, "edges")};
}

EstimateOptions estimate_from(const Json& j) {
    EstimateOptions e;
    e.testfn = get<std::string>(j, "testfn");
    e.kernel = get<std::string>(j, "kernel");
    e.bandwidth = get<double>(j, "bandwidth");
    e.rmax = get<double>(j, "rmax");
    e.rsteps = get<std::size_t>(j, "rsteps");
    e.functional = get<bool>(j, "functional");
    return e;
}

ScenarioOptions scenario_from(const Json& j) {
    ScenarioOptions s;
    s.scenario = get<std::string>(j, "scenario");
    s.seed = get<std::uint64_t>(j, "seed");
    s.lambda = get<double>(j, "lambda");
    s.disc_radius = get<double>(j, "disc_radius");
    s.band_halfwidth = get<double>(j, "band_halfwidth");
    s.variance = get<bool>(j, "sd_is_variance");
    return s;
}

std::vector<std::string> input_files(const InputOptions& in) {
    std::vector<std::string> out;
    for (const auto* p : {&in.pattern, &in.window, &in.nodes, &in.edges})
        if (!p->empty()) out.push_back(*p);
    return out;
}

// --- shared helpers -----------------------------------------------------------

struct Loaded {
    MarkedPointPattern pattern;
    std::optional<io::NetworkFiles> network;
};

Loaded load_pattern(const InputOptions& in, const EstimateOptions& est) {
    if (in.pattern.empty()) throw InputError("--pattern is required");
    if (in.nodes.empty() != in.edges.empty()) throw InputError("network mode needs both --nodes and --edges");
    Loaded out;
    if (!in.nodes.empty()) {
        if (!in.window.empty()) throw InputError("--window does not apply to network patterns");
        out.network = io::read_network(in.nodes, in.edges);
        out.pattern = io::read_network_pattern(in.pattern, *out.network);
    } else {
        std::optional<Window> w;
        if (!in.window.empty()) w = io::read_window(in.window);
        out.pattern = io::read_planar_pattern(in.pattern, w);
    }
    if (est.functional && !out.pattern.has_functional_marks())
        throw InputError(in.pattern + ": --functional needs t_<value> columns, the file has a single 'mark' column");
    if (!est.functional && out.pattern.has_functional_marks())
        throw InputError(in.pattern + ": the file carries functional marks; pass --functional");
    return out;
}

double default_rmax(const MarkedPointPattern& p) {
    BoundingBox b;
    if (p.is_planar()) {
        b = std::get<PlanarSupport>(p.support()).window.bbox();
    } else {
        const auto& nodes = std::get<NetworkSupport>(p.support()).network->nodes();
        b = {nodes.front(), nodes.front()};
        for (const auto& q : nodes) {
            b.lo = {std::min(b.lo.x, q.x), std::min(b.lo.y, q.y)};
            b.hi = {std::max(b.hi.x, q.x), std::max(b.hi.y, q.y)};
        }
    }
    const double w = b.hi.x - b.lo.x;
    const double h = b.hi.y - b.lo.y;
    const double side = std::min(w, h) > 0.0 ? std::min(w, h) : std::max(w, h);
    if (!(side > 0.0)) throw InputError("cannot choose a default r_max for a degenerate domain; pass --rmax");
    return 0.25 * side;
}

EstimationConfig make_config(const MarkedPointPattern& p, const EstimateOptions& e) {
    if (e.rsteps < 1) throw InputError("--rsteps must be at least 1");
    EstimationConfig cfg;
    cfg.kernel = parse_kernel(e.kernel);
    cfg.r_grid = uniform_r_grid(e.rmax > 0.0 ? e.rmax : default_rmax(p), e.rsteps);
    cfg.bandwidth = e.bandwidth > 0.0 ? e.bandwidth : default_bandwidth(p.intensity());
    check_config(cfg);
    return cfg;
}

std::optional<std::size_t> parse_local(const std::string& text, std::size_t n, bool& all) {
    all = false;
    if (text == "global") return std::nullopt;
    if (text == "all") {
        all = true;
        return std::nullopt;
    }
    std::size_t i = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), i);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw InputError("--local expects 'global', 'all' or a 0-based point index, got '" + text + "'");
    if (i >= n) throw InputError("--local index " + text + " out of range (pattern has " + std::to_string(n) + " points)");
    return i;
}

// --- key=value study configuration -------------------------------------------

std::map<std::string, std::string> read_key_values(const std::string& path) {
    std::map<std::string, std::string> kv;
    std::istringstream in(io::read_text(path));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InputError(path + ":" + std::to_string(lineno) + ": expected key = value");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        static const std::vector<std::string> known{"scenario", "lambda",     "disc_radius", "band_halfwidth",
                                                    "replicates", "permutations", "alpha",   "bandwidth",
                                                    "r_max",    "r_steps",    "seed",        "testfn",
                                                    "sd_is_variance"};
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw InputError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
        kv[key] = value;
    }
    return kv;
}

template <class T>
T convert(const std::string& key, const std::string& value) {
    std::istringstream ss(value);
    T v{};
    ss >> v;
    if (!ss || !ss.eof()) throw InputError("study config: bad value '" + value + "' for " + key);
    return v;
}

// --- commands -----------------------------------------------------------------

void run_estimate(const Json& args, const fs::path& out) {
    const auto in = input_from(args.at("input"));
    const auto eo = estimate_from(args.at("estimation"));
    const auto local = get<std::string>(args, "local");
    const bool pointwise = get<bool>(args, "pointwise");
    const auto loaded = load_pattern(in, eo);
    const auto& pattern = loaded.pattern;
    const auto cfg = make_config(pattern, eo);
    const auto spec = make_spec(parse_test_function(eo.testfn));
    const MarkCorrelationEstimator est(pairwise_distances(pattern), cfg);

    bool all = false;
    const auto point = parse_local(local, pattern.size(), all);
    Json curves = Json::array();
    auto emit = [&](const SummaryCurve& c, const std::string& stem) {
        io::write_curve_csv(out / (stem + ".csv"), c);
        Json j = io::to_json(c);
        j["file"] = stem + ".csv";
        curves.push_back(std::move(j));
        for (const auto& w : c.meta.warnings) std::cerr << "warning: " << stem << ": " << w << '\n';
    };

    if (!point && !all) {
        if (pattern.has_functional_marks()) {
            if (pointwise) io::write_surface_csv(out / "surface_global.csv", est.pointwise_global_kappa(pattern.functional_marks(), spec));
            emit(est.global_kappa_functional(pattern.functional_marks(), spec), "curve_global");
        } else {
            emit(est.global_kappa(pattern.real_marks().values, spec), "curve_global");
        }
    } else if (!pattern.has_functional_marks()) {
        if (all) {
            const auto cs = est.local_kappa_all(pattern.real_marks().values, spec);
            for (std::size_t i = 0; i < cs.size(); ++i) emit(cs[i], "curve_point_" + std::to_string(i));
        } else {
            emit(est.local_kappa(pattern.real_marks().values, *point, spec), "curve_point_" + std::to_string(*point));
        }
    } else {
        const auto& fm = pattern.functional_marks();
        std::vector<std::size_t> pts;
        if (all)
            for (std::size_t i = 0; i < pattern.size(); ++i) pts.push_back(i);
        else
            pts.push_back(*point);
        for (std::size_t i : pts) {
            const auto stem = std::to_string(i);
            if (pointwise) io::write_surface_csv(out / ("surface_point_" + stem + ".csv"), est.pointwise_local_kappa(fm, i, spec));
            emit(est.local_kappa_functional(fm, i, spec), "curve_point_" + stem);
        }
    }
    io::write_json(out / "curves.json", Json{{"points", pattern.size()}, {"curves", curves}});
}

void run_envelope(const Json& args, const fs::path& out) {
    const auto in = input_from(args.at("input"));
    const auto eo = estimate_from(args.at("estimation"));
    const auto loaded = load_pattern(in, eo);
    const auto& pattern = loaded.pattern;
    const auto cfg = make_config(pattern, eo);
    const auto spec = make_spec(parse_test_function(eo.testfn));
    TestOptions opts;
    opts.permutations = get<std::size_t>(args, "permutations");
    opts.alpha = get<double>(args, "alpha");
    opts.seed = get<std::uint64_t>(args, "seed");
    opts.shared_permutations = !get<bool>(args, "independent");
    opts.keep_envelopes = get<bool>(args, "keep_envelopes");
    const auto scope = get<std::string>(args, "scope");

    if (scope == "global") {
        const auto env = global_envelope_test(pattern, spec, cfg, opts);
        io::write_envelope_csv(out / "envelope_global.csv", env);
        Json j = io::to_json(env);
        j["test_function"] = eo.testfn;
        io::write_json(out / "envelope_global.json", j);
        std::cout << "global p-value " << io::format_double(env.p_value) << '\n';
    } else if (scope == "local") {
        const auto report = local_lima_test(pattern, spec, cfg, opts);
        io::write_report_csv(out / "report.csv", report);
        Json j = io::to_json(report);
        j["test_function"] = eo.testfn;
        io::write_json(out / "report.json", j);
        if (opts.keep_envelopes)
            for (const auto& p : report.points)
                io::write_envelope_csv(out / "envelopes" / ("point_" + std::to_string(p.point) + ".csv"), *p.envelope);
        std::cout << report.significant_count() << " of " << report.points.size() << " points significant at alpha "
                  << io::format_double(opts.alpha) << '\n';
    } else {
        throw InputError("--scope must be 'global' or 'local', got '" + scope + "'");
    }
}

ScenarioConfig scenario_config(const ScenarioOptions& so) {
    ScenarioConfig sc = default_scenario(parse_scenario(so.scenario));
    sc.seed = so.seed;
    sc.intensity = so.lambda;
    sc.disc_radius = so.disc_radius;
    sc.band_halfwidth = so.band_halfwidth;
    sc.second_is_variance = so.variance;
    check_scenario(sc);
    return sc;
}

void run_simulate(const Json& args, const fs::path& out) {
    const auto so = scenario_from(args.at("scenario"));
    const auto replicate = get<std::size_t>(args, "replicate");
    const auto sc = scenario_config(so);
    const auto sp = simulate_scenario(sc, replicate);
    io::write_pattern(out / "pattern.csv", sp.pattern, &sp.regions);
    io::write_window(out / "window.csv", sc.window);
    Json j;
    j["scenario"] = so.scenario;
    j["replicate"] = replicate;
    j["points"] = sp.pattern.size();
    if (sc.scenario == Scenario::II || sc.scenario == Scenario::III)
        j["disc_centers"] = Json::array({Json::array({sp.centers[0].x, sp.centers[0].y}),
                                         Json::array({sp.centers[1].x, sp.centers[1].y})});
    std::size_t structured = 0;
    for (auto r : sp.regions) structured += r != Region::outside ? 1 : 0;
    j["structured_points"] = structured;
    io::write_json(out / "scenario.json", j);
    std::cout << "scenario " << so.scenario << ": " << sp.pattern.size() << " points, " << structured
              << " in structured regions\n";
}

void run_study(const Json& args, const fs::path& out) {
    const auto so = scenario_from(args.at("scenario"));
    StudyConfig cfg;
    cfg.scenario = scenario_config(so);
    cfg.replicates = get<std::size_t>(args, "replicates");
    cfg.permutations = get<std::size_t>(args, "permutations");
    cfg.alpha = get<double>(args, "alpha");
    cfg.bandwidth = get<double>(args, "bandwidth");
    cfg.r_max = get<double>(args, "r_max");
    cfg.r_steps = get<std::size_t>(args, "r_steps");
    cfg.testfn = parse_test_function(get<std::string>(args, "testfn"));
    cfg.local = get<bool>(args, "local");
    cfg.shared_permutations = !get<bool>(args, "independent");
    if (!(cfg.r_max > 0.0)) throw InputError("r_max must be positive");
    (void)required_permutations(cfg.alpha);
    if (cfg.permutations < required_permutations(cfg.alpha))
        throw InputError("alpha=" + io::format_double(cfg.alpha) + " needs at least " +
                         std::to_string(required_permutations(cfg.alpha)) + " permutations");
    const auto summary = replicate_study(cfg, [&](const ReplicateRecord& r) {
        std::cerr << "replicate " << r.replicate + 1 << "/" << cfg.replicates << ": n=" << r.points
                  << " global p=" << io::format_double(r.global_p) << " local significant=" << r.local_significant
                  << '\n';
    });
    io::write_records_csv(out / "replicates.csv", summary.records);
    io::write_json(out / "summary.json", io::to_json(summary));
    std::cout << "global rejection rate " << io::format_double(summary.global_rejection_rate())
              << ", mean local significant fraction " << io::format_double(summary.mean_local_significant_fraction())
              << '\n';
}

std::uint64_t seed_of(const std::string& command, const Json& args) {
    if (command == "envelope") return get<std::uint64_t>(args, "seed");
    if (command == "simulate" || command == "study") return get<std::uint64_t>(args.at("scenario"), "seed");
    return 0;
}

std::vector<std::string> inputs_of(const std::string& command, const Json& args) {
    std::vector<std::string> files;
    if (args.contains("input")) files = input_files(input_from(args.at("input")));
    if (command == "study" || command == "simulate") {
        const auto cfg = args.value("config", std::string());
        if (!cfg.empty()) files.push_back(cfg);
    }
    return files;
}

// --- argument parsing ---------------------------------------------------------

void add_input(CLI::App* app, Options& o) {
    app->add_option("--pattern", o.in.pattern, "pattern CSV (x,y,... or segment,offset,...)");
    app->add_option("--window", o.in.window, "window polygon CSV with x,y vertices (default: bounding box)");
    app->add_option("--nodes", o.in.nodes, "network nodes CSV (id,x,y)");
    app->add_option("--edges", o.in.edges, "network edges CSV (id,u,v)");
}

void add_estimation(CLI::App* app, Options& o) {
    app->add_option("--testfn", o.est.testfn, "test function")->capture_default_str();
    app->add_option("--kernel", o.est.kernel, "smoothing kernel: epanechnikov, gaussian, box")->capture_default_str();
    app->add_option("--bandwidth", o.est.bandwidth, "kernel bandwidth (default 0.15/sqrt(intensity))");
    app->add_option("--rmax", o.est.rmax, "largest distance (default quarter of the shorter side)");
    app->add_option("--rsteps", o.est.rsteps, "number of r steps")->capture_default_str();
    app->add_flag("--functional", o.est.functional, "the pattern carries function-valued marks");
}

void add_scenario(CLI::App* app, Options& o) {
    app->add_option("--scenario", o.sc.scenario, "I, II, III or IV")->capture_default_str();
    app->add_option("--seed", o.sc.seed, "random seed")->capture_default_str();
    app->add_option("--lambda", o.sc.lambda, "intensity")->capture_default_str();
    app->add_option("--disc-radius", o.sc.disc_radius, "disc radius (II, III)")->capture_default_str();
    app->add_option("--band-halfwidth", o.sc.band_halfwidth, "band half-width around the diagonal (IV)")
        ->capture_default_str();
    app->add_flag("--sd-is-variance", o.sc.variance, "read the second normal parameter as a variance");
}

bool given(const CLI::App* app, const std::string& name) {
    const auto* opt = app->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
}

Json study_args(const Options& o, const CLI::App* app) {
    StudyConfig base;
    ScenarioOptions sc = o.sc;
    std::size_t replicates = base.replicates;
    std::size_t permutations = base.permutations;
    double alpha = base.alpha;
    double bandwidth = 0.0;
    double r_max = base.r_max;
    std::size_t r_steps = base.r_steps;
    std::string testfn = "stoyan";
    if (o.smoke) {
        const auto s = smoke_study(Scenario::I);
        replicates = s.replicates;
        permutations = s.permutations;
        if (!given(app, "--lambda")) sc.lambda = s.scenario.intensity;
    }
    if (!o.config.empty()) {
        for (const auto& [k, v] : read_key_values(o.config)) {
            if (k == "scenario" && !given(app, "--scenario")) sc.scenario = v;
            else if (k == "lambda" && !given(app, "--lambda")) sc.lambda = convert<double>(k, v);
            else if (k == "disc_radius" && !given(app, "--disc-radius")) sc.disc_radius = convert<double>(k, v);
            else if (k == "band_halfwidth" && !given(app, "--band-halfwidth")) sc.band_halfwidth = convert<double>(k, v);
            else if (k == "seed" && !given(app, "--seed")) sc.seed = convert<std::uint64_t>(k, v);
            else if (k == "sd_is_variance" && !given(app, "--sd-is-variance")) sc.variance = v == "true" || v == "1";
            else if (k == "replicates" && !given(app, "--replicates")) replicates = convert<std::size_t>(k, v);
            else if (k == "permutations" && !given(app, "--permutations")) permutations = convert<std::size_t>(k, v);
            else if (k == "alpha" && !given(app, "--alpha")) alpha = convert<double>(k, v);
            else if (k == "bandwidth" && !given(app, "--bandwidth")) bandwidth = convert<double>(k, v);
            else if (k == "r_max" && !given(app, "--rmax")) r_max = convert<double>(k, v);
            else if (k == "r_steps" && !given(app, "--rsteps")) r_steps = convert<std::size_t>(k, v);
            else if (k == "testfn" && !given(app, "--testfn")) testfn = v;
        }
    }
    if (given(app, "--replicates")) replicates = o.replicates;
    if (given(app, "--permutations")) permutations = o.permutations;
    if (given(app, "--alpha")) alpha = o.alpha;
    if (given(app, "--bandwidth")) bandwidth = o.est.bandwidth;
    if (given(app, "--rmax")) r_max = o.est.rmax;
    if (given(app, "--rsteps")) r_steps = o.est.rsteps;
    if (given(app, "--testfn")) testfn = o.est.testfn;
    (void)parse_scenario(sc.scenario);
    (void)parse_test_function(testfn);
    return Json{{"scenario", scenario_json(sc)},
                {"replicates", replicates},
                {"permutations", permutations},
                {"alpha", alpha},
                {"bandwidth", bandwidth},
                {"r_max", r_max},
                {"r_steps", r_steps},
                {"testfn", testfn},
                {"local", !o.no_local},
                {"independent", o.independent},
                {"config", o.config}};
}

int run_parsed(CLI::App& app, int argc, char** argv) {
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }
    return -1;
}

} // namespace

int execute(const std::string& command, const nlohmann::ordered_json& args, const fs::path& out) {
    fs::create_directories(out);
    RunManifest m;
    m.command = command;
    m.args = args;
    m.version = LIMA_VERSION;
    m.seed = seed_of(command, args);
    for (const auto& f : inputs_of(command, args)) m.inputs[f] = sha256_file(f);

    if (command == "estimate") run_estimate(args, out);
    else if (command == "envelope") run_envelope(args, out);
    else if (command == "simulate") run_simulate(args, out);
    else if (command == "study") run_study(args, out);
    else throw InputError("unknown command '" + command + "'");

    write_manifest(out, m);
    return kExitOk;
}

int run(int argc, char** argv) {
    CLI::App app{"Local indicators of mark association for marked point patterns", "lima"};
    app.set_version_flag("--version", std::string(LIMA_VERSION));
    app.require_subcommand(1);
    app.fallthrough();
    Options o;
    std::string out = "lima_out";
    int threads = 0;
    std::string manifest;
    app.add_option("--threads", threads, "worker threads (default: all cores)");

    auto* est = app.add_subcommand("estimate", "estimate global or local mark correlation functions");
    add_input(est, o);
    add_estimation(est, o);
    est->add_option("--local", o.local, "'global', 'all' or a 0-based point index")->capture_default_str();
    est->add_flag("--pointwise", o.pointwise, "also write the pointwise (r, t) surface for functional marks");
    est->add_option("--out", out, "output directory")->capture_default_str();

    auto* env = app.add_subcommand("envelope", "global envelope tests under random labelling");
    add_input(env, o);
    add_estimation(env, o);
    env->add_option("--permutations", o.permutations, "number of permutations")->capture_default_str();
    env->add_option("--alpha", o.alpha, "significance level")->capture_default_str();
    env->add_option("--seed", o.sc.seed, "random seed")->capture_default_str();
    env->add_option("--scope", o.scope, "'global' or 'local'")->capture_default_str();
    env->add_flag("--independent", o.independent, "draw separate permutations for every point");
    env->add_flag("--keep-envelopes", o.keep_envelopes, "write the envelope of every point");
    env->add_option("--out", out, "output directory")->capture_default_str();

    auto* sim = app.add_subcommand("simulate", "simulate one replicate of a scenario (or a study with --study)");
    add_scenario(sim, o);
    sim->add_option("--replicate", o.replicate, "replicate index")->capture_default_str();
    sim->add_flag("--study", o.study, "run the replication study instead");
    sim->add_option("--config", o.config, "study configuration file (key = value)");
    sim->add_option("--replicates", o.replicates, "replicates for --study");
    sim->add_option("--permutations", o.permutations, "permutations for --study");
    sim->add_option("--alpha", o.alpha, "significance level for --study");
    sim->add_flag("--smoke", o.smoke, "reduced preset: 25 replicates, 49 permutations, intensity 200");
    sim->add_option("--out", out, "output directory")->capture_default_str();

    auto* study = app.add_subcommand("study", "replication study: global rejection rate and local significance");
    add_scenario(study, o);
    study->add_option("--config", o.config, "study configuration file (key = value)");
    study->add_option("--replicates", o.replicates, "number of replicates");
    study->add_option("--permutations", o.permutations, "permutations per test");
    study->add_option("--alpha", o.alpha, "significance level");
    study->add_option("--bandwidth", o.est.bandwidth, "kernel bandwidth (default 0.15/sqrt(intensity))");
    study->add_option("--rmax", o.est.rmax, "largest distance");
    study->add_option("--rsteps", o.est.rsteps, "number of r steps");
    study->add_option("--testfn", o.est.testfn, "test function");
    study->add_flag("--smoke", o.smoke, "reduced preset: 25 replicates, 49 permutations, intensity 200");
    study->add_flag("--no-local", o.no_local, "skip the per-point tests");
    study->add_flag("--independent", o.independent, "draw separate permutations for every point");
    study->add_option("--out", out, "output directory")->capture_default_str();

    auto* replay = app.add_subcommand("replay", "rerun a command from its manifest");
    replay->add_option("--manifest", manifest, "manifest.json of an earlier run")->required();
    replay->add_option("--out", out, "output directory")->required();

    if (const int code = run_parsed(app, argc, argv); code >= 0) return code;
    if (threads > 0) omp_set_num_threads(threads);

    try {
        if (*est) {
            Json args{{"input", input_json(o.in)},
                      {"estimation", estimate_json(o.est)},
                      {"local", o.local},
                      {"pointwise", o.pointwise}};
            return execute("estimate", args, out);
        }
        if (*env) {
            Json args{{"input", input_json(o.in)},        {"estimation", estimate_json(o.est)},
                      {"permutations", o.permutations}, {"alpha", o.alpha},
                      {"seed", o.sc.seed},              {"scope", o.scope},
                      {"independent", o.independent},   {"keep_envelopes", o.keep_envelopes}};
            return execute("envelope", args, out);
        }
        if (*sim) {
            if (o.study) return execute("study", study_args(o, sim), out);
            (void)parse_scenario(o.sc.scenario);
            return execute("simulate", Json{{"scenario", scenario_json(o.sc)}, {"replicate", o.replicate}}, out);
        }
        if (*study) return execute("study", study_args(o, study), out);
        if (*replay) {
            const auto m = read_manifest(manifest);
            if (m.version != LIMA_VERSION)
                std::cerr << "warning: manifest written by version " << m.version << ", running " << LIMA_VERSION
                          << '\n';
            for (const auto& [path, digest] : m.inputs)
                if (sha256_file(path) != digest)
                    throw InputError("input " + path + " changed since the manifest was written (SHA-256 mismatch)");
            return execute(m.command, m.args, out);
        }
    } catch (const DegenerateError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitDegenerate;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    }
    return kExitInput;
}

int run(const std::vector<std::string>& args) {
    std::vector<std::string> storage{"lima"};
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : storage) argv.push_back(s.data());
    return run(static_cast<int>(argv.size()), argv.data());
}

} // namespace lima::cli
