#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fracsob/fracsob.hpp"

using namespace fracsob;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Run {
    std::string command;
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_given = false;
    bool quiet = false;
    Json config;
    std::vector<std::string> files;

    void write_json(const std::string& name, const Json& j) {
        write_json_file((fs::path(out_dir) / name).string(), j);
        files.push_back(name);
    }

    std::ofstream open(const std::string& name) {
        std::ofstream os(fs::path(out_dir) / name, std::ios::binary);
        if (!os) throw ConfigError("cannot write " + (fs::path(out_dir) / name).string());
        files.push_back(name);
        return os;
    }

    void say(const std::string& msg) const {
        if (!quiet) std::cout << msg << '\n';
    }
};

std::string fmt(double x, int prec = 6) {
    std::ostringstream os;
    os.precision(prec);
    os << x;
    return os.str();
}

GridPtr grid_from(const Json& cfg) {
    const auto desc = parse_manifold(json_require<Json>(cfg, "manifold"));
    return make_grid(desc, json_require<int>(cfg, "resolution"));
}

Point default_center(const ManifoldDesc& d) {
    switch (d.kind) {
        case ManifoldKind::circle: return {kPi, 0.0};
        case ManifoldKind::torus: return {0.5 * d.scale, d.dim == 2 ? 0.5 * d.scale : 0.0};
        case ManifoldKind::sphere: return {0.5 * kPi, 0.0};
    }
    return {0.0, 0.0};
}

EuclideanRefOptions reference_options(const Json& cfg) {
    EuclideanRefOptions o;
    const Json r = json_get<Json>(cfg, "reference", Json::object());
    o.R = json_get<double>(r, "R", o.R);
    o.resolutions = json_get<std::vector<int>>(r, "resolutions", o.resolutions);
    o.exterior.coupling_res = json_get<int>(r, "coupling_resolution", o.exterior.coupling_res);
    return o;
}

ProblemData problem_from(const Json& cfg, double q) {
    auto grid = grid_from(cfg);
    auto spec = parse_kernel(json_require<Json>(cfg, "kernel"), grid->manifold.dim);
    auto h = parse_field(json_require<Json>(cfg, "h"), grid);
    auto f = parse_field(json_require<Json>(cfg, "f"), grid);
    return ProblemData::make(grid, spec, h, f, q);
}

SolveOptions solve_options(const Run& run) {
    SolveOptions o;
    const Json j = json_get<Json>(run.config, "opts", Json::object());
    o.tol_energy = json_get<double>(j, "tol_energy", o.tol_energy);
    o.tol_res = json_get<double>(j, "tol_res", o.tol_res);
    o.max_iter = json_get<int>(j, "max_iter", o.max_iter);
    o.max_halvings = json_get<int>(j, "max_halvings", o.max_halvings);
    o.test_fields = json_get<int>(j, "test_fields", o.test_fields);
    o.seed = run.seed;
    return o;
}

void write_trace(Run& run, const std::string& name, const std::vector<TraceEntry>& trace) {
    auto os = run.open(name);
    CsvWriter csv(os);
    csv.header({"iteration", "energy", "constraint_defect", "step", "residual"});
    for (const auto& t : trace)
        csv.row({static_cast<double>(t.iteration), t.energy, t.constraint_defect, t.step, t.residual});
}

// Subcommands --------------------------------------------------------------------------------

void cmd_grid(Run& run) {
    const auto g = grid_from(run.config);
    const bool points = json_get<bool>(run.config, "points", true);
    Json rep = to_json(*g, points);
    rep["volume_error"] = std::abs(g->total_weight() - g->manifold.volume());
    run.write_json("grid.json", rep);
    run.say("grid: " + std::to_string(g->count()) + " points, total weight " + fmt(g->total_weight(), 12) +
            " (volume " + fmt(g->manifold.volume(), 12) + ")");
}

void cmd_kernel_check(Run& run) {
    const auto g = grid_from(run.config);
    const auto spec = parse_kernel(json_require<Json>(run.config, "kernel"), g->manifold.dim);
    const Json k4 = json_get<Json>(run.config, "k4", Json::object());
    const auto ladder = json_get<std::vector<double>>(k4, "eps", {0.2, 0.1, 0.05});
    const double radius = json_get<double>(k4, "radius", 1.0);
    const int count = json_get<int>(k4, "pairs", 64);
    const Point x0 = k4.contains("center") ? parse_point(k4.at("center")) : g->points.front();

    const auto k3 = check_k3_bounds(spec, *g);
    const double k2 = check_k2_symmetry(spec, *g);
    const double k1 = check_k1_integrable(spec, *g);
    const auto steps = check_k4_ladder(spec, g->manifold, x0, default_k4_pairs(g->manifold.dim, radius, count), ladder);
    bool decreasing = true;
    Json k4j = Json::array();
    for (std::size_t i = 0; i < steps.size(); ++i) {
        k4j.push_back(to_json(steps[i]));
        if (i > 0 && !(steps[i].max_deviation < steps[i - 1].max_deviation)) decreasing = false;
    }
    Json rep{{"kernel", to_json(spec)},
             {"grid", to_json(*g)},
             {"k1_integral", k1},
             {"k2_max_asymmetry", k2},
             {"k3", to_json(k3)},
             {"k4", {{"center", {x0[0], x0[1]}}, {"radius", radius}, {"ladder", k4j}, {"strictly_decreasing", decreasing}}}};
    run.write_json("kernel_check.json", rep);
    run.say("kernel-check: K3 pinch (" + fmt(k3.inf, 10) + ", " + fmt(k3.sup, 10) + "), K2 asymmetry " + fmt(k2) +
            ", K4 final deviation " + fmt(steps.empty() ? 0.0 : steps.back().max_deviation));
}

void cmd_bubble_sweep(Run& run) {
    const auto g = grid_from(run.config);
    BubbleConfig b;
    b.params = FracParams(g->manifold.dim, json_require<double>(run.config, "s"), 2.0);
    b.center = run.config.contains("center") ? parse_point(run.config.at("center")) : default_center(g->manifold);
    b.delta = json_require<double>(run.config, "delta");
    const auto ladder = json_require<std::vector<double>>(run.config, "ladder");
    const bool with_energy = json_get<bool>(run.config, "energy", true);
    const bool with_reference = json_get<bool>(run.config, "reference_values", b.params.n == 2);
    const auto spec = run.config.contains("kernel") ? parse_kernel(run.config.at("kernel"), b.params.n)
                                                    : KernelSpec::pure(b.params);

    const auto l2 = bubble_l2_scaling(b, ladder, g);
    std::vector<double> crit;
    const double q = b.params.pstar();
    for (double e : ladder) crit.push_back(lp_norm_p(bubble_on_manifold(b.with_eps(e), g), q));

    const double nan = std::numeric_limits<double>::quiet_NaN();
    double seminorm_ref = nan, crit_ref = nan;
    if (with_reference) {
        const auto opt = reference_options(run.config);
        seminorm_ref = euclidean_rayleigh_extrapolated(b.params, opt).seminorm;
        crit_ref = critical_norm_reference(b.params, opt).total();
    }
    std::vector<double> energy(ladder.size(), nan);
    if (with_energy) {
        const PairKernel pk(g, spec);
        for (std::size_t i = 0; i < ladder.size(); ++i)
            energy[i] = lattice_kernel_energy(bubble_on_manifold(b.with_eps(ladder[i]), g), pk);
    }

    {
        auto os = run.open("sweep.csv");
        CsvWriter csv(os);
        csv.header({"eps", "l2", "lcrit", "energy", "reference", "ratio"});
        for (std::size_t i = 0; i < ladder.size(); ++i)
            csv.row({ladder[i], l2.l2[i], crit[i], energy[i], seminorm_ref, energy[i] / seminorm_ref});
    }
    const double tol = 0.15;
    Json rep{{"params", to_json(b.params)},
             {"kernel", to_json(spec)},
             {"grid", to_json(*g)},
             {"center", {b.center[0], b.center[1]}},
             {"delta", b.delta},
             {"ladder", ladder},
             {"l2_slope", l2.slope},
             {"l2_intercept", l2.intercept},
             {"l2_target", l2.target},
             {"l2_tolerance", tol},
             {"l2_within_tolerance", std::abs(l2.slope - l2.target) <= tol},
             {"l2_regime", l2.l2_regime},
             {"log_regime", l2.log_regime}};
    if (with_reference) {
        rep["crit_reference"] = crit_ref;
        rep["crit_final_relative_error"] = std::abs(crit.back() - crit_ref) / crit_ref;
        rep["seminorm_reference"] = seminorm_ref;
        if (with_energy) rep["energy_final_ratio"] = energy.back() / seminorm_ref;
    }
    run.write_json("sweep.json", rep);
    run.say("bubble-sweep: L2 slope " + fmt(l2.slope) + " (target " + fmt(l2.target) + ")");
}

void cmd_best_constant(Run& run) {
    const int n = json_get<int>(run.config, "n", 2);
    const FracParams fp(n, json_require<double>(run.config, "s"), 2.0);
    const auto opt = reference_options(run.config);
    const auto ray = euclidean_rayleigh_extrapolated(fp, opt);
    {
        auto os = run.open("convergence.csv");
        CsvWriter csv(os);
        csv.header({"resolution", "h", "seminorm", "crit_norm", "rayleigh"});
        for (const auto& l : ray.levels)
            csv.row({static_cast<double>(l.resolution), l.h, l.seminorm.total(), l.crit.total(), l.rayleigh});
    }
    Json rep{{"params", to_json(fp)}, {"R", opt.R}, {"kinv_estimate", ray.rayleigh}, {"kconst", ray.kconst},
             {"euclidean", to_json(ray)}};
    if (run.config.contains("fit")) {
        const Json& fj = run.config.at("fit");
        const auto g = grid_from(fj);
        if (g->manifold.dim != n) throw ConfigError("best-constant: fit manifold dimension must equal n");
        BubbleConfig b;
        b.params = fp;
        b.center = fj.contains("center") ? parse_point(fj.at("center")) : default_center(g->manifold);
        b.delta = json_require<double>(fj, "delta");
        const auto ladder = json_require<std::vector<double>>(fj, "ladder");
        const auto bc = best_constant_fit(b, ladder, g, KernelSpec::pure(fp), ray.kconst, json_get<double>(fj, "c2", 0.0));
        rep["fit"] = {{"grid", to_json(*g)}, {"delta", b.delta}, {"eps", bc.eps},     {"c1", bc.c1},
                      {"crit_sq", bc.crit_sq}, {"energy", bc.energy}, {"l2", bc.l2}, {"c2", bc.c2},
                      {"c1_fit", bc.c1_fit}, {"ratio_to_kconst", bc.ratio}};
    }
    run.write_json("best_constant.json", rep);
    run.say("best-constant: K^-1 estimate " + fmt(ray.rayleigh, 8) + ", K = " + fmt(ray.kconst, 8));
}

void cmd_solve(Run& run) {
    const bool continuation = run.config.contains("schedule");
    std::vector<double> schedule;
    double q = 0.0;
    if (continuation) {
        schedule = json_require<std::vector<double>>(run.config, "schedule");
        if (schedule.empty()) throw ConfigError("schedule must not be empty");
        q = schedule.front();
    } else {
        q = json_require<double>(run.config, "q");
    }
    const auto d = problem_from(run.config, q);
    const auto opts = solve_options(run);
    const auto init = run.config.contains("init") ? parse_field(run.config.at("init"), d.grid)
                                                  : DiscreteFunction::constant(d.grid, 1.0);
    const auto coer = check_coercivity(d, opts.seed);
    Json rep{{"kernel", to_json(d.spec)}, {"grid", to_json(*d.grid)}, {"coercivity", to_json(coer)}};
    SolveResult result;
    try {
        if (continuation) {
            const auto c = solve_critical_continuation(d, schedule, opts, &init);
            Json stages = Json::array();
            for (const auto& s : c.stages) stages.push_back(to_json(s));
            rep["stages"] = std::move(stages);
            result = c.final;
            rep["q"] = schedule.back();
        } else {
            result = solve_subcritical(d, init, opts);
            rep["q"] = q;
        }
    } catch (const SolverFailure& e) {
        write_trace(run, "trace.csv", e.trace);
        throw;
    }
    rep["constant_level"] = constant_level(d.with_q(rep["q"].get<double>()));
    rep["result"] = to_json(result);
    run.write_json("result.json", rep);
    write_trace(run, "trace.csv", result.trace);
    {
        auto os = run.open("solution.csv");
        CsvWriter csv(os);
        csv.header({"x", "y", "u"});
        for (std::size_t i = 0; i < result.u.size(); ++i)
            csv.row({d.grid->points[i][0], d.grid->points[i][1], result.u[i]});
    }
    run.say("solve: mu = " + fmt(result.mu, 12) + ", residual " + fmt(result.residual) + ", " +
            std::to_string(result.iterations) + " iterations");
}

void cmd_condition(Run& run) {
    const auto d = problem_from(run.config, json_get<double>(run.config, "q", 2.0));
    if (d.params().p != 2.0) throw ConfigError("condition: requires p = 2");
    double kconst = 0.0;
    Json kinfo;
    if (run.config.contains("kconst") && run.config.at("kconst").is_number()) {
        kconst = run.config.at("kconst").get<double>();
        kinfo = {{"source", "config"}};
    } else {
        const auto ray = euclidean_rayleigh_extrapolated(d.params(), reference_options(run.config));
        kconst = ray.kconst;
        kinfo = {{"source", "euclidean_extremal"}, {"kinv_estimate", ray.rayleigh}};
    }
    ContinuationResult cont;
    const bool with_cont = run.config.contains("schedule");
    if (with_cont) cont = solve_critical_continuation(d, json_require<std::vector<double>>(run.config, "schedule"), solve_options(run));
    const auto r = check_existence_condition(d, kconst, with_cont ? &cont : nullptr);
    Json rep{{"kernel", to_json(d.spec)}, {"grid", to_json(*d.grid)}, {"kconst_info", kinfo}, {"condition", to_json(r)}};
    if (with_cont) {
        Json stages = Json::array();
        for (const auto& s : cont.stages) stages.push_back(to_json(s));
        rep["stages"] = std::move(stages);
    }
    run.write_json("condition.json", rep);
    run.say(std::string("condition: ") + (r.condition_holds ? "holds" : "fails") + " (inf J_K est " +
            fmt(r.inf_JK_est) + " vs threshold " + fmt(r.threshold) + "); corollary lhs " + fmt(r.corollary_lhs) +
            " vs K^-1 " + fmt(r.kinv));
}

void cmd_equivalence(Run& run) {
    const auto g = grid_from(run.config);
    const FracParams fp(g->manifold.dim, json_require<double>(run.config, "s"), json_get<double>(run.config, "p", 2.0));
    std::vector<Point> centers;
    for (const auto& c : json_require<Json>(run.config, "centers")) centers.push_back(parse_point(c));
    const auto eta = partition_of_unity(g, centers, json_require<double>(run.config, "delta"));
    const int samples = json_get<int>(run.config, "samples", 50);
    const int kmax = json_get<int>(run.config, "kmax", 4);
    if (samples < 1) throw ConfigError("equivalence: samples must be positive");
    const auto pk = seminorm_pairs(g, fp);
    Rng rng(run.seed);
    double lo = INFINITY, hi = -INFINITY;
    bool jensen = true;
    double floor_ = 0.0;
    {
        auto os = run.open("ratios.csv");
        CsvWriter csv(os);
        csv.header({"sample", "ratio", "global_norm_p", "local_sum", "jensen_rhs"});
        for (int k = 0; k < samples; ++k) {
            const auto rep = localized_norm_ratio(band_limited_field(g, rng, kmax), eta, pk);
            lo = std::min(lo, rep.ratio);
            hi = std::max(hi, rep.ratio);
            jensen = jensen && rep.jensen_holds();
            floor_ = rep.ratio_lower;
            csv.row({static_cast<double>(k), rep.ratio, rep.global_norm_p, rep.local_sum, rep.jensen_rhs});
        }
    }
    Json rep{{"params", to_json(fp)},  {"grid", to_json(*g)}, {"charts", centers.size()},
             {"samples", samples},      {"ratio_min", lo},     {"ratio_max", hi},
             {"band", hi / lo},         {"ratio_lower", floor_}, {"jensen_holds_all", jensen}};
    run.write_json("equivalence.json", rep);
    run.say("equivalence: ratio band [" + fmt(lo) + ", " + fmt(hi) + "], max/min " + fmt(hi / lo) +
            (jensen ? ", Jensen holds" : ", Jensen FAILS"));
}

void write_manifest(Run& run, int code, const std::string& error, double wall) {
    Json m{{"command", run.command}, {"config", run.config_path}, {"out", run.out_dir}, {"seed", run.seed},
           {"version", kVersion},    {"exit_code", code},         {"files", run.files}, {"wall_time_s", wall}};
    if (!error.empty()) m["error"] = error;
    write_json_file((fs::path(run.out_dir) / "manifest.json").string(), m);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fractional Sobolev toolkit on compact manifolds"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);
    Run run;
    int threads = 0;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"grid", "Build a grid and report its quadrature weights"},
        {"kernel-check", "Check the kernel axioms on a grid"},
        {"bubble-sweep", "Sweep bubble test functions over an eps ladder"},
        {"best-constant", "Estimate the best Sobolev constant from the Euclidean extremal"},
        {"solve", "Solve the constrained minimization (or a continuation in q)"},
        {"condition", "Evaluate the existence condition"},
        {"equivalence", "Localized-to-global norm ratios over random fields"}};
    for (const auto& [name, desc] : commands) {
        auto* sub = app.add_subcommand(name, desc);
        sub->add_option("--config", run.config_path, "JSON config file")->required();
        sub->add_option("--out", run.out_dir, "Output directory")->default_val("fracsob_out");
        sub->add_option("--seed", run.seed, "Seed (overrides the config)");
        sub->add_option("--threads", threads, "Worker threads (0 = hardware)")->default_val(0);
        sub->add_flag("--quiet", run.quiet, "Suppress progress output");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }
    run.command = app.get_subcommands().front()->get_name();
    run.seed_given = app.get_subcommands().front()->count("--seed") > 0;
    const auto t0 = std::chrono::steady_clock::now();
    int code = kExitOk;
    std::string error;
    try {
        fs::create_directories(run.out_dir);
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: cannot create output directory: " << e.what() << '\n';
        return kExitConfig;
    }
    try {
        if (threads < 0) throw ConfigError("--threads must be >= 0");
        set_thread_count(static_cast<unsigned>(threads));
        run.config = read_json_file(run.config_path);
        if (!run.config.is_object()) throw ConfigError("config must be a JSON object");
        if (!run.seed_given) {
            const Json opts = json_get<Json>(run.config, "opts", Json::object());
            run.seed = json_get<std::uint64_t>(opts, "seed", json_get<std::uint64_t>(run.config, "seed", 0));
        }
        if (run.command == "grid") cmd_grid(run);
        else if (run.command == "kernel-check") cmd_kernel_check(run);
        else if (run.command == "bubble-sweep") cmd_bubble_sweep(run);
        else if (run.command == "best-constant") cmd_best_constant(run);
        else if (run.command == "solve") cmd_solve(run);
        else if (run.command == "condition") cmd_condition(run);
        else if (run.command == "equivalence") cmd_equivalence(run);
    } catch (const ConfigError& e) {
        code = kExitConfig;
        error = e.what();
    } catch (const DomainError& e) {
        code = kExitConfig;
        error = e.what();
    } catch (const ShapeError& e) {
        code = kExitConfig;
        error = e.what();
    } catch (const nlohmann::json::exception& e) {
        code = kExitConfig;
        error = std::string("bad config: ") + e.what();
    } catch (const NumericalError& e) {
        code = kExitNumerical;
        error = e.what();
    }
    if (code != kExitOk) std::cerr << "error: " << error << '\n';
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    try {
        write_manifest(run, code, error, wall);
    } catch (const std::exception& e) {
        std::cerr << "error: cannot write manifest: " << e.what() << '\n';
        if (code == kExitOk) code = kExitConfig;
    }
    return code;
}
