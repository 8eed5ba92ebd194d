#include "mflq/csv_io.hpp"
#include "mflq/finite_game.hpp"
#include "mflq/limit_system.hpp"
#include "mflq/simulation.hpp"
#include "mflq/tracking.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mflq;

namespace {

int log_level() {
    static const int level = [] {
        const char* v = std::getenv("MFG_LOG");
        if (!v) return 1;
        const std::string s(v);
        if (s == "quiet") return 0;
        if (s == "debug") return 2;
        return 1;
    }();
    return level;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << msg << "\n";
}

void log_debug(const std::string& msg) {
    if (log_level() >= 2) std::cerr << msg << "\n";
}

struct CommonOpts {
    std::string config;
    std::string out = "out";
    int grid_points = 0;  // 0 -> default T/1200 spacing
    double rtol = 1e-8;
    double atol = 1e-10;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("config", o.config, "parameter JSON file")->required();
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--grid-points", o.grid_points, "output grid points (default horizon/1200 spacing)");
    cmd->add_option("--rtol", o.rtol, "integrator relative tolerance");
    cmd->add_option("--atol", o.atol, "integrator absolute tolerance");
}

TimeGrid make_grid(double T, int points) {
    if (points <= 0) points = 1201;
    if (points < 2) points = 2;
    return TimeGrid::uniform(T, points);
}

IntegratorOptions make_opts(const CommonOpts& o) {
    IntegratorOptions opts;
    opts.rtol = o.rtol;
    opts.atol = o.atol;
    return opts;
}

json grid_json(const TimeGrid& g) {
    return {{"t_start", g.t_start}, {"t_end", g.t_end}, {"num_points", g.num_points},
            {"dt", g.dt()}};
}

json verdict_json(const SolvabilityVerdict& v) {
    json j = {{"solvable", v.solvable}, {"sup_norm", v.sup_norm},
              {"rtol", v.rtol}, {"atol", v.atol}};
    if (v.escape_interval)
        j["escape_interval"] = {v.escape_interval->first, v.escape_interval->second};
    return j;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const CommonOpts& o, const TimeGrid& grid,
                    const std::vector<std::string>& outputs, const json& verdicts) {
    json m;
    m["schema_version"] = 1;
    m["command"] = command;
    m["config_path"] = o.config;
    m["tolerances"] = {{"rtol", o.rtol}, {"atol", o.atol}};
    m["grid"] = grid_json(grid);
    m["outputs"] = outputs;
    m["verdicts"] = verdicts;
    std::ofstream f(out_dir + "/manifest.json");
    f << m.dump(2) << "\n";
}

std::string write_json_file(const std::string& path, const json& j) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << j.dump(2) << "\n";
    return path;
}

int run_check(const CommonOpts& o) {
    const GameParams p = load_params(o.config);
    const TimeGrid grid = make_grid(p.T, o.grid_points);
    const auto res = solve_limit_riccati(p, grid, make_opts(o));
    fs::create_directories(o.out);
    const json v = verdict_json(res.verdict);
    std::vector<std::string> outputs = {write_json_file(o.out + "/verdict.json", v)};
    write_manifest(o.out, "check", o, grid, outputs, {{"solvability", v}});
    std::cout << v.dump(2) << "\n";
    if (res.verdict.solvable) {
        log_info("solvable on [0, " + std::to_string(p.T) + "]");
        return 0;
    }
    log_info("not solvable: escape bracket [" +
             std::to_string(res.verdict.escape_interval->first) + ", " +
             std::to_string(res.verdict.escape_interval->second) + "]");
    return 1;
}

int run_solve(const CommonOpts& o, int N) {
    const GameParams p = load_params(o.config);
    const TimeGrid grid = make_grid(p.T, o.grid_points);
    const IntegratorOptions opts = make_opts(o);
    fs::create_directories(o.out);

    const auto res = solve_limit_riccati(p, grid, opts);
    json verdicts = {{"solvability", verdict_json(res.verdict)}};
    std::vector<std::string> outputs;
    if (!res.verdict.solvable) {
        write_manifest(o.out, "solve", o, grid, outputs, verdicts);
        std::cout << verdict_json(res.verdict).dump(2) << "\n";
        return 1;
    }
    outputs = export_limit_csv(*res.riccati, o.out);
    log_debug("wrote " + std::to_string(outputs.size()) + " limit trajectory files");

    int exit_code = 0;
    if (N >= 2) {
        const auto sres = solve_structured(p, N, grid, opts);
        verdicts["finite_n"] = verdict_json(sres.verdict);
        if (sres.verdict.solvable) {
            const auto offs = solve_structured_offsets(p, *sres.riccati, opts);
            auto more = export_structured_csv(*sres.riccati, &offs, o.out);
            outputs.insert(outputs.end(), more.begin(), more.end());
        } else {
            log_info("finite-N system escaped; limit outputs only");
            exit_code = 1;
        }
    }
    write_manifest(o.out, "solve", o, grid, outputs, verdicts);
    return exit_code;
}

int run_compare(const CommonOpts& o, const std::vector<int>& Ns) {
    const GameParams p = load_params(o.config);
    const TimeGrid grid = make_grid(p.T, o.grid_points);
    const IntegratorOptions opts = make_opts(o);
    fs::create_directories(o.out);

    const auto res = solve_limit_riccati(p, grid, opts);
    if (!res.verdict.solvable) {
        std::cerr << "limit system not solvable\n";
        return 1;
    }
    const LimitRiccati& L = *res.riccati;
    const LimitOffsets a = solve_limit_offsets(p, L, opts);

    auto sup_mat = [](const MatrixTrajectory& x, const MatrixTrajectory& y) {
        double m = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            m = std::max(m, (x[i] - y[i]).cwiseAbs().maxCoeff());
        return m;
    };
    auto sup_vec = [](const VectorTrajectory& x, const VectorTrajectory& y, double scale) {
        double m = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            m = std::max(m, (scale * x[i] - y[i]).cwiseAbs().maxCoeff());
        return m;
    };

    const std::vector<std::string> block_names = {
        "Lambda1_0", "Lambda2_0", "Lambda3_0", "Lambda0", "Lambda1",
        "Lambda2",   "Lambda3",   "Lambda_a",  "Lambda_b",
        "alpha0_0",  "alpha1_0",  "alpha0",    "alpha1",  "alpha2"};

    std::vector<std::vector<std::string>> rows;
    std::map<std::string, double> prev_err;
    for (int N : Ns) {
        const auto sres = solve_structured(p, N, grid, opts);
        if (!sres.verdict.solvable) {
            for (const auto& name : block_names)
                rows.push_back({std::to_string(N), name, "", "", "escaped"});
            prev_err.clear();
            continue;
        }
        const RescaledView v = rescale(*sres.riccati);
        const auto th = solve_structured_offsets(p, *sres.riccati, opts);
        std::map<std::string, double> err;
        err["Lambda1_0"] = sup_mat(v.L1_0N, L.L1_0);
        err["Lambda2_0"] = sup_mat(v.L2_0N, L.L2_0);
        err["Lambda3_0"] = sup_mat(v.L3_0N, L.L3_0);
        err["Lambda0"] = sup_mat(v.L0_N, L.L0);
        err["Lambda1"] = sup_mat(v.L1_N, L.L1);
        err["Lambda2"] = sup_mat(v.L2_N, L.L2);
        err["Lambda3"] = sup_mat(v.L3_N, L.L3);
        err["Lambda_a"] = sup_mat(v.La_N, L.La);
        err["Lambda_b"] = sup_mat(v.Lb_N, L.Lb);
        err["alpha0_0"] = sup_vec(th.th0_0, a.a0_0, 1.0);
        err["alpha1_0"] = sup_vec(th.th1_0, a.a1_0, double(N));
        err["alpha0"] = sup_vec(th.th0, a.a0, 1.0);
        err["alpha1"] = sup_vec(th.th1, a.a1, 1.0);
        err["alpha2"] = sup_vec(th.th2, a.a2, double(N));
        for (const auto& name : block_names) {
            std::string ratio;
            if (auto it = prev_err.find(name); it != prev_err.end() && err[name] > 0.0)
                ratio = csv_number(it->second / err[name]);
            rows.push_back({std::to_string(N), name, csv_number(err[name]), ratio, "ok"});
        }
        prev_err = err;
    }
    const std::string table = o.out + "/compare.csv";
    write_table_csv(table, {"N", "block", "sup_error", "ratio", "status"}, rows);
    write_manifest(o.out, "compare", o, grid, {table},
                   {{"solvability", verdict_json(res.verdict)}});
    std::cout << "wrote " << table << "\n";
    return 0;
}

int run_consistency(const CommonOpts& o) {
    const GameParams p = load_params(o.config);
    const TimeGrid grid = make_grid(p.T, o.grid_points);
    const IntegratorOptions opts = make_opts(o);
    fs::create_directories(o.out);

    const auto res = solve_limit_riccati(p, grid, opts);
    if (!res.verdict.solvable) {
        std::cerr << "limit system not solvable\n";
        write_manifest(o.out, "consistency", o, grid, {},
                       {{"solvability", verdict_json(res.verdict)}});
        return 1;
    }
    const LimitOffsets a = solve_limit_offsets(p, *res.riccati, opts);
    const auto bt = solve_tracking(p, grid, opts, /*blockwise=*/true);
    const auto report = verify_consistency(*res.riccati, a, bt);
    const std::string path = o.out + "/consistency.json";
    {
        std::ofstream f(path);
        f << report.to_json() << "\n";
    }
    write_manifest(o.out, "consistency", o, grid, {path},
                   {{"solvability", verdict_json(res.verdict)},
                    {"consistency", json::parse(report.to_json())}});
    std::cout << report.to_json() << "\n";
    std::cout << (report.pass ? "PASS" : "FAIL") << " (max residual "
              << csv_number(report.max_residual) << ")\n";
    return report.pass ? 0 : 1;
}

int run_simulate(const CommonOpts& o, int N, int paths, double dt, std::uint64_t seed,
                 const std::string& mode, int dump_paths) {
    const GameParams p = load_params(o.config);
    const InitialLaw law = load_initial_law(o.config, p.n);
    fs::create_directories(o.out);

    SimConfig cfg;
    cfg.N = N;
    cfg.num_paths = paths;
    cfg.dt = dt;
    cfg.seed = seed;
    cfg.law = law;
    cfg.dump_paths = dump_paths;
    if (dump_paths > 0) cfg.path_dump = o.out + "/paths.csv";

    // Gains solved directly on the simulation grid (never coarser than dt).
    const long long steps = std::llround(p.T / dt);
    TimeGrid grid = make_grid(p.T, int(steps) + 1);
    const IntegratorOptions opts = make_opts(o);

    json report;
    SimResult r;
    if (mode == "nash") {
        cfg.mode = SimMode::NashExact;
        const auto dense = solve_dense_oracle(p, N, grid, opts);
        const auto gains = nash_gains(dense, p);
        r = simulate(p, gains, cfg);
        report["prediction"] = {{"V0", predicted_value(dense, p, law, 0)},
                                {"V1", predicted_value(dense, p, law, 1)}};
    } else {
        cfg.mode = SimMode::Decentralized;
        const auto res = solve_limit_riccati(p, grid, opts);
        if (!res.verdict.solvable) {
            std::cerr << "limit system not solvable\n";
            return 1;
        }
        const auto a = solve_limit_offsets(p, *res.riccati, opts);
        const auto c = solve_limit_costs(p, *res.riccati, a, opts);
        const auto gains = limit_strategy_gains(p, *res.riccati, a);
        r = simulate(p, gains, cfg);
        const auto ac = asymptotic_costs(p, *res.riccati, a, c, law);
        report["prediction"] = {{"J0_inf", ac.J0_inf}, {"J1_inf", ac.J1_inf}};
    }

    report["J0"] = {{"mean", r.J0.mean}, {"stderr", r.J0.std_error}};
    report["J1"] = {{"mean", r.J1.mean}, {"stderr", r.J1.std_error}};
    report["deviation"] = {{"mean_sq_sup", r.deviation.mean_sq_sup}};
    report["config"] = {{"N", N}, {"paths", paths}, {"dt", dt},
                        {"seed", seed}, {"mode", mode}, {"num_steps", r.num_steps}};
    std::vector<std::string> outputs = {write_json_file(o.out + "/estimate.json", report)};
    if (!cfg.path_dump.empty()) outputs.push_back(cfg.path_dump);
    write_manifest(o.out, "simulate", o, grid, outputs, json::object());
    std::cout << report.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"major-minor LQ mean field game solver"};
    app.require_subcommand(1);

    CommonOpts check_o, solve_o, compare_o, cons_o, sim_o;
    int solve_N = 0;
    std::vector<int> Ns;
    int sim_N = 3, sim_paths = 10000, sim_dump = 0;
    double sim_dt = 1e-3;
    std::uint64_t sim_seed = 0;
    std::string sim_mode = "nash";

    auto* check = app.add_subcommand("check", "asymptotic solvability verdict");
    add_common(check, check_o);

    auto* solve = app.add_subcommand("solve", "limit (and finite-N) trajectories as CSV");
    add_common(solve, solve_o);
    solve->add_option("--N", solve_N, "also solve the N-player structured system")
        ->check(CLI::Range(2, 1 << 20));

    auto* compare = app.add_subcommand("compare", "rescaled finite-N vs limit convergence table");
    add_common(compare, compare_o);
    compare->add_option("--Ns", Ns, "population sizes")->required()->delimiter(',');

    auto* cons = app.add_subcommand("consistency", "tracking-vs-limit block identification check");
    add_common(cons, cons_o);

    auto* sim = app.add_subcommand("simulate", "Monte Carlo closed-loop cost estimation");
    add_common(sim, sim_o);
    sim->add_option("--N", sim_N, "population size");
    sim->add_option("--paths", sim_paths, "number of Monte Carlo paths");
    sim->add_option("--dt", sim_dt, "Euler-Maruyama step");
    sim->add_option("--seed", sim_seed, "RNG seed");
    sim->add_option("--mode", sim_mode, "nash | decentralized")
        ->check(CLI::IsMember({"nash", "decentralized"}));
    sim->add_option("--dump-paths", sim_dump, "dump the first K paths to CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (check->parsed()) return run_check(check_o);
        if (solve->parsed()) return run_solve(solve_o, solve_N);
        if (compare->parsed()) return run_compare(compare_o, Ns);
        if (cons->parsed()) return run_consistency(cons_o);
        if (sim->parsed())
            return run_simulate(sim_o, sim_N, sim_paths, sim_dt, sim_seed, sim_mode, sim_dump);
    } catch (const ValidationError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return std::string(e.what()).rfind("cannot open", 0) == 0 ? 2 : 1;
    }
    return 2;
}
