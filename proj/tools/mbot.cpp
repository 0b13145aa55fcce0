// Command-line front end: generate discretized systems, run the solvers,
// drive the cascadic multigrid chain, export oracle references, plot data,
// and scaling benchmarks.
//
// Exit codes: 0 ok, 2 usage, 3 numerical failure, 4 infeasible subproblem.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "mbot/experiments.hpp"

namespace fs = std::filesystem;
using namespace mbot;

namespace {

struct CommonArgs {
    std::string config_path;
    int system = 0;
    long k = 0;
    std::string style = "equimass";
    double beta = 1.0;
    double trunc = 1e-3;
    std::string normalization = "unit";
    std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool need_k) {
    cmd->add_option("--config", args.config_path, "key-value config file (flags override)");
    cmd->add_option("--system", args.system, "system number 1-8");
    auto* k_opt = cmd->add_option("--K", args.k, "number of mesh cells (pre-truncation)");
    if (need_k) k_opt->check(CLI::PositiveNumber);
    cmd->add_option("--style", args.style, "equimass|equisize");
    cmd->add_option("--beta", args.beta, "penalty weight");
    cmd->add_option("--trunc", args.trunc, "relative mass truncation threshold");
    cmd->add_option("--normalize", args.normalization, "unit|electron-count marginal mass");
    cmd->add_option("--out", args.out, "output directory");
}

// Config-file values fill anything the flags left at its default.
void merge_config(const CommonArgs& args, KeyValueConfig& cfg) {
    if (!args.config_path.empty()) {
        const KeyValueConfig file = KeyValueConfig::load(args.config_path);
        for (const auto& [key, value] : file.entries()) {
            if (!cfg.has(key)) cfg.set(key, value);
        }
    }
}

MeshStyle parse_style(const std::string& s) {
    if (s == "equimass") return MeshStyle::Equimass;
    if (s == "equisize") return MeshStyle::Equisize;
    throw CLI::ValidationError("--style", "must be equimass or equisize");
}

DiscretizeOptions disc_options(const KeyValueConfig& cfg) {
    DiscretizeOptions disc;
    disc.beta = cfg.get_double("beta", 1.0);
    disc.truncation_rel = cfg.get_double("trunc", 1e-3);
    disc.unit_mass = cfg.get("normalize", "unit") == "unit";
    disc.dense_cost_limit = static_cast<std::size_t>(cfg.get_long("dense_cost_limit", 8192));
    return disc;
}

MethodConfig method_from_config(const KeyValueConfig& cfg, const std::string& prefix = "") {
    MethodConfig m;
    const auto kind = parse_method(cfg.get(prefix + "method", "klalm"));
    if (!kind.has_value()) {
        throw CLI::ValidationError("--method", "unknown method '" + cfg.get(prefix + "method") +
                                                   "'");
    }
    m.kind = *kind;
    m.gamma = cfg.get_double(prefix + "gamma", 0.99);
    m.n_s = cfg.get_long(prefix + "ns", 0);
    m.t_hat = cfg.get_long(prefix + "t_hat", 0);
    m.tol = cfg.get_double(prefix + "tol", 1e-3);
    m.t_max = cfg.get_long(prefix + "t_max", 100000);
    m.param.sigma = cfg.get_double(prefix + "sigma", 1.0);
    if (cfg.has(prefix + "fixed_param")) {
        m.param.kind = ParamRule::Kind::Fixed;
        m.param.value = cfg.get_double(prefix + "fixed_param", 0.05);
    }
    m.step.exponent = cfg.get_double(prefix + "step_exponent", 0.75);
    m.inner.s_max = static_cast<int>(cfg.get_long(prefix + "s_max", 20));
    m.inner.feas_tol = cfg.get_double(prefix + "feas_tol", 1e-6);
    m.accelerated_sampling = cfg.get_long(prefix + "accelerated_sampling", 0) != 0;
    return m;
}

std::string resolve_out(const std::string& out, const std::string& fallback_leaf) {
    if (!out.empty()) return out;
    return default_out_root() + "/" + fallback_leaf;
}

int run_gen(const CommonArgs& args, KeyValueConfig cfg) {
    merge_config(args, cfg);
    if (!cfg.has("K")) throw CLI::RequiredError("--K");
    const Density density = system_density(static_cast<int>(cfg.get_long("system", 1)));
    const auto style = parse_style(cfg.get("style", "equimass"));
    const Mesh mesh = build_mesh(density, static_cast<std::size_t>(cfg.get_long("K", 0)), style);
    const DiscreteSystem sys = discretize(density, mesh, disc_options(cfg));
    const std::string out = resolve_out(cfg.get("out"), "gen");
    write_system_dir(out, sys, mesh.size(), style);
    cfg.set("K_trunc", std::to_string(sys.size()));
    cfg.save(out + "/config.txt");
    std::printf("system %ld: K=%zu K_trunc=%zu -> %s\n", cfg.get_long("system", 1), mesh.size(),
                sys.size(), out.c_str());
    return 0;
}

int run_solve_cmd(const CommonArgs& args, KeyValueConfig cfg) {
    merge_config(args, cfg);
    if (!cfg.has("K")) throw CLI::RequiredError("--K");
    ExperimentSpec spec;
    spec.system_id = static_cast<int>(cfg.get_long("system", 1));
    spec.k = static_cast<std::size_t>(cfg.get_long("K", 90));
    spec.style = parse_style(cfg.get("style", "equimass"));
    spec.disc = disc_options(cfg);
    spec.method = method_from_config(cfg);
    spec.trials = static_cast<int>(cfg.get_long("trials", 1));
    spec.base_seed = static_cast<std::uint64_t>(cfg.get_long("seed", 1));
    spec.out_dir = resolve_out(cfg.get("out"), "solve");
    spec.dump_plans = cfg.get_long("dump_plans", 0) != 0;
    spec.stable_output = cfg.get_long("stable_output", 0) != 0;
    spec.workers = static_cast<int>(cfg.get_long("workers", 2));
    const SolveOutput out = run_solve(spec);
    cfg.save(spec.out_dir + "/config.txt");
    std::printf("%s on system %d, K_trunc=%zu, %d trial(s)\n",
                method_name(spec.method.kind), spec.system_id, out.system.size(), spec.trials);
    if (std::isfinite(out.mean_err_obj)) {
        std::printf("mean err_obj=%.4f err_sce=%.4f T=%.2fs (obj*=%.6f)\n", out.mean_err_obj,
                    out.mean_err_sce, out.mean_seconds, out.obj_star);
    } else {
        double mean_obj = 0.0;
        for (const TrialOutcome& t : out.trials) mean_obj += t.objective;
        std::printf("mean obj=%.6f T=%.2fs (no 1-D reference)\n",
                    mean_obj / static_cast<double>(out.trials.size()), out.mean_seconds);
    }
    return 0;
}

int run_cmg_cmd(const CommonArgs& args, KeyValueConfig cfg) {
    merge_config(args, cfg);
    if (!cfg.has("K")) throw CLI::RequiredError("--K");
    CmgSpec spec;
    spec.system_id = static_cast<int>(cfg.get_long("system", 1));
    spec.k0 = static_cast<std::size_t>(cfg.get_long("K", 90));
    spec.levels = static_cast<std::size_t>(cfg.get_long("levels", 1));
    spec.style = parse_style(cfg.get("style", "equimass"));
    spec.disc = disc_options(cfg);
    spec.level_cfg.levels = spec.levels;
    spec.level_cfg.tol0 = cfg.get_double("tol", 1e-3);
    if (cfg.has("tol_list")) {
        std::istringstream ls(cfg.get("tol_list"));
        double t = 0.0;
        while (ls >> t) spec.level_cfg.explicit_tols.push_back(t);
    }
    spec.accurate = method_from_config(cfg, "accurate_");
    if (!cfg.has("accurate_method")) spec.accurate.kind = MethodKind::Klalm;
    spec.cheap = method_from_config(cfg, "cheap_");
    if (!cfg.has("cheap_method")) spec.cheap.kind = MethodKind::SKlalm;
    spec.level_cfg.accurate_solver = spec.accurate.kind;
    spec.level_cfg.cheap_solver = spec.cheap.kind;
    spec.trials = static_cast<int>(cfg.get_long("trials", 1));
    spec.base_seed = static_cast<std::uint64_t>(cfg.get_long("seed", 1));
    spec.out_dir = resolve_out(cfg.get("out"), "cmg");
    spec.dump_plans = cfg.get_long("dump_plans", 0) != 0;
    spec.stable_output = cfg.get_long("stable_output", 0) != 0;

    const auto trials = run_cmg_trials(spec);
    cfg.save(spec.out_dir + "/config.txt");
    const CmgResult& first = trials.front().result;
    std::printf("cmg on system %d, %zu level(s):\n", spec.system_id, spec.levels);
    write_cmg_summary(std::cout, first);
    if (std::isfinite(trials.front().err_obj)) {
        double sum_obj = 0.0, sum_sce = 0.0, sum_t = 0.0;
        for (const auto& t : trials) {
            sum_obj += t.err_obj;
            sum_sce += t.err_sce;
            sum_t += t.seconds;
        }
        const double n = static_cast<double>(trials.size());
        std::printf("mean err_obj=%.4f err_sce=%.4f T=%.2fs\n", sum_obj / n, sum_sce / n,
                    sum_t / n);
    }
    return 0;
}

int run_oracle_cmd(const CommonArgs& args, KeyValueConfig cfg) {
    merge_config(args, cfg);
    const int system = static_cast<int>(cfg.get_long("system", 1));
    const Density density = system_density(system);
    if (density.dim != 1) throw CLI::ValidationError("--system", "oracle needs a 1-D system");
    const int ne = static_cast<int>(cfg.get_long("ne", 0));
    const Oracle1d oracle(density, ne);
    const std::string out = resolve_out(cfg.get("out"), "oracle");
    fs::create_directories(out);
    const std::size_t k = static_cast<std::size_t>(cfg.get_long("K", 256));
    const Mesh mesh = build_mesh(density, k, MeshStyle::Equimass);
    const DiscreteSystem sys = discretize(density, mesh);
    std::vector<double> xs(sys.size());
    for (std::size_t i = 0; i < sys.size(); ++i) xs[i] = sys.bary[i][0];
    const std::vector<double> v = oracle.potential_at(xs);
    {
        std::ofstream f(out + "/potential.txt");
        char buf[96];
        for (std::size_t i = 0; i < xs.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g %.17g\n", xs[i], v[i]);
            f << buf;
        }
    }
    {
        std::ofstream f(out + "/comotion.txt");
        char buf[64];
        for (std::size_t i = 0; i < xs.size(); ++i) {
            f << xs[i];
            for (int e = 2; e <= oracle.n_electrons(); ++e) {
                std::snprintf(buf, sizeof(buf), " %.17g", oracle.comotion(e, xs[i]));
                f << buf;
            }
            f << '\n';
        }
    }
    {
        std::ofstream f(out + "/objective.txt");
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%.17g\n", oracle.objective());
        f << buf;
    }
    std::printf("oracle for system %d: obj*=%.8f -> %s\n", system, oracle.objective(),
                out.c_str());
    return 0;
}

int run_plotdata_cmd(const std::string& run_dir, const std::string& omega_str, int block,
                     const std::string& out_arg) {
    const DiscreteSystem sys = read_system_dir(run_dir + "/system");
    std::array<double, 3> olo{0, 0, 0}, ohi{0, 0, 0};
    bool has_omega = false;
    if (!omega_str.empty()) {
        std::istringstream os(omega_str);
        std::string tok;
        std::vector<double> vals;
        while (std::getline(os, tok, ',')) vals.push_back(std::stod(tok));
        if (vals.size() != static_cast<std::size_t>(2 * sys.dim)) {
            throw CLI::ValidationError("--omega", "expected " + std::to_string(2 * sys.dim) +
                                                      " comma-separated bounds");
        }
        for (int d = 0; d < sys.dim; ++d) {
            olo[d] = vals[static_cast<std::size_t>(2 * d)];
            ohi[d] = vals[static_cast<std::size_t>(2 * d + 1)];
        }
        has_omega = true;
    }
    const std::string out = out_arg.empty() ? run_dir : out_arg;
    fs::create_directories(out);
    const std::size_t blocks = sys.block_count();
    const Marginal marg = sys.marginal();
    bool wrote_any = false;
    for (std::size_t i = 0; i < blocks; ++i) {
        if (block >= 0 && static_cast<std::size_t>(block) != i) continue;
        const std::string coo = run_dir + "/trial_0_block_" + std::to_string(i) + ".coo";
        const std::string coo_alt = run_dir + "/block_" + std::to_string(i) + ".coo";
        std::ifstream in(fs::exists(coo) ? coo : coo_alt);
        if (!in) {
            throw DomainError("plotdata: no plan dump for block " + std::to_string(i) +
                              " (run solve/cmg with dump_plans 1)");
        }
        const Plan plan = read_plan_coo(in, marg, marg);
        std::vector<MappedPoint> pts = ot_map(plan, sys);
        if (has_omega) {
            std::erase_if(pts, [&](const MappedPoint& p) {
                for (int d = 0; d < sys.dim; ++d) {
                    if (p.src[d] < olo[d] || p.src[d] > ohi[d]) return true;
                }
                return false;
            });
        }
        if (pts.empty()) {
            std::fprintf(stderr, "warning: omega intersects no support for block %zu\n", i);
        }
        std::ofstream f(out + "/map_block_" + std::to_string(i) + ".txt");
        write_map_points(f, pts, sys.dim);
        wrote_any = true;
    }
    if (!wrote_any) throw DomainError("plotdata: no blocks selected");
    std::printf("plotdata -> %s\n", out.c_str());
    return 0;
}

int run_bench_cmd(const CommonArgs& args, KeyValueConfig cfg, const std::string& k_list) {
    merge_config(args, cfg);
    std::vector<std::size_t> ks;
    {
        std::istringstream ls(k_list.empty() ? cfg.get("k_list", "90 180 360") : k_list);
        std::string tok;
        while (std::getline(ls, tok, ',')) {
            if (!tok.empty()) ks.push_back(static_cast<std::size_t>(std::stoul(tok)));
        }
    }
    const Density density = system_density(static_cast<int>(cfg.get_long("system", 1)));
    const BenchResult res =
        run_bench(density, ks, static_cast<int>(cfg.get_long("trials", 3)),
                  static_cast<std::uint64_t>(cfg.get_long("seed", 1)),
                  cfg.get_double("fixed_param", 0.05), cfg.get_double("tol", 1e-3));
    const std::string out = resolve_out(cfg.get("out"), "bench");
    fs::create_directories(out);
    {
        std::ofstream f(out + "/bench.csv");
        f << "K,seconds_klalm,seconds_sklalm\n";
        char buf[96];
        for (const BenchPoint& p : res.points) {
            std::snprintf(buf, sizeof(buf), "%zu,%.4f,%.4f\n", p.k, p.seconds_klalm,
                          p.seconds_sklalm);
            f << buf;
        }
        std::snprintf(buf, sizeof(buf), "exponent,%.3f,%.3f\n", res.exponent_klalm,
                      res.exponent_sklalm);
        f << buf;
    }
    std::printf("fitted exponents: klalm K^%.2f, s-klalm K^%.2f (informational)\n",
                res.exponent_klalm, res.exponent_sklalm);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sampling-based block-coordinate solvers over transport polytopes"};
    app.require_subcommand(1);

    CommonArgs gen_args, solve_args, cmg_args, oracle_args, bench_args;
    KeyValueConfig gen_cfg, solve_cfg, cmg_cfg, oracle_cfg, bench_cfg;

    // Explicitly passed flags reach the config layer after parsing; config
    // files fill the rest.
    auto harvest_common = [](CLI::App* cmd, const CommonArgs& args, KeyValueConfig& cfg) {
        auto put = [&](const std::string& flag, const std::string& key,
                       const std::string& value) {
            if (cmd->count(flag) > 0) cfg.set(key, value);
        };
        put("--system", "system", std::to_string(args.system));
        put("--K", "K", std::to_string(args.k));
        put("--style", "style", args.style);
        put("--beta", "beta", std::to_string(args.beta));
        put("--trunc", "trunc", std::to_string(args.trunc));
        put("--normalize", "normalize", args.normalization);
        put("--out", "out", args.out);
    };

    auto* gen = app.add_subcommand("gen", "discretize a system and write its files");
    add_common(gen, gen_args, true);

    auto* solve = app.add_subcommand("solve", "run a solver over random trials");
    add_common(solve, solve_args, true);
    std::string method_str;
    double gamma = -1, sigma = -1, tol = -1, fixed_param = -1;
    long trials = -1, seed = -1, t_max = -1, t_hat = -1, ns = -1, s_max = -1;
    bool dump_plans = false, stable = false;
    solve->add_option("--method", method_str, "eralm|s-eralm|klalm|s-klalm");
    solve->add_option("--gamma", gamma, "interpolation factor");
    solve->add_option("--sigma", sigma, "adaptive parameter scale");
    solve->add_option("--tol", tol, "outer stopping tolerance on delta");
    solve->add_option("--fixed-param", fixed_param, "fixed lambda/mu (overrides adaptive)");
    solve->add_option("--trials", trials, "number of random trials");
    solve->add_option("--seed", seed, "base seed");
    solve->add_option("--t-max", t_max, "outer iteration cap");
    solve->add_option("--t-hat", t_hat, "critical sampling iteration (s-klalm)");
    solve->add_option("--ns", ns, "sampling cap per block (default K^1.5)");
    solve->add_option("--s-max", s_max, "Sinkhorn subiteration cap");
    solve->add_flag("--dump-plans", dump_plans, "write final plans in coordinate format");
    solve->add_flag("--stable-output", stable, "zero wall-clock columns (bitwise repro)");
    auto harvest_solve = [&]() {
        auto put = [&](const std::string& flag, const std::string& key, const std::string& v) {
            if (solve->count(flag) > 0) solve_cfg.set(key, v);
        };
        put("--method", "method", method_str);
        put("--gamma", "gamma", std::to_string(gamma));
        put("--sigma", "sigma", std::to_string(sigma));
        put("--tol", "tol", std::to_string(tol));
        put("--fixed-param", "fixed_param", std::to_string(fixed_param));
        put("--trials", "trials", std::to_string(trials));
        put("--seed", "seed", std::to_string(seed));
        put("--t-max", "t_max", std::to_string(t_max));
        put("--t-hat", "t_hat", std::to_string(t_hat));
        put("--ns", "ns", std::to_string(ns));
        put("--s-max", "s_max", std::to_string(s_max));
        if (dump_plans) solve_cfg.set("dump_plans", "1");
        if (stable) solve_cfg.set("stable_output", "1");
    };

    auto* cmg = app.add_subcommand("cmg", "cascadic multigrid chain");
    add_common(cmg, cmg_args, true);
    long levels = -1, cmg_trials = -1, cmg_seed = -1;
    double cmg_tol = -1;
    std::string tol_list, accurate_method, cheap_method;
    bool cmg_dump = false, cmg_stable = false;
    cmg->add_option("--levels", levels, "number of levels");
    cmg->add_option("--tol", cmg_tol, "level-0 tolerance (growth rule above)");
    cmg->add_option("--tol-list", tol_list, "explicit per-level tolerances, space separated");
    cmg->add_option("--accurate", accurate_method, "level-0 solver (default klalm)");
    cmg->add_option("--cheap", cheap_method, "refined-level solver (default s-klalm)");
    cmg->add_option("--trials", cmg_trials, "number of random trials");
    cmg->add_option("--seed", cmg_seed, "base seed");
    cmg->add_flag("--dump-plans", cmg_dump, "write final plans");
    cmg->add_flag("--stable-output", cmg_stable, "zero wall-clock columns");
    auto harvest_cmg = [&]() {
        auto put = [&](const std::string& flag, const std::string& key, const std::string& v) {
            if (cmg->count(flag) > 0) cmg_cfg.set(key, v);
        };
        put("--levels", "levels", std::to_string(levels));
        put("--tol", "tol", std::to_string(cmg_tol));
        put("--tol-list", "tol_list", tol_list);
        put("--accurate", "accurate_method", accurate_method);
        put("--cheap", "cheap_method", cheap_method);
        put("--trials", "trials", std::to_string(cmg_trials));
        put("--seed", "seed", std::to_string(cmg_seed));
        if (cmg_dump) cmg_cfg.set("dump_plans", "1");
        if (cmg_stable) cmg_cfg.set("stable_output", "1");
    };

    auto* oracle_cmd = app.add_subcommand("oracle", "1-D reference solution export");
    add_common(oracle_cmd, oracle_args, false);
    long oracle_ne = -1;
    oracle_cmd->add_option("--ne", oracle_ne, "electron-count override");

    auto* plotdata = app.add_subcommand("plotdata", "transport-map point files from a run");
    std::string run_dir, omega, plot_out;
    int plot_block = -1;
    plotdata->add_option("--run", run_dir, "run directory (solve/cmg output)")->required();
    plotdata->add_option("--omega", omega, "source box lo1,hi1[,lo2,hi2,...]");
    plotdata->add_option("--block", plot_block, "restrict to one block");
    plotdata->add_option("--out", plot_out, "output directory (default: run dir)");

    auto* bench = app.add_subcommand("bench", "klalm vs s-klalm scaling probe");
    add_common(bench, bench_args, false);
    std::string bench_ks;
    long bench_trials = -1, bench_seed = -1;
    double bench_mu = -1, bench_tol = -1;
    bench->add_option("--K-list", bench_ks, "comma-separated grid sizes");
    bench->add_option("--trials", bench_trials, "trials per size");
    bench->add_option("--seed", bench_seed, "base seed");
    bench->add_option("--mu", bench_mu, "fixed proximal parameter");
    bench->add_option("--tol", bench_tol, "outer tolerance");
    auto harvest_bench = [&]() {
        auto put = [&](const std::string& flag, const std::string& key, const std::string& v) {
            if (bench->count(flag) > 0) bench_cfg.set(key, v);
        };
        put("--trials", "trials", std::to_string(bench_trials));
        put("--seed", "seed", std::to_string(bench_seed));
        put("--mu", "fixed_param", std::to_string(bench_mu));
        put("--tol", "tol", std::to_string(bench_tol));
    };

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) {
            harvest_common(gen, gen_args, gen_cfg);
            return run_gen(gen_args, gen_cfg);
        }
        if (solve->parsed()) {
            harvest_common(solve, solve_args, solve_cfg);
            harvest_solve();
            return run_solve_cmd(solve_args, solve_cfg);
        }
        if (cmg->parsed()) {
            harvest_common(cmg, cmg_args, cmg_cfg);
            harvest_cmg();
            return run_cmg_cmd(cmg_args, cmg_cfg);
        }
        if (oracle_cmd->parsed()) {
            harvest_common(oracle_cmd, oracle_args, oracle_cfg);
            if (oracle_cmd->count("--ne") > 0) oracle_cfg.set("ne", std::to_string(oracle_ne));
            return run_oracle_cmd(oracle_args, oracle_cfg);
        }
        if (plotdata->parsed()) return run_plotdata_cmd(run_dir, omega, plot_block, plot_out);
        if (bench->parsed()) {
            harvest_common(bench, bench_args, bench_cfg);
            harvest_bench();
            return run_bench_cmd(bench_args, bench_cfg, bench_ks);
        }
    } catch (const CLI::Error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const InfeasibleSupportError& e) {
        std::cerr << "infeasible subproblem: " << e.what() << "\n";
        return 4;
    } catch (const Error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
