#include "mbot/experiments.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace mbot {

namespace fs = std::filesystem;

KeyValueConfig KeyValueConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("config: cannot open " + path);
    KeyValueConfig cfg;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto sp = line.find(' ');
        if (sp == std::string::npos) throw DomainError("config: malformed line '" + line + "'");
        cfg.kv_[line.substr(0, sp)] = line.substr(sp + 1);
    }
    if (cfg.get("schema_version") != "1") {
        throw DomainError("config: unsupported schema_version '" + cfg.get("schema_version") +
                          "'");
    }
    return cfg;
}

void KeyValueConfig::save(const std::string& path) const {
    std::ofstream out(path);
    out << "schema_version 1\n";
    for (const auto& [k, v] : kv_) {
        if (k != "schema_version") out << k << ' ' << v << '\n';
    }
}

std::string KeyValueConfig::get(const std::string& key, const std::string& fallback) const {
    const auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    const auto it = kv_.find(key);
    return it == kv_.end() ? fallback : std::stod(it->second);
}

long KeyValueConfig::get_long(const std::string& key, long fallback) const {
    const auto it = kv_.find(key);
    return it == kv_.end() ? fallback : std::stol(it->second);
}

Density ExperimentSpec::density() const {
    return custom_density.has_value() ? *custom_density : system_density(system_id);
}

Density CmgSpec::density() const {
    return custom_density.has_value() ? *custom_density : system_density(system_id);
}

std::string default_out_root() {
    const char* env = std::getenv("MBOT_OUT_ROOT");
    return env != nullptr && env[0] != '\0' ? env : "out";
}

void write_barycenters(std::ostream& os, const DiscreteSystem& sys) {
    char buf[128];
    for (const auto& b : sys.bary) {
        int len = 0;
        for (int d = 0; d < sys.dim; ++d) {
            len += std::snprintf(buf + len, sizeof(buf) - static_cast<std::size_t>(len),
                                 d == 0 ? "%.17g" : " %.17g", b[d]);
        }
        os << buf << '\n';
    }
}

void write_system_dir(const std::string& dir, const DiscreteSystem& sys, std::size_t k_pre,
                      MeshStyle style) {
    fs::create_directories(dir);
    {
        std::ofstream out(dir + "/manifest.txt");
        write_system_manifest(out, sys, k_pre, style);
    }
    {
        std::ofstream out(dir + "/masses.txt");
        sys.marginal().write(out);
    }
    {
        std::ofstream out(dir + "/barycenters.txt");
        write_barycenters(out, sys);
    }
}

DiscreteSystem read_system_dir(const std::string& dir) {
    KeyValueConfig manifest = KeyValueConfig::load(dir + "/manifest.txt");
    DiscreteSystem sys;
    sys.dim = static_cast<int>(manifest.get_long("dim", 1));
    sys.n_electrons = static_cast<int>(manifest.get_long("n_electrons", 2));
    sys.beta = manifest.get_double("beta", 1.0);
    sys.unit_mass = manifest.get("normalization", "unit") == "unit";
    {
        std::ifstream in(dir + "/masses.txt");
        if (!in) throw DomainError("read_system_dir: missing masses.txt");
        sys.rho = Marginal::read(in).values();
    }
    {
        std::ifstream in(dir + "/barycenters.txt");
        if (!in) throw DomainError("read_system_dir: missing barycenters.txt");
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::istringstream ls(line);
            std::array<double, 3> b{0, 0, 0};
            for (int d = 0; d < sys.dim; ++d) ls >> b[d];
            sys.bary.push_back(b);
        }
    }
    if (sys.bary.size() != sys.rho.size()) {
        throw DomainError("read_system_dir: masses/barycenters length mismatch");
    }
    sys.cell_index.resize(sys.rho.size());
    for (std::size_t i = 0; i < sys.cell_index.size(); ++i) sys.cell_index[i] = i;
    return sys;
}

void write_map_points(std::ostream& os, const std::vector<MappedPoint>& pts, int dim) {
    char buf[192];
    for (const MappedPoint& p : pts) {
        int len = std::snprintf(buf, sizeof(buf), "%zu", p.source);
        for (int d = 0; d < dim; ++d) {
            len += std::snprintf(buf + len, sizeof(buf) - static_cast<std::size_t>(len), " %.17g",
                                 p.src[d]);
        }
        for (int d = 0; d < dim; ++d) {
            len += std::snprintf(buf + len, sizeof(buf) - static_cast<std::size_t>(len), " %.17g",
                                 p.img[d]);
        }
        os << buf << '\n';
    }
}

namespace {

struct OracleRef {
    bool available = false;
    double obj_star = 0.0;
    std::vector<double> v_star;
};

OracleRef reference_for(const Density& density, const DiscreteSystem& sys) {
    OracleRef ref;
    if (density.dim != 1) return ref;
    const Oracle1d oracle(density);
    ref.available = true;
    ref.obj_star = oracle.objective();
    std::vector<double> xs(sys.size());
    for (std::size_t i = 0; i < sys.size(); ++i) xs[i] = sys.bary[i][0];
    ref.v_star = oracle.potential_at(xs);
    return ref;
}

void write_trial_files(const std::string& dir, int trial, const RunRecord& record,
                       const DiscreteSystem& sys, bool stable, bool dump_plans) {
    {
        std::ofstream out(dir + "/trial_" + std::to_string(trial) + ".csv");
        record.write_csv(out, stable);
    }
    {
        const std::vector<double> v = sce_potential(record.dual_v);
        std::ofstream out(dir + "/trial_" + std::to_string(trial) + "_sce.txt");
        char buf[40];
        for (double x : v) {
            std::snprintf(buf, sizeof(buf), "%.17g\n", x);
            out << buf;
        }
    }
    if (dump_plans) {
        for (std::size_t i = 0; i < record.plans.size(); ++i) {
            std::ofstream out(dir + "/trial_" + std::to_string(trial) + "_block_" +
                              std::to_string(i) + ".coo");
            write_plan_coo(out, record.plans[i]);
        }
    }
    (void)sys;
}

}  // namespace

SolveOutput run_solve(const ExperimentSpec& spec) {
    if (spec.trials < 1) throw DomainError("run_solve: need at least one trial");
    const Density density = spec.density();
    const Mesh mesh = build_mesh(density, spec.k, spec.style);
    SolveOutput out;
    out.system = discretize(density, mesh, spec.disc);
    const MmotOracle oracle(out.system);
    const auto marginals = oracle.marginals();

    fs::create_directories(spec.out_dir);
    write_system_dir(spec.out_dir + "/system", out.system, mesh.size(), spec.style);

    const OracleRef ref = reference_for(density, out.system);
    if (ref.available) out.obj_star = ref.obj_star;

    out.trials.resize(static_cast<std::size_t>(spec.trials));
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::string first_error;
    bool first_error_infeasible = false;
    std::mutex err_mutex;

    auto work = [&]() {
        for (;;) {
            const int trial = next.fetch_add(1);
            if (trial >= spec.trials || failed.load()) return;
            try {
                MethodConfig cfg = spec.method;
                cfg.seed = rng::key(spec.base_seed, static_cast<std::uint64_t>(trial));
                cfg.delta_weights = oracle.delta_weights();
                const auto t0 = std::chrono::steady_clock::now();
                const RunRecord record = run_method(oracle, marginals, cfg);
                const double secs =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                TrialOutcome& o = out.trials[static_cast<std::size_t>(trial)];
                o.trial = trial;
                o.seed = cfg.seed;
                o.objective = record.final_objective();
                o.seconds = secs;
                o.iterations = record.iterations();
                o.stop = record.stop;
                if (ref.available) {
                    const std::vector<double> v = sce_potential(record.dual_v);
                    const ErrorMetrics em =
                        error_metrics(o.objective, ref.obj_star, v, ref.v_star);
                    o.err_obj = em.err_obj;
                    o.err_sce = em.err_sce;
                }
                write_trial_files(spec.out_dir, trial, record, out.system, spec.stable_output,
                                  spec.dump_plans);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!failed.exchange(true)) {
                    first_error = "trial " + std::to_string(trial) + " (seed " +
                                  std::to_string(rng::key(spec.base_seed,
                                                          static_cast<std::uint64_t>(trial))) +
                                  "): " + e.what();
                    first_error_infeasible =
                        dynamic_cast<const InfeasibleSupportError*>(&e) != nullptr;
                }
            }
        }
    };
    const int workers = std::max(1, std::min(spec.workers, spec.trials));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& th : pool) th.join();
    if (failed.load()) {
        if (first_error_infeasible) throw InfeasibleSupportError("run_solve: " + first_error);
        throw NumericalError("run_solve: " + first_error);
    }

    double sum_obj_err = 0.0, sum_sce_err = 0.0, sum_secs = 0.0;
    for (const TrialOutcome& o : out.trials) sum_secs += o.seconds;
    out.mean_seconds = sum_secs / static_cast<double>(spec.trials);
    if (ref.available) {
        for (const TrialOutcome& o : out.trials) {
            sum_obj_err += o.err_obj;
            sum_sce_err += o.err_sce;
        }
        out.mean_err_obj = sum_obj_err / static_cast<double>(spec.trials);
        out.mean_err_sce = sum_sce_err / static_cast<double>(spec.trials);
    }

    {
        std::ofstream agg(spec.out_dir + "/aggregate.csv");
        agg << "trial,seed,objective,err_obj,err_sce,iterations,seconds,stop\n";
        char buf[256];
        for (const TrialOutcome& o : out.trials) {
            std::snprintf(buf, sizeof(buf), "%d,%llu,%.17g,%.17g,%.17g,%ld,%.3f,%s\n", o.trial,
                          static_cast<unsigned long long>(o.seed), o.objective, o.err_obj,
                          o.err_sce, o.iterations, spec.stable_output ? 0.0 : o.seconds,
                          o.stop == StopReason::Tol ? "tol" : "t_max");
            agg << buf;
        }
        std::snprintf(buf, sizeof(buf), "mean,,%.17g,%.17g,%.17g,,%.3f,\n",
                      out.obj_star, out.mean_err_obj, out.mean_err_sce,
                      spec.stable_output ? 0.0 : out.mean_seconds);
        agg << buf;
    }
    return out;
}

std::vector<CmgTrialOutcome> run_cmg_trials(const CmgSpec& spec) {
    if (spec.trials < 1) throw DomainError("run_cmg_trials: need at least one trial");
    const Density density = spec.density();
    fs::create_directories(spec.out_dir);

    std::vector<CmgTrialOutcome> out;
    out.reserve(static_cast<std::size_t>(spec.trials));
    OracleRef ref;
    bool ref_done = false;
    for (int trial = 0; trial < spec.trials; ++trial) {
        MethodConfig accurate = spec.accurate;
        MethodConfig cheap = spec.cheap;
        accurate.seed = rng::key(spec.base_seed, static_cast<std::uint64_t>(trial));
        cheap.seed = accurate.seed;
        const auto t0 = std::chrono::steady_clock::now();
        CmgTrialOutcome o;
        o.trial = trial;
        o.result = run_cmg(density, spec.k0, spec.style, spec.level_cfg, accurate, cheap,
                           spec.disc);
        o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const LevelOutput& last = o.result.levels.back();
        if (!ref_done) {
            ref = reference_for(density, o.result.systems.back());
            ref_done = true;
        }
        if (ref.available) {
            const std::vector<double> v = sce_potential(last.record.dual_v);
            const ErrorMetrics em = error_metrics(last.objective, ref.obj_star, v, ref.v_star);
            o.err_obj = em.err_obj;
            o.err_sce = em.err_sce;
        }
        const std::string dir = spec.out_dir + "/trial_" + std::to_string(trial);
        fs::create_directories(dir);
        for (const LevelOutput& lvl : o.result.levels) {
            std::ofstream csv(dir + "/level_" + std::to_string(lvl.level) + ".csv");
            lvl.record.write_csv(csv, spec.stable_output);
        }
        {
            std::ofstream summary(dir + "/summary.csv");
            write_cmg_summary(summary, o.result);
        }
        if (spec.dump_plans) {
            const RunRecord& rec = o.result.levels.back().record;
            for (std::size_t i = 0; i < rec.plans.size(); ++i) {
                std::ofstream coo(dir + "/block_" + std::to_string(i) + ".coo");
                write_plan_coo(coo, rec.plans[i]);
            }
        }
        write_system_dir(dir + "/system", o.result.systems.back(),
                         o.result.levels.back().k_pre, spec.style);
        out.push_back(std::move(o));
    }
    return out;
}

BenchResult run_bench(const Density& density, const std::vector<std::size_t>& ks, int trials,
                      std::uint64_t seed, double mu_fixed, double tol) {
    if (ks.size() < 2) throw DomainError("run_bench: need at least two grid sizes");
    BenchResult res;
    for (std::size_t k : ks) {
        const Mesh mesh = build_mesh(density, k, MeshStyle::Equimass);
        const DiscreteSystem sys = discretize(density, mesh);
        const MmotOracle oracle(sys);
        const auto marginals = oracle.marginals();
        BenchPoint point;
        point.k = k;
        for (int kind = 0; kind < 2; ++kind) {
            MethodConfig cfg;
            cfg.kind = kind == 0 ? MethodKind::Klalm : MethodKind::SKlalm;
            cfg.param = {ParamRule::Kind::Fixed, 1.0, mu_fixed};
            cfg.tol = tol;
            cfg.t_max = 100000;
            cfg.delta_weights = oracle.delta_weights();
            double secs = 0.0;
            for (int trial = 0; trial < trials; ++trial) {
                cfg.seed = rng::key(seed, static_cast<std::uint64_t>(trial), k);
                const auto t0 = std::chrono::steady_clock::now();
                (void)run_method(oracle, marginals, cfg);
                secs +=
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            }
            secs /= static_cast<double>(trials);
            (kind == 0 ? point.seconds_klalm : point.seconds_sklalm) = secs;
        }
        res.points.push_back(point);
    }
    auto fit = [&](bool sampled) {
        double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
        const double n = static_cast<double>(res.points.size());
        for (const BenchPoint& p : res.points) {
            const double x = std::log(static_cast<double>(p.k));
            const double y = std::log(sampled ? p.seconds_sklalm : p.seconds_klalm);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        return (n * sxy - sx * sy) / (n * sxx - sx * sx);
    };
    res.exponent_klalm = fit(false);
    res.exponent_sklalm = fit(true);
    return res;
}

}  // namespace mbot
