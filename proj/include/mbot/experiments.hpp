#pragma once

#include <map>
#include <optional>

#include "mbot/mmot.hpp"
#include "mbot/multigrid.hpp"
#include "mbot/oracle1d.hpp"

namespace mbot {

// Flat key-value config files (diff-able reproduction recipes).  Flags layer
// on top of file values; unknown keys are rejected.
class KeyValueConfig {
public:
    static KeyValueConfig load(const std::string& path);
    void save(const std::string& path) const;

    bool has(const std::string& key) const { return kv_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { kv_[key] = value; }
    std::string get(const std::string& key, const std::string& fallback = "") const;
    double get_double(const std::string& key, double fallback) const;
    long get_long(const std::string& key, long fallback) const;
    const std::map<std::string, std::string>& entries() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
};

struct ExperimentSpec {
    int system_id = 1;
    std::optional<Density> custom_density;
    std::size_t k = 90;
    MeshStyle style = MeshStyle::Equimass;
    DiscretizeOptions disc;
    MethodConfig method;
    int trials = 1;
    std::uint64_t base_seed = 1;
    std::string out_dir = "out";
    bool dump_plans = false;
    bool stable_output = false;  // zero wall-clock columns for bitwise repro
    int workers = 2;

    Density density() const;
};

struct TrialOutcome {
    int trial = 0;
    std::uint64_t seed = 0;
    double objective = 0.0;
    double err_obj = std::numeric_limits<double>::quiet_NaN();
    double err_sce = std::numeric_limits<double>::quiet_NaN();
    double seconds = 0.0;
    long iterations = 0;
    StopReason stop = StopReason::TMax;
};

struct SolveOutput {
    DiscreteSystem system;
    std::vector<TrialOutcome> trials;
    double obj_star = std::numeric_limits<double>::quiet_NaN();
    double mean_err_obj = std::numeric_limits<double>::quiet_NaN();
    double mean_err_sce = std::numeric_limits<double>::quiet_NaN();
    double mean_seconds = 0.0;
};

// Runs the trials on a worker pool, writes one CSV per trial plus
// aggregate.csv, sce_potential.txt, metrics and (optionally) plan dumps.
SolveOutput run_solve(const ExperimentSpec& spec);

struct CmgSpec {
    int system_id = 1;
    std::optional<Density> custom_density;
    std::size_t k0 = 90;
    std::size_t levels = 1;
    MeshStyle style = MeshStyle::Equimass;
    DiscretizeOptions disc;
    LevelConfig level_cfg;
    MethodConfig accurate;
    MethodConfig cheap;
    int trials = 1;
    std::uint64_t base_seed = 1;
    std::string out_dir = "out";
    bool dump_plans = false;
    bool stable_output = false;

    Density density() const;
};

struct CmgTrialOutcome {
    int trial = 0;
    CmgResult result;
    double err_obj = std::numeric_limits<double>::quiet_NaN();
    double err_sce = std::numeric_limits<double>::quiet_NaN();
    double seconds = 0.0;
};

std::vector<CmgTrialOutcome> run_cmg_trials(const CmgSpec& spec);

struct BenchPoint {
    std::size_t k = 0;
    double seconds_klalm = 0.0;
    double seconds_sklalm = 0.0;
};

struct BenchResult {
    std::vector<BenchPoint> points;
    double exponent_klalm = 0.0;   // least-squares slope of log T vs log K
    double exponent_sklalm = 0.0;
};

// Fixed-μ scalability probe; exponents are informational (hardware-bound).
BenchResult run_bench(const Density& density, const std::vector<std::size_t>& ks, int trials,
                      std::uint64_t seed, double mu_fixed, double tol);

// File helpers shared with the CLI.
void write_barycenters(std::ostream& os, const DiscreteSystem& sys);
DiscreteSystem read_system_dir(const std::string& dir);
void write_system_dir(const std::string& dir, const DiscreteSystem& sys, std::size_t k_pre,
                      MeshStyle style);
void write_map_points(std::ostream& os, const std::vector<MappedPoint>& pts, int dim);

std::string default_out_root();

}  // namespace mbot
