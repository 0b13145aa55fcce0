#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

#include "mbot/oracle.hpp"
#include "mbot/sinkhorn.hpp"

namespace mbot {

enum class MethodKind { Eralm, SEralm, Klalm, SKlalm };

const char* method_name(MethodKind k);
std::optional<MethodKind> parse_method(const std::string& name);

struct StepRule {
    enum class Kind { PowerDecay, Theoretical } kind = Kind::PowerDecay;
    double exponent = 0.75;  // power decay α_t = (t+1)^{−exponent}
    double lipschitz = 0.0;  // Theoretical: block Lipschitz constant L
    double f_lower = 0.0;    // Theoretical: lower bound on the optimal value
};

// λ_i / μ_i selection: adaptive σ‖ṽ‖∞/(20 log K) with a ‖∇f‖max bootstrap at
// t = 0, or a fixed value (used by the average-residual bound check and by
// the fixed-μ scalability runs).
struct ParamRule {
    enum class Kind { Adaptive, Fixed } kind = Kind::Adaptive;
    double sigma = 1.0;
    double value = 0.0;
};

struct MethodConfig {
    MethodKind kind = MethodKind::Klalm;
    ParamRule param;
    double gamma = 0.99;  // interpolation factor for sampling probabilities
    long n_s = 0;         // per-block sampling cap; 0 → ⌊K^1.5⌋ with K = max(m,n)
    long t_hat = 0;       // critical sampling iteration (S-KLALM)
    double tol = 1e-3;    // outer stop on Δ
    long t_max = 100000;
    StepRule step;
    SinkhornConfig inner;
    std::uint64_t seed = 1;
    std::vector<double> delta_weights;  // Λ^{-1} diagonal; empty → ones
    bool accelerated_sampling = false;
    bool log_objective = true;
    // Warm-start seed (e.g. prolongated from a coarser level): additive dual
    // v-potentials per block.  They initialize the scalings of the first
    // solve and feed the adaptive λ/μ rule at t = 0 in place of the
    // gradient-norm bootstrap.
    std::vector<std::vector<double>> initial_dual_v;
    // Observation hook, called with the iterate X^{(t)} before sweep t runs.
    std::function<void(long, std::span<const Plan>)> iteration_hook;
};

struct IterationStat {
    long t = 0;
    double delta = 0.0;
    double objective = 0.0;
    double param_max = 0.0;        // largest λ/μ used this iteration
    std::size_t support_total = 0; // Σ_i nnz of the kernels solved
    long sinkhorn_sweeps = 0;
    double wall_ms = 0.0;
};

enum class StopReason { Tol, TMax };

struct PhaseTimes {
    double sampling_ms = 0.0;
    double kernel_ms = 0.0;
    double sinkhorn_ms = 0.0;
    double gradient_ms = 0.0;
    double objective_ms = 0.0;
};

struct RunRecord {
    std::vector<IterationStat> history;
    std::vector<Plan> plans;
    std::vector<std::vector<double>> dual_u;  // additive potentials per block
    std::vector<std::vector<double>> dual_v;
    StopReason stop = StopReason::TMax;
    std::uint64_t seed = 0;
    PhaseTimes phases;
    std::size_t kernel_entries = 0;  // kernel entry evaluations, Table-1 audit
    std::string notes;               // e.g. resample events

    long iterations() const { return static_cast<long>(history.size()); }
    double final_objective() const { return history.empty() ? 0.0 : history.back().objective; }
    // CSV schema: t,delta,objective,support_total,sinkhorn_sweeps,wall_ms.
    // stable=true zeroes the wall-clock column for bitwise-reproducible files.
    void write_csv(std::ostream& os, bool stable = false) const;
};

double power_decay_step(long t, double exponent = 0.75);
// α from the average-residual theorem; throws when t_max is below the floor
// that keeps α ≤ 1.
double theoretical_step(double d_bar, double f0_gap, double lipschitz, std::size_t blocks,
                        long t_max);
double step_size(long t, const StepRule& rule, double d_bar, double f0_gap, std::size_t blocks,
                 long t_max);

// σ‖v‖∞ / (20 log K); floors at 1e−12 when the dual degenerates.
double adaptive_parameter(std::span<const double> v_dual, std::size_t grid, double sigma);
double bootstrap_parameter(double grad_max_abs, std::size_t grid, double sigma);

// Mean over blocks of ‖Diag(w)(Y_i − Y_i')‖_F.
double delta_metric(std::span<const Plan> prev, std::span<const Plan> curr,
                    std::span<const double> row_weights);

// Right-hand side of the average-residual bound:
// 2 d̄ (2N+1) √(L·gap/t_max) + N λ h̄.
double theorem1_bound(const TheoryBound& tb, std::size_t blocks, long t_max, double f0_gap);

// Sinkhorn projection of a uniformly random positive matrix onto U(a, b);
// strictly positive, deterministic in the seed.
std::vector<Plan> random_feasible_plans(
    const std::vector<std::pair<Marginal, Marginal>>& marginals, std::uint64_t seed);

RunRecord run_eralm(const ObjectiveOracle& oracle,
                    const std::vector<std::pair<Marginal, Marginal>>& marginals,
                    const MethodConfig& cfg, const std::vector<Plan>* init = nullptr);
RunRecord run_s_eralm(const ObjectiveOracle& oracle,
                      const std::vector<std::pair<Marginal, Marginal>>& marginals,
                      const MethodConfig& cfg, const std::vector<Plan>* init = nullptr);
RunRecord run_klalm(const ObjectiveOracle& oracle,
                    const std::vector<std::pair<Marginal, Marginal>>& marginals,
                    const MethodConfig& cfg, const std::vector<Plan>* init = nullptr);
RunRecord run_s_klalm(const ObjectiveOracle& oracle,
                      const std::vector<std::pair<Marginal, Marginal>>& marginals,
                      const MethodConfig& cfg, const std::vector<Plan>* init = nullptr);

// Dispatch on cfg.kind.
RunRecord run_method(const ObjectiveOracle& oracle,
                     const std::vector<std::pair<Marginal, Marginal>>& marginals,
                     const MethodConfig& cfg, const std::vector<Plan>* init = nullptr);

}  // namespace mbot
