#include "mbot/methods.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "mbot/sparsify.hpp"

namespace mbot {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct PhaseTimer {
    double& sink;
    Clock::time_point t0 = Clock::now();
    explicit PhaseTimer(double& s) : sink(s) {}
    ~PhaseTimer() { sink += ms_since(t0); }
};

}  // namespace

const char* method_name(MethodKind k) {
    switch (k) {
        case MethodKind::Eralm: return "eralm";
        case MethodKind::SEralm: return "s-eralm";
        case MethodKind::Klalm: return "klalm";
        case MethodKind::SKlalm: return "s-klalm";
    }
    return "?";
}

std::optional<MethodKind> parse_method(const std::string& name) {
    if (name == "eralm") return MethodKind::Eralm;
    if (name == "s-eralm" || name == "seralm") return MethodKind::SEralm;
    if (name == "klalm") return MethodKind::Klalm;
    if (name == "s-klalm" || name == "sklalm") return MethodKind::SKlalm;
    return std::nullopt;
}

void RunRecord::write_csv(std::ostream& os, bool stable) const {
    os << "t,delta,objective,support_total,sinkhorn_sweeps,wall_ms\n";
    char buf[160];
    for (const IterationStat& it : history) {
        std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%zu,%ld,%.3f\n", it.t, it.delta,
                      it.objective, it.support_total, it.sinkhorn_sweeps,
                      stable ? 0.0 : it.wall_ms);
        os << buf;
    }
}

double power_decay_step(long t, double exponent) {
    if (t < 0) throw DomainError("step_size: negative iteration index");
    return std::pow(static_cast<double>(t + 1), -exponent);
}

double theoretical_step(double d_bar, double f0_gap, double lipschitz, std::size_t blocks,
                        long t_max) {
    if (!(d_bar > 0.0) || lipschitz < 0.0 || f0_gap < 0.0 || t_max < 1) {
        throw DomainError("theoretical_step: invalid constants");
    }
    const double n = static_cast<double>(blocks);
    const double denom = 2.0 * lipschitz * n * (2.0 * std::sqrt(n) + 1.0);
    const double floor_t = f0_gap / (2.0 * d_bar * d_bar * lipschitz * n * (2.0 * std::sqrt(n) + 1.0));
    if (static_cast<double>(t_max) < floor_t) {
        throw DomainError("theoretical_step: t_max " + std::to_string(t_max) +
                          " below the bound floor " + std::to_string(floor_t) +
                          " (step size would exceed 1)");
    }
    return std::sqrt(f0_gap / (denom * static_cast<double>(t_max))) / d_bar;
}

double step_size(long t, const StepRule& rule, double d_bar, double f0_gap, std::size_t blocks,
                 long t_max) {
    if (rule.kind == StepRule::Kind::PowerDecay) return power_decay_step(t, rule.exponent);
    return theoretical_step(d_bar, f0_gap - rule.f_lower, rule.lipschitz, blocks, t_max);
}

double adaptive_parameter(std::span<const double> v_dual, std::size_t grid, double sigma) {
    if (grid < 2) throw DomainError("adaptive_parameter: grid size must be at least 2");
    double vmax = 0.0;
    for (double x : v_dual) vmax = std::max(vmax, std::fabs(x));
    const double val = sigma * vmax / (20.0 * std::log(static_cast<double>(grid)));
    return val > 1e-12 ? val : 1e-12;
}

double bootstrap_parameter(double grad_max_abs, std::size_t grid, double sigma) {
    if (grid < 2) throw DomainError("adaptive_parameter: grid size must be at least 2");
    const double val = sigma * grad_max_abs / (20.0 * std::log(static_cast<double>(grid)));
    return val > 1e-12 ? val : 1e-12;
}

double delta_metric(std::span<const Plan> prev, std::span<const Plan> curr,
                    std::span<const double> row_weights) {
    if (prev.size() != curr.size()) throw ShapeError("delta_metric: block count mismatch");
    if (prev.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < prev.size(); ++i) {
        const Plan& p = prev[i];
        const Plan& c = curr[i];
        if (p.rows() != c.rows() || p.cols() != c.cols()) {
            throw ShapeError("delta_metric: plan shape mismatch");
        }
        auto weight = [&](std::size_t j) {
            return row_weights.empty() ? 1.0 : row_weights[j];
        };
        double sq = 0.0;
        const auto* ps = std::get_if<SparseMatrix>(&p.data);
        const auto* cs = std::get_if<SparseMatrix>(&c.data);
        if (ps != nullptr && cs != nullptr) {
            for (std::size_t j = 0; j < ps->rows; ++j) {
                std::size_t x = ps->row_start[j], xe = ps->row_start[j + 1];
                std::size_t y = cs->row_start[j], ye = cs->row_start[j + 1];
                const double w = weight(j);
                while (x < xe || y < ye) {
                    double d = 0.0;
                    if (x < xe && (y >= ye || ps->col[x] < cs->col[y])) {
                        d = ps->val[x++];
                    } else if (y < ye && (x >= xe || cs->col[y] < ps->col[x])) {
                        d = -cs->val[y++];
                    } else {
                        d = ps->val[x++] - cs->val[y++];
                    }
                    sq += w * d * w * d;
                }
            }
        } else if (const auto* pd = std::get_if<DenseMatrix>(&p.data),
                   *cd = std::get_if<DenseMatrix>(&c.data);
                   pd != nullptr && cd != nullptr) {
            for (std::size_t j = 0; j < pd->rows; ++j) {
                const double w = weight(j);
                const double* pr = pd->row(j);
                const double* cr = cd->row(j);
                for (std::size_t k = 0; k < pd->cols; ++k) {
                    const double d = w * (pr[k] - cr[k]);
                    sq += d * d;
                }
            }
        } else {
            // Mixed storages: accumulate through a dense buffer.
            DenseMatrix diff(p.rows(), p.cols(), 0.0);
            for_each_entry(p.data, [&](std::size_t j, std::size_t k, double v) {
                diff.at(j, k) += v;
            });
            for_each_entry(c.data, [&](std::size_t j, std::size_t k, double v) {
                diff.at(j, k) -= v;
            });
            for (std::size_t j = 0; j < diff.rows; ++j) {
                const double w = weight(j);
                const double* r = diff.row(j);
                for (std::size_t k = 0; k < diff.cols; ++k) sq += w * r[k] * w * r[k];
            }
        }
        total += std::sqrt(sq);
    }
    return total / static_cast<double>(prev.size());
}

double theorem1_bound(const TheoryBound& tb, std::size_t blocks, long t_max, double f0_gap) {
    if (t_max < 1) throw DomainError("theorem1_bound: t_max must be positive");
    const double n = static_cast<double>(blocks);
    return 2.0 * tb.d_bar * (2.0 * n + 1.0) *
               std::sqrt(tb.L * f0_gap / static_cast<double>(t_max)) +
           n * tb.lambda * tb.h_bar;
}

std::vector<Plan> random_feasible_plans(
    const std::vector<std::pair<Marginal, Marginal>>& marginals, std::uint64_t seed) {
    std::vector<Plan> plans;
    plans.reserve(marginals.size());
    SinkhornConfig proj;
    proj.s_max = 5000;
    proj.feas_tol = 1e-10;
    for (std::size_t i = 0; i < marginals.size(); ++i) {
        const Marginal& a = marginals[i].first;
        const Marginal& b = marginals[i].second;
        DenseMatrix r(a.size(), b.size());
        for (std::size_t j = 0; j < a.size(); ++j) {
            for (std::size_t k = 0; k < b.size(); ++k) {
                r.at(j, k) = rng::uniform01_pos(rng::key(seed, i, j, k));
            }
        }
        const KernelMatrix kernel{MatrixStorage(std::move(r))};
        const SinkhornResult res = sinkhorn_solve(kernel, a, b, proj);
        plans.push_back(recover_plan(res.state, kernel, a, b));
    }
    return plans;
}

namespace {

// Shared outer-loop machinery for the four drivers.
class Driver {
public:
    Driver(const ObjectiveOracle& oracle,
           const std::vector<std::pair<Marginal, Marginal>>& marginals, const MethodConfig& cfg,
           const std::vector<Plan>* init)
        : oracle_(oracle), marginals_(marginals), cfg_(cfg) {
        n_blocks_ = oracle.block_count();
        if (marginals.size() != n_blocks_) {
            throw ShapeError("run: marginal list does not match block count");
        }
        for (std::size_t i = 0; i < n_blocks_; ++i) {
            const auto [m, n] = oracle.block_shape(i);
            if (marginals[i].first.size() != m || marginals[i].second.size() != n) {
                throw ShapeError("run: marginal sizes do not match block " + std::to_string(i));
            }
        }
        if (!(cfg.tol > 0.0) && cfg.t_max >= 100000) {
            throw DomainError("run: need tol > 0 or a finite t_max");
        }
        if (cfg.t_hat < 0) throw DomainError("run: t_hat must be nonnegative");
        if (init != nullptr) {
            if (init->size() != n_blocks_) throw ShapeError("run: bad initial plan count");
            x_.assign(init->begin(), init->end());
        } else {
            x_ = random_feasible_plans(marginals, cfg.seed);
        }
        record_.seed = cfg.seed;
        dual_v_.resize(n_blocks_);
        dual_u_.resize(n_blocks_);
        adapt_v_.resize(n_blocks_);
        param_used_.assign(n_blocks_, 0.0);
        frozen_.resize(n_blocks_);
        if (!cfg.initial_dual_v.empty()) {
            if (cfg.initial_dual_v.size() != n_blocks_) {
                throw ShapeError("run: initial duals do not match block count");
            }
            dual_v_ = cfg.initial_dual_v;
            adapt_v_ = cfg.initial_dual_v;
        }
    }

    RunRecord run(MethodKind kind) {
        if (cfg_.step.kind == StepRule::Kind::Theoretical &&
            (kind == MethodKind::Eralm || kind == MethodKind::SEralm)) {
            double dbar = 0.0;
            for (const auto& [a, b] : marginals_) dbar = std::max(dbar, diameter_bound(a, b));
            const double f0 = oracle_.objective(x_);
            alpha_const_ = theoretical_step(dbar, f0 - cfg_.step.f_lower, cfg_.step.lipschitz,
                                            n_blocks_, cfg_.t_max);
        }
        std::vector<Plan> prev;
        for (long t = 0; t < cfg_.t_max; ++t) {
            if (cfg_.iteration_hook) cfg_.iteration_hook(t, x_);
            const auto iter_start = Clock::now();
            prev.assign(x_.begin(), x_.end());
            IterationStat stat;
            stat.t = t;
            for (std::size_t i = 0; i < n_blocks_; ++i) {
                switch (kind) {
                    case MethodKind::Eralm: eralm_block(t, i, stat, false); break;
                    case MethodKind::SEralm: eralm_block(t, i, stat, true); break;
                    case MethodKind::Klalm: klalm_block(t, i, stat, false); break;
                    case MethodKind::SKlalm: klalm_block(t, i, stat, t >= cfg_.t_hat); break;
                }
            }
            stat.delta = delta_metric(prev, x_, cfg_.delta_weights);
            if (cfg_.log_objective) {
                PhaseTimer timer(record_.phases.objective_ms);
                stat.objective = oracle_.objective(x_);
            }
            stat.wall_ms = ms_since(iter_start);
            record_.history.push_back(stat);
            if (stat.delta <= cfg_.tol) {
                record_.stop = StopReason::Tol;
                break;
            }
            record_.stop = StopReason::TMax;
        }
        record_.plans = std::move(x_);
        record_.dual_u = std::move(dual_u_);
        record_.dual_v = std::move(dual_v_);
        return std::move(record_);
    }

private:
    // λ_i^{(t)} / μ_i^{(t)} per the adaptive rule, bootstrapped from ‖∇_i f‖max
    // at t = 0 (the dual it references does not exist yet).
    double select_param(long t, std::size_t i, const DenseMatrix* grad) {
        if (cfg_.param.kind == ParamRule::Kind::Fixed) return cfg_.param.value;
        const auto [m, n] = oracle_.block_shape(i);
        const std::size_t grid = std::max(m, n);
        // The scale estimate comes from the last converged solve; a dual cut
        // off at the sweep cap does not measure the potential and would let
        // the parameter drift multiplicatively.
        if (!adapt_v_[i].empty()) return adaptive_parameter(adapt_v_[i], grid, cfg_.param.sigma);
        (void)t;
        double gmax = 0.0;
        if (grad != nullptr) {
            gmax = storage_max_abs(MatrixStorage(*grad));
        } else {
            const DenseMatrix g = dense_gradient(i);
            gmax = storage_max_abs(MatrixStorage(g));
        }
        return bootstrap_parameter(gmax, grid, cfg_.param.sigma);
    }

    DenseMatrix dense_gradient(std::size_t i) {
        PhaseTimer timer(record_.phases.gradient_ms);
        return oracle_.block_gradient(i, x_);
    }

    long sampling_cap(std::size_t i) const {
        if (cfg_.n_s > 0) return cfg_.n_s;
        const auto [m, n] = oracle_.block_shape(i);
        return static_cast<long>(std::floor(
            std::pow(static_cast<double>(std::max(m, n)), 1.5)));
    }

    // The warm start carries the additive potential ṽ, re-expressed as
    // multiplicative scalings at the current λ/μ.  Carrying v̌ itself across a
    // parameter change would rescale the potential by the parameter ratio and
    // feed back into the adaptive rule.
    SinkhornResult solve_kernel(const KernelMatrix& kernel, std::size_t i, double param,
                                IterationStat& stat) {
        const Marginal& a = marginals_[i].first;
        const Marginal& b = marginals_[i].second;
        PhaseTimer timer(record_.phases.sinkhorn_ms);
        ScalingState warm;
        const ScalingState* warm_ptr = nullptr;
        if (dual_v_[i].size() == kernel.cols()) {
            warm.u.assign(kernel.rows(), 1.0);
            warm.v.resize(kernel.cols());
            for (std::size_t k = 0; k < kernel.cols(); ++k) {
                const double e = std::clamp(dual_v_[i][k] / param, -700.0, 700.0);
                warm.v[k] = std::exp(e);
            }
            warm_ptr = &warm;
        }
        try {
            const SinkhornResult res = sinkhorn_solve(kernel, a, b, cfg_.inner, warm_ptr);
            stat.sinkhorn_sweeps += res.sweeps;
            stat.support_total += kernel.nnz();
            return res;
        } catch (const InfeasibleSupportError& e) {
            throw InfeasibleSupportError("t=" + std::to_string(stat.t) + " block " +
                                         std::to_string(i) + ": " + e.what());
        }
    }

    void store_duals(std::size_t i, const ScalingState& state, double param, double shift,
                     bool converged) {
        auto [du, dv] = to_dual_potentials(state, param);
        for (double& x : du) x += shift;
        dual_u_[i] = std::move(du);
        dual_v_[i] = std::move(dv);
        if (converged) adapt_v_[i] = dual_v_[i];
        param_used_[i] = param;
    }

    // A kernel row of exact zeros cannot carry its marginal: the parameter is
    // too small for the cost spread in scaling form.
    void check_dense_rows(const DenseMatrix& kernel, double param, const char* name) const {
        for (std::size_t j = 0; j < kernel.rows; ++j) {
            const double* r = kernel.row(j);
            double rmax = 0.0;
            for (std::size_t k = 0; k < kernel.cols; ++k) rmax = std::max(rmax, r[k]);
            if (!(rmax > cfg_.inner.underflow_floor)) {
                throw NumericalError("run: kernel row " + std::to_string(j) +
                                     " underflowed; increase " + name + " (param " +
                                     std::to_string(param) + ")");
            }
        }
    }

    // Ψ̂ = exp((c0 − ĉ)/λ)/p* on the support, c0 the support minimum; the
    // gradient is evaluated once per support index.
    KernelMatrix sampled_entropic_kernel(std::size_t i, double param,
                                         const SampledSupport& support,
                                         const std::optional<DenseMatrix>& dense_grad,
                                         double& shift) {
        std::vector<double> costs(support.size());
        double c0 = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < support.size(); ++s) {
            costs[s] = dense_grad.has_value()
                           ? dense_grad->at(support.row[s], support.col[s])
                           : oracle_.gradient_entry(i, x_, support.row[s], support.col[s]);
            c0 = std::min(c0, costs[s]);
        }
        shift = support.size() == 0 ? 0.0 : c0;
        std::size_t next = 0;
        auto entry = [&](std::size_t, std::size_t) {
            return std::exp((shift - costs[next++]) / param);
        };
        record_.kernel_entries += support.size();
        return sparsify_kernel(entry, support);
    }

    void convex_update(std::size_t i, double alpha, const Plan& target) {
        auto* dense = std::get_if<DenseMatrix>(&x_[i].data);
        if (dense == nullptr) throw NumericalError("run: convex update expects dense iterate");
        for (double& v : dense->v) v *= (1.0 - alpha);
        for_each_entry(target.data, [&](std::size_t j, std::size_t k, double v) {
            dense->at(j, k) += alpha * v;
        });
    }

    // One ERALM / S-ERALM block step.
    void eralm_block(long t, std::size_t i, IterationStat& stat, bool sampled) {
        const Marginal& a = marginals_[i].first;
        const Marginal& b = marginals_[i].second;
        const double alpha =
            cfg_.step.kind == StepRule::Kind::PowerDecay
                ? power_decay_step(t, cfg_.step.exponent)
                : alpha_const_;

        KernelMatrix kernel;
        double param = 0.0;
        double shift = 0.0;  // kernels use exp((c0 − c)/λ); plans and ṽ are unchanged
        if (!sampled) {
            const DenseMatrix grad = dense_gradient(i);
            param = select_param(t, i, &grad);
            PhaseTimer timer(record_.phases.kernel_ms);
            DenseMatrix psi(grad.rows, grad.cols);
            shift = *std::min_element(grad.v.begin(), grad.v.end());
            for (std::size_t p = 0; p < grad.v.size(); ++p) {
                psi.v[p] = std::exp((shift - grad.v[p]) / param);
            }
            check_dense_rows(psi, param, "lambda");
            record_.kernel_entries += psi.v.size();
            kernel = KernelMatrix(MatrixStorage(std::move(psi)));
        } else {
            SampledSupport support;
            {
                PhaseTimer timer(record_.phases.sampling_ms);
                const SamplingDistribution dist = mixture_probabilities(x_[i], a, b, cfg_.gamma);
                support = poisson_sample(dist, sampling_cap(i),
                                         rng::key(cfg_.seed, 0xA110C, static_cast<std::uint64_t>(t), i),
                                         cfg_.accelerated_sampling);
            }
            // Gradient entries are needed on the support only; oracles without
            // cheap entrywise access fall back to one dense gradient.
            std::optional<DenseMatrix> dense_grad;
            if (!oracle_.has_cheap_gradient_entries()) dense_grad = dense_gradient(i);
            param = dense_grad.has_value() ? select_param(t, i, &*dense_grad)
                                           : select_param(t, i, nullptr);
            {
                PhaseTimer timer(record_.phases.kernel_ms);
                kernel = sampled_entropic_kernel(i, param, support, dense_grad, shift);
            }
        }

        SinkhornResult res;
        try {
            res = solve_kernel(kernel, i, param, stat);
        } catch (const InfeasibleSupportError&) {
            if (!sampled) throw;
            // One resample with a fresh seed before giving up (the sampled
            // subproblem came out infeasible).
            record_.notes += "resample t=" + std::to_string(t) + " i=" + std::to_string(i) + "; ";
            SampledSupport support;
            {
                PhaseTimer timer(record_.phases.sampling_ms);
                const SamplingDistribution dist = mixture_probabilities(x_[i], a, b, cfg_.gamma);
                support = poisson_sample(dist, sampling_cap(i),
                                         rng::key(cfg_.seed, 0xBEE5, static_cast<std::uint64_t>(t), i),
                                         cfg_.accelerated_sampling);
            }
            std::optional<DenseMatrix> dense_grad;
            if (!oracle_.has_cheap_gradient_entries()) dense_grad = dense_gradient(i);
            {
                PhaseTimer timer(record_.phases.kernel_ms);
                kernel = sampled_entropic_kernel(i, param, support, dense_grad, shift);
            }
            res = solve_kernel(kernel, i, param, stat);
        }
        const Plan target = recover_plan(res.state, kernel, a, b);
        convex_update(i, alpha, target);
        store_duals(i, res.state, param, shift, res.stop == SinkhornStop::Converged);
        stat.param_max = std::max(stat.param_max, param);
    }

    // One KLALM / S-KLALM block step.
    void klalm_block(long t, std::size_t i, IterationStat& stat, bool sampled) {
        const Marginal& a = marginals_[i].first;
        const Marginal& b = marginals_[i].second;

        if (sampled && t == cfg_.t_hat) {
            PhaseTimer timer(record_.phases.sampling_ms);
            const SamplingDistribution dist = mixture_probabilities(x_[i], a, b, cfg_.gamma);
            frozen_[i] = poisson_sample(dist, sampling_cap(i),
                                        rng::key(cfg_.seed, 0xF00D, static_cast<std::uint64_t>(t), i),
                                        cfg_.accelerated_sampling);
        }

        std::optional<DenseMatrix> dense_grad;
        if (!sampled || !oracle_.has_cheap_gradient_entries()) dense_grad = dense_gradient(i);
        const double param = dense_grad.has_value() ? select_param(t, i, &*dense_grad)
                                                    : select_param(t, i, nullptr);

        KernelMatrix kernel;
        double shift = 0.0;
        bool retried = false;
        for (;;) {
            {
                PhaseTimer timer(record_.phases.kernel_ms);
                kernel = sampled ? build_sampled_kl_kernel(i, param, dense_grad, shift)
                                 : build_kl_kernel(i, param, *dense_grad, shift);
            }
            try {
                const SinkhornResult res = solve_kernel(kernel, i, param, stat);
                x_[i] = recover_plan(res.state, kernel, a, b);
                store_duals(i, res.state, param, shift, res.stop == SinkhornStop::Converged);
                stat.param_max = std::max(stat.param_max, param);
                return;
            } catch (const InfeasibleSupportError&) {
                if (!sampled || retried || t != cfg_.t_hat) throw;
                // Frozen support came out infeasible right at the sampling
                // iteration: draw it once more before erroring.
                retried = true;
                record_.notes +=
                    "resample t=" + std::to_string(t) + " i=" + std::to_string(i) + "; ";
                PhaseTimer timer(record_.phases.sampling_ms);
                const SamplingDistribution dist = mixture_probabilities(x_[i], a, b, cfg_.gamma);
                frozen_[i] = poisson_sample(dist, sampling_cap(i),
                                            rng::key(cfg_.seed, 0xBEE5, static_cast<std::uint64_t>(t), i),
                                            cfg_.accelerated_sampling);
            }
        }
    }

    // Φ = exp((c0 − C)/μ) ⊙ X on the support of X, c0 the support minimum.
    KernelMatrix build_kl_kernel(std::size_t i, double param, const DenseMatrix& grad,
                                 double& shift) {
        const Plan& xi = x_[i];
        double kmax = 0.0;
        MatrixStorage out;
        if (const auto* d = std::get_if<DenseMatrix>(&xi.data)) {
            double c0 = std::numeric_limits<double>::infinity();
            for (std::size_t p = 0; p < d->v.size(); ++p) {
                if (d->v[p] > 0.0) c0 = std::min(c0, grad.v[p]);
            }
            shift = std::isfinite(c0) ? c0 : 0.0;
            DenseMatrix phi(d->rows, d->cols, 0.0);
            for (std::size_t p = 0; p < d->v.size(); ++p) {
                if (d->v[p] > 0.0) {
                    phi.v[p] = std::exp((shift - grad.v[p]) / param) * d->v[p];
                    kmax = std::max(kmax, phi.v[p]);
                }
            }
            check_dense_rows(phi, param, "mu");
            record_.kernel_entries += d->v.size();
            out = std::move(phi);
        } else {
            const auto& sp = std::get<SparseMatrix>(xi.data);
            double c0 = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < sp.rows; ++j) {
                for (std::size_t p = sp.row_start[j]; p < sp.row_start[j + 1]; ++p) {
                    if (sp.val[p] > 0.0) c0 = std::min(c0, grad.at(j, sp.col[p]));
                }
            }
            shift = std::isfinite(c0) ? c0 : 0.0;
            SparseBuilder builder(sp.rows, sp.cols);
            for (std::size_t j = 0; j < sp.rows; ++j) {
                for (std::size_t p = sp.row_start[j]; p < sp.row_start[j + 1]; ++p) {
                    if (sp.val[p] <= 0.0) continue;
                    const double v = std::exp((shift - grad.at(j, sp.col[p])) / param) * sp.val[p];
                    if (v > 0.0) {
                        builder.push(j, sp.col[p], v);
                        kmax = std::max(kmax, v);
                    }
                }
            }
            record_.kernel_entries += sp.nnz();
            out = builder.take();
        }
        if (!(kmax > cfg_.inner.underflow_floor)) {
            throw NumericalError("run: KL kernel underflow everywhere; increase mu (param " +
                                 std::to_string(param) + ")");
        }
        return KernelMatrix(std::move(out));
    }

    // Φ̂ = (exp((c0 − C)/μ) ⊙ X) / p* on the frozen support ∩ supp(X); kernel
    // and gradient entries are evaluated only there.
    KernelMatrix build_sampled_kl_kernel(std::size_t i, double param,
                                         const std::optional<DenseMatrix>& dense_grad,
                                         double& shift) {
        const SampledSupport& sup = frozen_[i];
        const Plan& xi = x_[i];
        auto grad_at = [&](std::size_t j, std::size_t k) {
            return dense_grad.has_value() ? dense_grad->at(j, k)
                                          : oracle_.gradient_entry(i, x_, j, k);
        };
        const auto* sx = std::get_if<SparseMatrix>(&xi.data);
        std::vector<double> costs(sup.size());
        std::vector<double> xvals(sup.size());
        double c0 = std::numeric_limits<double>::infinity();
        std::size_t evals = 0;
        for (std::size_t s = 0; s < sup.size(); ++s) {
            const std::size_t j = sup.row[s];
            const std::size_t k = sup.col[s];
            xvals[s] = sx != nullptr ? sx->at(j, k) : xi.at(j, k);
            if (xvals[s] <= 0.0) continue;
            costs[s] = grad_at(j, k);
            c0 = std::min(c0, costs[s]);
            ++evals;
        }
        shift = std::isfinite(c0) ? c0 : 0.0;
        SparseBuilder builder(sup.rows, sup.cols);
        double kmax = 0.0;
        for (std::size_t s = 0; s < sup.size(); ++s) {
            if (xvals[s] <= 0.0) continue;
            const double v = std::exp((shift - costs[s]) / param) * xvals[s] / sup.pstar[s];
            if (v > 0.0) {
                builder.push(sup.row[s], sup.col[s], v);
                kmax = std::max(kmax, v);
            }
        }
        record_.kernel_entries += evals;
        if (!(kmax > cfg_.inner.underflow_floor)) {
            throw NumericalError("run: sampled KL kernel underflow everywhere (param " +
                                 std::to_string(param) + ")");
        }
        return KernelMatrix(builder.take());
    }

    const ObjectiveOracle& oracle_;
    const std::vector<std::pair<Marginal, Marginal>>& marginals_;
    const MethodConfig& cfg_;
    std::size_t n_blocks_ = 0;
    std::vector<Plan> x_;
    std::vector<std::vector<double>> dual_u_, dual_v_;
    std::vector<std::vector<double>> adapt_v_;  // duals from converged solves only
    std::vector<double> param_used_;
    std::vector<SampledSupport> frozen_;
    double alpha_const_ = 1.0;
    RunRecord record_;
};

}  // namespace

RunRecord run_eralm(const ObjectiveOracle& oracle,
                    const std::vector<std::pair<Marginal, Marginal>>& marginals,
                    const MethodConfig& cfg, const std::vector<Plan>* init) {
    return Driver(oracle, marginals, cfg, init).run(MethodKind::Eralm);
}

RunRecord run_s_eralm(const ObjectiveOracle& oracle,
                      const std::vector<std::pair<Marginal, Marginal>>& marginals,
                      const MethodConfig& cfg, const std::vector<Plan>* init) {
    return Driver(oracle, marginals, cfg, init).run(MethodKind::SEralm);
}

RunRecord run_klalm(const ObjectiveOracle& oracle,
                    const std::vector<std::pair<Marginal, Marginal>>& marginals,
                    const MethodConfig& cfg, const std::vector<Plan>* init) {
    return Driver(oracle, marginals, cfg, init).run(MethodKind::Klalm);
}

RunRecord run_s_klalm(const ObjectiveOracle& oracle,
                      const std::vector<std::pair<Marginal, Marginal>>& marginals,
                      const MethodConfig& cfg, const std::vector<Plan>* init) {
    return Driver(oracle, marginals, cfg, init).run(MethodKind::SKlalm);
}

RunRecord run_method(const ObjectiveOracle& oracle,
                     const std::vector<std::pair<Marginal, Marginal>>& marginals,
                     const MethodConfig& cfg, const std::vector<Plan>* init) {
    switch (cfg.kind) {
        case MethodKind::Eralm: return run_eralm(oracle, marginals, cfg, init);
        case MethodKind::SEralm: return run_s_eralm(oracle, marginals, cfg, init);
        case MethodKind::Klalm: return run_klalm(oracle, marginals, cfg, init);
        case MethodKind::SKlalm: return run_s_klalm(oracle, marginals, cfg, init);
    }
    throw DomainError("run_method: unknown method kind");
}

}  // namespace mbot
