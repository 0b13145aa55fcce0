#include "mbot/sinkhorn.hpp"

#include <cmath>

namespace mbot {

KernelMatrix::KernelMatrix(MatrixStorage d) : data(std::move(d)) {
    if (const auto* s = std::get_if<SparseMatrix>(&data)) s->validate();
    bool bad = false;
    for_each_entry(data, [&](std::size_t, std::size_t, double v) {
        if (v < 0.0 || !std::isfinite(v)) bad = true;
    });
    if (bad) throw DomainError("kernel: negative or non-finite entry");
}

double dual_objective(std::span<const double> u, std::span<const double> v, double lambda,
                      const KernelMatrix& kernel, const Marginal& a, const Marginal& b) {
    if (u.size() != kernel.rows() || v.size() != kernel.cols() || u.size() != a.size() ||
        v.size() != b.size()) {
        throw ShapeError("dual_objective: shape mismatch");
    }
    if (!(lambda > 0.0)) throw DomainError("dual_objective: lambda must be positive");
    double max_exp = 0.0;
    for (double x : u) max_exp = std::max(max_exp, x / lambda);
    for (double x : v) max_exp = std::max(max_exp, x / lambda);
    if (max_exp > 700.0) {
        throw NumericalError("dual_objective: exp overflow, max exponent " +
                             std::to_string(max_exp));
    }
    std::vector<double> ev(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) ev[k] = std::exp(v[k] / lambda);
    std::vector<double> kv;
    matvec(kernel.data, ev, kv);
    double q = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) q += std::exp(u[j] / lambda) * kv[j];
    q *= lambda;
    for (std::size_t j = 0; j < u.size(); ++j) q -= u[j] * a[j];
    for (std::size_t k = 0; k < v.size(); ++k) q -= v[k] * b[k];
    return q;
}

SinkhornResult sinkhorn_solve(const KernelMatrix& kernel, const Marginal& a, const Marginal& b,
                              const SinkhornConfig& cfg, const ScalingState* warm) {
    const std::size_t m = kernel.rows();
    const std::size_t n = kernel.cols();
    if (a.size() != m || b.size() != n) throw ShapeError("sinkhorn_solve: marginal shape mismatch");
    if (cfg.s_max < 1) throw DomainError("sinkhorn_solve: s_max must be at least 1");
    if (!(cfg.feas_tol > 0.0)) throw DomainError("sinkhorn_solve: feas_tol must be positive");

    SinkhornResult res;
    res.state.u.assign(m, 1.0);
    res.state.v.assign(n, 1.0);
    if (warm != nullptr) {
        if (warm->v.size() != n || warm->u.size() != m) {
            throw ShapeError("sinkhorn_solve: warm state shape mismatch");
        }
        res.state = *warm;
        // Columns absent from the kernel support carry no information; those
        // scalings restart from 1 (so do corrupted values).
        if (const auto* sp = std::get_if<SparseMatrix>(&kernel.data)) {
            std::vector<bool> seen(n, false);
            for (std::uint32_t c : sp->col) seen[c] = true;
            for (std::size_t k = 0; k < n; ++k) {
                if (!seen[k]) res.state.v[k] = 1.0;
            }
        }
        for (double& x : res.state.v) {
            if (!(x > 0.0) || !std::isfinite(x)) x = 1.0;
        }
    }

    std::vector<double>& u = res.state.u;
    std::vector<double>& v = res.state.v;
    std::vector<double> kv, ktu;
    matvec(kernel.data, v, kv);

    const double guard = 1.0 / cfg.underflow_floor;
    for (int s = 1; s <= cfg.s_max; ++s) {
        for (std::size_t j = 0; j < m; ++j) {
            if (a[j] <= 0.0) {
                u[j] = 0.0;
                continue;
            }
            if (!(kv[j] > cfg.underflow_floor)) {
                throw InfeasibleSupportError(
                    "sinkhorn_solve: row " + std::to_string(j) +
                    " denominator vanished (support cannot carry the marginal)");
            }
            u[j] = a[j] / kv[j];
            if (!(u[j] < guard)) {
                throw InfeasibleSupportError("sinkhorn_solve: scaling divergence in row " +
                                             std::to_string(j));
            }
        }
        matvec_transposed(kernel.data, u, ktu);
        for (std::size_t k = 0; k < n; ++k) {
            if (b[k] <= 0.0) {
                v[k] = 0.0;
                continue;
            }
            if (!(ktu[k] > cfg.underflow_floor)) {
                throw InfeasibleSupportError(
                    "sinkhorn_solve: column " + std::to_string(k) +
                    " denominator vanished (support cannot carry the marginal)");
            }
            v[k] = b[k] / ktu[k];
            if (!(v[k] < guard)) {
                throw InfeasibleSupportError("sinkhorn_solve: scaling divergence in column " +
                                             std::to_string(k));
            }
        }
        // Row feasibility of the recovered plan, checked after the v̌-update.
        matvec(kernel.data, v, kv);
        double viol = 0.0;
        for (std::size_t j = 0; j < m; ++j) viol = std::max(viol, std::fabs(u[j] * kv[j] - a[j]));
        res.sweeps = s;
        res.row_violation = viol;
        if (viol <= cfg.feas_tol) {
            res.stop = SinkhornStop::Converged;
            return res;
        }
    }
    res.stop = SinkhornStop::SweepLimit;
    return res;
}

Plan recover_plan(const ScalingState& state, const KernelMatrix& kernel, Marginal a, Marginal b) {
    const std::size_t m = kernel.rows();
    const std::size_t n = kernel.cols();
    if (state.u.size() != m || state.v.size() != n) {
        throw ShapeError("recover_plan: state shape mismatch");
    }
    for (double x : state.u) {
        if (!std::isfinite(x)) throw NumericalError("recover_plan: non-finite scaling");
    }
    if (const auto* d = std::get_if<DenseMatrix>(&kernel.data)) {
        DenseMatrix out(m, n);
        for (std::size_t j = 0; j < m; ++j) {
            const double* kj = d->row(j);
            double* oj = out.row(j);
            for (std::size_t k = 0; k < n; ++k) oj[k] = state.u[j] * kj[k] * state.v[k];
        }
        return Plan(std::move(out), std::move(a), std::move(b));
    }
    const auto& sp = std::get<SparseMatrix>(kernel.data);
    SparseMatrix out = sp;
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t p = out.row_start[j]; p < out.row_start[j + 1]; ++p) {
            out.val[p] = state.u[j] * sp.val[p] * state.v[out.col[p]];
        }
    }
    return Plan(std::move(out), std::move(a), std::move(b));
}

std::pair<std::vector<double>, std::vector<double>> to_dual_potentials(const ScalingState& state,
                                                                       double lambda) {
    if (!(lambda > 0.0)) throw DomainError("to_dual_potentials: lambda must be positive");
    std::pair<std::vector<double>, std::vector<double>> out;
    out.first.reserve(state.u.size());
    out.second.reserve(state.v.size());
    for (double x : state.u) {
        if (!(x > 0.0)) throw DomainError("to_dual_potentials: nonpositive scaling");
        out.first.push_back(lambda * std::log(x));
    }
    for (double x : state.v) {
        if (!(x > 0.0)) throw DomainError("to_dual_potentials: nonpositive scaling");
        out.second.push_back(lambda * std::log(x));
    }
    return out;
}

}  // namespace mbot
