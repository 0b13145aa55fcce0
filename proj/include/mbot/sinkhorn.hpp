#pragma once

#include <optional>
#include <span>

#include "mbot/marginal.hpp"
#include "mbot/matrix.hpp"
#include "mbot/plan.hpp"

namespace mbot {

// Nonnegative Gibbs kernel fed to the scaling iterations.
struct KernelMatrix {
    MatrixStorage data;

    KernelMatrix() : data(DenseMatrix{}) {}
    explicit KernelMatrix(MatrixStorage d);

    std::size_t rows() const { return storage_rows(data); }
    std::size_t cols() const { return storage_cols(data); }
    std::size_t nnz() const { return storage_nnz(data); }
    bool is_dense() const { return std::holds_alternative<DenseMatrix>(data); }
};

// Multiplicative scalings (ǔ, v̌); strictly positive while a solve is healthy.
struct ScalingState {
    std::vector<double> u;  // length m
    std::vector<double> v;  // length n
};

struct SinkhornConfig {
    int s_max = 20;
    double feas_tol = 1e-6;
    double underflow_floor = 1e-300;
};

enum class SinkhornStop { Converged, SweepLimit };

struct SinkhornResult {
    ScalingState state;
    SinkhornStop stop = SinkhornStop::SweepLimit;
    int sweeps = 0;
    double row_violation = 0.0;
};

// λ exp(u/λ)ᵀ K exp(v/λ) − uᵀa − vᵀb.  Throws NumericalError when an exponent
// would overflow, reporting the largest one encountered.
double dual_objective(std::span<const double> u, std::span<const double> v, double lambda,
                      const KernelMatrix& kernel, const Marginal& a, const Marginal& b);

// Alternating scaling updates ǔ ← a ⊘ (K v̌), v̌ ← b ⊘ (Kᵀ ǔ), stopping when the
// row-marginal violation of the recovered plan drops to feas_tol or s_max is
// reached.  A vanished denominator against positive target mass signals an
// infeasible (sampled) support and raises InfeasibleSupportError.
SinkhornResult sinkhorn_solve(const KernelMatrix& kernel, const Marginal& a, const Marginal& b,
                              const SinkhornConfig& cfg, const ScalingState* warm = nullptr);

// Diag(ǔ) K Diag(v̌); the plan inherits the kernel's support pattern.
Plan recover_plan(const ScalingState& state, const KernelMatrix& kernel, Marginal a, Marginal b);

// (u, v) = (λ log ǔ, λ log v̌).
std::pair<std::vector<double>, std::vector<double>> to_dual_potentials(const ScalingState& state,
                                                                       double lambda);

}  // namespace mbot
