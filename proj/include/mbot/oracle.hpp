#pragma once

#include <span>
#include <vector>

#include "mbot/plan.hpp"

namespace mbot {

// Block-structured objective over a product of transport polytopes.
//
// gradient_entry() exists so that sampled methods can assemble kernels from
// O(|support|) gradient evaluations.  Implementations whose per-entry cost is
// o(cols) should return true from has_cheap_gradient_entries(); otherwise the
// drivers fall back to one dense block_gradient per (iteration, block), which
// is unavoidable for general objectives.
class ObjectiveOracle {
public:
    virtual ~ObjectiveOracle() = default;

    virtual std::size_t block_count() const = 0;
    virtual std::pair<std::size_t, std::size_t> block_shape(std::size_t i) const = 0;

    virtual double objective(std::span<const Plan> x) const = 0;

    // ∇_i f at the given blocks (callers pass the Gauss–Seidel mix themselves).
    virtual DenseMatrix block_gradient(std::size_t i, std::span<const Plan> x) const = 0;

    virtual bool has_cheap_gradient_entries() const { return false; }
    virtual double gradient_entry(std::size_t i, std::span<const Plan> x, std::size_t j,
                                  std::size_t k) const;
};

// Constants feeding the average-residual bound and the theoretical step size.
struct TheoryBound {
    double L = 0.0;        // block Lipschitz constant of ∇f
    double f_lower = 0.0;  // lower bound on the optimal value
    double d_bar = 0.0;    // max_i d_i
    std::vector<double> d_i;
    double h_bar = 0.0;    // −min_i h(a_i b_iᵀ)
    double lambda = 0.0;
    long t_max = 0;
};

struct ResidualReport {
    std::vector<double> per_block;
    double total = 0.0;
};

// Per-block linear-minimization gaps R_i = ⟨∇_i f, X_i⟩ − min_{T} ⟨∇_i f, T⟩,
// each inner minimum computed exactly with transport_lp.
ResidualReport residual(std::span<const Plan> x, const ObjectiveOracle& oracle,
                        double feas_tol = 1e-6);

}  // namespace mbot
