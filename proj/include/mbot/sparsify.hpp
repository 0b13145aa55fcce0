#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>

#include "mbot/marginal.hpp"
#include "mbot/plan.hpp"
#include "mbot/sinkhorn.hpp"

namespace mbot {

// Importance-sampling distribution p = γ·X_prev/ΣX_prev + (1−γ)·√(a_j b_k)/Z.
// The rank-one part is kept factored, so probabilities are evaluated on demand
// without materializing an m·n grid when the previous iterate is sparse.
struct SamplingDistribution {
    std::size_t rows = 0, cols = 0;
    double gamma = 0.0;
    MatrixStorage prev;              // previous iterate divided by its mass (unused when γ=0)
    std::vector<double> row_factor;  // √a_j / Σ_j √a_j
    std::vector<double> col_factor;  // √b_k / Σ_k √b_k

    double rank_one(std::size_t j, std::size_t k) const {
        return (1.0 - gamma) * row_factor[j] * col_factor[k];
    }
    double prob(std::size_t j, std::size_t k) const {
        double p = rank_one(j, k);
        if (gamma > 0.0) p += gamma * storage_at(prev, j, k);
        return p;
    }
    double sum() const;  // diagnostic; 1 within rounding
};

SamplingDistribution mixture_probabilities(const Plan& x_prev, const Marginal& a,
                                           const Marginal& b, double gamma);

// Poisson-sampled index set with per-member acceptance probabilities
// p* = min{1, n_s · p}.  Members are unique, sorted row-major, and fully
// reproducible from the seed (per-index counter-based Bernoulli draws).
struct SampledSupport {
    std::size_t rows = 0, cols = 0;
    std::vector<std::uint32_t> row, col;
    std::vector<double> pstar;
    std::uint64_t seed = 0;

    std::size_t size() const { return pstar.size(); }
    void write(std::ostream& os) const;  // "row col pstar" lines
    static SampledSupport read(std::istream& is, std::size_t rows, std::size_t cols);
};

// Default path evaluates all m·n indices (O(mn), the cost Table-style
// accounting assumes).  The accelerated path draws the sparse mixture part
// exactly and thins per-row binomial candidates for the rank-one remainder;
// it requires a sparse previous iterate.
SampledSupport poisson_sample(const SamplingDistribution& p, long n_s, std::uint64_t seed,
                              bool accelerated = false);

// Ψ̂ = ψ/p* on the support, zero elsewhere.  Only support entries are evaluated.
KernelMatrix sparsify_kernel(const std::function<double(std::size_t, std::size_t)>& kernel_entry,
                             const SampledSupport& support);

// ĉ = c + λ log p* on the support; exp(−ĉ/λ) equals the sparsified kernel
// whenever ψ = exp(−c/λ).
SparseMatrix effective_cost(const std::function<double(std::size_t, std::size_t)>& cost_entry,
                            double lambda, const SampledSupport& support);

}  // namespace mbot
