#include "mbot/sparsify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>

namespace mbot {

double SamplingDistribution::sum() const {
    double t = 0.0;
    for (std::size_t j = 0; j < rows; ++j) {
        for (std::size_t k = 0; k < cols; ++k) t += rank_one(j, k);
    }
    if (gamma > 0.0) t += gamma * storage_sum(prev);
    return t;
}

SamplingDistribution mixture_probabilities(const Plan& x_prev, const Marginal& a,
                                           const Marginal& b, double gamma) {
    if (gamma < 0.0 || gamma > 1.0) throw DomainError("mixture_probabilities: gamma outside [0,1]");
    if (x_prev.rows() != a.size() || x_prev.cols() != b.size()) {
        throw ShapeError("mixture_probabilities: shape mismatch");
    }
    SamplingDistribution dist;
    dist.rows = a.size();
    dist.cols = b.size();
    dist.gamma = gamma;
    double sa = 0.0, sb = 0.0;
    dist.row_factor.resize(a.size());
    dist.col_factor.resize(b.size());
    for (std::size_t j = 0; j < a.size(); ++j) {
        dist.row_factor[j] = std::sqrt(a[j]);
        sa += dist.row_factor[j];
    }
    for (std::size_t k = 0; k < b.size(); ++k) {
        dist.col_factor[k] = std::sqrt(b[k]);
        sb += dist.col_factor[k];
    }
    for (double& x : dist.row_factor) x /= sa;
    for (double& x : dist.col_factor) x /= sb;
    if (gamma > 0.0) {
        const double mass = x_prev.total_mass();
        if (!(mass > 0.0)) {
            throw DomainError("mixture_probabilities: previous iterate has zero mass");
        }
        dist.prev = x_prev.data;
        if (auto* d = std::get_if<DenseMatrix>(&dist.prev)) {
            for (double& x : d->v) x /= mass;
        } else {
            for (double& x : std::get<SparseMatrix>(dist.prev).val) x /= mass;
        }
    } else {
        dist.prev = DenseMatrix{};
    }
    return dist;
}

namespace {

// Bernoulli inclusion for one index; order-independent by construction.
inline bool include_index(std::uint64_t seed, std::size_t j, std::size_t k, double pstar) {
    return rng::uniform01(rng::key(seed, j, k)) < pstar;
}

SampledSupport sample_dense_scan(const SamplingDistribution& dist, long n_s, std::uint64_t seed) {
    SampledSupport sup;
    sup.rows = dist.rows;
    sup.cols = dist.cols;
    sup.seed = seed;
    const double ns = static_cast<double>(n_s);
    const SparseMatrix* sparse_prev =
        dist.gamma > 0.0 ? std::get_if<SparseMatrix>(&dist.prev) : nullptr;
    const DenseMatrix* dense_prev =
        dist.gamma > 0.0 ? std::get_if<DenseMatrix>(&dist.prev) : nullptr;
    for (std::size_t j = 0; j < dist.rows; ++j) {
        std::size_t p = sparse_prev ? sparse_prev->row_start[j] : 0;
        const std::size_t pe = sparse_prev ? sparse_prev->row_start[j + 1] : 0;
        const double* prow = dense_prev ? dense_prev->row(j) : nullptr;
        for (std::size_t k = 0; k < dist.cols; ++k) {
            double prob = dist.rank_one(j, k);
            if (prow != nullptr) {
                prob += dist.gamma * prow[k];
            } else if (sparse_prev != nullptr) {
                while (p < pe && sparse_prev->col[p] < k) ++p;
                if (p < pe && sparse_prev->col[p] == k) prob += dist.gamma * sparse_prev->val[p];
            }
            const double pstar = std::min(1.0, ns * prob);
            if (pstar <= 0.0) continue;
            if (include_index(seed, j, k, pstar)) {
                sup.row.push_back(static_cast<std::uint32_t>(j));
                sup.col.push_back(static_cast<std::uint32_t>(k));
                sup.pstar.push_back(pstar);
            }
        }
    }
    return sup;
}

// Accelerated path: exact Bernoulli draws on the sparse support of the
// previous iterate, plus per-row thinned binomial candidates for the
// complement, where the probability is the pure rank-one term.
SampledSupport sample_factored(const SamplingDistribution& dist, long n_s, std::uint64_t seed) {
    const auto* sparse_prev = std::get_if<SparseMatrix>(&dist.prev);
    if (dist.gamma > 0.0 && sparse_prev == nullptr) {
        throw DomainError("poisson_sample: accelerated path needs a sparse previous iterate");
    }
    SampledSupport sup;
    sup.rows = dist.rows;
    sup.cols = dist.cols;
    sup.seed = seed;
    const double ns = static_cast<double>(n_s);
    double col_max = 0.0;
    for (double c : dist.col_factor) col_max = std::max(col_max, c);

    std::vector<std::pair<std::uint32_t, double>> picked;
    std::vector<bool> on_prev(dist.cols, false);
    for (std::size_t j = 0; j < dist.rows; ++j) {
        picked.clear();
        const std::size_t pb = sparse_prev ? sparse_prev->row_start[j] : 0;
        const std::size_t pe = sparse_prev ? sparse_prev->row_start[j + 1] : 0;
        for (std::size_t p = pb; p < pe; ++p) {
            const std::size_t k = sparse_prev->col[p];
            on_prev[k] = true;
            const double prob = dist.gamma * sparse_prev->val[p] + dist.rank_one(j, k);
            const double pstar = std::min(1.0, ns * prob);
            if (pstar > 0.0 && include_index(seed, j, k, pstar)) picked.emplace_back(k, pstar);
        }
        // Rank-one remainder: geometric skip-sampling proposes candidates at
        // rate q_max ≥ p*, then thinning restores the exact per-index
        // probability.  Indices handled by the sparse pass are excluded.
        const double q_max = std::min(1.0, ns * (1.0 - dist.gamma) * dist.row_factor[j] * col_max);
        if (q_max > 0.0) {
            const std::uint64_t row_seed = rng::key(seed, 0x5eedface, j);
            auto thin = [&](std::size_t k) {
                if (on_prev[k]) return;
                const double pstar = std::min(1.0, ns * dist.rank_one(j, k));
                if (rng::uniform01(rng::key(row_seed, 2, k)) < pstar / q_max) {
                    picked.emplace_back(static_cast<std::uint32_t>(k), pstar);
                }
            };
            if (q_max >= 1.0) {
                for (std::size_t k = 0; k < dist.cols; ++k) thin(k);
            } else {
                const double log1mq = std::log1p(-q_max);
                double pos = -1.0;
                std::size_t draws = 0;
                while (true) {
                    const double gap = rng::uniform01_pos(rng::key(row_seed, 1, draws++));
                    pos += 1.0 + std::floor(std::log(gap) / log1mq);
                    if (!(pos < static_cast<double>(dist.cols))) break;
                    thin(static_cast<std::size_t>(pos));
                }
            }
        }
        for (std::size_t p = pb; p < pe; ++p) on_prev[sparse_prev->col[p]] = false;
        std::sort(picked.begin(), picked.end());
        for (const auto& [k, pstar] : picked) {
            sup.row.push_back(static_cast<std::uint32_t>(j));
            sup.col.push_back(k);
            sup.pstar.push_back(pstar);
        }
    }
    return sup;
}

}  // namespace

SampledSupport poisson_sample(const SamplingDistribution& dist, long n_s, std::uint64_t seed,
                              bool accelerated) {
    if (n_s < 1) throw DomainError("poisson_sample: n_s must be at least 1");
    if (accelerated && dist.gamma > 0.0 && std::holds_alternative<SparseMatrix>(dist.prev)) {
        return sample_factored(dist, n_s, seed);
    }
    return sample_dense_scan(dist, n_s, seed);
}

void SampledSupport::write(std::ostream& os) const {
    char buf[64];
    for (std::size_t i = 0; i < size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%u %u %.17g\n", row[i], col[i], pstar[i]);
        os << buf;
    }
}

SampledSupport SampledSupport::read(std::istream& is, std::size_t rows, std::size_t cols) {
    SampledSupport sup;
    sup.rows = rows;
    sup.cols = cols;
    std::uint32_t j = 0, k = 0;
    double p = 0.0;
    while (is >> j >> k >> p) {
        sup.row.push_back(j);
        sup.col.push_back(k);
        sup.pstar.push_back(p);
    }
    return sup;
}

KernelMatrix sparsify_kernel(const std::function<double(std::size_t, std::size_t)>& kernel_entry,
                             const SampledSupport& support) {
    SparseBuilder builder(support.rows, support.cols);
    for (std::size_t i = 0; i < support.size(); ++i) {
        const double psi = kernel_entry(support.row[i], support.col[i]);
        if (!(psi >= 0.0) || !std::isfinite(psi)) {
            throw DomainError("sparsify_kernel: invalid kernel entry at (" +
                              std::to_string(support.row[i]) + "," +
                              std::to_string(support.col[i]) + ")");
        }
        builder.push(support.row[i], support.col[i], psi / support.pstar[i]);
    }
    return KernelMatrix(builder.take());
}

SparseMatrix effective_cost(const std::function<double(std::size_t, std::size_t)>& cost_entry,
                            double lambda, const SampledSupport& support) {
    if (!(lambda > 0.0)) throw DomainError("effective_cost: lambda must be positive");
    SparseBuilder builder(support.rows, support.cols);
    for (std::size_t i = 0; i < support.size(); ++i) {
        builder.push(support.row[i], support.col[i],
                     cost_entry(support.row[i], support.col[i]) +
                         lambda * std::log(support.pstar[i]));
    }
    return builder.take();
}

}  // namespace mbot
