#pragma once

#include <random>

#include "mbot/matrix.hpp"
#include "mbot/oracle.hpp"
#include "mbot/sinkhorn.hpp"

namespace mbot::testing {

inline Marginal random_marginal(std::mt19937& gen, std::size_t n, double total = 1.0) {
    std::uniform_real_distribution<double> dist(0.2, 1.0);
    std::vector<double> w(n);
    double s = 0.0;
    for (double& x : w) {
        x = dist(gen);
        s += x;
    }
    for (double& x : w) x *= total / s;
    return Marginal(w);
}

inline DenseMatrix random_matrix(std::mt19937& gen, std::size_t m, std::size_t n, double lo,
                                 double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    DenseMatrix w(m, n);
    for (double& x : w.v) x = dist(gen);
    return w;
}

inline Plan random_feasible(std::mt19937& gen, const Marginal& a, const Marginal& b) {
    std::uniform_real_distribution<double> dist(0.05, 1.0);
    DenseMatrix k(a.size(), b.size());
    for (double& x : k.v) x = dist(gen);
    const KernelMatrix kernel{MatrixStorage(std::move(k))};
    SinkhornConfig cfg;
    cfg.s_max = 5000;
    cfg.feas_tol = 1e-12;
    const auto res = sinkhorn_solve(kernel, a, b, cfg);
    return recover_plan(res.state, kernel, a, b);
}

// f(X, Y) = ⟨X, A Y B⟩ with square blocks; nonnegative A, B keep f ≥ 0 over
// the polytopes, so f_lower = 0 is a valid bound.
class BilinearOracle final : public ObjectiveOracle {
public:
    BilinearOracle(DenseMatrix a, DenseMatrix b) : a_(std::move(a)), b_(std::move(b)) {}
    std::size_t block_count() const override { return 2; }
    std::pair<std::size_t, std::size_t> block_shape(std::size_t i) const override {
        return i == 0 ? std::make_pair(a_.rows, b_.cols) : std::make_pair(a_.cols, b_.rows);
    }
    double objective(std::span<const Plan> x) const override {
        return dot(dense(x[0]), mapped(x[1]));
    }
    DenseMatrix block_gradient(std::size_t i, std::span<const Plan> x) const override {
        if (i == 0) return mapped(x[1]);
        DenseMatrix at(a_.cols, a_.rows), bt(b_.cols, b_.rows);
        for (std::size_t r = 0; r < a_.rows; ++r) {
            for (std::size_t c = 0; c < a_.cols; ++c) at.at(c, r) = a_.at(r, c);
        }
        for (std::size_t r = 0; r < b_.rows; ++r) {
            for (std::size_t c = 0; c < b_.cols; ++c) bt.at(c, r) = b_.at(r, c);
        }
        DenseMatrix tmp, out;
        matmul(at, dense(x[0]), tmp);
        matmul(tmp, bt, out);
        return out;
    }
    // Spectral-norm product bound on the block Lipschitz constant.
    double lipschitz_bound() const { return spectral_norm(a_) * spectral_norm(b_); }

    static double spectral_norm(const DenseMatrix& m) {
        std::vector<double> x(m.cols, 1.0), y;
        double norm = 0.0;
        for (int it = 0; it < 200; ++it) {
            matvec(MatrixStorage(m), x, y);
            matvec_transposed(MatrixStorage(m), y, x);
            double nx = 0.0;
            for (double t : x) nx += t * t;
            nx = std::sqrt(nx);
            for (double& t : x) t /= nx;
            double ny = 0.0;
            for (double t : y) ny += t * t;
            norm = std::sqrt(nx);
            (void)ny;
        }
        matvec(MatrixStorage(m), x, y);
        double ny = 0.0;
        for (double t : y) ny += t * t;
        return std::sqrt(ny);
    }

private:
    static DenseMatrix dense(const Plan& p) {
        DenseMatrix d(p.rows(), p.cols(), 0.0);
        for_each_entry(p.data, [&](std::size_t j, std::size_t k, double v) { d.at(j, k) = v; });
        return d;
    }
    DenseMatrix mapped(const Plan& y) const {
        DenseMatrix tmp, out;
        matmul(a_, dense(y), tmp);
        matmul(tmp, b_, out);
        return out;
    }
    DenseMatrix a_, b_;
};

}  // namespace mbot::testing
