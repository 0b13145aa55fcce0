#include "mbot/entropy.hpp"

#include <cmath>
#include <limits>

namespace mbot {

double neg_entropy(const MatrixStorage& t) {
    double h = 0.0;
    bool bad = false;
    for_each_entry(t, [&](std::size_t, std::size_t, double x) {
        if (x < 0.0 || !std::isfinite(x)) {
            bad = true;
        } else if (x > 0.0) {
            h += x * (std::log(x) - 1.0);
        }
    });
    if (bad) throw DomainError("neg_entropy: negative or non-finite entry");
    return h;
}

double neg_entropy(const Plan& t) { return neg_entropy(t.data); }

double kl_divergence(const MatrixStorage& t, const MatrixStorage& t_ref) {
    if (storage_rows(t) != storage_rows(t_ref) || storage_cols(t) != storage_cols(t_ref)) {
        throw ShapeError("kl_divergence: shape mismatch");
    }
    // Merge the two supports row by row; absent entries count as zero.
    const std::size_t m = storage_rows(t);
    const std::size_t n = storage_cols(t);
    DenseMatrix lhs(m, n, 0.0), rhs(m, n, 0.0);
    bool bad = false;
    for_each_entry(t, [&](std::size_t j, std::size_t k, double x) {
        if (x < 0.0 || !std::isfinite(x)) bad = true;
        lhs.at(j, k) = x;
    });
    for_each_entry(t_ref, [&](std::size_t j, std::size_t k, double x) {
        if (x < 0.0 || !std::isfinite(x)) bad = true;
        rhs.at(j, k) = x;
    });
    if (bad) throw DomainError("kl_divergence: negative or non-finite entry");
    double d = 0.0;
    for (std::size_t i = 0; i < lhs.v.size(); ++i) {
        const double x = lhs.v[i];
        const double y = rhs.v[i];
        if (x > 0.0) {
            if (y == 0.0) return std::numeric_limits<double>::infinity();
            d += x * (std::log(x) - std::log(y)) - (x - y);
        } else {
            d += y;  // x log x → 0, remaining term −(0 − y)
        }
    }
    return d;
}

double product_entropy_bound(const Marginal& a, const Marginal& b) {
    double h = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        for (std::size_t k = 0; k < b.size(); ++k) {
            const double x = a[j] * b[k];
            if (x > 0.0) h += x * (std::log(x) - 1.0);
        }
    }
    return -h;
}

}  // namespace mbot
