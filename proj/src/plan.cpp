#include "mbot/plan.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace mbot {

Plan::Plan(MatrixStorage d, Marginal rt, Marginal ct)
    : data(std::move(d)), row_target(std::move(rt)), col_target(std::move(ct)) {
    if (storage_rows(data) != row_target.size() || storage_cols(data) != col_target.size()) {
        throw ShapeError("plan: storage shape does not match targets");
    }
    if (const auto* s = std::get_if<SparseMatrix>(&data)) s->validate();
    bool neg = false;
    for_each_entry(data, [&](std::size_t, std::size_t, double v) {
        if (v < 0.0 || !std::isfinite(v)) neg = true;
    });
    if (neg) throw DomainError("plan: negative or non-finite entry");
}

std::vector<double> Plan::row_sums() const {
    std::vector<double> r(rows(), 0.0);
    for_each_entry(data, [&](std::size_t j, std::size_t, double v) { r[j] += v; });
    return r;
}

std::vector<double> Plan::col_sums() const {
    std::vector<double> c(cols(), 0.0);
    for_each_entry(data, [&](std::size_t, std::size_t k, double v) { c[k] += v; });
    return c;
}

double marginal_violation(const Plan& plan) {
    const auto rs = plan.row_sums();
    const auto cs = plan.col_sums();
    double worst = 0.0;
    for (std::size_t j = 0; j < rs.size(); ++j) {
        worst = std::max(worst, std::fabs(rs[j] - plan.row_target[j]));
    }
    for (std::size_t k = 0; k < cs.size(); ++k) {
        worst = std::max(worst, std::fabs(cs[k] - plan.col_target[k]));
    }
    return worst;
}

double diameter_bound(const Marginal& a, const Marginal& b) {
    const double scale = std::max(a.total(), b.total());
    if (std::fabs(a.total() - b.total()) > 1e-9 * std::max(1.0, scale)) {
        throw MassMismatchError("diameter_bound: marginal totals differ");
    }
    const double da = std::sqrt(static_cast<double>(a.size())) * a.max();
    const double db = std::sqrt(static_cast<double>(b.size())) * b.max();
    return std::min(da, db);
}

void write_plan_coo(std::ostream& os, const Plan& plan) {
    std::size_t nnz = 0;
    for_each_entry(plan.data, [&](std::size_t, std::size_t, double v) { nnz += (v != 0.0); });
    os << plan.rows() << ' ' << plan.cols() << ' ' << nnz << '\n';
    char buf[64];
    for_each_entry(plan.data, [&](std::size_t j, std::size_t k, double v) {
        if (v == 0.0) return;
        std::snprintf(buf, sizeof(buf), "%zu %zu %.17g\n", j, k, v);
        os << buf;
    });
}

Plan read_plan_coo(std::istream& is, Marginal row_target, Marginal col_target) {
    std::size_t m = 0, n = 0, nnz = 0;
    if (!(is >> m >> n >> nnz)) throw DomainError("plan: malformed coordinate header");
    SparseBuilder builder(m, n);
    for (std::size_t i = 0; i < nnz; ++i) {
        std::size_t j = 0, k = 0;
        double v = 0.0;
        if (!(is >> j >> k >> v)) throw DomainError("plan: truncated coordinate data");
        builder.push(j, k, v);
    }
    return Plan(builder.take(), std::move(row_target), std::move(col_target));
}

}  // namespace mbot
