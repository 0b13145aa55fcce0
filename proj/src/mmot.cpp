#include "mbot/mmot.hpp"

#include <algorithm>
#include <cmath>

namespace mbot {

MmotOracle::MmotOracle(const DiscreteSystem& sys) : sys_(&sys) {
    inv_rho_.reserve(sys.size());
    for (double m : sys.rho) {
        if (!(m > 0.0)) throw DomainError("mmot oracle: nonpositive truncated mass");
        inv_rho_.push_back(1.0 / m);
    }
}

std::vector<std::pair<Marginal, Marginal>> MmotOracle::marginals() const {
    std::vector<std::pair<Marginal, Marginal>> out;
    const Marginal m = sys_->marginal();
    out.reserve(block_count());
    for (std::size_t i = 0; i < block_count(); ++i) out.emplace_back(m, m);
    return out;
}

std::vector<double> MmotOracle::delta_weights() const { return inv_rho_; }

namespace {

// ⟨Y, C⟩ + β Σ_k y_kk/ϱ_k for one block.
double linear_term(const Plan& y, const DiscreteSystem& sys,
                   const std::vector<double>& inv_rho) {
    double t = 0.0;
    for_each_entry(y.data, [&](std::size_t j, std::size_t k, double v) {
        if (v == 0.0) return;
        t += v * sys.cost(j, k);
        if (j == k) t += sys.beta * v * inv_rho[j];
    });
    return t;
}

// ⟨Y_a, Λ^{-1} Y_b C⟩ driven from the sparser side (the bilinear form is
// symmetric in the two blocks).
double cross_coulomb(const Plan& ya, const Plan& yb, const DiscreteSystem& sys,
                     const std::vector<double>& inv_rho) {
    const auto* da = std::get_if<DenseMatrix>(&ya.data);
    const auto* db = std::get_if<DenseMatrix>(&yb.data);
    if (da != nullptr && db != nullptr && sys.has_dense_cost()) {
        DenseMatrix scaled = *db;
        for (std::size_t j = 0; j < scaled.rows; ++j) {
            double* r = scaled.row(j);
            for (std::size_t k = 0; k < scaled.cols; ++k) r[k] *= inv_rho[j];
        }
        DenseMatrix z;
        matmul(scaled, sys.cost_dense, z);
        return dot(*da, z);
    }
    const Plan& outer = (da == nullptr) ? ya : yb;   // prefer a sparse outer loop
    const Plan& inner = (da == nullptr) ? yb : ya;
    double t = 0.0;
    for_each_entry(outer.data, [&](std::size_t j, std::size_t l, double v) {
        if (v == 0.0) return;
        // Σ_{l'} inner(j, l') c(l', l), row j of the other block.
        double acc = 0.0;
        if (const auto* di = std::get_if<DenseMatrix>(&inner.data)) {
            const double* r = di->row(j);
            for (std::size_t lp = 0; lp < di->cols; ++lp) {
                if (r[lp] != 0.0) acc += r[lp] * sys.cost(lp, l);
            }
        } else {
            const auto& si = std::get<SparseMatrix>(inner.data);
            for (std::size_t p = si.row_start[j]; p < si.row_start[j + 1]; ++p) {
                acc += si.val[p] * sys.cost(si.col[p], l);
            }
        }
        t += v * inv_rho[j] * acc;
    });
    return t;
}

// β ⟨Y_a, Λ^{-2} Y_b⟩ over the common support.
double cross_overlap(const Plan& ya, const Plan& yb, const DiscreteSystem& sys,
                     const std::vector<double>& inv_rho) {
    const Plan& outer = ya.is_dense() && !yb.is_dense() ? yb : ya;
    const Plan& other = (&outer == &ya) ? yb : ya;
    double t = 0.0;
    for_each_entry(outer.data, [&](std::size_t j, std::size_t k, double v) {
        if (v == 0.0) return;
        const double w = other.at(j, k);
        if (w != 0.0) t += v * w * inv_rho[j] * inv_rho[j];
    });
    return sys.beta * t;
}

}  // namespace

double MmotOracle::objective(std::span<const Plan> y) const {
    if (y.size() != block_count()) throw ShapeError("mmot objective: block count mismatch");
    double f = 0.0;
    for (const Plan& yi : y) f += linear_term(yi, *sys_, inv_rho_);
    for (std::size_t i = 0; i < y.size(); ++i) {
        for (std::size_t j = i + 1; j < y.size(); ++j) {
            f += cross_coulomb(y[i], y[j], *sys_, inv_rho_);
            f += cross_overlap(y[i], y[j], *sys_, inv_rho_);
        }
    }
    return f;
}

DenseMatrix MmotOracle::block_gradient(std::size_t i, std::span<const Plan> y) const {
    const std::size_t n = sys_->size();
    if (!sys_->has_dense_cost()) {
        throw NumericalError(
            "mmot gradient: dense cost beyond the memory guard; use entrywise access");
    }
    // S = Σ_{j≠i} Y_j, rows pre-scaled by 1/ϱ.
    DenseMatrix scaled(n, n, 0.0);
    for (std::size_t j = 0; j < y.size(); ++j) {
        if (j == i) continue;
        for_each_entry(y[j].data, [&](std::size_t r, std::size_t c, double v) {
            scaled.at(r, c) += v;
        });
    }
    DenseMatrix sum_scaled = scaled;
    for (std::size_t r = 0; r < n; ++r) {
        double* row = sum_scaled.row(r);
        for (std::size_t c = 0; c < n; ++c) row[c] *= inv_rho_[r];
    }
    DenseMatrix grad;
    matmul(sum_scaled, sys_->cost_dense, grad);
    for (std::size_t r = 0; r < n; ++r) {
        double* g = grad.row(r);
        const double* s = scaled.row(r);
        const double* c = sys_->cost_dense.row(r);
        const double w2 = sys_->beta * inv_rho_[r] * inv_rho_[r];
        for (std::size_t k = 0; k < n; ++k) g[k] += c[k] + w2 * s[k];
        g[r] += sys_->beta * inv_rho_[r];
    }
    return grad;
}

double MmotOracle::gradient_entry(std::size_t i, std::span<const Plan> y, std::size_t j,
                                  std::size_t k) const {
    double g = sys_->cost(j, k);
    if (j == k) g += sys_->beta * inv_rho_[j];
    for (std::size_t b = 0; b < y.size(); ++b) {
        if (b == i) continue;
        double coul = 0.0, overlap = 0.0;
        if (const auto* d = std::get_if<DenseMatrix>(&y[b].data)) {
            const double* r = d->row(j);
            for (std::size_t lp = 0; lp < d->cols; ++lp) {
                if (r[lp] != 0.0) coul += r[lp] * sys_->cost(lp, k);
            }
            overlap = r[k];
        } else {
            const auto& s = std::get<SparseMatrix>(y[b].data);
            for (std::size_t p = s.row_start[j]; p < s.row_start[j + 1]; ++p) {
                coul += s.val[p] * sys_->cost(s.col[p], k);
                if (s.col[p] == k) overlap = s.val[p];
            }
        }
        g += inv_rho_[j] * coul + sys_->beta * inv_rho_[j] * inv_rho_[j] * overlap;
    }
    return g;
}

std::vector<double> sce_potential(const std::vector<std::vector<double>>& dual_v) {
    if (dual_v.empty()) throw DomainError("sce_potential: no dual vectors");
    const std::size_t n = dual_v.front().size();
    std::vector<double> v(n, 0.0);
    for (const auto& vi : dual_v) {
        if (vi.size() != n) throw ShapeError("sce_potential: dual length mismatch");
        for (std::size_t k = 0; k < n; ++k) v[k] += vi[k];
    }
    const double scale = 1.0 / static_cast<double>(dual_v.size());
    for (double& x : v) x *= scale;
    const double vmin = *std::min_element(v.begin(), v.end());
    for (double& x : v) x -= vmin;
    return v;
}

std::vector<MappedPoint> ot_map(const Plan& y, const DiscreteSystem& sys) {
    if (y.rows() != sys.size() || y.cols() != sys.size()) {
        throw ShapeError("ot_map: plan does not match system");
    }
    std::vector<MappedPoint> points;
    points.reserve(sys.size());
    std::vector<std::array<double, 3>> acc(sys.size(), {0, 0, 0});
    for_each_entry(y.data, [&](std::size_t j, std::size_t k, double v) {
        for (int d = 0; d < sys.dim; ++d) acc[j][d] += v * sys.bary[k][d];
    });
    for (std::size_t j = 0; j < sys.size(); ++j) {
        if (!(sys.rho[j] > 0.0)) continue;  // truncated row, nothing to map
        MappedPoint p;
        p.source = j;
        p.src = sys.bary[j];
        for (int d = 0; d < sys.dim; ++d) p.img[d] = acc[j][d] / sys.rho[j];
        points.push_back(p);
    }
    return points;
}

ErrorMetrics error_metrics(double obj, double obj_star, std::span<const double> v,
                           std::span<const double> v_star) {
    if (obj_star == 0.0) throw DomainError("error_metrics: reference objective is zero");
    if (v.size() != v_star.size()) throw ShapeError("error_metrics: potential length mismatch");
    ErrorMetrics e;
    e.err_obj = std::fabs((obj - obj_star) / obj_star);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
        num = std::max(num, std::fabs(v[k] - v_star[k]));
        den = std::max(den, std::fabs(v_star[k]));
    }
    if (!(den > 0.0)) throw DomainError("error_metrics: reference potential is zero");
    e.err_sce = num / den;
    return e;
}

}  // namespace mbot
