#include "mbot/oracle1d.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mbot {

namespace {

// Cumulative mass with a fine precomputed table; lookups refine locally, so
// repeated quantile inversions stay cheap and accurate.
class Cdf1d {
public:
    Cdf1d(const Density& density, int table_size = 2048) : d_(&density) {
        xs_.resize(table_size + 1);
        fs_.resize(table_size + 1);
        const double lo = density.lo[0];
        const double hi = density.hi[0];
        for (int i = 0; i <= table_size; ++i) {
            xs_[i] = lo + (hi - lo) * static_cast<double>(i) / table_size;
        }
        fs_[0] = 0.0;
        for (int i = 1; i <= table_size; ++i) {
            fs_[i] = fs_[i - 1] + integrate_adaptive([this](double x) { return line_value(x); },
                                                     xs_[i - 1], xs_[i], 1e-13);
        }
    }

    double total() const { return fs_.back(); }

    double at(double x) const {
        if (x <= xs_.front()) return 0.0;
        if (x >= xs_.back()) return total();
        const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
        const std::size_t i = static_cast<std::size_t>(it - xs_.begin()) - 1;
        return fs_[i] + integrate_adaptive([this](double t) { return line_value(t); }, xs_[i], x,
                                           1e-13);
    }

    double inv(double mass) const {
        if (mass <= 0.0) return xs_.front();
        if (mass >= total()) return xs_.back();
        const auto it = std::upper_bound(fs_.begin(), fs_.end(), mass);
        std::size_t i = static_cast<std::size_t>(it - fs_.begin());
        if (i > 0) --i;
        const std::size_t j = std::min(i + 1, fs_.size() - 1);
        return solve_increasing([this](double x) { return at(x); }, mass, xs_[i], xs_[j], 1e-13);
    }

    double line_value(double x) const { return d_->value({x, 0.0, 0.0}); }

private:
    const Density* d_;
    std::vector<double> xs_, fs_;
};

}  // namespace

struct Oracle1d::Impl {
    Density density;
    int n_e = 2;
    std::unique_ptr<Cdf1d> cdf;
    double scale = 1.0;  // N_e / total raw mass
    double obj_star = 0.0;
    std::vector<double> breaks;  // interior wrap points, ascending

    double comotion(int i, double x) const {
        if (i <= 1) return x;
        const double f = cdf->at(x) * scale;  // in [0, N_e]
        double target = std::fmod(f + static_cast<double>(i - 1), static_cast<double>(n_e));
        return cdf->inv(target / scale);
    }

    // Σ_{1≤i<j≤N_e} 1/|f_i(x) − f_j(x)|
    double pair_sum(double x) const {
        std::vector<double> pos(static_cast<std::size_t>(n_e));
        pos[0] = x;
        for (int i = 2; i <= n_e; ++i) pos[static_cast<std::size_t>(i - 1)] = comotion(i, x);
        double s = 0.0;
        for (int i = 0; i < n_e; ++i) {
            for (int j = i + 1; j < n_e; ++j) {
                s += 1.0 / std::fabs(pos[static_cast<std::size_t>(i)] -
                                     pos[static_cast<std::size_t>(j)]);
            }
        }
        return s;
    }

    double force(double x) const {
        double s = 0.0;
        for (int i = 2; i <= n_e; ++i) {
            const double gap = x - comotion(i, x);
            s += (gap > 0.0 ? 1.0 : -1.0) / (gap * gap);
        }
        return s;
    }

    // Integrates fn over [a, b], splitting at interior wrap points.
    double integrate_split(const std::function<double(double)>& fn, double a, double b,
                           double tol) const {
        double total = 0.0;
        double cur = a;
        for (double brk : breaks) {
            if (brk > cur && brk < b) {
                total += integrate_adaptive(fn, cur, brk, tol);
                cur = brk;
            }
        }
        total += integrate_adaptive(fn, cur, b, tol);
        return total;
    }
};

Oracle1d::Oracle1d(const Density& density, int n_electrons) : impl_(new Impl) {
    if (density.dim != 1) throw DomainError("oracle_1d: density must be one-dimensional");
    impl_->density = density;
    impl_->n_e = n_electrons > 0 ? n_electrons : density.n_electrons;
    if (impl_->n_e < 2) throw DomainError("oracle_1d: need at least two electrons");
    impl_->cdf = std::make_unique<Cdf1d>(impl_->density);
    const double total = impl_->cdf->total();
    if (!(total > 0.0)) throw DomainError("oracle_1d: density carries no mass");
    impl_->scale = static_cast<double>(impl_->n_e) / total;
    for (int s = 1; s < impl_->n_e; ++s) {
        impl_->breaks.push_back(impl_->cdf->inv(static_cast<double>(s) / impl_->scale));
    }
    // obj* = ∫ (ρ/N_e) Σ_{i<j} |f_i − f_j|^{-1}
    const Impl& im = *impl_;
    impl_->obj_star = impl_->integrate_split(
        [&im](double x) {
            return im.cdf->line_value(x) * im.scale / static_cast<double>(im.n_e) * im.pair_sum(x);
        },
        density.lo[0], density.hi[0], 1e-8);
}

Oracle1d::~Oracle1d() = default;
Oracle1d::Oracle1d(Oracle1d&&) noexcept = default;
Oracle1d& Oracle1d::operator=(Oracle1d&&) noexcept = default;

int Oracle1d::n_electrons() const { return impl_->n_e; }
double Oracle1d::objective() const { return impl_->obj_star; }
double Oracle1d::comotion(int i, double x) const { return impl_->comotion(i, x); }
const std::vector<double>& Oracle1d::breakpoints() const { return impl_->breaks; }

std::vector<double> Oracle1d::potential_at(std::span<const double> xs) const {
    const Impl& im = *impl_;
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return xs[a] < xs[b];
    });
    std::vector<double> v(xs.size(), 0.0);
    double acc = 0.0;
    double prev = im.density.lo[0];
    auto fn = [&im](double x) { return im.force(x); };
    for (std::size_t idx : order) {
        const double x = xs[idx];
        acc += im.integrate_split(fn, prev, x, 1e-9);
        v[idx] = acc;
        prev = x;
    }
    const double vmin = *std::min_element(v.begin(), v.end());
    for (double& x : v) x -= vmin;
    return v;
}

}  // namespace mbot
