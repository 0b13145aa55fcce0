#include "mbot/density.hpp"

#include <cmath>

namespace mbot {

namespace {

// 15-point Gauss–Legendre nodes/weights on [-1, 1].
constexpr double kNodes[15] = {
    -0.98799251802048542849, -0.93727339240070590431, -0.84820658341042721620,
    -0.72441773136017004742, -0.57097217260853884754, -0.39415134707756336990,
    -0.20119409399743452230, 0.0,
    0.20119409399743452230,  0.39415134707756336990,  0.57097217260853884754,
    0.72441773136017004742,  0.84820658341042721620,  0.93727339240070590431,
    0.98799251802048542849};
constexpr double kWeights[15] = {
    0.03075324199611726835, 0.07036604748810812471, 0.10715922046717193501,
    0.13957067792615431445, 0.16626920581699393355, 0.18616100001556221103,
    0.19843148532711157646, 0.20257824192556127288,
    0.19843148532711157646, 0.18616100001556221103, 0.16626920581699393355,
    0.13957067792615431445, 0.10715922046717193501, 0.07036604748810812471,
    0.03075324199611726835};

double gl15(const std::function<double(double)>& f, double lo, double hi) {
    const double c = 0.5 * (lo + hi);
    const double h = 0.5 * (hi - lo);
    double s = 0.0;
    for (int i = 0; i < 15; ++i) s += kWeights[i] * f(c + h * kNodes[i]);
    return s * h;
}

double adaptive_rec(const std::function<double(double)>& f, double lo, double hi, double whole,
                    double tol, int depth) {
    const double mid = 0.5 * (lo + hi);
    const double left = gl15(f, lo, mid);
    const double right = gl15(f, mid, hi);
    const double split = left + right;
    if (std::fabs(split - whole) <= tol || depth >= 40) return split;
    return adaptive_rec(f, lo, mid, left, 0.5 * tol, depth + 1) +
           adaptive_rec(f, mid, hi, right, 0.5 * tol, depth + 1);
}

}  // namespace

double integrate_adaptive(const std::function<double(double)>& f, double lo, double hi,
                          double abs_tol) {
    if (!(hi > lo)) return 0.0;
    return adaptive_rec(f, lo, hi, gl15(f, lo, hi), abs_tol, 0);
}

double solve_increasing(const std::function<double(double)>& f, double target, double lo,
                        double hi, double x_tol) {
    double flo = f(lo) - target;
    double fhi = f(hi) - target;
    if (flo > 0.0) return lo;
    if (fhi < 0.0) return hi;
    for (int it = 0; it < 200 && hi - lo > x_tol; ++it) {
        double mid;
        // Secant proposal inside the bracket, falling back to bisection.
        if (fhi - flo > 0.0) {
            mid = lo - flo * (hi - lo) / (fhi - flo);
            const double margin = 0.01 * (hi - lo);
            if (!(mid > lo + margin) || !(mid < hi - margin)) mid = 0.5 * (lo + hi);
        } else {
            mid = 0.5 * (lo + hi);
        }
        const double fm = f(mid) - target;
        if (fm < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
    }
    return 0.5 * (lo + hi);
}

double Density::value(const std::array<double, 3>& r) const {
    double v = 0.0;
    for (const GaussianTerm& g : gaussians) {
        double sq = 0.0;
        for (int d = 0; d < dim; ++d) sq += (r[d] - g.center[d]) * (r[d] - g.center[d]);
        v += g.weight * std::exp(-g.alpha * sq);
    }
    if (cosine1d) v += std::cos(M_PI * r[0]) + 1.0;
    return v;
}

double Density::box_mass(const std::array<double, 3>& blo, const std::array<double, 3>& bhi) const {
    double mass = 0.0;
    for (const GaussianTerm& g : gaussians) {
        double prod = g.weight;
        for (int d = 0; d < dim; ++d) {
            const double a = g.alpha;
            const double c = g.center[d];
            prod *= integrate_adaptive(
                [a, c](double x) { return std::exp(-a * (x - c) * (x - c)); }, blo[d], bhi[d],
                1e-12);
        }
        mass += prod;
    }
    if (cosine1d) {
        mass += integrate_adaptive([](double x) { return std::cos(M_PI * x) + 1.0; }, blo[0],
                                   bhi[0], 1e-12);
    }
    return mass;
}

double Density::total_mass() const { return box_mass(lo, hi); }

double Density::cdf(double x) const {
    if (dim != 1) throw DomainError("density: cdf is one-dimensional only");
    std::array<double, 3> l = lo, h = lo;
    h[0] = x;
    return x <= lo[0] ? 0.0 : box_mass(l, h);
}

double Density::quantile(double mass) const {
    if (dim != 1) throw DomainError("density: quantile is one-dimensional only");
    return solve_increasing([this](double x) { return cdf(x); }, mass, lo[0], hi[0], 1e-13);
}

Density system_density(int id) {
    Density d;
    switch (id) {
        case 1:
            d.dim = 1;
            d.lo = {-1, 0, 0};
            d.hi = {1, 0, 0};
            d.cosine1d = true;
            d.n_electrons = 3;
            break;
        case 2:
            d.dim = 1;
            d.lo = {-1.5, 0, 0};
            d.hi = {1.5, 0, 0};
            d.gaussians = {{2.0, 6.0, {-0.5, 0, 0}}, {1.5, 4.0, {0.5, 0, 0}}};
            d.n_electrons = 3;
            break;
        case 3:
            d.dim = 1;
            d.lo = {-2, 0, 0};
            d.hi = {2, 0, 0};
            d.gaussians = {{1.0, 1.0 / std::sqrt(M_PI), {0, 0, 0}}};
            d.n_electrons = 7;
            break;
        case 4:
            d.dim = 1;
            d.lo = {-3, 0, 0};
            d.hi = {3, 0, 0};
            d.gaussians = {{1.0, 4.0, {-2.0, 0, 0}},     {1.0, 4.0, {-1.5, 0, 0}},
                           {1.0, 4.0, {-1.0, 0, 0}},     {1.0, 4.0, {-0.5, 0, 0}},
                           {1.0, 4.0, {2.0 / 3.0, 0, 0}}, {1.0, 4.0, {4.0 / 3.0, 0, 0}},
                           {1.0, 4.0, {2.0, 0, 0}}};
            d.n_electrons = 7;
            break;
        case 5:
            d.dim = 2;
            d.lo = {-3, -3, 0};
            d.hi = {3, 3, 0};
            d.gaussians = {{1.0, 3.0, {0.0, 0.96, 0}},
                           {1.0, 3.0, {1.032, -0.84, 0}},
                           {1.0, 3.0, {-1.032, -0.84, 0}}};
            d.n_electrons = 3;
            break;
        case 6:
            d.dim = 2;
            d.lo = {-3, -3, 0};
            d.hi = {3, 3, 0};
            d.gaussians = {{2.0, 3.0, {0.0, 1.2, 0}},
                           {1.0, 3.0, {1.29, -1.05, 0}},
                           {1.0, 3.0, {-1.29, -1.05, 0}}};
            d.n_electrons = 4;
            break;
        case 7:
            d.dim = 3;
            d.lo = {-2, -2, -2};
            d.hi = {2, 2, 2};
            d.gaussians = {{1.0, 3.0, {-1, -1, -1}},
                           {1.0, 3.0, {1, 1, -1}},
                           {1.0, 3.0, {-1, 1, 1}}};
            d.n_electrons = 3;
            break;
        case 8:
            d.dim = 3;
            d.lo = {-2, -1, -1};
            d.hi = {2, 1, 1};
            d.gaussians = {{3.0, 4.0, {-1, 0, 0}}, {1.0, 4.0, {1, 0, 0}}};
            d.n_electrons = 4;
            break;
        default:
            throw DomainError("system_density: unknown system " + std::to_string(id));
    }
    return d;
}

int system_count() { return 8; }

}  // namespace mbot
