#pragma once

#include <array>
#include <functional>
#include <vector>

#include "mbot/common.hpp"

namespace mbot {

// Adaptive Gauss–Legendre quadrature (15-point panels, bisected until the
// panel estimate stabilizes to the requested absolute tolerance).
double integrate_adaptive(const std::function<double(double)>& f, double lo, double hi,
                          double abs_tol = 1e-10);

// Root of increasing f on [lo, hi] (bisection with secant acceleration).
double solve_increasing(const std::function<double(double)>& f, double target, double lo,
                        double hi, double x_tol = 1e-13);

struct GaussianTerm {
    double weight = 1.0;
    double alpha = 1.0;                      // decay: exp(−α‖r−c‖²)
    std::array<double, 3> center{0, 0, 0};
};

// Single-particle density on an axis-aligned box domain: a sum of Gaussian
// bumps plus an optional 1-D cosine term cos(πr)+1.
struct Density {
    int dim = 1;
    std::array<double, 3> lo{0, 0, 0};
    std::array<double, 3> hi{0, 0, 0};
    std::vector<GaussianTerm> gaussians;
    bool cosine1d = false;
    int n_electrons = 2;

    double value(const std::array<double, 3>& r) const;
    // ∫ over an axis-aligned sub-box (separable per term).
    double box_mass(const std::array<double, 3>& blo, const std::array<double, 3>& bhi) const;
    double total_mass() const;

    // 1-D cumulative mass from the domain's left edge.
    double cdf(double x) const;
    // x with cdf(x) = mass.
    double quantile(double mass) const;
};

// The eight catalogued systems (1-D: 1–4, 2-D: 5–6, 3-D: 7–8).
Density system_density(int id);
int system_count();

}  // namespace mbot
