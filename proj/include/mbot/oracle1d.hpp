#pragma once

#include <memory>
#include <span>

#include "mbot/density.hpp"

namespace mbot {

// Quantile-shift construction of the optimal 1-D co-motion maps: with F the
// cumulative of ρ scaled to total mass N_e,
//   f_i(x) = F^{-1}((F(x) + i − 1) mod N_e),   i = 1..N_e  (f_1 = identity).
// Supplies the reference objective (adaptive quadrature of the pairwise
// Coulomb sum) and the reference potential from the force-balance relation
//   v'(r) = Σ_{i≥2} sign(r − f_i(r)) / (r − f_i(r))².
class Oracle1d {
public:
    Oracle1d(const Density& density, int n_electrons = 0);  // 0 → density.n_electrons
    ~Oracle1d();
    Oracle1d(Oracle1d&&) noexcept;
    Oracle1d& operator=(Oracle1d&&) noexcept;

    int n_electrons() const;
    double objective() const;  // obj*
    double comotion(int i, double x) const;
    // Barycenter quantiles wrap the maps; quadrature splits there.
    const std::vector<double>& breakpoints() const;
    // v* at the given points, min-shifted to zero over those points.
    std::vector<double> potential_at(std::span<const double> xs) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace mbot
