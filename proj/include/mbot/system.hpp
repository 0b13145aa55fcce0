#pragma once

#include <cmath>
#include <iosfwd>

#include "mbot/marginal.hpp"
#include "mbot/matrix.hpp"
#include "mbot/mesh.hpp"

namespace mbot {

// Discretized electron system: truncated masses, barycenters, Coulomb cost.
struct DiscreteSystem {
    int dim = 1;
    int n_electrons = 2;
    double beta = 1.0;
    bool unit_mass = true;                        // ϱ normalized to total 1 (else to N_e)
    std::vector<double> rho;                      // truncated, renormalized masses
    std::vector<std::array<double, 3>> bary;      // surviving barycenters
    std::vector<std::size_t> cell_index;          // surviving atom → mesh cell
    DenseMatrix cost_dense;                       // empty when beyond the memory guard

    std::size_t size() const { return rho.size(); }
    bool has_dense_cost() const { return cost_dense.rows == size() && size() > 0; }

    // c_kl = ‖d_k − d_l‖^{-1}, zero diagonal.
    double cost(std::size_t k, std::size_t l) const {
        if (k == l) return 0.0;
        if (has_dense_cost()) return cost_dense.at(k, l);
        double sq = 0.0;
        for (int d = 0; d < dim; ++d) {
            const double t = bary[k][d] - bary[l][d];
            sq += t * t;
        }
        return 1.0 / std::sqrt(sq);
    }

    Marginal marginal() const { return Marginal(rho); }
    std::size_t block_count() const { return static_cast<std::size_t>(n_electrons - 1); }
};

struct DiscretizeOptions {
    // Relative mass cutoff: atoms below this fraction of the largest mass are
    // dropped.  The default is calibrated on the catalogued reference grids.
    double truncation_rel = 1.75e-3;
    double beta = 1.0;
    bool unit_mass = true;
    std::size_t dense_cost_limit = 8192;  // assemble dense C only up to this size
};

// Quadrature masses per cell, truncation, renormalization, cost assembly.
// A non-empty admissibility mask (one flag per mesh cell) restricts the
// surviving atoms further; the multigrid driver uses it to keep refined
// supports nested inside the coarse ones.
DiscreteSystem discretize(const Density& density, const Mesh& mesh,
                          const DiscretizeOptions& opts = {},
                          const std::vector<char>& admissible = {});

// Flat key-value manifest (schema_version, dimensions, masses/barycenter files
// are written separately by the CLI).
void write_system_manifest(std::ostream& os, const DiscreteSystem& sys, std::size_t k_pre,
                           MeshStyle style);

// FNV-1a checksum over the %.17g rendering of the cost entries (row-major).
std::uint64_t cost_checksum(const DiscreteSystem& sys);

}  // namespace mbot
