#pragma once

#include "mbot/methods.hpp"
#include "mbot/system.hpp"

namespace mbot {

struct LevelConfig {
    std::size_t levels = 1;
    double tol0 = 1e-3;
    // tol_ℓ = tol0 · (√(2^d))^{log2(K_ℓ/K_0)} unless an explicit list is given.
    std::vector<double> explicit_tols;
    MethodKind accurate_solver = MethodKind::Klalm;
    MethodKind cheap_solver = MethodKind::SKlalm;

    double tol(std::size_t level, std::size_t k_level, std::size_t k0, int dim) const;
};

struct LevelOutput {
    std::size_t level = 0;
    std::size_t k_pre = 0;     // cells before truncation
    std::size_t k_trunc = 0;   // surviving atoms
    double objective = 0.0;
    double tol_used = 0.0;
    RunRecord record;
};

struct CmgResult {
    std::vector<LevelOutput> levels;
    std::vector<Mesh> meshes;
    std::vector<DiscreteSystem> systems;
    double dropped_prolongation_mass = 0.0;  // parents whose children all truncated
};

// Spread each coarse entry uniformly over its surviving child pairs.  The
// result keeps the coarse plan's mass exactly; entries whose children were all
// truncated are dropped and accounted (the next Sinkhorn sweep re-projects).
std::vector<Plan> prolongate(std::span<const Plan> coarse, const DiscreteSystem& coarse_sys,
                             const Mesh& fine_mesh, const DiscreteSystem& fine_sys,
                             double* dropped_mass = nullptr);

// One-way coarse-to-fine chain: accurate solver on level 0 from a random
// start, then refine → prolongate → cheap solver per level.  The prolongated
// plan doubles as the warm-sampling previous iterate.
CmgResult run_cmg(const Density& density, std::size_t k0, MeshStyle style,
                  const LevelConfig& levels, const MethodConfig& cfg_accurate,
                  const MethodConfig& cfg_cheap, const DiscretizeOptions& disc = {});

// Summary table: level, K, K_trunc, obj.
void write_cmg_summary(std::ostream& os, const CmgResult& result);

}  // namespace mbot
