#include "mbot/multigrid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "mbot/mmot.hpp"

namespace mbot {

double LevelConfig::tol(std::size_t level, std::size_t k_level, std::size_t k0, int dim) const {
    if (!explicit_tols.empty()) {
        if (level >= explicit_tols.size()) {
            throw DomainError("level config: no tolerance for level " + std::to_string(level));
        }
        return explicit_tols[level];
    }
    const double ratio = std::log2(static_cast<double>(k_level) / static_cast<double>(k0));
    return tol0 * std::pow(std::sqrt(std::pow(2.0, dim)), ratio);
}

// Fine atom → coarse atom through the mesh parent links; −1 when the parent
// cell did not survive the coarse truncation.
std::vector<std::int64_t> parent_atoms(const DiscreteSystem& coarse_sys, const Mesh& fine_mesh,
                                       const DiscreteSystem& fine_sys) {
    std::vector<std::int64_t> coarse_atom_of_cell;
    std::size_t max_cell = 0;
    for (std::size_t c : coarse_sys.cell_index) max_cell = std::max(max_cell, c);
    coarse_atom_of_cell.assign(max_cell + 1, -1);
    for (std::size_t a = 0; a < coarse_sys.cell_index.size(); ++a) {
        coarse_atom_of_cell[coarse_sys.cell_index[a]] = static_cast<std::int64_t>(a);
    }
    std::vector<std::int64_t> parent(fine_sys.size(), -1);
    for (std::size_t a = 0; a < fine_sys.size(); ++a) {
        const std::size_t cell = fine_sys.cell_index[a];
        const std::int64_t parent_cell = fine_mesh.parent[cell];
        if (parent_cell < 0) throw DomainError("prolongate: fine mesh has no parent links");
        if (parent_cell < static_cast<std::int64_t>(coarse_atom_of_cell.size())) {
            parent[a] = coarse_atom_of_cell[static_cast<std::size_t>(parent_cell)];
        }
    }
    return parent;
}

std::vector<Plan> prolongate(std::span<const Plan> coarse, const DiscreteSystem& coarse_sys,
                             const Mesh& fine_mesh, const DiscreteSystem& fine_sys,
                             double* dropped_mass) {
    const std::vector<std::int64_t> parent = parent_atoms(coarse_sys, fine_mesh, fine_sys);
    std::vector<std::vector<std::uint32_t>> children(coarse_sys.size());
    for (std::size_t a = 0; a < fine_sys.size(); ++a) {
        if (parent[a] < 0) {
            throw DomainError("prolongate: surviving fine atom under a truncated coarse parent");
        }
        children[static_cast<std::size_t>(parent[a])].push_back(static_cast<std::uint32_t>(a));
    }

    double dropped = 0.0;
    std::vector<Plan> fine;
    fine.reserve(coarse.size());
    const Marginal fine_marginal = fine_sys.marginal();
    for (const Plan& yc : coarse) {
        if (yc.rows() != coarse_sys.size() || yc.cols() != coarse_sys.size()) {
            throw ShapeError("prolongate: coarse plan does not match coarse system");
        }
        // Collect prolongated entries as (row, col, value) triplets.
        std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> entries;
        for_each_entry(yc.data, [&](std::size_t kp, std::size_t lp, double v) {
            if (v == 0.0) return;
            const auto& rows = children[kp];
            const auto& cols = children[lp];
            const std::size_t pairs = rows.size() * cols.size();
            if (pairs == 0) {
                dropped += v;
                return;
            }
            const double share = v / static_cast<double>(pairs);
            for (std::uint32_t r : rows) {
                for (std::uint32_t c : cols) entries.emplace_back(r, c, share);
            }
        });
        std::sort(entries.begin(), entries.end());
        if (yc.is_dense()) {
            DenseMatrix out(fine_sys.size(), fine_sys.size(), 0.0);
            for (const auto& [r, c, v] : entries) out.at(r, c) = v;
            fine.emplace_back(MatrixStorage(std::move(out)), fine_marginal, fine_marginal);
        } else {
            SparseBuilder builder(fine_sys.size(), fine_sys.size());
            for (const auto& [r, c, v] : entries) builder.push(r, c, v);
            fine.emplace_back(MatrixStorage(builder.take()), fine_marginal, fine_marginal);
        }
    }
    if (dropped_mass != nullptr) *dropped_mass = dropped;
    return fine;
}

CmgResult run_cmg(const Density& density, std::size_t k0, MeshStyle style,
                  const LevelConfig& levels, const MethodConfig& cfg_accurate,
                  const MethodConfig& cfg_cheap, const DiscretizeOptions& disc) {
    if (levels.levels < 1) throw DomainError("run_cmg: need at least one level");
    CmgResult result;
    for (std::size_t level = 0; level < levels.levels; ++level) {
        Mesh mesh = level == 0 ? build_mesh(density, k0, style)
                               : refine(density, result.meshes.back());
        // Children of truncated coarse atoms stay truncated, so prolongated
        // plans cover every surviving fine atom.
        std::vector<char> admissible;
        if (level > 0) {
            const DiscreteSystem& prev_sys = result.systems.back();
            std::vector<char> coarse_kept(result.meshes.back().size(), 0);
            for (std::size_t c : prev_sys.cell_index) coarse_kept[c] = 1;
            admissible.resize(mesh.size());
            for (std::size_t c = 0; c < mesh.size(); ++c) {
                admissible[c] = coarse_kept[static_cast<std::size_t>(mesh.parent[c])];
            }
        }
        DiscreteSystem sys = discretize(density, mesh, disc, admissible);
        const MmotOracle oracle(sys);
        MethodConfig cfg = level == 0 ? cfg_accurate : cfg_cheap;
        cfg.kind = level == 0 ? levels.accurate_solver : levels.cheap_solver;
        cfg.tol = levels.tol(level, mesh.size(), k0, density.dim);
        cfg.delta_weights = oracle.delta_weights();

        std::vector<Plan> init;
        if (level > 0) {
            const RunRecord& prev = result.levels.back().record;
            const DiscreteSystem& prev_sys = result.systems.back();
            double dropped = 0.0;
            init = prolongate(prev.plans, prev_sys, mesh, sys, &dropped);
            result.dropped_prolongation_mass += dropped;
            // Dual potentials carry over (children inherit their parent's
            // value), so the warm starts and the adaptive parameter rule pick
            // up the coarse potential scale instead of a cold bootstrap.
            const std::vector<std::int64_t> parent = parent_atoms(prev_sys, mesh, sys);
            cfg.initial_dual_v.clear();
            for (std::size_t b = 0; b < prev.dual_v.size(); ++b) {
                std::vector<double> dv(sys.size());
                for (std::size_t a = 0; a < sys.size(); ++a) {
                    dv[a] = prev.dual_v[b][static_cast<std::size_t>(parent[a])];
                }
                cfg.initial_dual_v.push_back(std::move(dv));
            }
        }
        RunRecord record;
        try {
            record = run_method(oracle, oracle.marginals(), cfg,
                                level == 0 ? nullptr : &init);
        } catch (const InfeasibleSupportError& e) {
            throw InfeasibleSupportError("cmg level " + std::to_string(level) + ": " + e.what());
        } catch (const Error& e) {
            throw NumericalError("cmg level " + std::to_string(level) + ": " + e.what());
        }

        LevelOutput out;
        out.level = level;
        out.k_pre = mesh.size();
        out.k_trunc = sys.size();
        out.objective = record.history.empty() ? oracle.objective(record.plans)
                                               : record.history.back().objective;
        out.tol_used = cfg.tol;
        out.record = std::move(record);
        result.levels.push_back(std::move(out));
        result.meshes.push_back(std::move(mesh));
        result.systems.push_back(std::move(sys));
    }
    return result;
}

void write_cmg_summary(std::ostream& os, const CmgResult& result) {
    os << "level,K,K_trunc,obj\n";
    char buf[96];
    for (const LevelOutput& lvl : result.levels) {
        std::snprintf(buf, sizeof(buf), "%zu,%zu,%zu,%.6f\n", lvl.level, lvl.k_pre, lvl.k_trunc,
                      lvl.objective);
        os << buf;
    }
}

}  // namespace mbot
