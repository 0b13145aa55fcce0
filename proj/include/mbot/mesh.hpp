#pragma once

#include "mbot/density.hpp"

namespace mbot {

enum class MeshStyle { Equimass, Equisize };

const char* mesh_style_name(MeshStyle s);

struct Cell {
    std::array<double, 3> lo{0, 0, 0};
    std::array<double, 3> hi{0, 0, 0};
};

struct Mesh {
    int dim = 1;
    MeshStyle style = MeshStyle::Equisize;
    int level = 0;
    std::vector<Cell> cells;
    std::vector<double> mass;                        // ∫_cell ρ, unnormalized
    std::vector<std::array<double, 3>> center;       // geometric barycenters
    std::vector<std::int64_t> parent;                // −1 on the root level

    std::size_t size() const { return cells.size(); }
};

// equimass (1-D): boundaries at density quantiles, all cells of equal mass;
// equisize: uniform grid (K must be a d-th power of a per-axis count).
Mesh build_mesh(const Density& density, std::size_t k, MeshStyle style);

// 1-D equimass: split every cell at its mass median; equisize: 2^d children.
Mesh refine(const Density& density, const Mesh& mesh);

}  // namespace mbot
