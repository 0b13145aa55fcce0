#include "mbot/mesh.hpp"

#include <cmath>

namespace mbot {

const char* mesh_style_name(MeshStyle s) {
    return s == MeshStyle::Equimass ? "equimass" : "equisize";
}

namespace {

void finish_cell(const Density& density, Mesh& mesh, const Cell& cell, std::int64_t parent) {
    mesh.cells.push_back(cell);
    mesh.mass.push_back(density.box_mass(cell.lo, cell.hi));
    std::array<double, 3> c{0, 0, 0};
    for (int d = 0; d < density.dim; ++d) c[d] = 0.5 * (cell.lo[d] + cell.hi[d]);
    mesh.center.push_back(c);
    mesh.parent.push_back(parent);
}

}  // namespace

Mesh build_mesh(const Density& density, std::size_t k, MeshStyle style) {
    if (k < 2) throw DomainError("build_mesh: need at least 2 cells");
    Mesh mesh;
    mesh.dim = density.dim;
    mesh.style = style;
    if (style == MeshStyle::Equimass) {
        if (density.dim != 1) {
            throw DomainError("build_mesh: equimass discretization is one-dimensional only");
        }
        const double total = density.total_mass();
        std::vector<double> edges(k + 1);
        edges.front() = density.lo[0];
        edges.back() = density.hi[0];
        for (std::size_t i = 1; i < k; ++i) {
            edges[i] = density.quantile(total * static_cast<double>(i) / static_cast<double>(k));
        }
        for (std::size_t i = 0; i < k; ++i) {
            Cell cell;
            cell.lo = {edges[i], 0, 0};
            cell.hi = {edges[i + 1], 0, 0};
            finish_cell(density, mesh, cell, -1);
        }
        return mesh;
    }
    // Equisize: per-axis count from the d-th root of K.
    const int dim = density.dim;
    const auto per_axis =
        static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(k), 1.0 / dim)));
    std::size_t check = 1;
    for (int d = 0; d < dim; ++d) check *= per_axis;
    if (check != k) {
        throw DomainError("build_mesh: equisize K=" + std::to_string(k) + " is not a " +
                          std::to_string(dim) + "-th power of a per-axis count");
    }
    std::array<double, 3> h{0, 0, 0};
    for (int d = 0; d < dim; ++d) {
        h[d] = (density.hi[d] - density.lo[d]) / static_cast<double>(per_axis);
    }
    std::array<std::size_t, 3> idx{0, 0, 0};
    for (std::size_t flat = 0; flat < k; ++flat) {
        std::size_t rem = flat;
        for (int d = dim - 1; d >= 0; --d) {
            idx[d] = rem % per_axis;
            rem /= per_axis;
        }
        Cell cell;
        for (int d = 0; d < dim; ++d) {
            cell.lo[d] = density.lo[d] + h[d] * static_cast<double>(idx[d]);
            cell.hi[d] = density.lo[d] + h[d] * static_cast<double>(idx[d] + 1);
        }
        finish_cell(density, mesh, cell, -1);
    }
    return mesh;
}

Mesh refine(const Density& density, const Mesh& coarse) {
    Mesh fine;
    fine.dim = coarse.dim;
    fine.style = coarse.style;
    fine.level = coarse.level + 1;
    if (coarse.style == MeshStyle::Equimass) {
        for (std::size_t i = 0; i < coarse.size(); ++i) {
            const Cell& cell = coarse.cells[i];
            const double lo_mass = density.cdf(cell.lo[0]);
            const double hi_mass = density.cdf(cell.hi[0]);
            const double mid = density.quantile(0.5 * (lo_mass + hi_mass));
            Cell left = cell, right = cell;
            left.hi[0] = mid;
            right.lo[0] = mid;
            finish_cell(density, fine, left, static_cast<std::int64_t>(i));
            finish_cell(density, fine, right, static_cast<std::int64_t>(i));
        }
        return fine;
    }
    const int dim = coarse.dim;
    const int children = 1 << dim;
    for (std::size_t i = 0; i < coarse.size(); ++i) {
        const Cell& cell = coarse.cells[i];
        for (int c = 0; c < children; ++c) {
            Cell child;
            for (int d = 0; d < dim; ++d) {
                const double mid = 0.5 * (cell.lo[d] + cell.hi[d]);
                if ((c >> d) & 1) {
                    child.lo[d] = mid;
                    child.hi[d] = cell.hi[d];
                } else {
                    child.lo[d] = cell.lo[d];
                    child.hi[d] = mid;
                }
            }
            finish_cell(density, fine, child, static_cast<std::int64_t>(i));
        }
    }
    return fine;
}

}  // namespace mbot
