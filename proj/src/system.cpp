#include "mbot/system.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace mbot {

DiscreteSystem discretize(const Density& density, const Mesh& mesh,
                          const DiscretizeOptions& opts, const std::vector<char>& admissible) {
    if (mesh.size() == 0) throw DomainError("discretize: empty mesh");
    if (!admissible.empty() && admissible.size() != mesh.size()) {
        throw ShapeError("discretize: admissibility mask does not match the mesh");
    }
    DiscreteSystem sys;
    sys.dim = density.dim;
    sys.n_electrons = density.n_electrons;
    sys.beta = opts.beta;
    sys.unit_mass = opts.unit_mass;

    double max_mass = 0.0;
    for (double m : mesh.mass) max_mass = std::max(max_mass, m);
    if (!(max_mass > 0.0)) throw DomainError("discretize: density carries no mass on the mesh");
    const double cut = opts.truncation_rel * max_mass;

    double kept_mass = 0.0;
    for (std::size_t k = 0; k < mesh.size(); ++k) {
        if (!admissible.empty() && !admissible[k]) continue;
        if (mesh.mass[k] >= cut && mesh.mass[k] > 0.0) {
            sys.rho.push_back(mesh.mass[k]);
            sys.bary.push_back(mesh.center[k]);
            sys.cell_index.push_back(k);
            kept_mass += mesh.mass[k];
        }
    }
    if (sys.rho.empty()) throw DomainError("discretize: truncation removed every atom");

    const double target = sys.unit_mass ? 1.0 : static_cast<double>(sys.n_electrons);
    for (double& m : sys.rho) m *= target / kept_mass;

    if (sys.size() <= opts.dense_cost_limit) {
        const std::size_t n = sys.size();
        sys.cost_dense = DenseMatrix(n, n, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            for (std::size_t l = k + 1; l < n; ++l) {
                double sq = 0.0;
                for (int d = 0; d < sys.dim; ++d) {
                    const double t = sys.bary[k][d] - sys.bary[l][d];
                    sq += t * t;
                }
                const double c = 1.0 / std::sqrt(sq);
                sys.cost_dense.at(k, l) = c;
                sys.cost_dense.at(l, k) = c;
            }
        }
    }
    return sys;
}

void write_system_manifest(std::ostream& os, const DiscreteSystem& sys, std::size_t k_pre,
                           MeshStyle style) {
    os << "schema_version 1\n";
    os << "kind discrete_system\n";
    os << "dim " << sys.dim << "\n";
    os << "n_electrons " << sys.n_electrons << "\n";
    os << "style " << mesh_style_name(style) << "\n";
    os << "K " << k_pre << "\n";
    os << "K_trunc " << sys.size() << "\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "beta %.17g\n", sys.beta);
    os << buf;
    os << "normalization " << (sys.unit_mass ? "unit" : "electron_count") << "\n";
    std::snprintf(buf, sizeof(buf), "cost_checksum %016llx\n",
                  static_cast<unsigned long long>(cost_checksum(sys)));
    os << buf;
}

std::uint64_t cost_checksum(const DiscreteSystem& sys) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[40];
    for (std::size_t k = 0; k < sys.size(); ++k) {
        for (std::size_t l = 0; l < sys.size(); ++l) {
            const int len = std::snprintf(buf, sizeof(buf), "%.17g,", sys.cost(k, l));
            for (int i = 0; i < len; ++i) {
                h ^= static_cast<unsigned char>(buf[i]);
                h *= 0x100000001b3ull;
            }
        }
    }
    return h;
}

}  // namespace mbot
