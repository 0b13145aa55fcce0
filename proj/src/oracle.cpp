#include "mbot/oracle.hpp"

#include "mbot/transport_lp.hpp"

namespace mbot {

double ObjectiveOracle::gradient_entry(std::size_t i, std::span<const Plan> x, std::size_t j,
                                       std::size_t k) const {
    return block_gradient(i, x).at(j, k);
}

ResidualReport residual(std::span<const Plan> x, const ObjectiveOracle& oracle,
                        double feas_tol) {
    if (x.size() != oracle.block_count()) throw ShapeError("residual: block count mismatch");
    ResidualReport report;
    report.per_block.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double viol = marginal_violation(x[i]);
        if (viol > feas_tol) {
            throw DomainError("residual: block " + std::to_string(i) +
                              " infeasible (violation " + std::to_string(viol) + ")");
        }
        const DenseMatrix grad = oracle.block_gradient(i, x);
        double inner = 0.0;
        for_each_entry(x[i].data,
                       [&](std::size_t j, std::size_t k, double v) { inner += grad.at(j, k) * v; });
        const LpResult lp = transport_lp(grad, x[i].row_target, x[i].col_target);
        report.per_block.push_back(inner - lp.value);
        report.total += report.per_block.back();
    }
    return report;
}

}  // namespace mbot
